#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <sstream>

#include "mmss/trainer.hpp"

using namespace mmss;
namespace fs = std::filesystem;

namespace {

SynthSpec desk_spec(std::uint64_t seed = 7) {
    SynthSpec spec;
    spec.n_products = 4;
    spec.reviews_per_product = 8;
    spec.d_t = 16;
    spec.d_roi = 16;
    spec.text_rows = 4;
    spec.image_rows = 3;
    spec.seed = seed;
    spec.s_noise = 0.1;
    return spec;
}

TrainConfig desk_config(const Dataset& ds) {
    TrainConfig config;
    config.dims.d_t = ds.d_t;
    config.dims.d_v = ds.d_t;
    config.dims.d_f = 16;
    config.dims.d_g = 16;
    config.epochs = 3;
    config.seed = 11;
    return config;
}

fs::path temp_dir(const char* tag) {
    const fs::path p = fs::temp_directory_path() / (std::string("mmss_trainer_") + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("adam leaves parameters alone under zero gradients") {
    const Value p = Value::leaf(Tensor({1, 3}, {1.0, -2.0, 0.5}), "p");
    AdamOptimizer adam({p}, 0.1);
    p.zero_grad();
    adam.step();
    CHECK(p.tensor()[0] == 1.0);
    CHECK(p.tensor()[1] == -2.0);
    CHECK(p.tensor()[2] == 0.5);
}

TEST_CASE("adam first step moves by about lr against the gradient sign") {
    const Value p = Value::leaf(Tensor::scalar(2.0), "p");
    AdamOptimizer adam({p}, 0.05);
    p.grad()[0] = 0.37;
    adam.step();
    CHECK(p.tensor()[0] == doctest::Approx(2.0 - 0.05).epsilon(1e-6));
    // Gradient is zeroed afterwards.
    CHECK(p.grad()[0] == 0.0);
}

TEST_CASE("adam reaches the minimum of a convex quadratic") {
    // f(x) = (x - 3)^2 has its minimum at 3.
    const Value x = Value::leaf(Tensor::scalar(-1.0), "x");
    AdamOptimizer adam({x}, 0.05);
    for (int i = 0; i < 400; ++i) {
        const Value diff = add_const(x, -3.0);
        const Value loss = mul(diff, diff);
        backward(loss);
        adam.step();
    }
    CHECK(std::fabs(x.tensor()[0] - 3.0) < 1e-3);
}

TEST_CASE("adam aborts on a non-finite gradient naming the parameter") {
    const Value p = Value::leaf(Tensor::scalar(1.0), "fusion.w");
    AdamOptimizer adam({p}, 0.1);
    p.grad()[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_WITH_AS(adam.step(), doctest::Contains("fusion.w"), Error);
}

TEST_CASE("split respects fractions and falls back on tiny datasets") {
    const SplitIndices s = split_products(4, 0.5, 0.25);
    CHECK(s.train == std::vector<std::size_t>{0, 1});
    CHECK(s.dev == std::vector<std::size_t>{2});
    CHECK(s.test == std::vector<std::size_t>{3});

    const SplitIndices one = split_products(1, 0.5, 0.25);
    CHECK(one.train == std::vector<std::size_t>{0});
    CHECK(one.dev == one.train);
    CHECK(one.test == one.train);
}

TEST_CASE("disable_ssp reduces every step to the ranking loss") {
    const Dataset ds = make_synthetic(desk_spec());
    TrainConfig config = desk_config(ds);
    config.disable_ssp = true;
    config.epochs = 2;
    Trainer trainer(config, ds);
    std::vector<StepRecord> log;
    trainer.run_epoch(&log);
    trainer.run_epoch(&log);
    REQUIRE(!log.empty());
    for (const StepRecord& r : log) {
        CHECK(r.loss.total == r.loss.l_tar);
        CHECK(r.loss.l_sub_combined == 0.0);
    }
    CHECK(trainer.label_store().size() == 0);
}

TEST_CASE("epoch one pseudo-labels equal the gold label") {
    const Dataset ds = make_synthetic(desk_spec());
    const TrainConfig config = desk_config(ds);
    Trainer trainer(config, ds);
    trainer.run_epoch();

    std::map<std::string, int> gold;
    for (const auto& prod : ds.products)
        for (const auto& rev : prod.reviews) gold[rev.review_id] = rev.label;

    const auto& history = trainer.label_store().history();
    REQUIRE(!history.empty());
    for (const auto& row : history) {
        CHECK(row.epoch == 1);
        CHECK(row.value == static_cast<double>(gold.at(row.review_id)));
    }
    // One row per (train review, subtask).
    CHECK(history.size() == 2 * 8 * kNumSubtasks);
}

TEST_CASE("identical seeds produce identical step logs") {
    const Dataset ds = make_synthetic(desk_spec());
    TrainConfig config = desk_config(ds);
    config.epochs = 2;

    std::ostringstream log_a, log_b;
    Trainer a(config, ds);
    a.run(&log_a);
    Trainer b(config, ds);
    b.run(&log_b);
    CHECK(log_a.str() == log_b.str());
    CHECK(!log_a.str().empty());
}

TEST_CASE("ablating a subtask removes exactly its loss term") {
    const Dataset ds = make_synthetic(desk_spec());
    TrainConfig config = desk_config(ds);
    config.ablate = {InteractionKind::RtRv};
    Trainer trainer(config, ds);
    std::vector<StepRecord> log;
    trainer.run_epoch(&log);
    for (const StepRecord& r : log) {
        CHECK(r.loss.l_sub_per_task[static_cast<int>(InteractionKind::RtRv)] == 0.0);
        CHECK(r.loss.total == doctest::Approx(r.loss.l_tar + r.loss.l_sub_combined));
    }
    // Ablation affects training only: forward scoring still works and the
    // ablated head exists with its log-variance parameter.
    const auto params = trainer.parameters();
    bool found = false;
    for (const Value& p : params)
        if (p.name() == "log_var.rtrv") found = true;
    CHECK(found);
}

TEST_CASE("ablation does not change initial scores") {
    const Dataset ds = make_synthetic(desk_spec());
    TrainConfig plain_cfg = desk_config(ds);
    TrainConfig ablated_cfg = desk_config(ds);
    ablated_cfg.ablate = {InteractionKind::PtRv, InteractionKind::RtRv};

    const Trainer plain(plain_cfg, ds);
    const Trainer ablated(ablated_cfg, ds);
    for (const auto& prod : ds.products)
        for (const auto& rev : prod.reviews)
            CHECK(plain.score_review(prod, rev) == ablated.score_review(prod, rev));
}

TEST_CASE("direct-concat baseline trains on ranking loss alone") {
    const Dataset ds = make_synthetic(desk_spec());
    TrainConfig config = desk_config(ds);
    config.direct_concat = true;
    Trainer trainer(config, ds);
    std::vector<StepRecord> log;
    trainer.run_epoch(&log);
    for (const StepRecord& r : log) CHECK(r.loss.total == r.loss.l_tar);
    CHECK(trainer.label_store().size() == 0);
    // Scores come from the pooled-concat MLP.
    const double y = trainer.score_review(ds.products[0], ds.products[0].reviews[0]);
    CHECK(std::isfinite(y));
}

TEST_CASE("checkpoint round-trip continues bit-identically") {
    const Dataset ds = make_synthetic(desk_spec());
    TrainConfig config = desk_config(ds);
    config.epochs = 5;

    Trainer full(config, ds);
    Trainer half(config, ds);
    full.run_epoch();
    full.run_epoch();
    half.run_epoch();
    half.run_epoch();

    const fs::path dir = temp_dir("ckpt");
    const std::string path = (dir / "mid.mmck").string();
    half.save_checkpoint(path);
    Trainer resumed = Trainer::load_checkpoint(path, ds);
    CHECK(resumed.epochs_done() == 2);

    std::vector<StepRecord> log_full, log_resumed;
    full.run_epoch(&log_full);
    resumed.run_epoch(&log_resumed);
    REQUIRE(log_full.size() == log_resumed.size());
    for (std::size_t i = 0; i < log_full.size(); ++i)
        CHECK(log_full[i].to_json_line() == log_resumed[i].to_json_line());
}

TEST_CASE("checkpoint rejects a dataset with different dims") {
    const Dataset ds = make_synthetic(desk_spec());
    const TrainConfig config = desk_config(ds);
    Trainer trainer(config, ds);
    trainer.run_epoch();
    const fs::path dir = temp_dir("ckpt_dims");
    const std::string path = (dir / "t.mmck").string();
    trainer.save_checkpoint(path);

    SynthSpec other = desk_spec();
    other.d_roi = 8;
    const Dataset wrong = make_synthetic(other);
    CHECK_THROWS_AS(Trainer::load_checkpoint(path, wrong), Error);
}

TEST_CASE("run_training writes artifacts and reports over seeds") {
    const Dataset ds = make_synthetic(desk_spec());
    TrainConfig config = desk_config(ds);
    config.epochs = 2;
    config.seeds = 2;
    const fs::path dir = temp_dir("run");

    const RunResult result = run_training(config, ds, dir.string());
    CHECK(result.per_seed.size() == 2);
    CHECK(result.seed_values == std::vector<std::uint64_t>{11, 12});
    CHECK(fs::exists(dir / "checkpoint_seed11.mmck"));
    CHECK(fs::exists(dir / "checkpoint_seed12.mmck"));
    CHECK(fs::exists(dir / "train_log_seed11.jsonl"));
    CHECK(fs::exists(dir / "report.json"));
    CHECK(result.mean_test_report.map_score ==
          doctest::Approx((result.per_seed[0].map_score + result.per_seed[1].map_score) / 2.0));

    // Labels can be read back without the dataset.
    const auto rows = read_checkpoint_labels((dir / "checkpoint_seed11.mmck").string());
    CHECK(!rows.empty());
}

TEST_CASE("config json round-trips and rejects bad values") {
    TrainConfig config;
    config.epochs = 17;
    config.ablate = {InteractionKind::PvRt};
    config.ssp.alpha1 = 0.5;
    const TrainConfig back = TrainConfig::from_json_text(config.to_json());
    CHECK(back.epochs == 17);
    CHECK(back.ablate.count(InteractionKind::PvRt) == 1);
    CHECK(back.ssp.alpha1 == 0.5);
    CHECK(back.hash() == config.hash());

    TrainConfig bad;
    bad.epochs = 0;
    CHECK_THROWS_AS(bad.validate(), Error);
    TrainConfig bad2;
    bad2.batch_size = 1;
    CHECK_THROWS_AS(bad2.validate(), Error);

    TrainConfig overrides;
    overrides.set("epochs", "9");
    overrides.set("lr", "0.01");
    overrides.set("ablate", "rtrv");
    CHECK(overrides.epochs == 9);
    CHECK(overrides.learning_rate == 0.01);
    CHECK(overrides.ablate.count(InteractionKind::RtRv) == 1);
    CHECK_THROWS_AS(overrides.set("nonsense", "1"), Error);
    CHECK_THROWS_AS(overrides.set("epochs", "soon"), Error);
}
