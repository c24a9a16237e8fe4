#include <doctest.h>

#include <cmath>

#include "mmss/autodiff.hpp"
#include "mmss/rng.hpp"
#include "mmss/ssplabel.hpp"

using namespace mmss;

namespace {

Tensor vec(std::initializer_list<double> values) {
    return Tensor({1, values.size()}, std::vector<double>(values));
}

}  // namespace

TEST_CASE("anchor of a single sample is that sample") {
    AnchorAccumulator acc;
    const Tensor f = vec({0.4, -1.2, 3.0});
    acc.accumulate(2.0, f);
    const AnchorEntry e = acc.finalize(1e-6);
    for (std::size_t i = 0; i < 3; ++i) CHECK(e.anchor[i] == doctest::Approx(f[i]).epsilon(1e-15));
    // Zero variance floors at lambda_reg.
    for (double v : e.diag_var) CHECK(v == 1e-6);
    CHECK(e.scale == 3.0);
}

TEST_CASE("equal labels reduce the anchor to the unweighted mean") {
    AnchorAccumulator acc;
    acc.accumulate(3.0, vec({1.0, 5.0}));
    acc.accumulate(3.0, vec({3.0, -1.0}));
    const AnchorEntry e = acc.finalize(1e-6);
    CHECK(e.anchor[0] == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(e.anchor[1] == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("three samples match the hand-computed sigmoid weighting") {
    AnchorAccumulator acc;
    acc.accumulate(0.0, vec({1.0}));
    acc.accumulate(2.0, vec({2.0}));
    acc.accumulate(4.0, vec({3.0}));
    const double w0 = 1.0 / (1.0 + std::exp(-0.0));
    const double w2 = 1.0 / (1.0 + std::exp(-2.0));
    const double w4 = 1.0 / (1.0 + std::exp(-4.0));
    const double expect = (w0 * 1.0 + w2 * 2.0 + w4 * 3.0) / (w0 + w2 + w4);
    const AnchorEntry e = acc.finalize(1e-6);
    CHECK(e.anchor[0] == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("duplicating the dataset leaves anchor and variance unchanged") {
    Rng rng(31);
    AnchorAccumulator once, twice;
    std::vector<Tensor> samples;
    std::vector<double> labels;
    for (int i = 0; i < 6; ++i) {
        Tensor f({1, 4});
        for (std::size_t j = 0; j < 4; ++j) f[j] = rng.uniform(-2, 2);
        samples.push_back(f);
        labels.push_back(static_cast<double>(i % 5));
    }
    for (std::size_t i = 0; i < samples.size(); ++i) once.accumulate(labels[i], samples[i]);
    for (int rep = 0; rep < 2; ++rep)
        for (std::size_t i = 0; i < samples.size(); ++i) twice.accumulate(labels[i], samples[i]);

    const AnchorEntry a = once.finalize(1e-6);
    const AnchorEntry b = twice.finalize(1e-6);
    for (std::size_t j = 0; j < 4; ++j) {
        CHECK(a.anchor[j] == doctest::Approx(b.anchor[j]).epsilon(1e-12));
        CHECK(a.diag_var[j] == doctest::Approx(b.diag_var[j]).epsilon(1e-12));
    }
}

TEST_CASE("finalize matches a two-pass mean/variance oracle") {
    Rng rng(77);
    std::vector<Tensor> samples;
    std::vector<double> labels;
    AnchorAccumulator acc;
    for (int i = 0; i < 10; ++i) {
        Tensor f({1, 3});
        for (std::size_t j = 0; j < 3; ++j) f[j] = rng.uniform(-3, 3);
        const double y = rng.uniform(0, 4);
        samples.push_back(f);
        labels.push_back(y);
        acc.accumulate(y, f);
    }
    const AnchorEntry e = acc.finalize(1e-9);

    for (std::size_t j = 0; j < 3; ++j) {
        double wsum = 0, wfsum = 0;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const double w = 1.0 / (1.0 + std::exp(-labels[i]));
            wsum += w;
            wfsum += w * samples[i][j];
        }
        CHECK(e.anchor[j] == doctest::Approx(wfsum / wsum).epsilon(1e-10));

        double mean = 0;
        for (const auto& s : samples) mean += s[j];
        mean /= 10.0;
        double var = 0;
        for (const auto& s : samples) var += (s[j] - mean) * (s[j] - mean);
        var /= 10.0;
        CHECK(e.diag_var[j] == doctest::Approx(var).epsilon(1e-10));
    }
}

TEST_CASE("finalize without samples is a contract error") {
    AnchorAccumulator acc;
    CHECK_THROWS_AS(acc.finalize(1e-6), Error);
}

TEST_CASE("accumulate rejects dimension changes") {
    AnchorAccumulator acc;
    acc.accumulate(1.0, vec({1.0, 2.0}));
    CHECK_THROWS_AS(acc.accumulate(1.0, vec({1.0, 2.0, 3.0})), Error);
}

TEST_CASE("distance basics") {
    AnchorEntry e;
    e.anchor = {1.0, 1.0};
    e.diag_var = {1.0, 1.0};
    e.scale = 1.0;
    CHECK(mahalanobis(e, vec({1.0, 1.0})) == 0.0);

    // Unit variance, scale 1 reduces to Euclidean distance.
    CHECK(mahalanobis(e, vec({4.0, 5.0})) == doctest::Approx(5.0).epsilon(1e-14));

    // Hand example: residual (1, 2), var (1, 4), scale 2 -> sqrt(2)/sqrt(2) = 1.
    AnchorEntry h;
    h.anchor = {0.0, 0.0};
    h.diag_var = {1.0, 4.0};
    h.scale = 2.0;
    CHECK(mahalanobis(h, vec({1.0, 2.0})) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("distance is positive away from the anchor") {
    Rng rng(13);
    AnchorEntry e;
    e.anchor = {0.5, -0.5, 2.0};
    e.diag_var = {0.3, 1.2, 0.9};
    e.scale = 3.0;
    for (int i = 0; i < 50; ++i) {
        Tensor f({1, 3});
        for (std::size_t j = 0; j < 3; ++j) f[j] = rng.uniform(-3, 3);
        const double d = mahalanobis(e, f);
        CHECK(d >= 0.0);
        const bool at_anchor =
            f[0] == e.anchor[0] && f[1] == e.anchor[1] && f[2] == e.anchor[2];
        if (!at_anchor) CHECK(d > 0.0);
    }
}

TEST_CASE("anchor state guards unfinalized tasks") {
    AnchorState state;
    CHECK_THROWS_WITH_AS(state.distance(InteractionKind::PtRt, vec({1.0})),
                         doctest::Contains("not finalized"), Error);
    state.accumulator(InteractionKind::PtRt).accumulate(1.0, vec({1.0, 2.0}));
    state.finalize_epoch(1e-6);
    CHECK(state.finalized(InteractionKind::PtRt));
    CHECK(state.accumulator(InteractionKind::PtRt).count() == 0);
    CHECK(state.distance(InteractionKind::PtRt, vec({1.0, 2.0})) == 0.0);
}

TEST_CASE("raw pseudo-label identities") {
    SspConfig cfg;
    cfg.alpha1 = 1.0;
    cfg.alpha2 = 1.0;
    cfg.eps = 0.0;

    // Equal distances collapse to the gold label.
    CHECK(raw_pseudo_label(cfg, 3.0, 0.7, 0.7) == doctest::Approx(3.0).epsilon(1e-15));

    // Hand value: (4 + (2 - 1)) / 2 + (1 * 2 * 4) / (2 * 1) = 6.5.
    CHECK(raw_pseudo_label(cfg, 4.0, 1.0, 2.0) == doctest::Approx(6.5).epsilon(1e-15));

    // Zero label with zero distances: guarded by eps; exact zero with eps = 0
    // would divide 0/0, so use a tiny eps as configured by default.
    SspConfig guarded;
    CHECK(raw_pseudo_label(guarded, 0.0, 0.0, 0.0) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("raw pseudo-label is monotone in chi_s and clamps on request") {
    SspConfig cfg;
    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
        const double y_g = rng.uniform(0, 4);
        const double chi_g = rng.uniform(0, 3);
        const double a = rng.uniform(0, 5);
        const double b = rng.uniform(0, 5);
        const double lo = std::min(a, b), hi = std::max(a, b);
        CHECK(raw_pseudo_label(cfg, y_g, chi_g, lo) <= raw_pseudo_label(cfg, y_g, chi_g, hi) + 1e-12);
    }

    SspConfig clamped;
    clamped.clamp = true;
    CHECK(raw_pseudo_label(clamped, 4.0, 1.0, 2.0) == 4.0);
    CHECK(raw_pseudo_label(clamped, 0.0, 2.0, 0.0) >= 0.0);
}

TEST_CASE("ewma epoch 1 returns the gold label") {
    PseudoLabelStore store;
    CHECK(store.epoch() == 1);
    CHECK(store.update("r1", InteractionKind::PtRt, 99.0, 3.0) == 3.0);
    CHECK(store.get("r1", InteractionKind::PtRt).value() == 3.0);
}

TEST_CASE("ewma epoch 2 blends with beta = 2/3") {
    PseudoLabelStore store;
    store.update("r1", InteractionKind::PtRt, 0.0, 3.0);
    store.advance_epoch();
    CHECK(store.beta() == doctest::Approx(2.0 / 3.0));
    const double v = store.update("r1", InteractionKind::PtRt, 5.0, 3.0);
    CHECK(v == doctest::Approx(13.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("a review first seen after epoch 1 initializes from gold") {
    PseudoLabelStore store;
    store.update("r1", InteractionKind::PtRt, 0.0, 2.0);
    store.advance_epoch();
    CHECK(store.update("new", InteractionKind::PvRv, 123.0, 1.0) == 1.0);
}

TEST_CASE("ewma converges to a constant raw target") {
    PseudoLabelStore store;
    const double target = 4.0;
    const double y_g = 3.0;
    double v = store.update("r", InteractionKind::RtRv, target, y_g);
    for (int epoch = 2; epoch <= 15; ++epoch) {
        store.advance_epoch();
        v = store.update("r", InteractionKind::RtRv, target, y_g);
    }
    CHECK(std::fabs(v - target) < 1e-2);
    // Error after epoch i is |y_g - r| * 2 / (i (i + 1)).
    CHECK(std::fabs(v - target) == doctest::Approx(2.0 / (15.0 * 16.0)).epsilon(1e-9));
}

TEST_CASE("ewma output is a convex combination") {
    Rng rng(17);
    PseudoLabelStore store;
    store.update("r", InteractionKind::PtRv, 0.0, 2.0);
    for (int epoch = 2; epoch < 30; ++epoch) {
        store.advance_epoch();
        const double prev = store.get("r", InteractionKind::PtRv).value();
        const double raw = rng.uniform(-1, 5);
        const double next = store.update("r", InteractionKind::PtRv, raw, 2.0);
        CHECK(next >= std::min(prev, raw) - 1e-12);
        CHECK(next <= std::max(prev, raw) + 1e-12);
    }
}

TEST_CASE("history records one row per update") {
    PseudoLabelStore store;
    store.update("a", InteractionKind::PtRt, 0.0, 1.0);
    store.update("a", InteractionKind::PvRv, 0.0, 1.0);
    store.advance_epoch();
    store.update("a", InteractionKind::PtRt, 2.0, 1.0);
    REQUIRE(store.history().size() == 3);
    CHECK(store.history()[0].epoch == 1);
    CHECK(store.history()[2].epoch == 2);
    CHECK(store.history()[2].subtask == InteractionKind::PtRt);
}
