#include "mmss/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

namespace mmss {

AdamOptimizer::AdamOptimizer(std::vector<Value> params, double lr)
    : params_(std::move(params)), lr_(lr) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Value& p : params_) {
        m_.push_back(Tensor::zeros_like(p.tensor()));
        v_.push_back(Tensor::zeros_like(p.tensor()));
    }
}

void AdamOptimizer::step() {
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor& grad = params_[i].grad();
        if (!grad.all_finite()) {
            const std::string& name = params_[i].name();
            throw_contract("adam_step: non-finite gradient in parameter '" +
                           (name.empty() ? std::string("<unnamed>") : name) + "'");
        }
        Tensor& value = params_[i].mutable_tensor();
        Tensor& m = m_[i];
        Tensor& v = v_[i];
        for (std::size_t k = 0; k < value.size(); ++k) {
            const double g = grad[k];
            m[k] = beta1 * m[k] + (1.0 - beta1) * g;
            v[k] = beta2 * v[k] + (1.0 - beta2) * g * g;
            const double m_hat = m[k] / bc1;
            const double v_hat = v[k] / bc2;
            value[k] -= lr_ * m_hat / (std::sqrt(v_hat) + eps);
        }
        params_[i].zero_grad();
    }
}

void AdamOptimizer::restore(std::uint64_t t, std::vector<Tensor> m, std::vector<Tensor> v) {
    if (m.size() != params_.size() || v.size() != params_.size())
        throw_data("optimizer restore: moment count mismatch");
    t_ = t;
    m_ = std::move(m);
    v_ = std::move(v);
}

SplitIndices split_products(std::size_t n_products, double train_frac, double dev_frac) {
    if (n_products == 0) throw_contract("split_products: empty dataset");
    std::size_t n_train = static_cast<std::size_t>(std::llround(train_frac * n_products));
    n_train = std::clamp<std::size_t>(n_train, 1, n_products);
    std::size_t n_dev = static_cast<std::size_t>(std::llround(dev_frac * n_products));
    n_dev = std::min(n_dev, n_products - n_train);

    SplitIndices s;
    std::size_t at = 0;
    for (; at < n_train; ++at) s.train.push_back(at);
    for (; at < n_train + n_dev; ++at) s.dev.push_back(at);
    for (; at < n_products; ++at) s.test.push_back(at);
    if (s.dev.empty()) s.dev = s.train;
    if (s.test.empty()) s.test = s.dev;
    return s;
}

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::string StepRecord::to_json_line() const {
    std::string out = "{\"epoch\":" + std::to_string(epoch) + ",\"batch\":" + std::to_string(batch) +
                      ",\"product\":\"" + product_id + "\",\"l_tar\":" + fmt_double(loss.l_tar) +
                      ",\"l_sub\":[";
    for (std::size_t i = 0; i < kNumSubtasks; ++i) {
        if (i) out += ",";
        out += fmt_double(loss.l_sub_per_task[i]);
    }
    out += "],\"sigmas\":[";
    for (std::size_t i = 0; i < kNumSubtasks; ++i) {
        if (i) out += ",";
        out += fmt_double(loss.sigmas[i]);
    }
    out += "],\"total\":" + fmt_double(loss.total) + "}";
    return out;
}

Trainer::Trainer(TrainConfig config, const Dataset& data) : config_(std::move(config)), data_(&data) {
    config_.dims.d_roi = data.d_roi;
    if (config_.dims.d_t != data.d_t)
        throw_usage("config d_t (" + std::to_string(config_.dims.d_t) + ") does not match dataset d_t (" +
                    std::to_string(data.d_t) + ")");
    config_.validate();
    if (data.products.empty()) throw_data("training requires at least one product");

    split_ = split_products(data.products.size(), config_.train_frac, config_.dev_frac);
    if (config_.direct_concat) {
        direct_params_ = init_direct_concat(data.d_t, data.d_roi, config_.seed);
        adam_ = std::make_unique<AdamOptimizer>(direct_params_.all(), config_.learning_rate);
    } else {
        params_ = init_model(config_.dims, config_.seed);
        adam_ = std::make_unique<AdamOptimizer>(params_.all(), config_.learning_rate);
    }
}

bool Trainer::ssp_active() const {
    return !config_.disable_ssp && !config_.direct_concat && config_.ablate.size() < kNumSubtasks;
}

std::vector<Value> Trainer::parameters() const {
    return config_.direct_concat ? direct_params_.all() : params_.all();
}

EpochSummary Trainer::run_epoch(std::vector<StepRecord>* step_log) {
    const std::size_t epoch = epochs_done_ + 1;
    const bool use_ssp = ssp_active();
    const auto batches = batch_by_product(*data_, split_.train, config_.batch_size,
                                          Rng::mix(config_.seed, 0xE70C0 + epoch));

    EpochSummary summary;
    summary.epoch = epoch;
    std::size_t batch_idx = 0;
    for (const Batch& batch : batches) {
        const ProductRecord& prod = data_->products[batch.product_index];

        std::vector<ForwardOutput> outs;
        std::vector<Value> scores;
        std::vector<int> labels;
        std::vector<const ReviewRecord*> reviews;
        outs.reserve(batch.review_indices.size());
        for (std::size_t ri : batch.review_indices) {
            const ReviewRecord& rev = prod.reviews[ri];
            if (config_.direct_concat) {
                scores.push_back(direct_forward(direct_params_, prod, rev));
                outs.emplace_back();
            } else {
                FeatureBundle bundle = make_bundle(prod, rev);
                project_visual(params_, bundle);
                outs.push_back(forward(params_, bundle));
                scores.push_back(outs.back().y_hat_g);
            }
            labels.push_back(rev.label);
            reviews.push_back(&rev);
        }

        const Value l_tar = ranking_loss(scores, labels, config_.margin);
        LossBreakdown breakdown;
        breakdown.l_tar = l_tar.item();
        breakdown.sigmas.fill(1.0);
        Value total = l_tar;

        if (use_ssp) {
            std::array<std::vector<Value>, kNumSubtasks> preds;
            std::array<std::vector<double>, kNumSubtasks> targets;
            std::vector<double> golds;
            golds.reserve(reviews.size());

            for (std::size_t j = 0; j < reviews.size(); ++j) {
                const double y_g = reviews[j]->label;
                golds.push_back(y_g);
                double chi_g = 0.0;
                if (epoch > 1)
                    chi_g = anchors_.distance(InteractionKind::Global, outs[j].f_g_star.tensor());
                for (std::size_t i = 0; i < kNumSubtasks; ++i) {
                    const InteractionKind kind = kSubtaskKinds[i];
                    if (config_.ablate.count(kind)) continue;
                    double raw = y_g;
                    if (epoch > 1) {
                        const double chi_s = anchors_.distance(kind, outs[j].f_s_star[i].tensor());
                        raw = raw_pseudo_label(config_.ssp, y_g, chi_g, chi_s);
                    }
                    // Anchor weights use the pseudo-label from the previous
                    // epoch, read before this epoch's EWMA update lands.
                    const double prev_label = store_.get(reviews[j]->review_id, kind).value_or(y_g);
                    const double target = store_.update(reviews[j]->review_id, kind, raw, y_g);
                    preds[i].push_back(outs[j].y_hat_s[i]);
                    targets[i].push_back(target);
                    anchors_.accumulator(kind).accumulate(prev_label, outs[j].f_s_star[i].tensor());
                }
                anchors_.accumulator(InteractionKind::Global).accumulate(y_g, outs[j].f_g_star.tensor());
            }

            std::vector<Value> per_task;
            std::vector<Value> lvars;
            for (std::size_t i = 0; i < kNumSubtasks; ++i) {
                if (config_.ablate.count(kSubtaskKinds[i])) continue;
                const Value l_s = subtask_loss(preds[i], targets[i], golds);
                breakdown.l_sub_per_task[i] = l_s.item();
                per_task.push_back(l_s);
                lvars.push_back(params_.log_vars[i]);
            }
            const Value l_sub = uncertainty_combine(per_task, lvars);
            breakdown.l_sub_combined = l_sub.item();
            total = total_loss(l_tar, l_sub);
            for (std::size_t i = 0; i < kNumSubtasks; ++i)
                breakdown.sigmas[i] = std::exp(params_.log_vars[i].item() / 2.0);
        }

        breakdown.total = total.item();
        backward(total);
        adam_->step();

        summary.mean_total += breakdown.total;
        summary.mean_l_tar += breakdown.l_tar;
        ++summary.steps;
        if (step_log) step_log->push_back({epoch, batch_idx, prod.product_id, breakdown});
        ++batch_idx;
    }

    if (summary.steps > 0) {
        summary.mean_total /= static_cast<double>(summary.steps);
        summary.mean_l_tar /= static_cast<double>(summary.steps);
    }
    if (use_ssp) {
        anchors_.finalize_epoch(config_.ssp.lambda_reg);
        store_.advance_epoch();
    }
    ++epochs_done_;
    return summary;
}

double Trainer::score_review(const ProductRecord& product, const ReviewRecord& review) const {
    const NoGradScope no_grad;
    if (config_.direct_concat) return direct_forward(direct_params_, product, review).item();
    FeatureBundle bundle = make_bundle(product, review);
    project_visual(params_, bundle);
    return forward(params_, bundle).y_hat_g.item();
}

EvalReport Trainer::evaluate_products(const std::vector<std::size_t>& product_indices) const {
    std::map<std::string, double> scores;
    std::vector<ProductRecord> subset;
    subset.reserve(product_indices.size());
    for (std::size_t pi : product_indices) {
        const ProductRecord& prod = data_->products[pi];
        subset.push_back(prod);
        for (const ReviewRecord& rev : prod.reviews) scores[rev.review_id] = score_review(prod, rev);
    }
    return evaluate(subset, scores, config_.metrics);
}

EvalReport Trainer::evaluate_train() const { return evaluate_products(split_.train); }
EvalReport Trainer::evaluate_dev() const { return evaluate_products(split_.dev); }
EvalReport Trainer::evaluate_test() const { return evaluate_products(split_.test); }

EvalReport Trainer::evaluate_all() const {
    std::vector<std::size_t> all(data_->products.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return evaluate_products(all);
}

void Trainer::use_best_params() {
    if (best_params_.empty()) return;
    const std::vector<Value> params = parameters();
    for (std::size_t i = 0; i < params.size(); ++i) params[i].mutable_tensor() = best_params_[i];
}

double Trainer::train_ranking_loss() const {
    const NoGradScope no_grad;
    const auto batches =
        batch_by_product(*data_, split_.train, config_.batch_size, Rng::mix(config_.seed, 0xE70C0));
    double acc = 0.0;
    std::size_t n = 0;
    for (const Batch& batch : batches) {
        const ProductRecord& prod = data_->products[batch.product_index];
        std::vector<Value> scores;
        std::vector<int> labels;
        for (std::size_t ri : batch.review_indices) {
            const ReviewRecord& rev = prod.reviews[ri];
            scores.push_back(Value::scalar(score_review(prod, rev)));
            labels.push_back(rev.label);
        }
        acc += ranking_loss(scores, labels, config_.margin).item();
        ++n;
    }
    return n == 0 ? 0.0 : acc / static_cast<double>(n);
}

RunOutcome Trainer::run(std::ostream* log_stream) {
    for (std::size_t e = 0; e < config_.epochs; ++e) {
        std::vector<StepRecord> records;
        const EpochSummary summary = run_epoch(&records);
        if (log_stream)
            for (const StepRecord& r : records) (*log_stream) << r.to_json_line() << "\n";

        const EvalReport dev = evaluate_dev();
        if (dev.map_score > best_dev_map_) {
            best_dev_map_ = dev.map_score;
            best_epoch_ = summary.epoch;
            best_params_.clear();
            for (const Value& p : parameters()) best_params_.push_back(p.tensor());
        }
        if (log_stream) {
            (*log_stream) << "{\"epoch\":" << summary.epoch
                          << ",\"mean_total\":" << fmt_double(summary.mean_total)
                          << ",\"mean_l_tar\":" << fmt_double(summary.mean_l_tar)
                          << ",\"dev_map\":" << fmt_double(dev.map_score) << "}\n";
        }
    }

    RunOutcome outcome;
    outcome.train_report = evaluate_train();
    outcome.dev_report = evaluate_dev();
    outcome.final_train_ranking_loss = train_ranking_loss();
    outcome.best_dev_map = best_dev_map_;
    outcome.best_epoch = best_epoch_;

    // Test metrics come from the best-dev snapshot.
    std::vector<Value> params = parameters();
    std::vector<Tensor> current;
    current.reserve(params.size());
    for (const Value& p : params) current.push_back(p.tensor());
    if (!best_params_.empty()) {
        for (std::size_t i = 0; i < params.size(); ++i) params[i].mutable_tensor() = best_params_[i];
    }
    outcome.test_report = evaluate_test();
    for (std::size_t i = 0; i < params.size(); ++i) params[i].mutable_tensor() = current[i];
    return outcome;
}

RunResult run_training(const TrainConfig& config, const Dataset& data, const std::string& out_dir) {
    config.validate();
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw_io("cannot create output directory " + out_dir + ": " + ec.message());

    RunResult result;
    for (std::size_t s = 0; s < config.seeds; ++s) {
        TrainConfig single = config;
        single.seed = config.seed + s;
        single.seeds = 1;

        const std::string suffix = config.seeds == 1 ? "" : "_seed" + std::to_string(single.seed);
        std::ofstream log((fs::path(out_dir) / ("train_log" + suffix + ".jsonl")).string(),
                          std::ios::trunc);
        if (!log) throw_io("cannot open training log in " + out_dir);

        Trainer trainer(single, data);
        const RunOutcome outcome = trainer.run(&log);
        const std::string ckpt =
            (fs::path(out_dir) / ("checkpoint" + suffix + ".mmck")).string();
        trainer.save_checkpoint(ckpt);

        result.per_seed.push_back(outcome.test_report);
        result.seed_values.push_back(single.seed);
        result.checkpoint_paths.push_back(ckpt);
    }

    if (result.per_seed.size() == 1) {
        result.mean_test_report = result.per_seed.front();
    } else {
        EvalReport mean;
        const double n = static_cast<double>(result.per_seed.size());
        for (const EvalReport& r : result.per_seed) {
            mean.map_score += r.map_score / n;
            for (const auto& [k, v] : r.ndcg) mean.ndcg[k] += v / n;
        }
        result.mean_test_report = std::move(mean);
    }

    std::ofstream rep((fs::path(out_dir) / "report.json").string(), std::ios::trunc);
    if (!rep) throw_io("cannot write report.json in " + out_dir);
    rep << report_json(result.mean_test_report) << "\n";
    return result;
}

}  // namespace mmss
