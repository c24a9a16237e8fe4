#pragma once

#include <cstdint>
#include <memory>
#include <iosfwd>
#include <string>
#include <vector>

#include "mmss/config.hpp"
#include "mmss/dataset.hpp"
#include "mmss/metrics.hpp"
#include "mmss/model.hpp"
#include "mmss/objectives.hpp"
#include "mmss/ssplabel.hpp"

namespace mmss {

// Adam with bias correction (beta1 = 0.9, beta2 = 0.999, eps = 1e-8).
// step() updates every parameter in place and zeroes its gradient.
class AdamOptimizer {
public:
    AdamOptimizer(std::vector<Value> params, double lr);

    void step();

    std::uint64_t steps() const { return t_; }
    const std::vector<Tensor>& m() const { return m_; }
    const std::vector<Tensor>& v() const { return v_; }
    void restore(std::uint64_t t, std::vector<Tensor> m, std::vector<Tensor> v);

private:
    std::vector<Value> params_;
    std::vector<Tensor> m_, v_;
    std::uint64_t t_ = 0;
    double lr_;
};

// Order-based product split; independent of the model seed so ablation arms
// compare on identical data. Empty dev/test fall back to the nearest
// non-empty split on tiny datasets.
struct SplitIndices {
    std::vector<std::size_t> train, dev, test;
};
SplitIndices split_products(std::size_t n_products, double train_frac, double dev_frac);

struct StepRecord {
    std::size_t epoch = 0;
    std::size_t batch = 0;
    std::string product_id;
    LossBreakdown loss;
    std::string to_json_line() const;
};

struct EpochSummary {
    std::size_t epoch = 0;
    std::size_t steps = 0;
    double mean_total = 0.0;
    double mean_l_tar = 0.0;
};

struct RunOutcome {
    EvalReport test_report;   // best-dev parameters
    EvalReport train_report;  // final parameters
    EvalReport dev_report;    // final parameters
    double best_dev_map = 0.0;
    std::size_t best_epoch = 0;
    double final_train_ranking_loss = 0.0;
};

// Single-seed training driver. Holds the model, optimizer, pseudo-label
// store, and anchor state; the dataset must outlive the trainer.
class Trainer {
public:
    Trainer(TrainConfig config, const Dataset& data);

    // One pass over the train split: forward, ranking loss, pseudo-label
    // targets against the previous epoch's anchors, subtask losses,
    // uncertainty weighting, backward, Adam; accumulates this epoch's anchor
    // statistics and advances the pseudo-label store at the end.
    EpochSummary run_epoch(std::vector<StepRecord>* step_log = nullptr);

    RunOutcome run(std::ostream* log_stream = nullptr);

    double score_review(const ProductRecord& product, const ReviewRecord& review) const;
    EvalReport evaluate_train() const;
    EvalReport evaluate_dev() const;
    EvalReport evaluate_test() const;
    EvalReport evaluate_all() const;
    double train_ranking_loss() const;  // current parameters, no gradient step

    // Swaps the best-dev snapshot into the live parameters (no-op when no
    // snapshot exists); used when evaluating a finished checkpoint.
    void use_best_params();

    std::size_t epochs_done() const { return epochs_done_; }
    const TrainConfig& config() const { return config_; }
    const SplitIndices& split() const { return split_; }
    const PseudoLabelStore& label_store() const { return store_; }
    const AnchorState& anchors() const { return anchors_; }
    std::vector<Value> parameters() const;

    void save_checkpoint(const std::string& path) const;
    static Trainer load_checkpoint(const std::string& path, const Dataset& data);

private:
    friend struct CheckpointCodec;

    bool ssp_active() const;
    EvalReport evaluate_products(const std::vector<std::size_t>& product_indices) const;

    TrainConfig config_;
    const Dataset* data_;
    SplitIndices split_;
    ModelParams params_;
    DirectConcatParams direct_params_;
    std::unique_ptr<AdamOptimizer> adam_;
    PseudoLabelStore store_;
    AnchorState anchors_;
    std::size_t epochs_done_ = 0;

    double best_dev_map_ = -1.0;
    std::size_t best_epoch_ = 0;
    std::vector<Tensor> best_params_;
};

struct RunResult {
    EvalReport mean_test_report;          // unweighted mean over seeds
    std::vector<EvalReport> per_seed;
    std::vector<std::uint64_t> seed_values;
    std::vector<std::string> checkpoint_paths;
};

// Trains config.seeds runs with seeds {seed .. seed+seeds-1}, writing
// checkpoints, step logs, and report.json under out_dir.
RunResult run_training(const TrainConfig& config, const Dataset& data, const std::string& out_dir);

// Reads only the pseudo-label history out of a checkpoint; no dataset needed.
std::vector<PseudoLabelStore::HistoryRow> read_checkpoint_labels(const std::string& path);

}  // namespace mmss
