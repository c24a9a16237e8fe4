#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mmss/model.hpp"
#include "mmss/tensor.hpp"

namespace mmss {

struct SspConfig {
    double alpha1 = 1.0;      // multiplicative correlation coefficient
    double alpha2 = 1.0;      // subtractive correlation coefficient
    double eps = 1e-8;        // division guard
    double lambda_reg = 1e-6; // variance floor
    bool clamp = false;       // clamp pseudo-labels to [0, 4]
};

// Sigmoid-label-weighted centroid of one task's representations plus a
// diagonal variance estimate; the reference point for distances.
struct AnchorEntry {
    std::vector<double> anchor;
    std::vector<double> diag_var;  // floored at lambda_reg
    double scale = 1.0;            // s_k = representation dimension
};

class AnchorAccumulator {
public:
    AnchorAccumulator() = default;

    void accumulate(double label, const Tensor& representation);
    std::size_t count() const { return count_; }
    std::size_t dim() const { return weighted_sum_.size(); }

    // anchor = sigmoid-weighted mean; diag_var = unweighted population
    // variance floored at lambda_reg; scale = dimension.
    AnchorEntry finalize(double lambda_reg) const;
    void reset();

    // Checkpoint access.
    const std::vector<double>& weighted_sum() const { return weighted_sum_; }
    const std::vector<double>& raw_sum() const { return raw_sum_; }
    const std::vector<double>& raw_sumsq() const { return raw_sumsq_; }
    double weight_total() const { return weight_total_; }
    void restore(std::vector<double> wsum, std::vector<double> rsum, std::vector<double> rsumsq,
                 double wtotal, std::size_t count);

private:
    std::vector<double> weighted_sum_;
    std::vector<double> raw_sum_;
    std::vector<double> raw_sumsq_;
    double weight_total_ = 0.0;
    std::size_t count_ = 0;
};

// Variance-normalized distance from a representation to the anchor:
// sqrt(sum_d (f_d - A_d)^2 / var_d) / sqrt(scale).
double mahalanobis(const AnchorEntry& entry, const Tensor& representation);

// First-line offset formula:
//   y_s = (y_g + alpha2 (chi_s - chi_g)) / 2 + alpha1 chi_s y_g / (2 (chi_g + eps))
// Optionally clamped to [0, 4].
double raw_pseudo_label(const SspConfig& config, double y_g, double chi_g, double chi_s);

// One accumulator and one finalized entry per task (global + 5 subtasks).
// Anchors finalized at the end of epoch i serve distances during epoch i+1.
class AnchorState {
public:
    AnchorAccumulator& accumulator(InteractionKind task) { return acc_[index(task)]; }
    const AnchorAccumulator& accumulator(InteractionKind task) const { return acc_[index(task)]; }

    bool finalized(InteractionKind task) const { return entries_[index(task)].has_value(); }
    const AnchorEntry& entry(InteractionKind task) const;
    void set_entry(InteractionKind task, AnchorEntry e) { entries_[index(task)] = std::move(e); }

    double distance(InteractionKind task, const Tensor& representation) const;

    // Finalizes every accumulator that saw samples and resets them all.
    void finalize_epoch(double lambda_reg);

private:
    static std::size_t index(InteractionKind task) { return static_cast<std::size_t>(task); }
    std::array<AnchorAccumulator, 6> acc_;
    std::array<std::optional<AnchorEntry>, 6> entries_;
};

// Per-review, per-subtask pseudo-label state with the epoch-indexed EWMA
// update. Exists only during training; evaluation never reads it.
class PseudoLabelStore {
public:
    struct HistoryRow {
        int epoch;
        std::string review_id;
        InteractionKind subtask;
        double value;
    };

    int epoch() const { return epoch_; }
    double beta() const { return 2.0 / (epoch_ + 1.0); }

    // At epoch 1 (or a review's first appearance) returns and stores y_g;
    // afterwards beta * raw_target + (1 - beta) * previous.
    double update(const std::string& review_id, InteractionKind subtask, double raw_target, double y_g);

    std::optional<double> get(const std::string& review_id, InteractionKind subtask) const;

    void advance_epoch() { ++epoch_; }

    const std::vector<HistoryRow>& history() const { return history_; }
    std::size_t size() const { return values_.size(); }

    // Checkpoint access.
    const std::map<std::pair<std::string, int>, double>& values() const { return values_; }
    void restore(int epoch, std::map<std::pair<std::string, int>, double> values,
                 std::vector<HistoryRow> history);

private:
    int epoch_ = 1;
    std::map<std::pair<std::string, int>, double> values_;
    std::vector<HistoryRow> history_;
};

}  // namespace mmss
