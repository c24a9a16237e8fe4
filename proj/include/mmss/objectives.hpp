#pragma once

#include <array>
#include <vector>

#include "mmss/autodiff.hpp"
#include "mmss/model.hpp"

namespace mmss {

// Per-step loss components kept for logging. total = l_tar + l_sub_combined.
struct LossBreakdown {
    double l_tar = 0.0;
    std::array<double, kNumSubtasks> l_sub_per_task{};
    double l_sub_combined = 0.0;
    double total = 0.0;
    std::array<double, kNumSubtasks> sigmas{};  // exp(log_var / 2)
};

// Mean hinge over all ordered pairs whose first label is strictly greater:
// max(0, margin - score+ + score-). Zero constant when no pair exists.
Value ranking_loss(const std::vector<Value>& scores, const std::vector<int>& labels, double margin);

// Mean over the batch of tanh(|target - gold|) * |pred - target|. Targets
// and weights are supervision, not model outputs: no gradient flows through
// them.
Value subtask_loss(const std::vector<Value>& predictions, const std::vector<double>& targets,
                   const std::vector<double>& golds);

// Homoscedastic-uncertainty combination with learnable eta = log sigma^2:
// sum_j exp(-eta_j) L_j / 2 + eta_j / 2.
Value uncertainty_combine(const std::vector<Value>& per_task_losses,
                          const std::vector<Value>& log_vars);

Value total_loss(const Value& l_tar, const Value& l_sub_combined);

}  // namespace mmss
