#include "mmss/objectives.hpp"

#include <cmath>

namespace mmss {

Value ranking_loss(const std::vector<Value>& scores, const std::vector<int>& labels, double margin) {
    if (scores.size() != labels.size())
        throw_contract("ranking_loss: " + std::to_string(scores.size()) + " scores vs " +
                       std::to_string(labels.size()) + " labels");
    if (margin <= 0.0) throw_contract("ranking_loss: margin must be positive");

    Value acc;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i)
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[i] <= labels[j]) continue;
            const Value term = elementwise(
                add_const(sub(scores[j], scores[i]), margin), Elementwise::Hinge);
            acc = acc.valid() ? add(acc, term) : term;
            ++pairs;
        }
    if (pairs == 0) return Value::scalar(0.0);
    return scale(acc, 1.0 / static_cast<double>(pairs));
}

Value subtask_loss(const std::vector<Value>& predictions, const std::vector<double>& targets,
                   const std::vector<double>& golds) {
    if (predictions.empty() || predictions.size() != targets.size() ||
        predictions.size() != golds.size())
        throw_contract("subtask_loss: predictions, targets, and golds must align and be non-empty");

    Value acc;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double weight = std::tanh(std::fabs(targets[i] - golds[i]));
        const Value residual =
            elementwise(add_const(predictions[i], -targets[i]), Elementwise::Abs);
        const Value term = scale(residual, weight);
        acc = acc.valid() ? add(acc, term) : term;
    }
    return scale(acc, 1.0 / static_cast<double>(predictions.size()));
}

Value uncertainty_combine(const std::vector<Value>& per_task_losses,
                          const std::vector<Value>& log_vars) {
    if (per_task_losses.empty() || per_task_losses.size() != log_vars.size())
        throw_contract("uncertainty_combine: losses and log-variances must align and be non-empty");

    Value acc;
    for (std::size_t i = 0; i < per_task_losses.size(); ++i) {
        const Value weighted = scale(mul(exp(neg(log_vars[i])), per_task_losses[i]), 0.5);
        const Value reg = scale(log_vars[i], 0.5);
        const Value term = add(weighted, reg);
        acc = acc.valid() ? add(acc, term) : term;
    }
    return acc;
}

Value total_loss(const Value& l_tar, const Value& l_sub_combined) { return add(l_tar, l_sub_combined); }

}  // namespace mmss
