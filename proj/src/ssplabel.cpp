#include "mmss/ssplabel.hpp"

#include <algorithm>
#include <cmath>

#include "mmss/autodiff.hpp"

namespace mmss {

void AnchorAccumulator::accumulate(double label, const Tensor& representation) {
    const std::size_t d = representation.size();
    if (weighted_sum_.empty()) {
        weighted_sum_.assign(d, 0.0);
        raw_sum_.assign(d, 0.0);
        raw_sumsq_.assign(d, 0.0);
    } else if (weighted_sum_.size() != d) {
        throw_contract("accumulate_anchor: representation dim " + std::to_string(d) +
                       " does not match accumulated dim " + std::to_string(weighted_sum_.size()));
    }
    const double w = sigmoid(label);
    for (std::size_t i = 0; i < d; ++i) {
        const double v = representation[i];
        weighted_sum_[i] += w * v;
        raw_sum_[i] += v;
        raw_sumsq_[i] += v * v;
    }
    weight_total_ += w;
    ++count_;
}

AnchorEntry AnchorAccumulator::finalize(double lambda_reg) const {
    if (count_ == 0) throw_contract("finalize_anchor: no samples accumulated");
    const std::size_t d = weighted_sum_.size();
    AnchorEntry e;
    e.anchor.resize(d);
    e.diag_var.resize(d);
    const double n = static_cast<double>(count_);
    for (std::size_t i = 0; i < d; ++i) {
        e.anchor[i] = weighted_sum_[i] / weight_total_;
        const double mean = raw_sum_[i] / n;
        const double var = raw_sumsq_[i] / n - mean * mean;
        e.diag_var[i] = std::max(var, lambda_reg);
    }
    e.scale = static_cast<double>(d);
    return e;
}

void AnchorAccumulator::reset() {
    weighted_sum_.clear();
    raw_sum_.clear();
    raw_sumsq_.clear();
    weight_total_ = 0.0;
    count_ = 0;
}

void AnchorAccumulator::restore(std::vector<double> wsum, std::vector<double> rsum,
                                std::vector<double> rsumsq, double wtotal, std::size_t count) {
    weighted_sum_ = std::move(wsum);
    raw_sum_ = std::move(rsum);
    raw_sumsq_ = std::move(rsumsq);
    weight_total_ = wtotal;
    count_ = count;
}

double mahalanobis(const AnchorEntry& entry, const Tensor& representation) {
    const std::size_t d = entry.anchor.size();
    if (representation.size() != d)
        throw_contract("distance: representation dim " + std::to_string(representation.size()) +
                       " does not match anchor dim " + std::to_string(d));
    double acc = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const double r = representation[i] - entry.anchor[i];
        acc += r * r / entry.diag_var[i];
    }
    return std::sqrt(acc) / std::sqrt(entry.scale);
}

double raw_pseudo_label(const SspConfig& config, double y_g, double chi_g, double chi_s) {
    const double value = (y_g + config.alpha2 * (chi_s - chi_g)) / 2.0 +
                         config.alpha1 * chi_s * y_g / (2.0 * (chi_g + config.eps));
    if (config.clamp) return std::clamp(value, 0.0, 4.0);
    return value;
}

const AnchorEntry& AnchorState::entry(InteractionKind task) const {
    const auto& e = entries_[index(task)];
    if (!e.has_value())
        throw_contract(std::string("distance: anchor for task ") + to_string(task) +
                       " is not finalized");
    return *e;
}

double AnchorState::distance(InteractionKind task, const Tensor& representation) const {
    return mahalanobis(entry(task), representation);
}

void AnchorState::finalize_epoch(double lambda_reg) {
    for (std::size_t i = 0; i < acc_.size(); ++i) {
        if (acc_[i].count() > 0) entries_[i] = acc_[i].finalize(lambda_reg);
        acc_[i].reset();
    }
}

double PseudoLabelStore::update(const std::string& review_id, InteractionKind subtask,
                                double raw_target, double y_g) {
    if (epoch_ < 1) throw_contract("ewma_update: epoch index must be >= 1");
    const auto key = std::make_pair(review_id, static_cast<int>(subtask));
    const auto it = values_.find(key);
    double result;
    if (epoch_ == 1 || it == values_.end()) {
        // First epoch (or first appearance): initialize from the gold label.
        result = y_g;
    } else {
        const double b = beta();
        result = b * raw_target + (1.0 - b) * it->second;
    }
    values_[key] = result;
    history_.push_back({epoch_, review_id, subtask, result});
    return result;
}

std::optional<double> PseudoLabelStore::get(const std::string& review_id,
                                            InteractionKind subtask) const {
    const auto it = values_.find(std::make_pair(review_id, static_cast<int>(subtask)));
    if (it == values_.end()) return std::nullopt;
    return it->second;
}

void PseudoLabelStore::restore(int epoch, std::map<std::pair<std::string, int>, double> values,
                               std::vector<HistoryRow> history) {
    epoch_ = epoch;
    values_ = std::move(values);
    history_ = std::move(history);
}

}  // namespace mmss
