#pragma once

#include <cstdint>
#include <set>
#include <string>

#include "mmss/metrics.hpp"
#include "mmss/model.hpp"
#include "mmss/ssplabel.hpp"

namespace mmss {

struct TrainConfig {
    ModelDims dims;  // d_roi is overwritten from the dataset when training starts
    double learning_rate = 8e-3;
    std::size_t batch_size = 32;
    double margin = 1.0;
    std::size_t epochs = 30;
    std::uint64_t seed = 1;
    std::size_t seeds = 1;  // run seeds {seed .. seed+seeds-1} and average metrics
    SspConfig ssp;
    std::set<InteractionKind> ablate;  // disabled subtasks
    bool disable_ssp = false;
    bool direct_concat = false;
    MetricOptions metrics;
    double train_frac = 0.5;
    double dev_frac = 0.25;

    void validate() const;
    std::string to_json() const;
    static TrainConfig from_json_text(const std::string& text);
    static TrainConfig from_json_file(const std::string& path);
    std::uint64_t hash() const;

    // Applies a "key=value"-style override; keys mirror the CLI flags.
    void set(const std::string& key, const std::string& value);
};

}  // namespace mmss
