#pragma once

#include <map>
#include <string>
#include <vector>

#include "mmss/dataset.hpp"

namespace mmss {

struct RankedEntry {
    std::string review_id;
    double score = 0.0;
    int label = 0;
};

// Entries sorted by score descending, review_id ascending on ties.
struct RankedList {
    std::vector<RankedEntry> entries;
};

RankedList make_ranked_list(std::vector<RankedEntry> entries);

// relevant := label >= tau; AP = mean of precision@k over relevant ranks k,
// 0 when nothing is relevant.
double average_precision(const RankedList& list, int tau);

// Graded gains 2^label - 1 with log2(k + 1) discounts; 1.0 when the ideal
// DCG is zero.
double ndcg_at(const RankedList& list, std::size_t n);

struct MetricOptions {
    int tau = 3;
    std::vector<std::size_t> ndcg_at = {3, 5};
};

struct ProductMetrics {
    std::string product_id;
    std::size_t review_count = 0;
    double ap = 0.0;
    std::map<std::size_t, double> ndcg;
};

struct EvalReport {
    double map_score = 0.0;
    std::map<std::size_t, double> ndcg;  // N -> mean NDCG@N
    std::vector<ProductMetrics> per_product;
};

// Builds per-product ranked lists from the score map and aggregates
// unweighted means over products. Missing scores are a contract error.
EvalReport evaluate(const std::vector<ProductRecord>& products,
                    const std::map<std::string, double>& scores, const MetricOptions& options);

std::string report_table(const EvalReport& report);
std::string report_json(const EvalReport& report);

}  // namespace mmss
