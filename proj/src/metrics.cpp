#include "mmss/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <json.hpp>

namespace mmss {

RankedList make_ranked_list(std::vector<RankedEntry> entries) {
    if (entries.empty()) throw_contract("ranked list must have at least one entry");
    std::sort(entries.begin(), entries.end(), [](const RankedEntry& a, const RankedEntry& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.review_id < b.review_id;
    });
    return RankedList{std::move(entries)};
}

double average_precision(const RankedList& list, int tau) {
    if (list.entries.empty()) throw_contract("average_precision: empty list");
    std::size_t relevant_seen = 0;
    double acc = 0.0;
    for (std::size_t k = 0; k < list.entries.size(); ++k) {
        if (list.entries[k].label >= tau) {
            ++relevant_seen;
            acc += static_cast<double>(relevant_seen) / static_cast<double>(k + 1);
        }
    }
    if (relevant_seen == 0) return 0.0;
    return acc / static_cast<double>(relevant_seen);
}

namespace {

double dcg(const std::vector<int>& labels_by_rank, std::size_t n) {
    double acc = 0.0;
    const std::size_t upto = std::min(n, labels_by_rank.size());
    for (std::size_t k = 0; k < upto; ++k) {
        const double gain = std::exp2(static_cast<double>(labels_by_rank[k])) - 1.0;
        acc += gain / std::log2(static_cast<double>(k + 2));
    }
    return acc;
}

}  // namespace

double ndcg_at(const RankedList& list, std::size_t n) {
    if (n < 1) throw_contract("ndcg_at: n must be >= 1");
    std::vector<int> labels;
    labels.reserve(list.entries.size());
    for (const auto& e : list.entries) labels.push_back(e.label);
    const double actual = dcg(labels, n);
    std::sort(labels.begin(), labels.end(), std::greater<int>());
    const double ideal = dcg(labels, n);
    if (ideal == 0.0) return 1.0;
    return actual / ideal;
}

EvalReport evaluate(const std::vector<ProductRecord>& products,
                    const std::map<std::string, double>& scores, const MetricOptions& options) {
    if (products.empty()) throw_contract("evaluate: no products");
    EvalReport report;
    for (const auto& prod : products) {
        std::vector<RankedEntry> entries;
        entries.reserve(prod.reviews.size());
        for (const auto& rev : prod.reviews) {
            const auto it = scores.find(rev.review_id);
            if (it == scores.end())
                throw_contract("evaluate: no prediction for review " + rev.review_id);
            entries.push_back({rev.review_id, it->second, rev.label});
        }
        const RankedList list = make_ranked_list(std::move(entries));
        ProductMetrics pm;
        pm.product_id = prod.product_id;
        pm.review_count = list.entries.size();
        pm.ap = average_precision(list, options.tau);
        for (std::size_t n : options.ndcg_at) pm.ndcg[n] = ndcg_at(list, n);
        report.per_product.push_back(std::move(pm));
    }
    const double np = static_cast<double>(report.per_product.size());
    for (const auto& pm : report.per_product) {
        report.map_score += pm.ap / np;
        for (const auto& [n, v] : pm.ndcg) report.ndcg[n] += v / np;
    }
    return report;
}

std::string report_table(const EvalReport& report) {
    std::string out;
    char line[256];
    std::string header = "  MAP   ";
    for (const auto& [n, v] : report.ndcg) {
        (void)v;
        std::snprintf(line, sizeof(line), "  N@%-4zu", n);
        header += line;
    }
    out += header + "\n";
    std::snprintf(line, sizeof(line), "%7.4f ", report.map_score);
    out += line;
    for (const auto& [n, v] : report.ndcg) {
        (void)n;
        std::snprintf(line, sizeof(line), "%7.4f ", v);
        out += line;
    }
    out += "\n";
    return out;
}

std::string report_json(const EvalReport& report) {
    nlohmann::ordered_json j;
    j["map"] = report.map_score;
    for (const auto& [n, v] : report.ndcg) j["ndcg@" + std::to_string(n)] = v;
    j["products"] = nlohmann::ordered_json::array();
    for (const auto& pm : report.per_product) {
        nlohmann::ordered_json jp;
        jp["product_id"] = pm.product_id;
        jp["reviews"] = pm.review_count;
        jp["ap"] = pm.ap;
        for (const auto& [n, v] : pm.ndcg) jp["ndcg@" + std::to_string(n)] = v;
        j["products"].push_back(std::move(jp));
    }
    return j.dump(2);
}

}  // namespace mmss
