#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "mmss/metrics.hpp"
#include "mmss/rng.hpp"

using namespace mmss;

namespace {

RankedList list_from_labels(std::initializer_list<int> labels_by_rank) {
    std::vector<RankedEntry> entries;
    double score = static_cast<double>(labels_by_rank.size());
    std::size_t i = 0;
    for (int label : labels_by_rank) {
        entries.push_back({"r" + std::to_string(i++), score, label});
        score -= 1.0;
    }
    return make_ranked_list(std::move(entries));
}

}  // namespace

TEST_CASE("ranked list sorts by score then review_id") {
    const RankedList list = make_ranked_list({{"b", 1.0, 0}, {"a", 1.0, 1}, {"c", 2.0, 2}});
    CHECK(list.entries[0].review_id == "c");
    CHECK(list.entries[1].review_id == "a");
    CHECK(list.entries[2].review_id == "b");
}

TEST_CASE("average precision cases") {
    CHECK(average_precision(list_from_labels({4}), 3) == doctest::Approx(1.0));
    CHECK(average_precision(list_from_labels({0, 1, 2}), 3) == 0.0);
    // Relevance pattern [1, 0, 1]: (1/1 + 2/3) / 2 = 5/6.
    CHECK(average_precision(list_from_labels({4, 0, 3}), 3) ==
          doctest::Approx(5.0 / 6.0).epsilon(1e-15));
}

TEST_CASE("ndcg cases") {
    CHECK(ndcg_at(list_from_labels({4, 3, 2, 1, 0}), 5) == doctest::Approx(1.0));
    CHECK(ndcg_at(list_from_labels({0, 0, 0}), 3) == 1.0);
    // Labels by rank [0, 4], n = 2: DCG = 15/log2(3), IDCG = 15.
    const double expect = (15.0 / std::log2(3.0)) / 15.0;
    CHECK(ndcg_at(list_from_labels({0, 4}), 2) == doctest::Approx(expect).epsilon(1e-15));
    CHECK(ndcg_at(list_from_labels({0, 4}), 2) == doctest::Approx(0.6309297535714574).epsilon(1e-12));
}

TEST_CASE("evaluate aggregates per-product metrics") {
    // Hand-built labels so every product has at least one relevant review.
    SynthSpec spec;
    spec.n_products = 2;
    spec.reviews_per_product = 4;
    spec.d_t = 4;
    spec.d_roi = 4;
    spec.seed = 3;
    Dataset ds = make_synthetic(spec);
    const int planted[2][4] = {{4, 2, 1, 0}, {3, 3, 0, 0}};
    for (std::size_t p = 0; p < 2; ++p)
        for (std::size_t r = 0; r < 4; ++r) ds.products[p].reviews[r].label = planted[p][r];

    std::map<std::string, double> scores;
    for (const auto& prod : ds.products)
        for (const auto& rev : prod.reviews)
            scores[rev.review_id] = static_cast<double>(rev.label);  // ideal ranking

    const EvalReport report = evaluate(ds.products, scores, MetricOptions{});
    CHECK(report.map_score == doctest::Approx(1.0));
    CHECK(report.ndcg.at(3) == doctest::Approx(1.0));
    CHECK(report.ndcg.at(5) == doctest::Approx(1.0));
    CHECK(report.per_product.size() == 2);

    // A product with no relevant review contributes AP = 0 by convention.
    ds.products[1].reviews[0].label = 0;
    ds.products[1].reviews[1].label = 0;
    const EvalReport half = evaluate(ds.products, scores, MetricOptions{});
    CHECK(half.map_score == doctest::Approx(0.5));
}

TEST_CASE("metrics are invariant to positive affine score transforms") {
    SynthSpec spec;
    spec.n_products = 3;
    spec.reviews_per_product = 6;
    spec.d_t = 4;
    spec.d_roi = 4;
    spec.seed = 8;
    const Dataset ds = make_synthetic(spec);

    Rng rng(4);
    std::map<std::string, double> scores, transformed;
    for (const auto& prod : ds.products)
        for (const auto& rev : prod.reviews) {
            const double s = rng.uniform(-1, 1);
            scores[rev.review_id] = s;
            transformed[rev.review_id] = 2.5 * s + 10.0;
        }
    const EvalReport a = evaluate(ds.products, scores, MetricOptions{});
    const EvalReport b = evaluate(ds.products, transformed, MetricOptions{});
    CHECK(a.map_score == doctest::Approx(b.map_score).epsilon(1e-12));
    CHECK(a.ndcg.at(3) == doctest::Approx(b.ndcg.at(3)).epsilon(1e-12));
    CHECK(a.ndcg.at(5) == doctest::Approx(b.ndcg.at(5)).epsilon(1e-12));
}

TEST_CASE("evaluate names a review with no prediction") {
    SynthSpec spec;
    spec.n_products = 1;
    spec.reviews_per_product = 2;
    spec.d_t = 4;
    spec.d_roi = 4;
    const Dataset ds = make_synthetic(spec);
    std::map<std::string, double> scores;
    scores[ds.products[0].reviews[0].review_id] = 1.0;
    CHECK_THROWS_WITH_AS(evaluate(ds.products, scores, MetricOptions{}),
                         doctest::Contains(ds.products[0].reviews[1].review_id.c_str()), Error);
}

TEST_CASE("swapping a mis-ordered adjacent pair never hurts") {
    Rng rng(6);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 2 + rng.bounded(8);
        std::vector<int> labels(n);
        for (auto& l : labels) l = static_cast<int>(rng.bounded(5));

        // Find an adjacent pair where the upper entry has a strictly lower label.
        for (std::size_t k = 0; k + 1 < n; ++k) {
            if (labels[k] >= labels[k + 1]) continue;
            std::vector<int> swapped = labels;
            std::swap(swapped[k], swapped[k + 1]);

            auto make = [](const std::vector<int>& ls) {
                std::vector<RankedEntry> entries;
                for (std::size_t i = 0; i < ls.size(); ++i)
                    entries.push_back({"r" + std::to_string(i),
                                       static_cast<double>(ls.size() - i), ls[i]});
                return make_ranked_list(std::move(entries));
            };
            const RankedList before = make(labels);
            const RankedList after = make(swapped);
            CHECK(average_precision(after, 3) >= average_precision(before, 3) - 1e-12);
            CHECK(ndcg_at(after, 3) >= ndcg_at(before, 3) - 1e-12);
            CHECK(ndcg_at(after, 5) >= ndcg_at(before, 5) - 1e-12);
        }
    }
}

TEST_CASE("report serializations include every column") {
    EvalReport report;
    report.map_score = 0.5;
    report.ndcg[3] = 0.25;
    report.ndcg[5] = 0.75;
    const std::string table = report_table(report);
    CHECK(table.find("MAP") != std::string::npos);
    CHECK(table.find("N@3") != std::string::npos);
    CHECK(table.find("N@5") != std::string::npos);
    const std::string json = report_json(report);
    CHECK(json.find("\"map\": 0.5") != std::string::npos);
    CHECK(json.find("ndcg@3") != std::string::npos);
}
