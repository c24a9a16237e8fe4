#include <doctest.h>

#include <cmath>

#include "mmss/objectives.hpp"
#include "mmss/rng.hpp"
#include "test_support.hpp"

using namespace mmss;
using testsupport::max_grad_rel_err;

namespace {

std::vector<Value> scalars(std::initializer_list<double> values) {
    std::vector<Value> out;
    for (double v : values) out.push_back(Value::scalar(v));
    return out;
}

}  // namespace

TEST_CASE("ranking loss hinge cases") {
    // Separated beyond the margin: no contribution.
    CHECK(ranking_loss(scalars({1.5, 0.0}), {4, 0}, 1.0).item() == doctest::Approx(0.0));
    // Tied scores sit exactly at the margin.
    CHECK(ranking_loss(scalars({0.7, 0.7}), {3, 1}, 1.0).item() == doctest::Approx(1.0));
    // Labels {4,2,0} with all-zero scores: three ordered pairs, each at margin.
    CHECK(ranking_loss(scalars({0, 0, 0}), {4, 2, 0}, 1.0).item() == doctest::Approx(1.0));
    // No valid pair.
    CHECK(ranking_loss(scalars({0.3, 0.9}), {2, 2}, 1.0).item() == 0.0);
}

TEST_CASE("ranking loss is translation invariant") {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> raw;
        std::vector<int> labels;
        for (int i = 0; i < 6; ++i) {
            raw.push_back(rng.uniform(-2, 2));
            labels.push_back(static_cast<int>(rng.bounded(5)));
        }
        std::vector<Value> base, shifted;
        const double c = rng.uniform(-10, 10);
        for (double v : raw) {
            base.push_back(Value::scalar(v));
            shifted.push_back(Value::scalar(v + c));
        }
        const double a = ranking_loss(base, labels, 1.0).item();
        const double b = ranking_loss(shifted, labels, 1.0).item();
        CHECK(a == doctest::Approx(b).epsilon(1e-12));
    }
}

TEST_CASE("ranking loss is zero iff every pair clears the margin") {
    const double margin = 1.0;
    CHECK(ranking_loss(scalars({2.01, 1.0, -0.01}), {4, 2, 0}, margin).item() == 0.0);
    CHECK(ranking_loss(scalars({1.99, 1.0, 0.5}), {4, 2, 0}, margin).item() > 0.0);
}

TEST_CASE("ranking loss backpropagates into scores") {
    const Value pos = Value::leaf(Tensor::scalar(0.2));
    const Value neg = Value::leaf(Tensor::scalar(0.1));
    const Value loss = ranking_loss({pos, neg}, {3, 1}, 1.0);
    backward(loss);
    CHECK(pos.grad()[0] == doctest::Approx(-1.0));
    CHECK(neg.grad()[0] == doctest::Approx(1.0));
}

TEST_CASE("subtask loss cases") {
    // Pseudo-label equals gold: tanh weight 0 kills the term.
    CHECK(subtask_loss(scalars({7.0}), {2.0}, {2.0}).item() == doctest::Approx(0.0));
    // Prediction equals pseudo-label: zero residual.
    CHECK(subtask_loss(scalars({3.0}), {3.0}, {2.0}).item() == doctest::Approx(0.0));
    // Hand value: tanh(1) * |1 - 3| = 1.5232...
    CHECK(subtask_loss(scalars({1.0}), {3.0}, {2.0}).item() ==
          doctest::Approx(std::tanh(1.0) * 2.0).epsilon(1e-12));
    // Mean over the batch.
    CHECK(subtask_loss(scalars({1.0, 3.0}), {3.0, 3.0}, {2.0, 2.0}).item() ==
          doctest::Approx(std::tanh(1.0)).epsilon(1e-12));
}

TEST_CASE("subtask loss is non-negative") {
    Rng rng(9);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Value> preds;
        std::vector<double> targets, golds;
        for (int i = 0; i < 4; ++i) {
            preds.push_back(Value::scalar(rng.uniform(-3, 7)));
            targets.push_back(rng.uniform(-1, 5));
            golds.push_back(static_cast<double>(rng.bounded(5)));
        }
        CHECK(subtask_loss(preds, targets, golds).item() >= 0.0);
    }
}

TEST_CASE("uncertainty combination values") {
    // All eta = 0: combined = sum(L) / 2.
    const auto etas0 = scalars({0.0, 0.0, 0.0, 0.0, 0.0});
    const auto losses = scalars({1.0, 2.0, 3.0, 0.5, 0.5});
    CHECK(uncertainty_combine(losses, etas0).item() == doctest::Approx(3.5).epsilon(1e-12));

    // Single task, L = 2, eta = log 4: 2/(2*4) + log(4)/2.
    const double expect = 0.25 + std::log(4.0) / 2.0;
    CHECK(uncertainty_combine(scalars({2.0}), scalars({std::log(4.0)})).item() ==
          doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("uncertainty combination gradient matches finite differences") {
    const Value eta1 = Value::leaf(Tensor::scalar(0.3), "eta1");
    const Value eta2 = Value::leaf(Tensor::scalar(-0.6), "eta2");
    const Value l1 = Value::leaf(Tensor::scalar(1.7), "l1");
    const Value l2 = Value::leaf(Tensor::scalar(0.4), "l2");
    auto build = [&] { return uncertainty_combine({l1, l2}, {eta1, eta2}); };
    CHECK(max_grad_rel_err({eta1, eta2, l1, l2}, build) < 1e-6);
}

TEST_CASE("stationary point of the uncertainty penalty is eta = log L") {
    // d/d eta [e^{-eta} L / 2 + eta / 2] = 0 at eta = log L.
    const double L = 2.0;
    const Value eta = Value::leaf(Tensor::scalar(std::log(L)), "eta");
    const Value combined = uncertainty_combine({Value::scalar(L)}, {eta});
    backward(combined);
    CHECK(eta.grad()[0] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("total loss is the exact sum") {
    CHECK(total_loss(Value::scalar(0.0), Value::scalar(0.0)).item() == 0.0);
    CHECK(total_loss(Value::scalar(1.5), Value::scalar(0.25)).item() == doctest::Approx(1.75));
}
