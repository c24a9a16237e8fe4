#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mmss/tensor.hpp"

namespace mmss {

// Define-by-run reverse-mode automatic differentiation. Each forward pass
// builds a fresh graph of Nodes; Values are shared handles. A graph and its
// nodes are confined to one thread during forward/backward; parameter leaves
// outlive the graphs that reference them.
struct Node {
    Tensor value;
    Tensor grad;  // lazily allocated to value dims
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop;  // accumulates this node's grad into parents
    std::string name;                     // set for parameters, used in diagnostics

    Tensor& ensure_grad() {
        if (!grad.same_dims(value)) grad = Tensor::zeros_like(value);
        return grad;
    }
};

using NodePtr = std::shared_ptr<Node>;

class Value {
public:
    Value() = default;
    explicit Value(NodePtr n) : node_(std::move(n)) {}

    // Leaf with no parents; gradients still accumulate into it.
    static Value leaf(Tensor t, std::string name = {});
    static Value constant(Tensor t) { return leaf(std::move(t)); }
    static Value scalar(double v) { return leaf(Tensor::scalar(v)); }

    bool valid() const { return node_ != nullptr; }
    const Tensor& tensor() const { return node_->value; }
    // Parameter mutation between steps; never call on interior graph nodes.
    Tensor& mutable_tensor() const { return node_->value; }
    Tensor& grad() const { return node_->ensure_grad(); }
    void zero_grad() const { node_->grad = Tensor::zeros_like(node_->value); }
    const std::string& name() const { return node_->name; }
    double item() const { return node_->value.item(); }
    NodePtr node() const { return node_; }

private:
    NodePtr node_;
};

enum class Elementwise { Sigmoid, Tanh, Hinge, Abs };

// While alive, new nodes carry no parent links or backward closures: values
// compute identically but the graph cannot be backpropagated. Use around
// evaluation-only passes. Thread-local, nestable.
class NoGradScope {
public:
    NoGradScope();
    ~NoGradScope();
    NoGradScope(const NoGradScope&) = delete;
    NoGradScope& operator=(const NoGradScope&) = delete;
};

Value matmul(const Value& a, const Value& b);
// x W + b with b broadcast across rows; one node instead of two.
Value affine(const Value& x, const Value& w, const Value& b);
Value transpose(const Value& x);

// add accepts equal dims, or a (n x d) + (1 x d) row broadcast on either side.
Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value mul(const Value& a, const Value& b);  // elementwise, equal dims or 1x1 broadcast
Value scale(const Value& x, double c);
Value add_const(const Value& x, double c);
Value neg(const Value& x);

Value gelu(const Value& x);  // exact erf form
Value elementwise(const Value& x, Elementwise kind);
Value exp(const Value& x);

Value softmax(const Value& x, std::size_t axis);

Value sum_rows(const Value& x);  // n x d -> 1 x d
Value sum_all(const Value& x);   // -> 1 x 1
Value mean_all(const Value& x);  // -> 1 x 1

Value concat_rows(std::span<const Value> parts);
Value concat_cols(std::span<const Value> parts);
Value slice_rows(const Value& x, std::size_t begin, std::size_t end);
Value slice_cols(const Value& x, std::size_t begin, std::size_t end);

inline Value operator+(const Value& a, const Value& b) { return add(a, b); }
inline Value operator-(const Value& a, const Value& b) { return sub(a, b); }
inline Value operator*(const Value& a, const Value& b) { return mul(a, b); }

// Seeds the scalar root with gradient 1 and propagates to every reachable
// node in reverse topological order. Repeated calls accumulate.
void backward(const Value& root);

// Scalar helpers shared with code that works outside the graph.
double sigmoid(double x);
double gelu_scalar(double x);

}  // namespace mmss
