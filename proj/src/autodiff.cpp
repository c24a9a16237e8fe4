#include "mmss/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>
#include <utility>

namespace mmss {

namespace {

thread_local int g_no_grad_depth = 0;

NodePtr make_node(Tensor value, std::vector<NodePtr> parents, std::function<void(Node&)> backprop) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    if (g_no_grad_depth == 0) {
        n->parents = std::move(parents);
        n->backprop = std::move(backprop);
    }
    return n;
}

void require_rank2(const Value& v, const char* op) {
    if (v.tensor().rank() != 2)
        throw_shape(std::string(op) + ": rank-2 operand required, got " + v.tensor().dims_string());
}

}  // namespace

NoGradScope::NoGradScope() { ++g_no_grad_depth; }
NoGradScope::~NoGradScope() { --g_no_grad_depth; }

Value Value::leaf(Tensor t, std::string name) {
    auto n = std::make_shared<Node>();
    n->value = std::move(t);
    n->name = std::move(name);
    return Value(std::move(n));
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double gelu_scalar(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

Value matmul(const Value& a, const Value& b) {
    require_rank2(a, "matmul");
    require_rank2(b, "matmul");
    const Tensor& ta = a.tensor();
    const Tensor& tb = b.tensor();
    if (ta.cols() != tb.rows())
        throw_shape("matmul: inner dimensions disagree, " + ta.dims_string() + " vs " + tb.dims_string());
    const std::size_t m = ta.rows(), k = ta.cols(), n = tb.cols();
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            const double av = ta.at(i, p);
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) out.at(i, j) += av * tb.at(p, j);
        }
    NodePtr na = a.node(), nb = b.node();
    return Value(make_node(std::move(out), {na, nb}, [na, nb, m, k, n](Node& self) {
        const Tensor& g = self.grad;
        Tensor& ga = na->ensure_grad();
        Tensor& gb = nb->ensure_grad();
        const Tensor& va = na->value;
        const Tensor& vb = nb->value;
        // a.grad += g . b^T ; b.grad += a^T . g
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const double gv = g.at(i, j);
                if (gv == 0.0) continue;
                for (std::size_t p = 0; p < k; ++p) {
                    ga.at(i, p) += gv * vb.at(p, j);
                    gb.at(p, j) += va.at(i, p) * gv;
                }
            }
    }));
}

Value affine(const Value& x, const Value& w, const Value& b) {
    require_rank2(x, "affine");
    require_rank2(w, "affine");
    require_rank2(b, "affine");
    const Tensor& tx = x.tensor();
    const Tensor& tw = w.tensor();
    const Tensor& tb = b.tensor();
    if (tx.cols() != tw.rows())
        throw_shape("affine: inner dimensions disagree, " + tx.dims_string() + " vs " + tw.dims_string());
    if (tb.rows() != 1 || tb.cols() != tw.cols())
        throw_shape("affine: bias " + tb.dims_string() + " does not match weight " + tw.dims_string());
    const std::size_t m = tx.rows(), k = tx.cols(), n = tw.cols();
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) out.at(i, j) = tb.at(0, j);
        for (std::size_t p = 0; p < k; ++p) {
            const double xv = tx.at(i, p);
            if (xv == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) out.at(i, j) += xv * tw.at(p, j);
        }
    }
    NodePtr nx = x.node(), nw = w.node(), nb = b.node();
    return Value(make_node(std::move(out), {nx, nw, nb}, [nx, nw, nb, m, k, n](Node& self) {
        const Tensor& g = self.grad;
        Tensor& gx = nx->ensure_grad();
        Tensor& gw = nw->ensure_grad();
        Tensor& gb = nb->ensure_grad();
        const Tensor& vx = nx->value;
        const Tensor& vw = nw->value;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const double gv = g.at(i, j);
                if (gv == 0.0) continue;
                gb.at(0, j) += gv;
                for (std::size_t p = 0; p < k; ++p) {
                    gx.at(i, p) += gv * vw.at(p, j);
                    gw.at(p, j) += vx.at(i, p) * gv;
                }
            }
    }));
}

Value transpose(const Value& x) {
    require_rank2(x, "transpose");
    const Tensor& t = x.tensor();
    const std::size_t m = t.rows(), n = t.cols();
    Tensor out({n, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out.at(j, i) = t.at(i, j);
    NodePtr nx = x.node();
    return Value(make_node(std::move(out), {nx}, [nx, m, n](Node& self) {
        Tensor& gx = nx->ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) gx.at(i, j) += self.grad.at(j, i);
    }));
}

Value add(const Value& a, const Value& b) {
    require_rank2(a, "add");
    require_rank2(b, "add");
    const Tensor& ta = a.tensor();
    const Tensor& tb = b.tensor();
    if (ta.same_dims(tb)) {
        Tensor out = ta;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += tb[i];
        NodePtr na = a.node(), nb = b.node();
        return Value(make_node(std::move(out), {na, nb}, [na, nb](Node& self) {
            Tensor& ga = na->ensure_grad();
            Tensor& gb = nb->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                ga[i] += self.grad[i];
                gb[i] += self.grad[i];
            }
        }));
    }
    // Row broadcast: (n x d) + (1 x d), in either order.
    const bool a_is_row = ta.rows() == 1 && tb.cols() == ta.cols();
    const bool b_is_row = tb.rows() == 1 && ta.cols() == tb.cols();
    if (!a_is_row && !b_is_row)
        throw_shape("add: incompatible dims " + ta.dims_string() + " vs " + tb.dims_string());
    const Value& mat = b_is_row ? a : b;
    const Value& row = b_is_row ? b : a;
    const Tensor& tm = mat.tensor();
    const Tensor& tr = row.tensor();
    Tensor out = tm;
    for (std::size_t i = 0; i < tm.rows(); ++i)
        for (std::size_t j = 0; j < tm.cols(); ++j) out.at(i, j) += tr.at(0, j);
    NodePtr nm = mat.node(), nr = row.node();
    return Value(make_node(std::move(out), {nm, nr}, [nm, nr](Node& self) {
        Tensor& gm = nm->ensure_grad();
        Tensor& gr = nr->ensure_grad();
        for (std::size_t i = 0; i < self.grad.rows(); ++i)
            for (std::size_t j = 0; j < self.grad.cols(); ++j) {
                gm.at(i, j) += self.grad.at(i, j);
                gr.at(0, j) += self.grad.at(i, j);
            }
    }));
}

Value sub(const Value& a, const Value& b) { return add(a, scale(b, -1.0)); }

Value mul(const Value& a, const Value& b) {
    require_rank2(a, "mul");
    require_rank2(b, "mul");
    const Tensor& ta = a.tensor();
    const Tensor& tb = b.tensor();
    if (ta.same_dims(tb)) {
        Tensor out = ta;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] *= tb[i];
        NodePtr na = a.node(), nb = b.node();
        return Value(make_node(std::move(out), {na, nb}, [na, nb](Node& self) {
            Tensor& ga = na->ensure_grad();
            Tensor& gb = nb->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                ga[i] += self.grad[i] * nb->value[i];
                gb[i] += self.grad[i] * na->value[i];
            }
        }));
    }
    // 1x1 broadcast on either side.
    const bool a_scalar = ta.size() == 1;
    const bool b_scalar = tb.size() == 1;
    if (!a_scalar && !b_scalar)
        throw_shape("mul: incompatible dims " + ta.dims_string() + " vs " + tb.dims_string());
    const Value& big = a_scalar ? b : a;
    const Value& sc = a_scalar ? a : b;
    Tensor out = big.tensor();
    const double s = sc.tensor()[0];
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
    NodePtr nbig = big.node(), nsc = sc.node();
    return Value(make_node(std::move(out), {nbig, nsc}, [nbig, nsc](Node& self) {
        Tensor& gb = nbig->ensure_grad();
        Tensor& gs = nsc->ensure_grad();
        const double s = nsc->value[0];
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            gb[i] += self.grad[i] * s;
            gs[0] += self.grad[i] * nbig->value[i];
        }
    }));
}

Value scale(const Value& x, double c) {
    Tensor out = x.tensor();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c;
    NodePtr nx = x.node();
    return Value(make_node(std::move(out), {nx}, [nx, c](Node& self) {
        Tensor& gx = nx->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += c * self.grad[i];
    }));
}

Value add_const(const Value& x, double c) {
    Tensor out = x.tensor();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += c;
    NodePtr nx = x.node();
    return Value(make_node(std::move(out), {nx}, [nx](Node& self) {
        Tensor& gx = nx->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i];
    }));
}

Value neg(const Value& x) { return scale(x, -1.0); }

Value gelu(const Value& x) {
    static const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    static const double inv_sqrt2pi = 1.0 / std::sqrt(2.0 * 3.14159265358979323846);
    Tensor out = x.tensor();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = gelu_scalar(out[i]);
    NodePtr nx = x.node();
    return Value(make_node(std::move(out), {nx}, [nx](Node& self) {
        Tensor& gx = nx->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const double v = nx->value[i];
            const double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
            const double pdf = inv_sqrt2pi * std::exp(-0.5 * v * v);
            gx[i] += self.grad[i] * (cdf + v * pdf);
        }
    }));
}

Value elementwise(const Value& x, Elementwise kind) {
    Tensor out = x.tensor();
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double v = out[i];
        switch (kind) {
            case Elementwise::Sigmoid: out[i] = sigmoid(v); break;
            case Elementwise::Tanh: out[i] = std::tanh(v); break;
            case Elementwise::Hinge: out[i] = v > 0.0 ? v : 0.0; break;
            case Elementwise::Abs: out[i] = std::fabs(v); break;
        }
    }
    NodePtr nx = x.node();
    return Value(make_node(std::move(out), {nx}, [nx, kind](Node& self) {
        Tensor& gx = nx->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const double v = nx->value[i];
            double d = 0.0;
            switch (kind) {
                case Elementwise::Sigmoid: {
                    const double s = sigmoid(v);
                    d = s * (1.0 - s);
                    break;
                }
                case Elementwise::Tanh: {
                    const double t = std::tanh(v);
                    d = 1.0 - t * t;
                    break;
                }
                case Elementwise::Hinge:
                    // subgradient 0 at the kink
                    d = v > 0.0 ? 1.0 : 0.0;
                    break;
                case Elementwise::Abs:
                    d = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
                    break;
            }
            gx[i] += self.grad[i] * d;
        }
    }));
}

Value exp(const Value& x) {
    Tensor out = x.tensor();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(out[i]);
    NodePtr nx = x.node();
    return Value(make_node(std::move(out), {nx}, [nx](Node& self) {
        Tensor& gx = nx->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i] * self.value[i];
    }));
}

Value softmax(const Value& x, std::size_t axis) {
    require_rank2(x, "softmax");
    if (axis >= 2)
        throw_shape("softmax: axis " + std::to_string(axis) + " out of range for " +
                    x.tensor().dims_string());
    const Tensor& t = x.tensor();
    const std::size_t m = t.rows(), n = t.cols();
    Tensor out({m, n});
    const std::size_t slices = axis == 0 ? n : m;
    const std::size_t len = axis == 0 ? m : n;
    auto idx = [n, axis](std::size_t slice, std::size_t i) {
        return axis == 0 ? i * n + slice : slice * n + i;
    };
    for (std::size_t s = 0; s < slices; ++s) {
        double mx = t[idx(s, 0)];
        for (std::size_t i = 1; i < len; ++i) mx = std::max(mx, t[idx(s, i)]);
        double z = 0.0;
        for (std::size_t i = 0; i < len; ++i) {
            const double e = std::exp(t[idx(s, i)] - mx);
            out[idx(s, i)] = e;
            z += e;
        }
        for (std::size_t i = 0; i < len; ++i) out[idx(s, i)] /= z;
    }
    NodePtr nx = x.node();
    return Value(make_node(std::move(out), {nx}, [nx, slices, len, idx](Node& self) {
        Tensor& gx = nx->ensure_grad();
        for (std::size_t s = 0; s < slices; ++s) {
            double dot = 0.0;
            for (std::size_t i = 0; i < len; ++i) dot += self.grad[idx(s, i)] * self.value[idx(s, i)];
            for (std::size_t i = 0; i < len; ++i)
                gx[idx(s, i)] += self.value[idx(s, i)] * (self.grad[idx(s, i)] - dot);
        }
    }));
}

Value sum_rows(const Value& x) {
    require_rank2(x, "sum_rows");
    const Tensor& t = x.tensor();
    Tensor out({1, t.cols()});
    for (std::size_t i = 0; i < t.rows(); ++i)
        for (std::size_t j = 0; j < t.cols(); ++j) out.at(0, j) += t.at(i, j);
    NodePtr nx = x.node();
    return Value(make_node(std::move(out), {nx}, [nx](Node& self) {
        Tensor& gx = nx->ensure_grad();
        for (std::size_t i = 0; i < gx.rows(); ++i)
            for (std::size_t j = 0; j < gx.cols(); ++j) gx.at(i, j) += self.grad.at(0, j);
    }));
}

Value sum_all(const Value& x) {
    const Tensor& t = x.tensor();
    double s = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) s += t[i];
    NodePtr nx = x.node();
    return Value(make_node(Tensor::scalar(s), {nx}, [nx](Node& self) {
        Tensor& gx = nx->ensure_grad();
        const double g = self.grad[0];
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
    }));
}

Value mean_all(const Value& x) { return scale(sum_all(x), 1.0 / static_cast<double>(x.tensor().size())); }

Value concat_rows(std::span<const Value> parts) {
    if (parts.empty()) throw_contract("concat_rows: no operands");
    const std::size_t cols = parts[0].tensor().cols();
    std::size_t rows = 0;
    for (const Value& p : parts) {
        require_rank2(p, "concat_rows");
        if (p.tensor().cols() != cols)
            throw_shape("concat_rows: column mismatch, " + parts[0].tensor().dims_string() + " vs " +
                        p.tensor().dims_string());
        rows += p.tensor().rows();
    }
    Tensor out({rows, cols});
    std::size_t r0 = 0;
    std::vector<NodePtr> nodes;
    std::vector<std::size_t> offsets;
    for (const Value& p : parts) {
        const Tensor& t = p.tensor();
        for (std::size_t i = 0; i < t.rows(); ++i)
            for (std::size_t j = 0; j < cols; ++j) out.at(r0 + i, j) = t.at(i, j);
        nodes.push_back(p.node());
        offsets.push_back(r0);
        r0 += t.rows();
    }
    return Value(make_node(std::move(out), nodes, [nodes, offsets](Node& self) {
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            Tensor& g = nodes[k]->ensure_grad();
            for (std::size_t i = 0; i < g.rows(); ++i)
                for (std::size_t j = 0; j < g.cols(); ++j) g.at(i, j) += self.grad.at(offsets[k] + i, j);
        }
    }));
}

Value concat_cols(std::span<const Value> parts) {
    if (parts.empty()) throw_contract("concat_cols: no operands");
    const std::size_t rows = parts[0].tensor().rows();
    std::size_t cols = 0;
    for (const Value& p : parts) {
        require_rank2(p, "concat_cols");
        if (p.tensor().rows() != rows)
            throw_shape("concat_cols: row mismatch, " + parts[0].tensor().dims_string() + " vs " +
                        p.tensor().dims_string());
        cols += p.tensor().cols();
    }
    Tensor out({rows, cols});
    std::size_t c0 = 0;
    std::vector<NodePtr> nodes;
    std::vector<std::size_t> offsets;
    for (const Value& p : parts) {
        const Tensor& t = p.tensor();
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < t.cols(); ++j) out.at(i, c0 + j) = t.at(i, j);
        nodes.push_back(p.node());
        offsets.push_back(c0);
        c0 += t.cols();
    }
    return Value(make_node(std::move(out), nodes, [nodes, offsets](Node& self) {
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            Tensor& g = nodes[k]->ensure_grad();
            for (std::size_t i = 0; i < g.rows(); ++i)
                for (std::size_t j = 0; j < g.cols(); ++j) g.at(i, j) += self.grad.at(i, offsets[k] + j);
        }
    }));
}

Value slice_rows(const Value& x, std::size_t begin, std::size_t end) {
    require_rank2(x, "slice_rows");
    const Tensor& t = x.tensor();
    if (begin >= end || end > t.rows())
        throw_shape("slice_rows: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                    ") invalid for " + t.dims_string());
    Tensor out({end - begin, t.cols()});
    for (std::size_t i = begin; i < end; ++i)
        for (std::size_t j = 0; j < t.cols(); ++j) out.at(i - begin, j) = t.at(i, j);
    NodePtr nx = x.node();
    return Value(make_node(std::move(out), {nx}, [nx, begin](Node& self) {
        Tensor& gx = nx->ensure_grad();
        for (std::size_t i = 0; i < self.grad.rows(); ++i)
            for (std::size_t j = 0; j < self.grad.cols(); ++j) gx.at(begin + i, j) += self.grad.at(i, j);
    }));
}

Value slice_cols(const Value& x, std::size_t begin, std::size_t end) {
    require_rank2(x, "slice_cols");
    const Tensor& t = x.tensor();
    if (begin >= end || end > t.cols())
        throw_shape("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                    ") invalid for " + t.dims_string());
    Tensor out({t.rows(), end - begin});
    for (std::size_t i = 0; i < t.rows(); ++i)
        for (std::size_t j = begin; j < end; ++j) out.at(i, j - begin) = t.at(i, j);
    NodePtr nx = x.node();
    return Value(make_node(std::move(out), {nx}, [nx, begin](Node& self) {
        Tensor& gx = nx->ensure_grad();
        for (std::size_t i = 0; i < self.grad.rows(); ++i)
            for (std::size_t j = 0; j < self.grad.cols(); ++j) gx.at(i, begin + j) += self.grad.at(i, j);
    }));
}

void backward(const Value& root) {
    if (!root.valid()) throw_contract("backward: empty value");
    if (root.tensor().size() != 1)
        throw_contract("backward: root must be scalar, got " + root.tensor().dims_string());

    // Iterative post-order DFS for the topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root.node().get(), 0);
    visited.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* parent = node->parents[next++].get();
            if (visited.insert(parent).second) stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    // Interior gradients are scratch space for this pass; only leaves
    // accumulate across repeated calls.
    for (Node* n : order) {
        if (n->parents.empty()) n->ensure_grad();
        else n->grad = Tensor::zeros_like(n->value);
    }
    root.node()->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backprop) (*it)->backprop(**it);
}

}  // namespace mmss
