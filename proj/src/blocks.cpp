#include "mmss/blocks.hpp"

#include <array>
#include <cmath>

namespace mmss {

void SelfAttentionLayer::collect(std::vector<Value>& out) const {
    out.push_back(w_q);
    out.push_back(b_q);
    out.push_back(w_k);
    out.push_back(b_k);
    out.push_back(w_v);
    out.push_back(b_v);
}

void LinearLayer::collect(std::vector<Value>& out) const {
    out.push_back(w);
    out.push_back(b);
}

void MlpHead::collect(std::vector<Value>& out) const {
    l1.collect(out);
    l2.collect(out);
}

Value self_attention(const SelfAttentionLayer& layer, const Value& x) {
    if (x.tensor().rank() != 2 || x.tensor().rows() < 1)
        throw_contract("self_attention: non-empty sequence matrix required");
    if (x.tensor().cols() != layer.d_in())
        throw_shape("self_attention: input has " + std::to_string(x.tensor().cols()) +
                    " columns, layer expects " + std::to_string(layer.d_in()));
    const std::size_t d_out = layer.d_out();
    const std::size_t heads = layer.heads;
    if (heads == 0 || d_out % heads != 0)
        throw_contract("self_attention: head count " + std::to_string(heads) +
                       " does not divide d_out " + std::to_string(d_out));
    const std::size_t d_head = d_out / heads;

    const Value q = affine(x, layer.w_q, layer.b_q);
    const Value k = affine(x, layer.w_k, layer.b_k);
    const Value v = affine(x, layer.w_v, layer.b_v);

    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(d_head));
    if (heads == 1) {
        const Value attn = softmax(scale(matmul(q, transpose(k)), inv_scale), 1);
        return matmul(attn, v);
    }
    std::vector<Value> outs;
    outs.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t c0 = h * d_head, c1 = (h + 1) * d_head;
        const Value qh = slice_cols(q, c0, c1);
        const Value kh = slice_cols(k, c0, c1);
        const Value vh = slice_cols(v, c0, c1);
        const Value attn = softmax(scale(matmul(qh, transpose(kh)), inv_scale), 1);
        outs.push_back(matmul(attn, vh));
    }
    return concat_cols(outs);
}

Value soft_pool(const Value& x) {
    if (x.tensor().rank() != 2 || x.tensor().rows() < 1)
        throw_contract("soft_pool: non-empty sequence matrix required");
    const Value weights = softmax(x, 0);
    return sum_rows(mul(weights, x));
}

Value linear(const LinearLayer& layer, const Value& x) { return affine(x, layer.w, layer.b); }

Value mlp_head(const MlpHead& head, const Value& x) {
    return linear(head.l2, gelu(linear(head.l1, x)));
}

Tensor glorot_uniform(std::size_t d_in, std::size_t d_out, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(d_in + d_out));
    Tensor t({d_in, d_out});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
    return t;
}

LinearLayer make_linear(std::size_t d_in, std::size_t d_out, Rng& rng, const std::string& prefix) {
    LinearLayer l;
    l.w = Value::leaf(glorot_uniform(d_in, d_out, rng), prefix + ".w");
    l.b = Value::leaf(Tensor({1, d_out}), prefix + ".b");
    return l;
}

SelfAttentionLayer make_attention(std::size_t d_in, std::size_t d_out, std::size_t heads, Rng& rng,
                                  const std::string& prefix) {
    if (heads == 0 || d_out % heads != 0)
        throw_usage("attention layer " + prefix + ": heads " + std::to_string(heads) +
                    " must divide d_out " + std::to_string(d_out));
    SelfAttentionLayer l;
    l.w_q = Value::leaf(glorot_uniform(d_in, d_out, rng), prefix + ".w_q");
    l.b_q = Value::leaf(Tensor({1, d_out}), prefix + ".b_q");
    l.w_k = Value::leaf(glorot_uniform(d_in, d_out, rng), prefix + ".w_k");
    l.b_k = Value::leaf(Tensor({1, d_out}), prefix + ".b_k");
    l.w_v = Value::leaf(glorot_uniform(d_in, d_out, rng), prefix + ".w_v");
    l.b_v = Value::leaf(Tensor({1, d_out}), prefix + ".b_v");
    l.heads = heads;
    return l;
}

MlpHead make_mlp_head(std::size_t d_in, Rng& rng, const std::string& prefix) {
    const std::size_t hidden = (d_in + 1) / 2;
    MlpHead h;
    h.l1 = make_linear(d_in, hidden, rng, prefix + ".l1");
    h.l2 = make_linear(hidden, 1, rng, prefix + ".l2");
    return h;
}

}  // namespace mmss
