#pragma once

#include <string>
#include <vector>

#include "mmss/autodiff.hpp"
#include "mmss/rng.hpp"

namespace mmss {

// Scaled dot-product self-attention. No causal mask, no residual, no
// positional encoding: inputs arrive already contextualized.
struct SelfAttentionLayer {
    Value w_q, w_k, w_v;  // d_in x d_out
    Value b_q, b_k, b_v;  // 1 x d_out
    std::size_t heads = 1;

    std::size_t d_in() const { return w_q.tensor().rows(); }
    std::size_t d_out() const { return w_q.tensor().cols(); }
    void collect(std::vector<Value>& out) const;
};

struct LinearLayer {
    Value w;  // d_in x d_out
    Value b;  // 1 x d_out

    std::size_t d_in() const { return w.tensor().rows(); }
    std::size_t d_out() const { return w.tensor().cols(); }
    void collect(std::vector<Value>& out) const;
};

// Two linear layers with a GELU between; output dim is exactly 1.
struct MlpHead {
    LinearLayer l1;  // d -> ceil(d/2)
    LinearLayer l2;  // ceil(d/2) -> 1
    void collect(std::vector<Value>& out) const;
};

// x: n x d_in -> n x d_out. softmax(Q K^T / sqrt(d_out/heads)) V per head,
// heads concatenated along columns.
Value self_attention(const SelfAttentionLayer& layer, const Value& x);

// x: n x d -> 1 x d. Per-column softmax-weighted average over the sequence
// axis, max-subtracted for stability.
Value soft_pool(const Value& x);

Value linear(const LinearLayer& layer, const Value& x);
Value mlp_head(const MlpHead& head, const Value& x);

// Glorot-uniform weights, zero biases. Identical seed state gives
// bit-identical parameters.
Tensor glorot_uniform(std::size_t d_in, std::size_t d_out, Rng& rng);
LinearLayer make_linear(std::size_t d_in, std::size_t d_out, Rng& rng, const std::string& prefix);
SelfAttentionLayer make_attention(std::size_t d_in, std::size_t d_out, std::size_t heads, Rng& rng,
                                  const std::string& prefix);
MlpHead make_mlp_head(std::size_t d_in, Rng& rng, const std::string& prefix);

}  // namespace mmss
