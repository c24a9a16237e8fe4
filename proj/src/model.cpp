#include "mmss/model.hpp"

namespace mmss {

const char* to_string(InteractionKind kind) {
    switch (kind) {
        case InteractionKind::PtRt: return "ptrt";
        case InteractionKind::PvRv: return "pvrv";
        case InteractionKind::PtRv: return "ptrv";
        case InteractionKind::PvRt: return "pvrt";
        case InteractionKind::RtRv: return "rtrv";
        case InteractionKind::Global: return "global";
    }
    return "?";
}

std::optional<InteractionKind> interaction_from_string(std::string_view s) {
    for (InteractionKind k : kSubtaskKinds)
        if (s == to_string(k)) return k;
    if (s == "global") return InteractionKind::Global;
    return std::nullopt;
}

std::vector<Value> ModelParams::all() const {
    std::vector<Value> out;
    visual_proj.collect(out);
    for (const auto& layer : interaction) layer.collect(out);
    fusion.collect(out);
    global_head.collect(out);
    for (const auto& layer : subtask_proj) layer.collect(out);
    for (const auto& head : subtask_heads) head.collect(out);
    for (const auto& lv : log_vars) out.push_back(lv);
    return out;
}

ModelParams init_model(const ModelDims& dims, std::uint64_t seed) {
    if (dims.d_t != dims.d_v)
        throw_usage("model dims: d_t (" + std::to_string(dims.d_t) + ") must equal d_v (" +
                    std::to_string(dims.d_v) + "); the cross-modal interactions concatenate text and "
                    "visual sequences along the sequence axis");
    if (dims.d_t == 0 || dims.d_f == 0 || dims.d_g == 0 || dims.d_roi == 0)
        throw_usage("model dims: all dimensions must be positive");

    Rng rng(Rng::mix(seed, 0x90DE1));
    ModelParams p;
    p.dims = dims;
    p.visual_proj = make_attention(dims.d_roi, dims.d_v, dims.heads, rng, "visual_proj");
    for (std::size_t i = 0; i < kNumSubtasks; ++i) {
        const std::string prefix = std::string("interact.") + to_string(kSubtaskKinds[i]);
        p.interaction[i] = make_attention(dims.d_t, dims.d_f, dims.heads, rng, prefix);
    }
    p.fusion = make_linear(kNumSubtasks * dims.d_f, dims.d_g, rng, "fusion");
    p.global_head = make_linear(dims.d_g, 1, rng, "global_head");
    for (std::size_t i = 0; i < kNumSubtasks; ++i) {
        const std::string kind = to_string(kSubtaskKinds[i]);
        p.subtask_proj[i] = make_linear(dims.d_f, dims.d_f, rng, "subtask." + kind + ".proj");
        p.subtask_heads[i] = make_mlp_head(dims.d_f, rng, "subtask." + kind + ".head");
        p.log_vars[i] = Value::leaf(Tensor::scalar(0.0), "log_var." + kind);
    }
    return p;
}

FeatureBundle make_bundle(const ProductRecord& product, const ReviewRecord& review) {
    FeatureBundle b;
    b.t_p = Value::constant(product.text_features);
    b.t_r = Value::constant(review.text_features);
    b.v_p_raw = Value::constant(product.image_features);
    b.v_r_raw = Value::constant(review.image_features);
    return b;
}

void project_visual(const ModelParams& params, FeatureBundle& bundle) {
    if (!bundle.v_p_raw.valid() || !bundle.v_r_raw.valid())
        throw_contract("project_visual: bundle has no raw RoI features");
    const std::size_t m_p = bundle.v_p_raw.tensor().rows();
    const std::size_t m_r = bundle.v_r_raw.tensor().rows();
    if (m_p == 0 || m_r == 0) throw_contract("project_visual: RoI matrices must have rows");
    const std::array<Value, 2> parts = {bundle.v_p_raw, bundle.v_r_raw};
    const Value joint = self_attention(params.visual_proj, concat_rows(parts));
    bundle.v_p = slice_rows(joint, 0, m_p);
    bundle.v_r = slice_rows(joint, m_p, m_p + m_r);
    bundle.projected = true;
}

namespace {

std::pair<Value, Value> interaction_operands(InteractionKind kind, const FeatureBundle& b) {
    switch (kind) {
        case InteractionKind::PtRt: return {b.t_p, b.t_r};
        case InteractionKind::PvRv: return {b.v_p, b.v_r};
        case InteractionKind::PtRv: return {b.t_p, b.v_r};
        case InteractionKind::PvRt: return {b.v_p, b.t_r};
        case InteractionKind::RtRv: return {b.t_r, b.v_r};
        case InteractionKind::Global: break;
    }
    throw_contract("interact: Global is not an interaction kind");
}

}  // namespace

Value interact(const ModelParams& params, InteractionKind kind, const FeatureBundle& bundle) {
    if (kind == InteractionKind::Global) throw_contract("interact: Global is not an interaction kind");
    if (!bundle.projected) throw_contract("interact: bundle is not projected");
    const auto [first, second] = interaction_operands(kind, bundle);
    const std::array<Value, 2> parts = {first, second};
    const Value attended = self_attention(params.interaction[static_cast<int>(kind)], concat_rows(parts));
    return soft_pool(attended);
}

ForwardOutput forward(const ModelParams& params, const FeatureBundle& bundle) {
    if (!bundle.projected) throw_contract("forward: bundle is not projected");

    std::array<Value, kNumSubtasks> f_s;
    for (std::size_t i = 0; i < kNumSubtasks; ++i) f_s[i] = interact(params, kSubtaskKinds[i], bundle);

    const Value f_c = concat_cols(std::span<const Value>(f_s.data(), f_s.size()));
    ForwardOutput out;
    out.f_g_star = gelu(linear(params.fusion, f_c));
    out.y_hat_g = linear(params.global_head, out.f_g_star);
    for (std::size_t i = 0; i < kNumSubtasks; ++i) {
        out.f_s_star[i] = gelu(linear(params.subtask_proj[i], f_s[i]));
        out.y_hat_s[i] = mlp_head(params.subtask_heads[i], out.f_s_star[i]);
    }
    return out;
}

std::vector<Value> DirectConcatParams::all() const {
    std::vector<Value> out;
    head.collect(out);
    return out;
}

DirectConcatParams init_direct_concat(std::size_t d_t, std::size_t d_roi, std::uint64_t seed) {
    Rng rng(Rng::mix(seed, 0xD17EC));
    DirectConcatParams p;
    p.d_t = d_t;
    p.d_roi = d_roi;
    p.head = make_mlp_head(2 * (d_t + d_roi), rng, "direct.head");
    return p;
}

namespace {

Value mean_pool_rows(const Value& x) { return scale(sum_rows(x), 1.0 / static_cast<double>(x.tensor().rows())); }

}  // namespace

Value direct_forward(const DirectConcatParams& params, const ProductRecord& product,
                     const ReviewRecord& review) {
    const std::array<Value, 4> pooled = {
        mean_pool_rows(Value::constant(product.text_features)),
        mean_pool_rows(Value::constant(product.image_features)),
        mean_pool_rows(Value::constant(review.text_features)),
        mean_pool_rows(Value::constant(review.image_features)),
    };
    return mlp_head(params.head, concat_cols(pooled));
}

}  // namespace mmss
