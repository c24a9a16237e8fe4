#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mmss/blocks.hpp"
#include "mmss/dataset.hpp"

namespace mmss {

// The five cross-modal interactions plus the global task.
enum class InteractionKind : int { PtRt = 0, PvRv = 1, PtRv = 2, PvRt = 3, RtRv = 4, Global = 5 };

inline constexpr std::array<InteractionKind, 5> kSubtaskKinds = {
    InteractionKind::PtRt, InteractionKind::PvRv, InteractionKind::PtRv, InteractionKind::PvRt,
    InteractionKind::RtRv};

inline constexpr std::size_t kNumSubtasks = 5;

const char* to_string(InteractionKind kind);
std::optional<InteractionKind> interaction_from_string(std::string_view s);

struct ModelDims {
    std::size_t d_t = 128;
    std::size_t d_v = 128;
    std::size_t d_f = 128;
    std::size_t d_g = 128;
    std::size_t d_roi = 2048;  // taken from the dataset at model build time
    std::size_t heads = 1;
};

struct ModelParams {
    ModelDims dims;
    SelfAttentionLayer visual_proj;                     // d_roi -> d_v
    std::array<SelfAttentionLayer, kNumSubtasks> interaction;  // d_t -> d_f
    LinearLayer fusion;                                 // 5 d_f -> d_g
    LinearLayer global_head;                            // d_g -> 1
    std::array<LinearLayer, kNumSubtasks> subtask_proj;        // d_f -> d_f
    std::array<MlpHead, kNumSubtasks> subtask_heads;           // d_f -> 1
    std::array<Value, kNumSubtasks> log_vars;                  // 1x1 each

    // Every learnable leaf in a fixed order; the optimizer and checkpoints
    // rely on this order being stable.
    std::vector<Value> all() const;
};

ModelParams init_model(const ModelDims& dims, std::uint64_t seed);

struct FeatureBundle {
    Value t_p, t_r;          // text sequences
    Value v_p_raw, v_r_raw;  // raw RoI sequences
    Value v_p, v_r;          // filled by project_visual
    bool projected = false;
};

FeatureBundle make_bundle(const ProductRecord& product, const ReviewRecord& review);

// Concatenates product and review RoI rows, runs the shared visual attention
// layer, and splits the result back into v_p / v_r.
void project_visual(const ModelParams& params, FeatureBundle& bundle);

// One interaction: concatenate the two operand sequences, attend, soft-pool.
Value interact(const ModelParams& params, InteractionKind kind, const FeatureBundle& bundle);

struct ForwardOutput {
    Value y_hat_g;                                // 1x1
    std::array<Value, kNumSubtasks> y_hat_s;      // 1x1 each
    Value f_g_star;                               // 1 x d_g
    std::array<Value, kNumSubtasks> f_s_star;     // 1 x d_f each
};

// Full forward pass. F_c concatenation order is fixed: PtRt, PvRv, PtRv,
// PvRt, RtRv. Subtask heads branch off each f_s after it feeds the fusion,
// so they never influence y_hat_g.
ForwardOutput forward(const ModelParams& params, const FeatureBundle& bundle);

// Baseline variant: mean-pool the four raw feature matrices, concatenate,
// and score with a single MLP. Used by the direct-concat ablation.
struct DirectConcatParams {
    std::size_t d_t = 0;
    std::size_t d_roi = 0;
    MlpHead head;
    std::vector<Value> all() const;
};

DirectConcatParams init_direct_concat(std::size_t d_t, std::size_t d_roi, std::uint64_t seed);
Value direct_forward(const DirectConcatParams& params, const ProductRecord& product,
                     const ReviewRecord& review);

}  // namespace mmss
