#pragma once

#include "vit5/ops.hpp"
#include "vit5/rope.hpp"

namespace vit5::nn {

// Bias-free RMS normalization (gain only).
struct RmsNormParams {
    Tensor gain;
    double eps = 1e-6;
};

struct LayerNormParams {
    Tensor gain;
    Tensor bias;
    double eps = 1e-6;
};

// Either normalization behind one call site; kind chosen at build time.
struct NormParams {
    bool is_rms = true;
    Tensor gain;
    Tensor bias;  // layernorm only
    double eps = 1e-6;
};

Tensor rmsnorm(const Tensor& x, const RmsNormParams& p);
Tensor apply_norm(const Tensor& x, const NormParams& p);

struct LayerScaleParams {
    Tensor lambda;  // [d]
};

struct PostNormParams {
    Tensor lambda_p;  // [d], doubles as the post-RMSNorm gain
    double eps = 1e-6;
};

// x + block_out * lambda (lambda broadcast over tokens).
Tensor layerscale_residual(const Tensor& x, const Tensor& block_out, const LayerScaleParams& p);
// rmsnorm(x + block_out) * lambda_p.
Tensor postnorm_residual(const Tensor& x, const Tensor& block_out, const PostNormParams& p);

enum class MlpVariant { Gelu, SwiGlu };

struct MlpParams {
    MlpVariant variant = MlpVariant::Gelu;
    Tensor w_in;    // [d, hidden]
    Tensor w_gate;  // [d, hidden], SwiGLU only
    Tensor w_out;   // [hidden, d]
    std::int64_t hidden_dim = 0;
};

// Hidden width for the gated variant: round_to_multiple(floor(2/3 * 4d), 8),
// keeping parameter counts within 2% of the GeLU MLP.
std::int64_t swiglu_hidden_dim(std::int64_t d);
std::int64_t mlp_param_count(MlpVariant variant, std::int64_t d);

// hidden_capture, when non-null, receives the detached pre-projection
// activations (gelu output, or the gated product for SwiGLU).
Tensor mlp_forward(const Tensor& x, const MlpParams& p, Tensor* hidden_capture = nullptr);

struct AttentionParams {
    int heads = 1;
    Tensor w_q, w_k, w_v, w_o;  // [d, d]
    Tensor b_q, b_k, b_v;       // undefined when bias-free
    Tensor qk_q_gain;           // [heads, d_head], undefined when QK-Norm off
    Tensor qk_k_gain;
    double qk_eps = 1e-6;

    bool has_bias() const { return b_q.defined(); }
    bool has_qk_norm() const { return qk_q_gain.defined(); }
};

struct AttentionCapture {
    Tensor probs;   // [B, heads, T, T], detached
    Tensor logits;  // [B, heads, T, T] pre-softmax (scaled), detached
};

// Project (bias optional) -> per-head QK RMS-norm (optional) -> rotate Q and
// K (V untouched) -> scaled dot-product (1/sqrt(d_head)) -> softmax -> value
// average -> output projection. Throws NumericError naming layer_index when
// logits go non-finite.
Tensor qk_normalized_attention(const Tensor& x, const AttentionParams& p,
                               const RopeAngles* angles, int layer_index,
                               AttentionCapture* capture = nullptr);

// Fraction of activations with |a| < threshold_ratio * RMS(activations).
double gating_sparsity(const Tensor& activations, double threshold_ratio = 1e-3);

}  // namespace vit5::nn
