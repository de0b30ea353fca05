#include "vit5/nn.hpp"

#include <cmath>

namespace vit5::nn {

Tensor rmsnorm(const Tensor& x, const RmsNormParams& p) {
    return ops::rmsnorm(x, p.gain, p.eps);
}

Tensor apply_norm(const Tensor& x, const NormParams& p) {
    if (p.is_rms) return ops::rmsnorm(x, p.gain, p.eps);
    return ops::layernorm(x, p.gain, p.bias, p.eps);
}

Tensor layerscale_residual(const Tensor& x, const Tensor& block_out, const LayerScaleParams& p) {
    if (x.shape() != block_out.shape()) {
        throw ShapeError("layerscale_residual: shape mismatch " + shape_str(x.shape()) + " vs " +
                         shape_str(block_out.shape()));
    }
    return ops::add(x, ops::mul_rowvec(block_out, p.lambda));
}

Tensor postnorm_residual(const Tensor& x, const Tensor& block_out, const PostNormParams& p) {
    if (x.shape() != block_out.shape()) {
        throw ShapeError("postnorm_residual: shape mismatch " + shape_str(x.shape()) + " vs " +
                         shape_str(block_out.shape()));
    }
    return ops::rmsnorm(ops::add(x, block_out), p.lambda_p, p.eps);
}

std::int64_t swiglu_hidden_dim(std::int64_t d) {
    const std::int64_t raw = (2 * 4 * d) / 3;
    const std::int64_t rounded = ((raw + 4) / 8) * 8;
    return rounded > 0 ? rounded : 8;
}

std::int64_t mlp_param_count(MlpVariant variant, std::int64_t d) {
    if (variant == MlpVariant::Gelu) return d * (4 * d) + (4 * d) * d;
    const std::int64_t h = swiglu_hidden_dim(d);
    return 3 * d * h;
}

Tensor mlp_forward(const Tensor& x, const MlpParams& p, Tensor* hidden_capture) {
    Tensor hidden;
    if (p.variant == MlpVariant::Gelu) {
        hidden = ops::gelu(ops::matmul(x, p.w_in));
    } else {
        hidden = ops::mul(ops::silu(ops::matmul(x, p.w_gate)), ops::matmul(x, p.w_in));
    }
    if (hidden_capture) *hidden_capture = hidden.detached();
    return ops::matmul(hidden, p.w_out);
}

Tensor qk_normalized_attention(const Tensor& x, const AttentionParams& p,
                               const RopeAngles* angles, int layer_index,
                               AttentionCapture* capture) {
    if (x.ndim() != 3) {
        throw ShapeError("attention: expected [batch, tokens, dim], got " + shape_str(x.shape()));
    }
    const std::int64_t B = x.dim(0), T = x.dim(1), d = x.dim(2);
    const std::int64_t H = p.heads;
    if (H <= 0 || d % H != 0) {
        throw ShapeError("attention: dim " + std::to_string(d) + " not divisible by " +
                         std::to_string(H) + " heads");
    }
    const std::int64_t dh = d / H;
    if (angles && angles->tokens != T) {
        throw ShapeError("attention: rope banks cover " + std::to_string(angles->tokens) +
                         " tokens, sequence has " + std::to_string(T));
    }

    auto project = [&](const Tensor& w, const Tensor& b) {
        Tensor y = ops::matmul(x, w);
        if (b.defined()) y = ops::add_rowvec(y, b);
        // [B, T, d] -> [B, H, T, dh]
        return ops::permute(ops::reshape(y, {B, T, H, dh}), {0, 2, 1, 3});
    };

    Tensor q = project(p.w_q, p.b_q);
    Tensor k = project(p.w_k, p.b_k);
    Tensor v = project(p.w_v, p.b_v);

    if (p.has_qk_norm()) {
        q = ops::rmsnorm_per_head(q, p.qk_q_gain, p.qk_eps);
        k = ops::rmsnorm_per_head(k, p.qk_k_gain, p.qk_eps);
    }
    if (angles) {
        q = ops::rope_rotate(q, angles->cos_bank, angles->sin_bank);
        k = ops::rope_rotate(k, angles->cos_bank, angles->sin_bank);
    }

    Tensor logits = ops::scale(ops::matmul(q, ops::transpose_last2(k)),
                               1.0 / std::sqrt(static_cast<double>(dh)));
    if (!ops::all_finite(logits)) {
        throw NumericError("attention: non-finite logits in layer " + std::to_string(layer_index),
                           layer_index);
    }
    Tensor probs = ops::softmax_lastdim(logits);
    if (capture) {
        capture->probs = probs.detached();
        capture->logits = logits.detached();
    }

    Tensor ctx = ops::matmul(probs, v);  // [B, H, T, dh]
    Tensor merged = ops::reshape(ops::permute(ctx, {0, 2, 1, 3}), {B, T, d});
    return ops::matmul(merged, p.w_o);
}

double gating_sparsity(const Tensor& activations, double threshold_ratio) {
    if (threshold_ratio <= 0.0) {
        throw ConfigError("gating_sparsity: threshold ratio must be positive");
    }
    const auto& a = activations.data();
    if (a.empty()) return 0.0;
    double ss = 0.0;
    for (double v : a) ss += v * v;
    const double rms = std::sqrt(ss / static_cast<double>(a.size()));
    if (rms == 0.0) return 1.0;  // every activation is dead
    const double threshold = threshold_ratio * rms;
    std::int64_t below = 0;
    for (double v : a) {
        if (std::abs(v) < threshold) ++below;
    }
    return static_cast<double>(below) / static_cast<double>(a.size());
}

}  // namespace vit5::nn
