#pragma once

#include <memory>
#include <vector>

#include "vit5/tensor.hpp"

namespace vit5::ops {

// tanh-approximation coefficient sqrt(2/pi).
inline constexpr double kGeluCoeff = 0.7978845608028654;
inline constexpr double kGeluCubic = 0.044715;

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double c);

// x[.., d] op v[d], broadcast over leading dims.
Tensor add_rowvec(const Tensor& x, const Tensor& v);
Tensor mul_rowvec(const Tensor& x, const Tensor& v);

// a[.., m, k] x b[.., k, n] -> [.., m, n]. Leading batch dims must match
// exactly, or be absent on one side (shared operand). Summation runs in
// ascending k order.
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor softmax_lastdim(const Tensor& x);
Tensor gelu(const Tensor& x);
Tensor silu(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);
Tensor transpose_last2(const Tensor& x);
Tensor permute(const Tensor& x, const std::vector<int>& axes);

// Token-axis (axis 1) helpers for [B, T, d] sequences.
Tensor concat_tokens(const std::vector<Tensor>& parts);
Tensor slice_tokens(const Tensor& x, std::int64_t start, std::int64_t len);
Tensor mean_tokens(const Tensor& x);

Tensor mean_lastdims(const Tensor& x, int ndims);
Tensor gather_rows(const Tensor& x, const std::vector<std::int64_t>& rows);
Tensor sum(const Tensor& x);

// Mean cross-entropy over the batch; labels index the last dim.
Tensor cross_entropy_with_logits(const Tensor& logits, const std::vector<std::int64_t>& labels);

// out = x / sqrt(mean(x^2) + eps) * gain over the last dim; gain has that
// dim's extent.
Tensor rmsnorm(const Tensor& x, const Tensor& gain, double eps);
// x[B, H, T, dh] with gain[H, dh]: RMS over dh, per-head gains.
Tensor rmsnorm_per_head(const Tensor& x, const Tensor& gain, double eps);
Tensor layernorm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps);

// Per-pair rotation of the last dim: pair j = channels (2j, 2j+1) rotated by
// the angle whose cos/sin sit at [t, j]. cos/sin are plain per-token banks of
// size T * (dh/2); x is [B, H, T, dh] or [T, dh].
Tensor rope_rotate(const Tensor& x, std::shared_ptr<const std::vector<double>> cos_bank,
                   std::shared_ptr<const std::vector<double>> sin_bank);

// images[B, C, H, W] -> [B, (H/p)*(W/p), C*p*p], features ordered (c, py, px).
Tensor extract_patches(const Tensor& images, std::int64_t patch);

// x[T, d] -> [B, T, d] by repetition; gradient sums over the batch copies.
Tensor tile_batch(const Tensor& x, std::int64_t batch);

bool all_finite(const Tensor& x);

}  // namespace vit5::ops
