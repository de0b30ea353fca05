#include "vit5/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vit5::ops {

namespace {

using Buf = std::vector<double>;
using BufPtr = std::shared_ptr<Buf>;

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
}

std::int64_t last_dim(const Tensor& x) {
    if (x.ndim() < 1) throw ShapeError("op: tensor has no dims");
    return x.shape().back();
}

template <typename F, typename DF>
Tensor unary_op(const char* name, const Tensor& x, F f, DF df) {
    const std::int64_t n = x.numel();
    Buf out(static_cast<std::size_t>(n));
    const Buf& xd = x.data();
    parallel_for(n, 4096, [&](std::int64_t b, std::int64_t e) {
        for (std::int64_t i = b; i < e; ++i) out[i] = f(xd[i]);
    });
    return make_op_output(name, x.shape(), std::move(out), {x}, [&](BufPtr og, BufPtr) {
        Tensor xt = x;
        auto xdata = x.shared_data();
        return [xt, xdata, og, df]() mutable {
            if (!xt.requires_grad()) return;
            const std::int64_t n2 = static_cast<std::int64_t>(og->size());
            Buf g(static_cast<std::size_t>(n2));
            parallel_for(n2, 4096, [&](std::int64_t b, std::int64_t e) {
                for (std::int64_t i = b; i < e; ++i) g[i] = df((*xdata)[i]) * (*og)[i];
            });
            xt.accumulate_grad(g);
        };
    });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape("add", a, b);
    const std::int64_t n = a.numel();
    Buf out(static_cast<std::size_t>(n));
    const Buf &ad = a.data(), &bd = b.data();
    parallel_for(n, 8192, [&](std::int64_t s, std::int64_t e) {
        for (std::int64_t i = s; i < e; ++i) out[i] = ad[i] + bd[i];
    });
    return make_op_output("add", a.shape(), std::move(out), {a, b}, [&](BufPtr og, BufPtr) {
        Tensor at = a, bt = b;
        return [at, bt, og]() mutable {
            if (at.requires_grad()) at.accumulate_grad(*og);
            if (bt.requires_grad()) bt.accumulate_grad(*og);
        };
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape("mul", a, b);
    const std::int64_t n = a.numel();
    Buf out(static_cast<std::size_t>(n));
    const Buf &ad = a.data(), &bd = b.data();
    parallel_for(n, 8192, [&](std::int64_t s, std::int64_t e) {
        for (std::int64_t i = s; i < e; ++i) out[i] = ad[i] * bd[i];
    });
    return make_op_output("mul", a.shape(), std::move(out), {a, b}, [&](BufPtr og, BufPtr) {
        Tensor at = a, bt = b;
        auto adata = a.shared_data(), bdata = b.shared_data();
        return [at, bt, adata, bdata, og]() mutable {
            const std::size_t n2 = og->size();
            if (at.requires_grad()) {
                Buf g(n2);
                for (std::size_t i = 0; i < n2; ++i) g[i] = (*bdata)[i] * (*og)[i];
                at.accumulate_grad(g);
            }
            if (bt.requires_grad()) {
                Buf g(n2);
                for (std::size_t i = 0; i < n2; ++i) g[i] = (*adata)[i] * (*og)[i];
                bt.accumulate_grad(g);
            }
        };
    });
}

Tensor scale(const Tensor& x, double c) {
    const std::int64_t n = x.numel();
    Buf out(static_cast<std::size_t>(n));
    const Buf& xd = x.data();
    for (std::int64_t i = 0; i < n; ++i) out[i] = xd[i] * c;
    return make_op_output("scale", x.shape(), std::move(out), {x}, [&](BufPtr og, BufPtr) {
        Tensor xt = x;
        return [xt, og, c]() mutable {
            if (!xt.requires_grad()) return;
            Buf g(og->size());
            for (std::size_t i = 0; i < g.size(); ++i) g[i] = (*og)[i] * c;
            xt.accumulate_grad(g);
        };
    });
}

Tensor add_rowvec(const Tensor& x, const Tensor& v) {
    const std::int64_t d = last_dim(x);
    if (v.ndim() != 1 || v.dim(0) != d) {
        throw ShapeError("add_rowvec: vector " + shape_str(v.shape()) + " does not match last dim of " +
                         shape_str(x.shape()));
    }
    const std::int64_t rows = x.numel() / d;
    Buf out(static_cast<std::size_t>(x.numel()));
    const Buf &xd = x.data(), &vd = v.data();
    parallel_for(rows, 64, [&](std::int64_t s, std::int64_t e) {
        for (std::int64_t r = s; r < e; ++r) {
            const std::int64_t base = r * d;
            for (std::int64_t j = 0; j < d; ++j) out[base + j] = xd[base + j] + vd[j];
        }
    });
    return make_op_output("add_rowvec", x.shape(), std::move(out), {x, v}, [&](BufPtr og, BufPtr) {
        Tensor xt = x, vt = v;
        return [xt, vt, og, rows, d]() mutable {
            if (xt.requires_grad()) xt.accumulate_grad(*og);
            if (vt.requires_grad()) {
                Buf g(static_cast<std::size_t>(d), 0.0);
                for (std::int64_t r = 0; r < rows; ++r) {
                    const std::int64_t base = r * d;
                    for (std::int64_t j = 0; j < d; ++j) g[j] += (*og)[base + j];
                }
                vt.accumulate_grad(g);
            }
        };
    });
}

Tensor mul_rowvec(const Tensor& x, const Tensor& v) {
    const std::int64_t d = last_dim(x);
    if (v.ndim() != 1 || v.dim(0) != d) {
        throw ShapeError("mul_rowvec: vector " + shape_str(v.shape()) + " does not match last dim of " +
                         shape_str(x.shape()));
    }
    const std::int64_t rows = x.numel() / d;
    Buf out(static_cast<std::size_t>(x.numel()));
    const Buf &xd = x.data(), &vd = v.data();
    parallel_for(rows, 64, [&](std::int64_t s, std::int64_t e) {
        for (std::int64_t r = s; r < e; ++r) {
            const std::int64_t base = r * d;
            for (std::int64_t j = 0; j < d; ++j) out[base + j] = xd[base + j] * vd[j];
        }
    });
    return make_op_output("mul_rowvec", x.shape(), std::move(out), {x, v}, [&](BufPtr og, BufPtr) {
        Tensor xt = x, vt = v;
        auto xdata = x.shared_data(), vdata = v.shared_data();
        return [xt, vt, xdata, vdata, og, rows, d]() mutable {
            if (xt.requires_grad()) {
                Buf g(og->size());
                parallel_for(rows, 64, [&](std::int64_t s, std::int64_t e) {
                    for (std::int64_t r = s; r < e; ++r) {
                        const std::int64_t base = r * d;
                        for (std::int64_t j = 0; j < d; ++j) g[base + j] = (*og)[base + j] * (*vdata)[j];
                    }
                });
                xt.accumulate_grad(g);
            }
            if (vt.requires_grad()) {
                Buf g(static_cast<std::size_t>(d), 0.0);
                for (std::int64_t r = 0; r < rows; ++r) {
                    const std::int64_t base = r * d;
                    for (std::int64_t j = 0; j < d; ++j) g[j] += (*og)[base + j] * (*xdata)[base + j];
                }
                vt.accumulate_grad(g);
            }
        };
    });
}

// ---------------------------------------------------------------------------
// matmul
// ---------------------------------------------------------------------------

namespace {

struct MatmulDims {
    std::int64_t batch;  // broadcast batch count
    std::int64_t m, k, n;
    bool a_batched, b_batched;
};

MatmulDims matmul_dims(const Tensor& a, const Tensor& b) {
    if (a.ndim() < 2 || b.ndim() < 2) {
        throw ShapeError("matmul: operands must have >= 2 dims, got " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
    }
    MatmulDims dims{};
    dims.m = a.dim(-2);
    dims.k = a.dim(-1);
    const std::int64_t k2 = b.dim(-2);
    dims.n = b.dim(-1);
    if (dims.k != k2) {
        throw ShapeError("matmul: inner dims disagree, " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    }
    const Shape a_batch(a.shape().begin(), a.shape().end() - 2);
    const Shape b_batch(b.shape().begin(), b.shape().end() - 2);
    if (!a_batch.empty() && !b_batch.empty() && a_batch != b_batch) {
        throw ShapeError("matmul: batch dims disagree, " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    }
    const Shape& batch_shape = a_batch.empty() ? b_batch : a_batch;
    dims.batch = shape_numel(batch_shape);
    dims.a_batched = !a_batch.empty();
    dims.b_batched = !b_batch.empty();
    return dims;
}

Shape matmul_out_shape(const Tensor& a, const Tensor& b, const MatmulDims& d) {
    const Shape& src = d.a_batched ? a.shape() : b.shape();
    Shape out(src.begin(), src.end() - 2);
    out.push_back(d.m);
    out.push_back(d.n);
    return out;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    const MatmulDims dm = matmul_dims(a, b);
    const std::int64_t m = dm.m, k = dm.k, n = dm.n;
    Shape out_shape = matmul_out_shape(a, b, dm);
    Buf out(static_cast<std::size_t>(dm.batch * m * n), 0.0);
    const Buf &ad = a.data(), &bd = b.data();
    const std::int64_t a_stride = dm.a_batched ? m * k : 0;
    const std::int64_t b_stride = dm.b_batched ? k * n : 0;

    const std::int64_t rows = dm.batch * m;
    const std::int64_t row_work = std::max<std::int64_t>(1, k * n);
    parallel_for(rows, std::max<std::int64_t>(1, 32768 / row_work), [&](std::int64_t s, std::int64_t e) {
        for (std::int64_t r = s; r < e; ++r) {
            const std::int64_t bi = r / m;
            const std::int64_t i = r % m;
            const double* arow = ad.data() + bi * a_stride + i * k;
            const double* bbase = bd.data() + bi * b_stride;
            double* orow = out.data() + r * n;
            for (std::int64_t kk = 0; kk < k; ++kk) {
                const double av = arow[kk];
                const double* brow = bbase + kk * n;
                for (std::int64_t j = 0; j < n; ++j) orow[j] += av * brow[j];
            }
        }
    });

    return make_op_output("matmul", std::move(out_shape), std::move(out), {a, b},
                          [&](BufPtr og, BufPtr) {
        Tensor at = a, bt = b;
        auto adata = a.shared_data(), bdata = b.shared_data();
        return [at, bt, adata, bdata, og, dm]() mutable {
            const std::int64_t m = dm.m, k = dm.k, n = dm.n, batch = dm.batch;
            const std::int64_t a_stride = dm.a_batched ? m * k : 0;
            const std::int64_t b_stride = dm.b_batched ? k * n : 0;
            if (at.requires_grad()) {
                // dA[i, kk] = sum_j G[i, j] * B[kk, j]; stream over j with a
                // transposed copy of B for contiguous access.
                Buf ga(adata->size(), 0.0);
                Buf btrans(static_cast<std::size_t>(k * n));
                for (std::int64_t bi = 0; bi < (dm.b_batched ? batch : 1); ++bi) {
                    const double* bbase = bdata->data() + bi * b_stride;
                    for (std::int64_t kk = 0; kk < k; ++kk)
                        for (std::int64_t j = 0; j < n; ++j) btrans[j * k + kk] = bbase[kk * n + j];
                    const std::int64_t lo = dm.b_batched ? bi : 0;
                    const std::int64_t hi = dm.b_batched ? bi + 1 : batch;
                    const std::int64_t rows2 = (hi - lo) * m;
                    parallel_for(rows2, std::max<std::int64_t>(1, 32768 / std::max<std::int64_t>(1, n * k)),
                                 [&](std::int64_t s, std::int64_t e) {
                        for (std::int64_t r = s; r < e; ++r) {
                            const std::int64_t gbi = lo + r / m;
                            const std::int64_t i = r % m;
                            const double* grow = og->data() + (gbi * m + i) * n;
                            double* garow = ga.data() + (dm.a_batched ? gbi * a_stride : 0) + i * k;
                            for (std::int64_t j = 0; j < n; ++j) {
                                const double g = grow[j];
                                const double* btr = btrans.data() + j * k;
                                for (std::int64_t kk = 0; kk < k; ++kk) garow[kk] += g * btr[kk];
                            }
                        }
                    });
                    if (!dm.a_batched && dm.b_batched) continue;  // ga rows disjoint per bi anyway
                }
                at.accumulate_grad(ga);
            }
            if (bt.requires_grad()) {
                // dB[kk, j] = sum_i A[i, kk] * G[i, j], summed over shared
                // batches in ascending order; parallel over kk rows.
                Buf gb(bdata->size(), 0.0);
                if (dm.b_batched) {
                    const std::int64_t rows2 = batch * k;
                    parallel_for(rows2, std::max<std::int64_t>(1, 32768 / std::max<std::int64_t>(1, m * n)),
                                 [&](std::int64_t s, std::int64_t e) {
                        for (std::int64_t r = s; r < e; ++r) {
                            const std::int64_t bi = r / k;
                            const std::int64_t kk = r % k;
                            const double* abase = adata->data() + (dm.a_batched ? bi * a_stride : 0);
                            const double* gbase = og->data() + bi * m * n;
                            double* gbrow = gb.data() + bi * b_stride + kk * n;
                            for (std::int64_t i = 0; i < m; ++i) {
                                const double av = abase[i * k + kk];
                                const double* grow = gbase + i * n;
                                for (std::int64_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
                            }
                        }
                    });
                } else {
                    parallel_for(k, std::max<std::int64_t>(1, 16384 / std::max<std::int64_t>(1, m * n)),
                                 [&](std::int64_t s, std::int64_t e) {
                        for (std::int64_t kk = s; kk < e; ++kk) {
                            double* gbrow = gb.data() + kk * n;
                            for (std::int64_t bi = 0; bi < batch; ++bi) {
                                const double* abase = adata->data() + bi * a_stride;
                                const double* gbase = og->data() + bi * m * n;
                                for (std::int64_t i = 0; i < m; ++i) {
                                    const double av = abase[i * k + kk];
                                    const double* grow = gbase + i * n;
                                    for (std::int64_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
                                }
                            }
                        }
                    });
                }
                bt.accumulate_grad(gb);
            }
        };
    });
}

// ---------------------------------------------------------------------------
// softmax / losses
// ---------------------------------------------------------------------------

Tensor softmax_lastdim(const Tensor& x) {
    const std::int64_t d = last_dim(x);
    const std::int64_t rows = x.numel() / d;
    const Buf& xd = x.data();
    if (precision() == Precision::f64) {
        for (double v : xd) {
            if (std::isnan(v)) {
                diag::set_nan_flag();
                break;
            }
        }
    }
    Buf out(static_cast<std::size_t>(x.numel()));
    parallel_for(rows, 16, [&](std::int64_t s, std::int64_t e) {
        for (std::int64_t r = s; r < e; ++r) {
            const double* row = xd.data() + r * d;
            double* orow = out.data() + r * d;
            double mx = row[0];
            for (std::int64_t j = 1; j < d; ++j) mx = std::max(mx, row[j]);
            double denom = 0.0;
            for (std::int64_t j = 0; j < d; ++j) {
                const double ev = std::exp(row[j] - mx);
                orow[j] = ev;
                denom += ev;
            }
            const double inv = 1.0 / denom;
            for (std::int64_t j = 0; j < d; ++j) orow[j] *= inv;
        }
    });
    return make_op_output("softmax_lastdim", x.shape(), std::move(out), {x},
                          [&](BufPtr og, BufPtr od) {
        Tensor xt = x;
        return [xt, og, od, rows, d]() mutable {
            if (!xt.requires_grad()) return;
            Buf g(og->size());
            parallel_for(rows, 16, [&](std::int64_t s, std::int64_t e) {
                for (std::int64_t r = s; r < e; ++r) {
                    const double* y = od->data() + r * d;
                    const double* gy = og->data() + r * d;
                    double dot = 0.0;
                    for (std::int64_t j = 0; j < d; ++j) dot += gy[j] * y[j];
                    double* gx = g.data() + r * d;
                    for (std::int64_t j = 0; j < d; ++j) gx[j] = y[j] * (gy[j] - dot);
                }
            });
            xt.accumulate_grad(g);
        };
    });
}

Tensor cross_entropy_with_logits(const Tensor& logits, const std::vector<std::int64_t>& labels) {
    if (logits.ndim() != 2) {
        throw ShapeError("cross_entropy: logits must be [batch, classes], got " +
                         shape_str(logits.shape()));
    }
    const std::int64_t B = logits.dim(0), C = logits.dim(1);
    if (static_cast<std::int64_t>(labels.size()) != B) {
        throw ShapeError("cross_entropy: batch " + std::to_string(B) + " vs " +
                         std::to_string(labels.size()) + " labels");
    }
    for (std::int64_t y : labels) {
        if (y < 0 || y >= C) throw ShapeError("cross_entropy: label " + std::to_string(y) +
                                              " out of range for " + std::to_string(C) + " classes");
    }
    const Buf& zd = logits.data();
    auto probs = std::make_shared<Buf>(zd.size());
    double total = 0.0;
    for (std::int64_t b = 0; b < B; ++b) {
        const double* row = zd.data() + b * C;
        double* prow = probs->data() + b * C;
        double mx = row[0];
        for (std::int64_t c = 1; c < C; ++c) mx = std::max(mx, row[c]);
        double denom = 0.0;
        for (std::int64_t c = 0; c < C; ++c) {
            const double ev = std::exp(row[c] - mx);
            prow[c] = ev;
            denom += ev;
        }
        const double inv = 1.0 / denom;
        for (std::int64_t c = 0; c < C; ++c) prow[c] *= inv;
        total += std::log(denom) + mx - row[labels[static_cast<std::size_t>(b)]];
    }
    total /= static_cast<double>(B);
    return make_op_output("cross_entropy_with_logits", {1}, {total}, {logits},
                          [&](BufPtr og, BufPtr) {
        Tensor zt = logits;
        auto labels_copy = std::make_shared<std::vector<std::int64_t>>(labels);
        return [zt, og, probs, labels_copy, B, C]() mutable {
            if (!zt.requires_grad()) return;
            const double g = (*og)[0] / static_cast<double>(B);
            Buf gz(probs->size());
            for (std::int64_t b = 0; b < B; ++b) {
                const double* prow = probs->data() + b * C;
                double* grow = gz.data() + b * C;
                const std::int64_t y = (*labels_copy)[static_cast<std::size_t>(b)];
                for (std::int64_t c = 0; c < C; ++c) grow[c] = g * (prow[c] - (c == y ? 1.0 : 0.0));
            }
            zt.accumulate_grad(gz);
        };
    });
}

// ---------------------------------------------------------------------------
// elementwise nonlinearities
// ---------------------------------------------------------------------------

namespace {

double gelu_value(double x) {
    const double u = kGeluCoeff * (x + kGeluCubic * x * x * x);
    return 0.5 * x * (1.0 + std::tanh(u));
}

double gelu_deriv(double x) {
    const double u = kGeluCoeff * (x + kGeluCubic * x * x * x);
    const double t = std::tanh(u);
    const double du = kGeluCoeff * (1.0 + 3.0 * kGeluCubic * x * x);
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Tensor gelu(const Tensor& x) {
    return unary_op("gelu", x, gelu_value, gelu_deriv);
}

Tensor silu(const Tensor& x) {
    return unary_op(
        "silu", x, [](double v) { return v * sigmoid(v); },
        [](double v) {
            const double s = sigmoid(v);
            return s * (1.0 + v * (1.0 - s));
        });
}

// ---------------------------------------------------------------------------
// shape ops
// ---------------------------------------------------------------------------

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.numel()) {
        throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
    }
    Buf out = x.data();
    return make_op_output("reshape", std::move(shape), std::move(out), {x}, [&](BufPtr og, BufPtr) {
        Tensor xt = x;
        return [xt, og]() mutable {
            if (xt.requires_grad()) xt.accumulate_grad(*og);
        };
    });
}

Tensor transpose_last2(const Tensor& x) {
    if (x.ndim() < 2) throw ShapeError("transpose: needs >= 2 dims, got " + shape_str(x.shape()));
    const std::int64_t m = x.dim(-2), n = x.dim(-1);
    const std::int64_t batch = x.numel() / (m * n);
    Shape out_shape = x.shape();
    std::swap(out_shape[out_shape.size() - 1], out_shape[out_shape.size() - 2]);
    Buf out(static_cast<std::size_t>(x.numel()));
    const Buf& xd = x.data();
    parallel_for(batch, std::max<std::int64_t>(1, 8192 / std::max<std::int64_t>(1, m * n)),
                 [&](std::int64_t s, std::int64_t e) {
        for (std::int64_t bi = s; bi < e; ++bi) {
            const double* src = xd.data() + bi * m * n;
            double* dst = out.data() + bi * m * n;
            for (std::int64_t i = 0; i < m; ++i)
                for (std::int64_t j = 0; j < n; ++j) dst[j * m + i] = src[i * n + j];
        }
    });
    return make_op_output("transpose_last2", std::move(out_shape), std::move(out), {x},
                          [&](BufPtr og, BufPtr) {
        Tensor xt = x;
        return [xt, og, batch, m, n]() mutable {
            if (!xt.requires_grad()) return;
            Buf g(og->size());
            for (std::int64_t bi = 0; bi < batch; ++bi) {
                const double* src = og->data() + bi * m * n;
                double* dst = g.data() + bi * m * n;
                for (std::int64_t j = 0; j < n; ++j)
                    for (std::int64_t i = 0; i < m; ++i) dst[i * n + j] = src[j * m + i];
            }
            xt.accumulate_grad(g);
        };
    });
}

namespace {

std::vector<std::int64_t> contiguous_strides(const Shape& shape) {
    std::vector<std::int64_t> strides(shape.size(), 1);
    for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i) {
        strides[i] = strides[i + 1] * shape[i + 1];
    }
    return strides;
}

void permute_copy(const Buf& src, Buf& dst, const Shape& in_shape, const std::vector<int>& axes) {
    const auto in_strides = contiguous_strides(in_shape);
    Shape out_shape(axes.size());
    for (std::size_t i = 0; i < axes.size(); ++i) out_shape[i] = in_shape[axes[i]];
    const auto out_strides = contiguous_strides(out_shape);
    const std::int64_t n = shape_numel(in_shape);
    const int nd = static_cast<int>(axes.size());
    parallel_for(n, 8192, [&](std::int64_t s, std::int64_t e) {
        for (std::int64_t o = s; o < e; ++o) {
            std::int64_t rem = o, src_idx = 0;
            for (int i = 0; i < nd; ++i) {
                const std::int64_t c = rem / out_strides[i];
                rem -= c * out_strides[i];
                src_idx += c * in_strides[axes[i]];
            }
            dst[o] = src[src_idx];
        }
    });
}

}  // namespace

Tensor permute(const Tensor& x, const std::vector<int>& axes) {
    if (static_cast<int>(axes.size()) != x.ndim()) {
        throw ShapeError("permute: axes rank mismatch for " + shape_str(x.shape()));
    }
    std::vector<bool> seen(axes.size(), false);
    for (int a : axes) {
        if (a < 0 || a >= x.ndim() || seen[a]) throw ShapeError("permute: invalid axes");
        seen[a] = true;
    }
    Shape out_shape(axes.size());
    for (std::size_t i = 0; i < axes.size(); ++i) out_shape[i] = x.shape()[axes[i]];
    Buf out(static_cast<std::size_t>(x.numel()));
    permute_copy(x.data(), out, x.shape(), axes);
    return make_op_output("permute", std::move(out_shape), std::move(out), {x},
                          [&](BufPtr og, BufPtr) {
        Tensor xt = x;
        std::vector<int> inverse(axes.size());
        for (std::size_t i = 0; i < axes.size(); ++i) inverse[axes[i]] = static_cast<int>(i);
        Shape fwd_out(axes.size());
        for (std::size_t i = 0; i < axes.size(); ++i) fwd_out[i] = xt.shape()[axes[i]];
        return [xt, og, inverse, fwd_out]() mutable {
            if (!xt.requires_grad()) return;
            Buf g(og->size());
            permute_copy(*og, g, fwd_out, inverse);
            xt.accumulate_grad(g);
        };
    });
}

// ---------------------------------------------------------------------------
// token-axis ops
// ---------------------------------------------------------------------------

namespace {

void require_btd(const char* op, const Tensor& x) {
    if (x.ndim() != 3) {
        throw ShapeError(std::string(op) + ": expected [batch, tokens, dim], got " +
                         shape_str(x.shape()));
    }
}

}  // namespace

Tensor concat_tokens(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_tokens: no inputs");
    require_btd("concat_tokens", parts[0]);
    const std::int64_t B = parts[0].dim(0), d = parts[0].dim(2);
    std::int64_t total_t = 0;
    for (const Tensor& p : parts) {
        require_btd("concat_tokens", p);
        if (p.dim(0) != B || p.dim(2) != d) {
            throw ShapeError("concat_tokens: mismatched part " + shape_str(p.shape()) + " vs " +
                             shape_str(parts[0].shape()));
        }
        total_t += p.dim(1);
    }
    Buf out(static_cast<std::size_t>(B * total_t * d));
    std::int64_t offset_t = 0;
    for (const Tensor& p : parts) {
        const std::int64_t t = p.dim(1);
        const Buf& pd = p.data();
        for (std::int64_t b = 0; b < B; ++b) {
            std::copy(pd.begin() + b * t * d, pd.begin() + (b + 1) * t * d,
                      out.begin() + (b * total_t + offset_t) * d);
        }
        offset_t += t;
    }
    return make_op_output("concat_tokens", {B, total_t, d}, std::move(out), parts,
                          [&](BufPtr og, BufPtr) {
        std::vector<Tensor> pts = parts;
        return [pts, og, B, total_t, d]() mutable {
            std::int64_t offset_t = 0;
            for (Tensor& p : pts) {
                const std::int64_t t = p.dim(1);
                if (p.requires_grad()) {
                    Buf g(static_cast<std::size_t>(B * t * d));
                    for (std::int64_t b = 0; b < B; ++b) {
                        std::copy(og->begin() + (b * total_t + offset_t) * d,
                                  og->begin() + (b * total_t + offset_t + t) * d,
                                  g.begin() + b * t * d);
                    }
                    p.accumulate_grad(g);
                }
                offset_t += t;
            }
        };
    });
}

Tensor slice_tokens(const Tensor& x, std::int64_t start, std::int64_t len) {
    require_btd("slice_tokens", x);
    const std::int64_t B = x.dim(0), T = x.dim(1), d = x.dim(2);
    if (start < 0 || len <= 0 || start + len > T) {
        throw ShapeError("slice_tokens: range [" + std::to_string(start) + ", " +
                         std::to_string(start + len) + ") invalid for " + shape_str(x.shape()));
    }
    Buf out(static_cast<std::size_t>(B * len * d));
    const Buf& xd = x.data();
    for (std::int64_t b = 0; b < B; ++b) {
        std::copy(xd.begin() + (b * T + start) * d, xd.begin() + (b * T + start + len) * d,
                  out.begin() + b * len * d);
    }
    return make_op_output("slice_tokens", {B, len, d}, std::move(out), {x},
                          [&](BufPtr og, BufPtr) {
        Tensor xt = x;
        return [xt, og, B, T, d, start, len]() mutable {
            if (!xt.requires_grad()) return;
            Buf g(static_cast<std::size_t>(B * T * d), 0.0);
            for (std::int64_t b = 0; b < B; ++b) {
                std::copy(og->begin() + b * len * d, og->begin() + (b + 1) * len * d,
                          g.begin() + (b * T + start) * d);
            }
            xt.accumulate_grad(g);
        };
    });
}

Tensor mean_tokens(const Tensor& x) {
    require_btd("mean_tokens", x);
    const std::int64_t B = x.dim(0), T = x.dim(1), d = x.dim(2);
    Buf out(static_cast<std::size_t>(B * d), 0.0);
    const Buf& xd = x.data();
    const double inv = 1.0 / static_cast<double>(T);
    for (std::int64_t b = 0; b < B; ++b) {
        double* orow = out.data() + b * d;
        for (std::int64_t t = 0; t < T; ++t) {
            const double* row = xd.data() + (b * T + t) * d;
            for (std::int64_t j = 0; j < d; ++j) orow[j] += row[j];
        }
        for (std::int64_t j = 0; j < d; ++j) orow[j] *= inv;
    }
    return make_op_output("mean_tokens", {B, d}, std::move(out), {x}, [&](BufPtr og, BufPtr) {
        Tensor xt = x;
        return [xt, og, B, T, d, inv]() mutable {
            if (!xt.requires_grad()) return;
            Buf g(static_cast<std::size_t>(B * T * d));
            for (std::int64_t b = 0; b < B; ++b) {
                const double* grow = og->data() + b * d;
                for (std::int64_t t = 0; t < T; ++t) {
                    double* row = g.data() + (b * T + t) * d;
                    for (std::int64_t j = 0; j < d; ++j) row[j] = grow[j] * inv;
                }
            }
            xt.accumulate_grad(g);
        };
    });
}

Tensor mean_lastdims(const Tensor& x, int ndims) {
    if (ndims < 1 || ndims > x.ndim()) {
        throw ShapeError("mean_lastdims: cannot reduce " + std::to_string(ndims) + " dims of " +
                         shape_str(x.shape()));
    }
    std::int64_t block = 1;
    for (int i = x.ndim() - ndims; i < x.ndim(); ++i) block *= x.shape()[i];
    const std::int64_t rows = x.numel() / block;
    Shape out_shape(x.shape().begin(), x.shape().end() - ndims);
    if (out_shape.empty()) out_shape = {1};
    Buf out(static_cast<std::size_t>(rows));
    const Buf& xd = x.data();
    const double inv = 1.0 / static_cast<double>(block);
    for (std::int64_t r = 0; r < rows; ++r) {
        double s = 0.0;
        const double* row = xd.data() + r * block;
        for (std::int64_t j = 0; j < block; ++j) s += row[j];
        out[r] = s * inv;
    }
    return make_op_output("mean_lastdims", std::move(out_shape), std::move(out), {x},
                          [&](BufPtr og, BufPtr) {
        Tensor xt = x;
        return [xt, og, rows, block, inv]() mutable {
            if (!xt.requires_grad()) return;
            Buf g(static_cast<std::size_t>(rows * block));
            for (std::int64_t r = 0; r < rows; ++r) {
                const double gv = (*og)[r] * inv;
                double* row = g.data() + r * block;
                for (std::int64_t j = 0; j < block; ++j) row[j] = gv;
            }
            xt.accumulate_grad(g);
        };
    });
}

Tensor gather_rows(const Tensor& x, const std::vector<std::int64_t>& rows) {
    if (x.ndim() < 2) throw ShapeError("gather_rows: needs >= 2 dims, got " + shape_str(x.shape()));
    const std::int64_t N = x.dim(0);
    const std::int64_t stride = x.numel() / N;
    for (std::int64_t r : rows) {
        if (r < 0 || r >= N) {
            throw ShapeError("gather_rows: row " + std::to_string(r) + " out of range for " +
                             shape_str(x.shape()));
        }
    }
    Shape out_shape = x.shape();
    out_shape[0] = static_cast<std::int64_t>(rows.size());
    Buf out(static_cast<std::size_t>(out_shape[0] * stride));
    const Buf& xd = x.data();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::copy(xd.begin() + rows[i] * stride, xd.begin() + (rows[i] + 1) * stride,
                  out.begin() + static_cast<std::int64_t>(i) * stride);
    }
    return make_op_output("gather_rows", std::move(out_shape), std::move(out), {x},
                          [&](BufPtr og, BufPtr) {
        Tensor xt = x;
        auto idx = std::make_shared<std::vector<std::int64_t>>(rows);
        return [xt, og, idx, stride]() mutable {
            if (!xt.requires_grad()) return;
            Buf g(xt.numel(), 0.0);
            for (std::size_t i = 0; i < idx->size(); ++i) {
                const double* src = og->data() + static_cast<std::int64_t>(i) * stride;
                double* dst = g.data() + (*idx)[i] * stride;
                for (std::int64_t j = 0; j < stride; ++j) dst[j] += src[j];
            }
            xt.accumulate_grad(g);
        };
    });
}

Tensor sum(const Tensor& x) {
    const Buf& xd = x.data();
    double s = 0.0;
    for (double v : xd) s += v;
    return make_op_output("sum", {1}, {s}, {x}, [&](BufPtr og, BufPtr) {
        Tensor xt = x;
        return [xt, og]() mutable {
            if (!xt.requires_grad()) return;
            Buf g(xt.numel(), (*og)[0]);
            xt.accumulate_grad(g);
        };
    });
}

// ---------------------------------------------------------------------------
// normalizations
// ---------------------------------------------------------------------------

namespace {

// Shared kernel: normalize rows of length d by 1/sqrt(mean(x^2)+eps), apply a
// per-row gain pointer. gain_index(row) selects the gain row.
Tensor rms_kernel(const char* name, const Tensor& x, const Tensor& gain, double eps,
                  std::int64_t gain_rows) {
    const std::int64_t d = last_dim(x);
    if (gain.numel() % d != 0 || gain.numel() / d != gain_rows) {
        throw ShapeError(std::string(name) + ": gain " + shape_str(gain.shape()) +
                         " does not match " + shape_str(x.shape()));
    }
    const std::int64_t rows = x.numel() / d;
    if (gain_rows > 1 && rows % gain_rows != 0) {
        throw ShapeError(std::string(name) + ": gain rows do not divide into " +
                         shape_str(x.shape()));
    }
    // For per-head gains x is [B, H, T, dh]: row r belongs to head
    // (r / T) % H. rows_per_gain = T; gain cycle = gain_rows.
    const std::int64_t rows_per_gain = gain_rows > 1 ? x.dim(-2) : rows;

    const Buf &xd = x.data(), &gd = gain.data();
    Buf out(static_cast<std::size_t>(x.numel()));
    auto inv_rms = std::make_shared<Buf>(static_cast<std::size_t>(rows));
    parallel_for(rows, 32, [&](std::int64_t s, std::int64_t e) {
        for (std::int64_t r = s; r < e; ++r) {
            const double* row = xd.data() + r * d;
            double ss = 0.0;
            for (std::int64_t j = 0; j < d; ++j) ss += row[j] * row[j];
            const double inv = 1.0 / std::sqrt(ss / static_cast<double>(d) + eps);
            (*inv_rms)[r] = inv;
            const double* grow = gd.data() + ((r / rows_per_gain) % gain_rows) * d;
            double* orow = out.data() + r * d;
            for (std::int64_t j = 0; j < d; ++j) orow[j] = row[j] * inv * grow[j];
        }
    });
    return make_op_output(name, x.shape(), std::move(out), {x, gain}, [&](BufPtr og, BufPtr) {
        Tensor xt = x, gt = gain;
        auto xdata = x.shared_data(), gdata = gain.shared_data();
        return [xt, gt, xdata, gdata, og, inv_rms, rows, d, rows_per_gain, gain_rows]() mutable {
            // x_hat = x * inv; out = x_hat * gain
            // dx = inv * (gain * gy - x_hat * mean(gain * gy * x_hat))
            if (xt.requires_grad()) {
                Buf gx(xdata->size());
                parallel_for(rows, 32, [&](std::int64_t s, std::int64_t e) {
                    for (std::int64_t r = s; r < e; ++r) {
                        const double inv = (*inv_rms)[r];
                        const double* row = xdata->data() + r * d;
                        const double* gy = og->data() + r * d;
                        const double* grow = gdata->data() + ((r / rows_per_gain) % gain_rows) * d;
                        double dot = 0.0;
                        for (std::int64_t j = 0; j < d; ++j) {
                            dot += grow[j] * gy[j] * row[j] * inv;
                        }
                        dot /= static_cast<double>(d);
                        double* gxr = gx.data() + r * d;
                        for (std::int64_t j = 0; j < d; ++j) {
                            gxr[j] = inv * (grow[j] * gy[j] - row[j] * inv * dot);
                        }
                    }
                });
                xt.accumulate_grad(gx);
            }
            if (gt.requires_grad()) {
                Buf gg(gdata->size(), 0.0);
                for (std::int64_t r = 0; r < rows; ++r) {
                    const double inv = (*inv_rms)[r];
                    const double* row = xdata->data() + r * d;
                    const double* gy = og->data() + r * d;
                    double* ggr = gg.data() + ((r / rows_per_gain) % gain_rows) * d;
                    for (std::int64_t j = 0; j < d; ++j) ggr[j] += gy[j] * row[j] * inv;
                }
                gt.accumulate_grad(gg);
            }
        };
    });
}

}  // namespace

Tensor rmsnorm(const Tensor& x, const Tensor& gain, double eps) {
    if (gain.ndim() != 1 || gain.dim(0) != last_dim(x)) {
        throw ShapeError("rmsnorm: gain " + shape_str(gain.shape()) + " does not match last dim of " +
                         shape_str(x.shape()));
    }
    return rms_kernel("rmsnorm", x, gain, eps, 1);
}

Tensor rmsnorm_per_head(const Tensor& x, const Tensor& gain, double eps) {
    if (x.ndim() != 4) {
        throw ShapeError("rmsnorm_per_head: expected [batch, heads, tokens, head_dim], got " +
                         shape_str(x.shape()));
    }
    if (gain.ndim() != 2 || gain.dim(0) != x.dim(1) || gain.dim(1) != x.dim(3)) {
        throw ShapeError("rmsnorm_per_head: gain " + shape_str(gain.shape()) + " does not match " +
                         shape_str(x.shape()));
    }
    return rms_kernel("rmsnorm_per_head", x, gain, eps, x.dim(1));
}

Tensor layernorm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    const std::int64_t d = last_dim(x);
    if (gain.ndim() != 1 || gain.dim(0) != d || bias.ndim() != 1 || bias.dim(0) != d) {
        throw ShapeError("layernorm: params do not match last dim of " + shape_str(x.shape()));
    }
    const std::int64_t rows = x.numel() / d;
    const Buf &xd = x.data(), &gd = gain.data(), &bd = bias.data();
    Buf out(static_cast<std::size_t>(x.numel()));
    auto mean_buf = std::make_shared<Buf>(static_cast<std::size_t>(rows));
    auto inv_buf = std::make_shared<Buf>(static_cast<std::size_t>(rows));
    parallel_for(rows, 32, [&](std::int64_t s, std::int64_t e) {
        for (std::int64_t r = s; r < e; ++r) {
            const double* row = xd.data() + r * d;
            double mean = 0.0;
            for (std::int64_t j = 0; j < d; ++j) mean += row[j];
            mean /= static_cast<double>(d);
            double var = 0.0;
            for (std::int64_t j = 0; j < d; ++j) {
                const double c = row[j] - mean;
                var += c * c;
            }
            var /= static_cast<double>(d);
            const double inv = 1.0 / std::sqrt(var + eps);
            (*mean_buf)[r] = mean;
            (*inv_buf)[r] = inv;
            double* orow = out.data() + r * d;
            for (std::int64_t j = 0; j < d; ++j) orow[j] = (row[j] - mean) * inv * gd[j] + bd[j];
        }
    });
    return make_op_output("layernorm", x.shape(), std::move(out), {x, gain, bias},
                          [&](BufPtr og, BufPtr) {
        Tensor xt = x, gt = gain, bt = bias;
        auto xdata = x.shared_data(), gdata = gain.shared_data();
        return [xt, gt, bt, xdata, gdata, og, mean_buf, inv_buf, rows, d]() mutable {
            if (xt.requires_grad()) {
                Buf gx(xdata->size());
                parallel_for(rows, 32, [&](std::int64_t s, std::int64_t e) {
                    for (std::int64_t r = s; r < e; ++r) {
                        const double mean = (*mean_buf)[r], inv = (*inv_buf)[r];
                        const double* row = xdata->data() + r * d;
                        const double* gy = og->data() + r * d;
                        double sum_g = 0.0, sum_gx = 0.0;
                        for (std::int64_t j = 0; j < d; ++j) {
                            const double gj = (*gdata)[j] * gy[j];
                            const double xh = (row[j] - mean) * inv;
                            sum_g += gj;
                            sum_gx += gj * xh;
                        }
                        const double invd = 1.0 / static_cast<double>(d);
                        double* gxr = gx.data() + r * d;
                        for (std::int64_t j = 0; j < d; ++j) {
                            const double gj = (*gdata)[j] * gy[j];
                            const double xh = (row[j] - mean) * inv;
                            gxr[j] = inv * (gj - invd * sum_g - xh * invd * sum_gx);
                        }
                    }
                });
                xt.accumulate_grad(gx);
            }
            if (gt.requires_grad()) {
                Buf gg(static_cast<std::size_t>(d), 0.0);
                for (std::int64_t r = 0; r < rows; ++r) {
                    const double mean = (*mean_buf)[r], inv = (*inv_buf)[r];
                    const double* row = xdata->data() + r * d;
                    const double* gy = og->data() + r * d;
                    for (std::int64_t j = 0; j < d; ++j) gg[j] += gy[j] * (row[j] - mean) * inv;
                }
                gt.accumulate_grad(gg);
            }
            if (bt.requires_grad()) {
                Buf gb(static_cast<std::size_t>(d), 0.0);
                for (std::int64_t r = 0; r < rows; ++r) {
                    const double* gy = og->data() + r * d;
                    for (std::int64_t j = 0; j < d; ++j) gb[j] += gy[j];
                }
                bt.accumulate_grad(gb);
            }
        };
    });
}

// ---------------------------------------------------------------------------
// rotary embedding
// ---------------------------------------------------------------------------

Tensor rope_rotate(const Tensor& x, std::shared_ptr<const std::vector<double>> cos_bank,
                   std::shared_ptr<const std::vector<double>> sin_bank) {
    if (x.ndim() != 4 && x.ndim() != 2) {
        throw ShapeError("rope_rotate: expected [batch, heads, tokens, head_dim] or [tokens, head_dim], got " +
                         shape_str(x.shape()));
    }
    const std::int64_t dh = x.dim(-1);
    const std::int64_t T = x.dim(-2);
    if (dh % 2 != 0) throw ShapeError("rope_rotate: head dim must be even, got " + shape_str(x.shape()));
    const std::int64_t pairs = dh / 2;
    if (static_cast<std::int64_t>(cos_bank->size()) != T * pairs ||
        static_cast<std::int64_t>(sin_bank->size()) != T * pairs) {
        throw ShapeError("rope_rotate: angle bank size mismatch for " + shape_str(x.shape()));
    }
    const std::int64_t groups = x.numel() / (T * dh);  // batch*heads
    const Buf& xd = x.data();
    Buf out(static_cast<std::size_t>(x.numel()));
    parallel_for(groups * T, 16, [&](std::int64_t s, std::int64_t e) {
        for (std::int64_t r = s; r < e; ++r) {
            const std::int64_t t = r % T;
            const double* row = xd.data() + r * dh;
            const double* cs = cos_bank->data() + t * pairs;
            const double* sn = sin_bank->data() + t * pairs;
            double* orow = out.data() + r * dh;
            for (std::int64_t j = 0; j < pairs; ++j) {
                const double a = row[2 * j], b = row[2 * j + 1];
                orow[2 * j] = a * cs[j] - b * sn[j];
                orow[2 * j + 1] = a * sn[j] + b * cs[j];
            }
        }
    });
    return make_op_output("rope_rotate", x.shape(), std::move(out), {x}, [&](BufPtr og, BufPtr) {
        Tensor xt = x;
        return [xt, og, cos_bank, sin_bank, groups, T, dh, pairs]() mutable {
            if (!xt.requires_grad()) return;
            Buf g(og->size());
            parallel_for(groups * T, 16, [&](std::int64_t s, std::int64_t e) {
                for (std::int64_t r = s; r < e; ++r) {
                    const std::int64_t t = r % T;
                    const double* gy = og->data() + r * dh;
                    const double* cs = cos_bank->data() + t * pairs;
                    const double* sn = sin_bank->data() + t * pairs;
                    double* gx = g.data() + r * dh;
                    for (std::int64_t j = 0; j < pairs; ++j) {
                        const double ga = gy[2 * j], gb = gy[2 * j + 1];
                        gx[2 * j] = ga * cs[j] + gb * sn[j];
                        gx[2 * j + 1] = -ga * sn[j] + gb * cs[j];
                    }
                }
            });
            xt.accumulate_grad(g);
        };
    });
}

// ---------------------------------------------------------------------------
// patchify / batching
// ---------------------------------------------------------------------------

Tensor extract_patches(const Tensor& images, std::int64_t patch) {
    if (images.ndim() != 4) {
        throw ShapeError("extract_patches: expected [batch, channels, height, width], got " +
                         shape_str(images.shape()));
    }
    const std::int64_t B = images.dim(0), C = images.dim(1), H = images.dim(2), W = images.dim(3);
    if (patch <= 0 || H % patch != 0 || W % patch != 0) {
        throw ShapeError("extract_patches: image " + shape_str(images.shape()) +
                         " not divisible by patch " + std::to_string(patch));
    }
    const std::int64_t hp = H / patch, wp = W / patch;
    const std::int64_t T = hp * wp, F = C * patch * patch;
    Buf out(static_cast<std::size_t>(B * T * F));
    const Buf& xd = images.data();
    for (std::int64_t b = 0; b < B; ++b) {
        for (std::int64_t ty = 0; ty < hp; ++ty)
            for (std::int64_t tx = 0; tx < wp; ++tx) {
                double* dst = out.data() + ((b * T + ty * wp + tx) * F);
                for (std::int64_t c = 0; c < C; ++c)
                    for (std::int64_t py = 0; py < patch; ++py) {
                        const double* src =
                            xd.data() + ((b * C + c) * H + ty * patch + py) * W + tx * patch;
                        for (std::int64_t px = 0; px < patch; ++px) *dst++ = src[px];
                    }
            }
    }
    return make_op_output("extract_patches", {B, T, F}, std::move(out), {images},
                          [&](BufPtr og, BufPtr) {
        Tensor xt = images;
        return [xt, og, B, C, H, W, patch]() mutable {
            if (!xt.requires_grad()) return;
            const std::int64_t hp = H / patch, wp = W / patch;
            const std::int64_t T = hp * wp, F = C * patch * patch;
            Buf g(xt.numel());
            for (std::int64_t b = 0; b < B; ++b) {
                for (std::int64_t ty = 0; ty < hp; ++ty)
                    for (std::int64_t tx = 0; tx < wp; ++tx) {
                        const double* src = og->data() + ((b * T + ty * wp + tx) * F);
                        for (std::int64_t c = 0; c < C; ++c)
                            for (std::int64_t py = 0; py < patch; ++py) {
                                double* dst =
                                    g.data() + ((b * C + c) * H + ty * patch + py) * W + tx * patch;
                                for (std::int64_t px = 0; px < patch; ++px) dst[px] = *src++;
                            }
                    }
            }
            xt.accumulate_grad(g);
        };
    });
}

Tensor tile_batch(const Tensor& x, std::int64_t batch) {
    if (x.ndim() != 2) {
        throw ShapeError("tile_batch: expected [tokens, dim], got " + shape_str(x.shape()));
    }
    if (batch <= 0) throw ShapeError("tile_batch: non-positive batch");
    const std::int64_t T = x.dim(0), d = x.dim(1);
    Buf out(static_cast<std::size_t>(batch * T * d));
    const Buf& xd = x.data();
    for (std::int64_t b = 0; b < batch; ++b) {
        std::copy(xd.begin(), xd.end(), out.begin() + b * T * d);
    }
    return make_op_output("tile_batch", {batch, T, d}, std::move(out), {x}, [&](BufPtr og, BufPtr) {
        Tensor xt = x;
        return [xt, og, batch, T, d]() mutable {
            if (!xt.requires_grad()) return;
            Buf g(static_cast<std::size_t>(T * d), 0.0);
            for (std::int64_t b = 0; b < batch; ++b) {
                const double* src = og->data() + b * T * d;
                for (std::int64_t j = 0; j < T * d; ++j) g[j] += src[j];
            }
            xt.accumulate_grad(g);
        };
    });
}

bool all_finite(const Tensor& x) {
    for (double v : x.data()) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

}  // namespace vit5::ops
