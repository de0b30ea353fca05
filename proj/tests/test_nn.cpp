#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "vit5/gradcheck.hpp"
#include "vit5/nn.hpp"
#include "vit5/rng.hpp"

using namespace vit5;

namespace {

Tensor randn(Rng rng, Shape shape, double scale = 1.0) {
    std::vector<double> d(static_cast<std::size_t>(shape_numel(shape)));
    for (auto& v : d) v = rng.next_normal() * scale;
    return Tensor::from_data(std::move(shape), std::move(d), false);
}

}  // namespace

TEST_CASE("rmsnorm examples against a scalar f64 reference") {
    PrecisionScope f64(Precision::f64);
    nn::RmsNormParams unit{Tensor::full({4}, 1.0), 1e-6};

    Tensor ones = Tensor::full({1, 4}, 1.0);
    Tensor y1 = nn::rmsnorm(ones, unit);
    for (double v : y1.data()) CHECK(std::abs(v - 1.0) < 1e-6);

    Tensor twos = Tensor::full({1, 4}, 2.0);
    Tensor y2 = nn::rmsnorm(twos, unit);
    for (double v : y2.data()) CHECK(std::abs(v - 1.0) < 1e-6);

    Tensor x = Tensor::from_data({1, 4}, {1, 2, 3, 4});
    Tensor y3 = nn::rmsnorm(x, unit);
    double ss = 0.0;
    for (double v : x.data()) ss += v * v;
    const double rms = std::sqrt(ss / 4.0 + 1e-6);
    for (int i = 0; i < 4; ++i) {
        CHECK(y3.data()[i] == doctest::Approx(x.data()[i] / rms).epsilon(1e-12));
        CHECK(y3.data()[i] == doctest::Approx(x.data()[i] / std::sqrt(7.5)).epsilon(1e-6));
    }
}

TEST_CASE("rmsnorm re-scaling invariance over six decades") {
    PrecisionScope f64(Precision::f64);
    nn::RmsNormParams unit{Tensor::full({16}, 1.0), 1e-6};
    Tensor x = randn(Rng(31).split("x"), {3, 16}, 1e4);
    Tensor base = nn::rmsnorm(x, unit);
    for (double alpha : {1e-3, 1.0, 1e3}) {
        std::vector<double> scaled = x.data();
        for (double& v : scaled) v *= alpha;
        Tensor y = nn::rmsnorm(Tensor::from_data({3, 16}, scaled), unit);
        for (std::size_t i = 0; i < y.data().size(); ++i) {
            CHECK(std::abs(y.data()[i] - base.data()[i]) < 1e-6);
        }
    }
}

TEST_CASE("layerscale residual gates") {
    PrecisionScope f64(Precision::f64);
    Tensor x = randn(Rng(5).split("x"), {2, 3, 6});
    Tensor block = randn(Rng(5).split("b"), {2, 3, 6});

    nn::LayerScaleParams zero{Tensor::zeros({6})};
    Tensor same = nn::layerscale_residual(x, block, zero);
    for (std::size_t i = 0; i < x.data().size(); ++i) CHECK(same.data()[i] == x.data()[i]);

    nn::LayerScaleParams one{Tensor::full({6}, 1.0)};
    Tensor sum = nn::layerscale_residual(x, block, one);
    for (std::size_t i = 0; i < x.data().size(); ++i) {
        CHECK(sum.data()[i] == doctest::Approx(x.data()[i] + block.data()[i]).epsilon(1e-12));
    }

    // Table 11a default: lambda = 1e-4 with unit block output adds 1e-4.
    nn::LayerScaleParams lam{Tensor::full({6}, 1e-4)};
    Tensor shifted = nn::layerscale_residual(x, Tensor::full({2, 3, 6}, 1.0), lam);
    for (std::size_t i = 0; i < x.data().size(); ++i) {
        CHECK(shifted.data()[i] == doctest::Approx(x.data()[i] + 1e-4).epsilon(1e-12));
    }

    CHECK_THROWS_AS(nn::layerscale_residual(x, randn(Rng(1), {2, 3, 5}), one), ShapeError);
}

TEST_CASE("postnorm residual algebra") {
    PrecisionScope f64(Precision::f64);
    // rmsnorm(x) * RMS(x) == x within 1e-6 (the identity behind the rewrite).
    Tensor x = randn(Rng(6).split("x"), {2, 8});
    nn::RmsNormParams unit{Tensor::full({8}, 1.0), 1e-6};
    Tensor normed = nn::rmsnorm(x, unit);
    for (int r = 0; r < 2; ++r) {
        double ss = 0.0;
        for (int j = 0; j < 8; ++j) ss += x.data()[r * 8 + j] * x.data()[r * 8 + j];
        const double rms = std::sqrt(ss / 8.0);
        for (int j = 0; j < 8; ++j) {
            CHECK(std::abs(normed.data()[r * 8 + j] * rms - x.data()[r * 8 + j]) < 1e-6);
        }
    }

    // All-equal rows come out as sign(c) * lambda_p.
    nn::PostNormParams p{randn(Rng(6).split("l"), {8}, 0.5), 1e-6};
    for (double c : {3.0, -0.25}) {
        Tensor rows = Tensor::full({1, 8}, c);
        Tensor y = nn::postnorm_residual(rows, Tensor::zeros({1, 8}), p);
        const double sign = c > 0 ? 1.0 : -1.0;
        for (int j = 0; j < 8; ++j) {
            // scalar reference: c / sqrt(c^2 + eps) * lambda_j
            const double expect = c / std::sqrt(c * c + 1e-6) * p.lambda_p.data()[j];
            CHECK(y.data()[j] == doctest::Approx(expect).epsilon(1e-12));
            CHECK(std::abs(y.data()[j] - sign * p.lambda_p.data()[j]) < 1e-5);
        }
    }
}

TEST_CASE("mlp zero weights and parameter parity at d=384") {
    PrecisionScope f64(Precision::f64);
    nn::MlpParams p;
    p.variant = nn::MlpVariant::Gelu;
    p.hidden_dim = 8;
    p.w_in = Tensor::zeros({4, 8});
    p.w_out = Tensor::zeros({8, 4});
    Tensor y = nn::mlp_forward(randn(Rng(2), {1, 3, 4}), p);
    for (double v : y.data()) CHECK(v == 0.0);

    const std::int64_t gelu_params = nn::mlp_param_count(nn::MlpVariant::Gelu, 384);
    const std::int64_t swiglu_params = nn::mlp_param_count(nn::MlpVariant::SwiGlu, 384);
    const double rel = std::abs(double(swiglu_params - gelu_params)) / double(gelu_params);
    CHECK(rel < 0.02);
    CHECK(nn::swiglu_hidden_dim(384) % 8 == 0);
}

TEST_CASE("gating sparsity examples") {
    // All-zero input: every activation is dead.
    CHECK(nn::gating_sparsity(Tensor::zeros({64})) == 1.0);

    // Standard normal, ratio 1e-3: fraction ~ 2*Phi(1e-3) - 1 (Monte Carlo
    // against the analytic value, 3 sigma band of the binomial).
    PrecisionScope f64(Precision::f64);
    const std::int64_t n = 200000;
    Tensor z = randn(Rng(77), {n});
    const double measured = nn::gating_sparsity(z, 1e-3);
    const double expect = std::erf(1e-3 / std::sqrt(2.0));  // 2*Phi(t)-1
    const double sigma = std::sqrt(expect * (1.0 - expect) / double(n));
    CHECK(std::abs(measured - expect) < 3.0 * sigma + 1e-6);

    CHECK_THROWS_AS(nn::gating_sparsity(z, 0.0), ConfigError);
}

TEST_CASE("attention: singleton softmax and output projection") {
    PrecisionScope f64(Precision::f64);
    const std::int64_t d = 8;
    nn::AttentionParams p;
    p.heads = 2;
    Rng rng(9);
    p.w_q = randn(rng.split("q"), {d, d}, 0.3);
    p.w_k = randn(rng.split("k"), {d, d}, 0.3);
    p.w_v = randn(rng.split("v"), {d, d}, 0.3);
    p.w_o = randn(rng.split("o"), {d, d}, 0.3);

    Tensor x = randn(rng.split("x"), {1, 1, d});
    nn::AttentionCapture cap;
    Tensor y = nn::qk_normalized_attention(x, p, nullptr, 0, &cap);

    // One token: the attention weight is exactly 1, output = (x Wv) Wo.
    for (double v : cap.probs.data()) CHECK(v == 1.0);
    std::vector<double> v_proj(d, 0.0), expect(d, 0.0);
    for (std::int64_t j = 0; j < d; ++j)
        for (std::int64_t k = 0; k < d; ++k) v_proj[j] += x.data()[k] * p.w_v.data()[k * d + j];
    for (std::int64_t j = 0; j < d; ++j)
        for (std::int64_t k = 0; k < d; ++k) expect[j] += v_proj[k] * p.w_o.data()[k * d + j];
    for (std::int64_t j = 0; j < d; ++j) {
        CHECK(y.data()[j] == doctest::Approx(expect[j]).epsilon(1e-10));
    }
}

TEST_CASE("attention: two-token logits match a scalar reference of the QK-norm equations") {
    PrecisionScope f64(Precision::f64);
    const std::int64_t d = 6;
    nn::AttentionParams p;
    p.heads = 1;
    Rng rng(23);
    p.w_q = randn(rng.split("q"), {d, d}, 0.4);
    p.w_k = randn(rng.split("k"), {d, d}, 0.4);
    p.w_v = randn(rng.split("v"), {d, d}, 0.4);
    p.w_o = randn(rng.split("o"), {d, d}, 0.4);
    p.qk_q_gain = randn(rng.split("qg"), {1, d}, 0.5);
    p.qk_k_gain = randn(rng.split("kg"), {1, d}, 0.5);

    Tensor x = randn(rng.split("x"), {1, 2, d});
    nn::AttentionCapture cap;
    Tensor out = nn::qk_normalized_attention(x, p, nullptr, 7, &cap);

    // Scalar reference: project, RMS-normalize with gains, scaled dot.
    auto project = [&](const Tensor& w, int t) {
        std::vector<double> r(d, 0.0);
        for (std::int64_t j = 0; j < d; ++j)
            for (std::int64_t k = 0; k < d; ++k) r[j] += x.data()[t * d + k] * w.data()[k * d + j];
        return r;
    };
    auto qknorm = [&](std::vector<double> v, const Tensor& gain) {
        double ss = 0.0;
        for (double u : v) ss += u * u;
        const double inv = 1.0 / std::sqrt(ss / double(d) + 1e-6);
        for (std::int64_t j = 0; j < d; ++j) v[j] = v[j] * inv * gain.data()[j];
        return v;
    };
    std::vector<std::vector<double>> q(2), k(2);
    for (int t = 0; t < 2; ++t) {
        q[t] = qknorm(project(p.w_q, t), p.qk_q_gain);
        k[t] = qknorm(project(p.w_k, t), p.qk_k_gain);
    }
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            double dot = 0.0;
            for (std::int64_t c = 0; c < d; ++c) dot += q[i][c] * k[j][c];
            const double expect = dot / std::sqrt(double(d));
            CHECK(cap.logits.data()[i * 2 + j] == doctest::Approx(expect).epsilon(1e-10));
        }

    // Output: softmax-average the projected values, then Wo.
    for (int i = 0; i < 2; ++i) {
        const double l0 = cap.logits.data()[i * 2 + 0], l1 = cap.logits.data()[i * 2 + 1];
        const double m = std::max(l0, l1);
        const double e0 = std::exp(l0 - m), e1 = std::exp(l1 - m);
        const double w0 = e0 / (e0 + e1), w1 = e1 / (e0 + e1);
        std::vector<double> v0 = project(p.w_v, 0), v1 = project(p.w_v, 1);
        std::vector<double> mix(d), final(d, 0.0);
        for (std::int64_t c = 0; c < d; ++c) mix[c] = w0 * v0[c] + w1 * v1[c];
        for (std::int64_t j = 0; j < d; ++j)
            for (std::int64_t c = 0; c < d; ++c) final[j] += mix[c] * p.w_o.data()[c * d + j];
        for (std::int64_t j = 0; j < d; ++j) {
            CHECK(out.data()[i * d + j] == doctest::Approx(final[j]).epsilon(1e-9));
        }
    }
}

TEST_CASE("attention: unit QK-norm gains bound every pre-softmax logit") {
    PrecisionScope f64(Precision::f64);
    const std::int64_t d = 16;
    const int heads = 4;
    const double bound = std::sqrt(4.0) + 1e-5;  // d_head = 4
    Rng rng(41);
    for (int trial = 0; trial < 50; ++trial) {
        nn::AttentionParams p;
        p.heads = heads;
        Rng tr = rng.split(static_cast<std::uint64_t>(trial));
        p.w_q = randn(tr.split("q"), {d, d}, 1.0);
        p.w_k = randn(tr.split("k"), {d, d}, 1.0);
        p.w_v = randn(tr.split("v"), {d, d}, 1.0);
        p.w_o = randn(tr.split("o"), {d, d}, 1.0);
        p.qk_q_gain = Tensor::full({heads, d / heads}, 1.0);
        p.qk_k_gain = Tensor::full({heads, d / heads}, 1.0);
        Tensor x = randn(tr.split("x"), {1, 5, d}, 3.0);
        nn::AttentionCapture cap;
        nn::qk_normalized_attention(x, p, nullptr, 0, &cap);
        for (double v : cap.logits.data()) CHECK(std::abs(v) <= bound);
    }
}

TEST_CASE("attention: non-finite logits raise a numeric error naming the layer") {
    PrecisionScope f64(Precision::f64);
    diag::reset_nan_flag();
    const std::int64_t d = 4;
    nn::AttentionParams p;
    p.heads = 1;
    p.w_q = Tensor::full({d, d}, std::numeric_limits<double>::infinity());
    p.w_k = Tensor::full({d, d}, 1.0);
    p.w_v = Tensor::full({d, d}, 1.0);
    p.w_o = Tensor::full({d, d}, 1.0);
    Tensor x = Tensor::full({1, 2, d}, 1.0);
    try {
        nn::qk_normalized_attention(x, p, nullptr, 3);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(e.layer == 3);
        CHECK(std::string(e.what()).find("3") != std::string::npos);
    }
    diag::reset_nan_flag();
}

TEST_CASE("component gradients match finite differences") {
    PrecisionScope f64(Precision::f64);
    const auto reports = run_grad_cases(component_grad_cases(7151), 1e-4);
    CHECK(reports.size() >= 7);
    for (const auto& r : reports) {
        INFO(r.name << " max_rel_err=" << r.max_rel_err);
        CHECK(r.ok);
    }
}
