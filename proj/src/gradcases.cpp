#include <cmath>

#include "vit5/gradcheck.hpp"
#include "vit5/model.hpp"
#include "vit5/ops.hpp"
#include "vit5/synth.hpp"

namespace vit5 {

namespace {

Tensor randn(Rng rng, Shape shape, double scale = 1.0) {
    std::vector<double> d(static_cast<std::size_t>(shape_numel(shape)));
    for (auto& v : d) v = rng.next_normal() * scale;
    return Tensor::from_data(std::move(shape), std::move(d), false);
}

Tensor weighted(const Tensor& y, const Tensor& r) { return ops::sum(ops::mul(y, r)); }

nn::AttentionParams attention_for_check(const Rng& rng, std::int64_t d, int heads, bool bias,
                                        bool qk_norm) {
    nn::AttentionParams p;
    p.heads = heads;
    p.w_q = randn(rng.split("wq"), {d, d}, 0.2);
    p.w_k = randn(rng.split("wk"), {d, d}, 0.2);
    p.w_v = randn(rng.split("wv"), {d, d}, 0.2);
    p.w_o = randn(rng.split("wo"), {d, d}, 0.2);
    if (bias) {
        p.b_q = randn(rng.split("bq"), {d}, 0.1);
        p.b_k = randn(rng.split("bk"), {d}, 0.1);
        p.b_v = randn(rng.split("bv"), {d}, 0.1);
    }
    if (qk_norm) {
        p.qk_q_gain = randn(rng.split("qg"), {heads, d / heads}, 0.3);
        p.qk_k_gain = randn(rng.split("kg"), {heads, d / heads}, 0.3);
    }
    return p;
}

}  // namespace

std::vector<GradCase> component_grad_cases(std::uint64_t seed) {
    std::vector<GradCase> cases;

    cases.push_back({"rmsnorm_component", [seed] {
        Rng rng = Rng(seed).split("rmsnorm_c");
        double worst = 0.0;
        for (std::int64_t d : {4, 7, 12}) {
            nn::RmsNormParams p{randn(rng.split("g").split(d), {d}, 0.5), 1e-6};
            Tensor r = randn(rng.split("r").split(d), {3, d});
            Tensor x = randn(rng.split("x").split(d), {3, d});
            worst = std::max(worst, grad_check([&](const Tensor& t) {
                return weighted(nn::rmsnorm(t, p), r);
            }, x));
        }
        return worst;
    }});

    cases.push_back({"layerscale_residual", [seed] {
        Rng rng = Rng(seed).split("ls");
        double worst = 0.0;
        for (std::int64_t d : {4, 6, 10}) {
            nn::LayerScaleParams p{randn(rng.split("l").split(d), {d}, 0.3)};
            Tensor r = randn(rng.split("r").split(d), {2, 3, d});
            Tensor x = randn(rng.split("x").split(d), {2, 3, d});
            Tensor b = randn(rng.split("b").split(d), {2, 3, d});
            worst = std::max(worst, grad_check([&](const Tensor& t) {
                return weighted(nn::layerscale_residual(x, t, p), r);
            }, b));
            Tensor lam = p.lambda;
            worst = std::max(worst, grad_check([&](const Tensor& t) {
                nn::LayerScaleParams q{t};
                return weighted(nn::layerscale_residual(x, b, q), r);
            }, lam));
        }
        return worst;
    }});

    cases.push_back({"postnorm_residual", [seed] {
        Rng rng = Rng(seed).split("pn");
        double worst = 0.0;
        for (std::int64_t d : {4, 6, 10}) {
            nn::PostNormParams p{randn(rng.split("l").split(d), {d}, 0.5), 1e-6};
            Tensor r = randn(rng.split("r").split(d), {2, 2, d});
            Tensor x = randn(rng.split("x").split(d), {2, 2, d});
            Tensor b = randn(rng.split("b").split(d), {2, 2, d});
            worst = std::max(worst, grad_check([&](const Tensor& t) {
                return weighted(nn::postnorm_residual(t, b, p), r);
            }, x));
        }
        return worst;
    }});

    cases.push_back({"mlp_gelu", [seed] {
        Rng rng = Rng(seed).split("mlp_g");
        double worst = 0.0;
        for (std::int64_t d : {4, 6, 8}) {
            nn::MlpParams p;
            p.variant = nn::MlpVariant::Gelu;
            p.hidden_dim = 2 * d;
            p.w_in = randn(rng.split("wi").split(d), {d, p.hidden_dim}, 0.3);
            p.w_out = randn(rng.split("wo").split(d), {p.hidden_dim, d}, 0.3);
            Tensor r = randn(rng.split("r").split(d), {2, 3, d});
            Tensor x = randn(rng.split("x").split(d), {2, 3, d});
            worst = std::max(worst, grad_check([&](const Tensor& t) {
                return weighted(nn::mlp_forward(t, p), r);
            }, x));
            Tensor wi = p.w_in;
            worst = std::max(worst, grad_check([&](const Tensor& t) {
                nn::MlpParams q = p;
                q.w_in = t;
                return weighted(nn::mlp_forward(x, q), r);
            }, wi));
        }
        return worst;
    }});

    cases.push_back({"mlp_swiglu", [seed] {
        Rng rng = Rng(seed).split("mlp_s");
        double worst = 0.0;
        for (std::int64_t d : {4, 6, 8}) {
            nn::MlpParams p;
            p.variant = nn::MlpVariant::SwiGlu;
            p.hidden_dim = 2 * d;
            p.w_in = randn(rng.split("wi").split(d), {d, p.hidden_dim}, 0.3);
            p.w_gate = randn(rng.split("wg").split(d), {d, p.hidden_dim}, 0.3);
            p.w_out = randn(rng.split("wo").split(d), {p.hidden_dim, d}, 0.3);
            Tensor r = randn(rng.split("r").split(d), {2, 3, d});
            Tensor x = randn(rng.split("x").split(d), {2, 3, d});
            worst = std::max(worst, grad_check([&](const Tensor& t) {
                return weighted(nn::mlp_forward(t, p), r);
            }, x));
            Tensor wg = p.w_gate;
            worst = std::max(worst, grad_check([&](const Tensor& t) {
                nn::MlpParams q = p;
                q.w_gate = t;
                return weighted(nn::mlp_forward(x, q), r);
            }, wg));
        }
        return worst;
    }});

    cases.push_back({"apply_rope_2d", [seed] {
        Rng rng = Rng(seed).split("rope_c");
        double worst = 0.0;
        for (int dh : {4, 8, 16}) {
            RopeTables tables(1e-4, 1e-1, dh);
            std::vector<TokenCoord> coords = {{true, RopeTable::Patch, 0, 0},
                                              {true, RopeTable::Patch, 2, 1},
                                              {true, RopeTable::Reg, 1, 0},
                                              {false, RopeTable::Patch, 0, 0}};
            const RopeAngles angles = tables.angles_for(coords);
            Tensor r = randn(rng.split("r").split(dh), {1, 2, 4, dh});
            Tensor x = randn(rng.split("x").split(dh), {1, 2, 4, dh});
            worst = std::max(worst, grad_check([&](const Tensor& t) {
                return weighted(ops::rope_rotate(t, angles.cos_bank, angles.sin_bank), r);
            }, x));
        }
        return worst;
    }});

    cases.push_back({"qk_normalized_attention", [seed] {
        Rng rng = Rng(seed).split("attn_c");
        double worst = 0.0;
        struct V { std::int64_t d; int heads; bool bias, qk; };
        const std::vector<V> variants = {{8, 2, false, true}, {8, 2, true, false}, {12, 3, false, false}};
        int vi = 0;
        for (const auto& var : variants) {
            const Rng vr = rng.split(static_cast<std::uint64_t>(vi++));
            nn::AttentionParams p = attention_for_check(vr, var.d, var.heads, var.bias, var.qk);
            RopeTables tables(1e-4, 1e-1, static_cast<int>(var.d / var.heads) < 4
                                              ? 4
                                              : static_cast<int>(var.d / var.heads));
            std::vector<TokenCoord> coords;
            const std::int64_t T = 5;
            for (std::int64_t t = 0; t < T; ++t) coords.push_back({true, RopeTable::Patch, t % 3, t / 3});
            const RopeAngles angles = tables.angles_for(coords);
            Tensor r = randn(vr.split("r"), {2, T, var.d});
            Tensor x = randn(vr.split("x"), {2, T, var.d});
            worst = std::max(worst, grad_check([&](const Tensor& t) {
                return weighted(nn::qk_normalized_attention(t, p, &angles, 0), r);
            }, x));
            Tensor wq = p.w_q;
            worst = std::max(worst, grad_check([&](const Tensor& t) {
                nn::AttentionParams q = p;
                q.w_q = t;
                return weighted(nn::qk_normalized_attention(x, q, &angles, 0), r);
            }, wq));
        }
        return worst;
    }});

    return cases;
}

std::vector<GradCase> model_grad_cases(std::uint64_t seed) {
    std::vector<GradCase> cases;
    cases.push_back({"vit5_tiny_full_loss", [seed] {
        // 2 layers, d=16, 2 heads, 2x2 grid: central differences through the
        // whole model loss for every parameter tensor.
        PrecisionScope f64(Precision::f64);
        ModelConfig cfg = ModelConfig::preset("micro");
        cfg.validate();
        Vit5Model model = build_model(cfg, seed);

        SynthSpec data;
        data.resolution = cfg.image_size;
        data.noise_std = 0.02;
        data.seed = seed;
        const Batch batch = generate(data, "eval", 0, 2);

        auto loss_value = [&] {
            return ops::cross_entropy_with_logits(model.forward(batch.images), batch.labels)
                .item();
        };

        // One analytic backward covers every parameter.
        Tensor loss = ops::cross_entropy_with_logits(model.forward(batch.images), batch.labels);
        for (ParamRef q : model.parameters()) q.tensor.zero_grad();
        loss.backward();

        double worst = 0.0;
        NoGradScope ng;
        const double eps = 1e-5;
        for (ParamRef p : model.parameters()) {
            const std::vector<double> analytic = p.tensor.grad();
            auto& buf = p.tensor.mutable_data();
            for (std::size_t i = 0; i < buf.size(); ++i) {
                const double saved = buf[i];
                buf[i] = saved + eps;
                const double plus = loss_value();
                buf[i] = saved - eps;
                const double minus = loss_value();
                buf[i] = saved;
                const double numeric = (plus - minus) / (2.0 * eps);
                const double rel =
                    std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric));
                worst = std::max(worst, rel);
            }
        }
        return worst;
    }});
    return cases;
}

}  // namespace vit5
