#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "vit5/gradcheck.hpp"
#include "vit5/model.hpp"
#include "vit5/synth.hpp"

using namespace vit5;

namespace {

Tensor randn(Rng rng, Shape shape, double scale = 1.0) {
    std::vector<double> d(static_cast<std::size_t>(shape_numel(shape)));
    for (auto& v : d) v = rng.next_normal() * scale;
    return Tensor::from_data(std::move(shape), std::move(d), false);
}

std::set<std::string> param_names(const Vit5Model& m) {
    std::set<std::string> names;
    for (const auto& p : m.parameters()) names.insert(p.name);
    return names;
}

}  // namespace

TEST_CASE("presets carry the published dims") {
    struct Expect { const char* name; int layers, dim, heads, registers; };
    const Expect rows[] = {{"vit5-s", 12, 384, 6, 4},
                           {"vit5-b", 12, 768, 12, 4},
                           {"vit5-l", 24, 1024, 16, 4},
                           {"vit5-xl", 28, 1152, 16, 4}};
    for (const auto& r : rows) {
        const ModelConfig c = ModelConfig::preset(r.name);
        CHECK(c.layers == r.layers);
        CHECK(c.dim == r.dim);
        CHECK(c.heads == r.heads);
        CHECK(c.registers == r.registers);
    }
    CHECK_THROWS_AS(ModelConfig::preset("vit5-xxl"), ConfigError);
}

TEST_CASE("config validation lists the violated constraint") {
    ModelConfig c = ModelConfig::preset("tiny");
    c.heads = 5;
    try {
        c.validate();
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("divisible") != std::string::npos);
    }
    c = ModelConfig::preset("tiny");
    c.dim = 72;
    c.heads = 6;  // head dim 12 is fine without rope, invalid with it
    c.rope = true;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c.rope = false;
    c.registers_rope = RegRope::None;
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("closed-form parameter count matches built models") {
    for (const char* name : {"tiny", "micro"}) {
        for (bool swiglu : {false, true}) {
            for (bool bias : {false, true}) {
                ModelConfig c = ModelConfig::preset(name);
                c.mlp = swiglu ? MlpKind::SwiGlu : MlpKind::Gelu;
                c.qkv_bias = bias;
                const Vit5Model m = build_model(c, 1);
                std::int64_t total = 0;
                for (const auto& p : m.parameters()) total += p.tensor.numel();
                CHECK(total == param_count(c));
                CHECK(static_cast<std::int64_t>(m.parameters().size()) == param_group_count(c));
            }
        }
    }
}

TEST_CASE("parameter counts reproduce the published sizes at full scale") {
    // Full-geometry builds (224^2, patch 16, 1000 classes, RGB) should land
    // on the published parameter counts within 1%.
    struct Expect { const char* name; double millions; };
    const Expect rows[] = {
        {"vit5-s", 22.0}, {"vit5-b", 87.0}, {"vit5-l", 304.0}, {"vit5-xl", 449.0}};
    for (const auto& r : rows) {
        ModelConfig c = ModelConfig::preset(r.name);
        c.patch = 16;
        c.image_size = 224;
        c.in_channels = 3;
        c.num_classes = 1000;
        const double count = static_cast<double>(param_count(c)) / 1e6;
        INFO(r.name << " -> " << count << "M");
        CHECK(std::abs(count - r.millions) / r.millions < 0.01);
        // Cross-check the formula against an allocated (zeroed) skeleton.
        const Vit5Model m = build_model(c, 0, /*init=*/false);
        std::int64_t total = 0;
        for (const auto& p : m.parameters()) total += p.tensor.numel();
        CHECK(total == param_count(c));
    }
}

TEST_CASE("gelu vs swiglu builds differ by less than 2%") {
    ModelConfig g = ModelConfig::preset("vit5-s");
    ModelConfig s = g;
    s.mlp = MlpKind::SwiGlu;
    const double pg = static_cast<double>(param_count(g));
    const double ps = static_cast<double>(param_count(s));
    CHECK(std::abs(ps - pg) / pg < 0.02);
}

TEST_CASE("vanilla row builds without modern components") {
    ModelConfig c = ModelConfig::preset("tiny");
    c.registers = 0;
    c.readout = Readout::MeanPool;
    c.rope = false;
    c.ape = true;
    c.layerscale = LayerScaleMode::Off;
    c.norm = NormKind::Layer;
    c.mlp = MlpKind::Gelu;
    c.qk_norm = false;
    c.qkv_bias = true;
    c.registers_rope = RegRope::None;
    const Vit5Model m = build_model(c, 3);
    const auto names = param_names(m);
    CHECK(names.count("blocks.0.attn.b_q") == 1);
    CHECK(names.count("blocks.0.attn.qk_norm.q_gain") == 0);
    CHECK(names.count("blocks.0.ls1.lambda") == 0);
    CHECK(names.count("blocks.0.norm1.bias") == 1);
    CHECK(names.count("registers") == 0);
    CHECK(names.count("class_token") == 0);
    CHECK(!m.rope_tables);
}

TEST_CASE("token layout: 8x8 image with patch 4") {
    ModelConfig c = ModelConfig::preset("tiny");
    c.image_size = 8;
    c.validate();
    const Vit5Model m = build_model(c, 5);
    // 4 patch tokens + 4 registers + 1 class token.
    CHECK(m.special_tokens() == 5);
    const auto coords = m.token_coords(2, 2);
    CHECK(coords.size() == 9);
    // Class token rides the register table at reserved coordinate (R, 0).
    CHECK(coords[0].table == RopeTable::Reg);
    CHECK(coords[0].x == 4);
    CHECK(coords[1].x == 0);

    SynthSpec data;
    data.resolution = 8;
    const Batch b = generate(data, "eval", 0, 1);
    CHECK_NOTHROW(m.forward(b.images));
}

TEST_CASE("zero image with zero-init head: loss is exactly ln C") {
    PrecisionScope f64(Precision::f64);
    ModelConfig c = ModelConfig::preset("tiny");
    c.num_classes = 4;
    const Vit5Model m = build_model(c, 7);
    Tensor zero_img = Tensor::zeros({2, 1, 32, 32});
    Tensor logits = m.forward(zero_img);
    for (double v : logits.data()) CHECK(v == 0.0);
    Tensor loss = ops::cross_entropy_with_logits(logits, {0, 3});
    CHECK(loss.item() == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("lambda = 0 makes every block an exact identity") {
    PrecisionScope f64(Precision::f64);
    ModelConfig c = ModelConfig::preset("tiny");
    Vit5Model m = build_model(c, 11);
    for (auto& b : m.blocks) {
        std::fill(b.ls1.lambda.mutable_data().begin(), b.ls1.lambda.mutable_data().end(), 0.0);
        std::fill(b.ls2.lambda.mutable_data().begin(), b.ls2.lambda.mutable_data().end(), 0.0);
    }
    NoGradScope ng;
    Tensor img = randn(Rng(13), {1, 1, 32, 32}, 0.5);
    Tensor logits = m.forward(img);

    // Oracle: embed -> final norm -> class readout -> head, skipping blocks.
    Tensor tok = ops::add_rowvec(ops::matmul(ops::extract_patches(img, c.patch), m.patch_w),
                                 m.patch_b);
    tok = ops::add(tok, ops::tile_batch(m.ape, 1));
    Tensor seq = ops::concat_tokens({ops::tile_batch(m.class_token, 1),
                                     ops::tile_batch(m.registers, 1), tok});
    seq = nn::apply_norm(seq, m.final_norm);
    Tensor readout = ops::reshape(ops::slice_tokens(seq, 0, 1), {1, c.dim});
    Tensor expect = ops::add_rowvec(ops::matmul(readout, m.head_w), m.head_b);
    REQUIRE(expect.numel() == logits.numel());
    for (std::int64_t i = 0; i < logits.numel(); ++i) {
        CHECK(logits.data()[i] == expect.data()[i]);
    }
}

TEST_CASE("mean-pool readout is permutation invariant without positional machinery") {
    PrecisionScope f64(Precision::f64);
    ModelConfig c = ModelConfig::preset("tiny");
    c.rope = false;
    c.ape = false;
    c.registers_rope = RegRope::None;
    c.readout = Readout::MeanPool;
    const Vit5Model m = build_model(c, 17);
    NoGradScope ng;

    Tensor img = randn(Rng(19), {1, 1, 32, 32}, 0.5);
    Tensor base = m.forward(img);

    // Permute patches by permuting 4x4 pixel blocks of the image.
    Rng prng(23);
    std::vector<int> perm(64);
    for (int i = 0; i < 64; ++i) perm[i] = i;
    for (int i = 63; i > 0; --i) {
        std::swap(perm[i], perm[prng.next_below(static_cast<std::uint64_t>(i + 1))]);
    }
    std::vector<double> shuffled(img.numel());
    for (int t = 0; t < 64; ++t) {
        const int src = perm[t];
        const int sy = (src / 8) * 4, sx = (src % 8) * 4;
        const int dy = (t / 8) * 4, dx = (t % 8) * 4;
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x) {
                shuffled[(dy + y) * 32 + dx + x] = img.data()[(sy + y) * 32 + sx + x];
            }
    }
    Tensor permuted = m.forward(Tensor::from_data({1, 1, 32, 32}, shuffled));
    for (std::int64_t i = 0; i < base.numel(); ++i) {
        CHECK(std::abs(base.data()[i] - permuted.data()[i]) < 1e-6);
    }
}

TEST_CASE("toggle isolation: one flipped toggle moves only its parameter groups") {
    const ModelConfig base = ModelConfig::preset("tiny");
    const auto base_names = param_names(build_model(base, 1));

    struct Case {
        const char* toggle;
        ModelConfig cfg;
        std::vector<std::string> expect_tokens;  // every diff name contains one
    };
    std::vector<Case> cases;
    {
        ModelConfig c = base;
        c.qkv_bias = true;
        cases.push_back({"qkv_bias", c, {".attn.b_"}});
    }
    {
        ModelConfig c = base;
        c.qk_norm = false;
        cases.push_back({"qk_norm", c, {".attn.qk_norm."}});
    }
    {
        ModelConfig c = base;
        c.layerscale = LayerScaleMode::PostNorm;
        cases.push_back({"postnorm", c, {".ls1.", ".ls2.", ".pn1.", ".pn2."}});
    }
    {
        ModelConfig c = base;
        c.norm = NormKind::Layer;
        cases.push_back({"layernorm", c, {"norm1.bias", "norm2.bias", "final_norm.bias"}});
    }
    {
        ModelConfig c = base;
        c.mlp = MlpKind::SwiGlu;
        cases.push_back({"swiglu", c, {".mlp.w_"}});
    }
    for (const auto& cs : cases) {
        const auto names = param_names(build_model(cs.cfg, 1));
        std::vector<std::string> diff;
        std::set_symmetric_difference(base_names.begin(), base_names.end(), names.begin(),
                                      names.end(), std::back_inserter(diff));
        INFO("toggle " << cs.toggle);
        CHECK(!diff.empty());
        for (const auto& name : diff) {
            bool matched = false;
            for (const auto& token : cs.expect_tokens) {
                if (name.find(token) != std::string::npos) matched = true;
            }
            INFO("unexpected diff name " << name);
            CHECK(matched);
        }
    }
}

TEST_CASE("shared parameter groups are identical across toggle variants at one seed") {
    ModelConfig a = ModelConfig::preset("tiny");
    ModelConfig b = a;
    b.qk_norm = false;
    b.qkv_bias = true;
    const Vit5Model ma = build_model(a, 42);
    const Vit5Model mb = build_model(b, 42);
    for (const auto& pa : ma.parameters()) {
        for (const auto& pb : mb.parameters()) {
            if (pa.name == pb.name) {
                REQUIRE(pa.tensor.numel() == pb.tensor.numel());
                for (std::int64_t i = 0; i < pa.tensor.numel(); ++i) {
                    CHECK(pa.tensor.data()[i] == pb.tensor.data()[i]);
                }
            }
        }
    }
}

TEST_CASE("ape resolution transfer is identity at the build grid") {
    const std::vector<double> src = {1, 2, 3, 4};  // 2x2 grid, d=1
    const auto same = resize_grid_bilinear(src, 2, 2, 2, 2, 1);
    CHECK(same == src);
    const auto up = resize_grid_bilinear(src, 2, 2, 3, 3, 1);
    CHECK(up[0] == 1.0);   // corners align
    CHECK(up[2] == 2.0);
    CHECK(up[6] == 3.0);
    CHECK(up[8] == 4.0);
    CHECK(up[4] == doctest::Approx(2.5));  // center is the 4-corner average
}

TEST_CASE("forward rejects bad resolutions and supports eval-time regridding") {
    ModelConfig c = ModelConfig::preset("tiny");
    const Vit5Model m = build_model(c, 3);
    CHECK_THROWS_AS(m.forward(Tensor::zeros({1, 1, 30, 30})), ShapeError);
    {
        NoGradScope ng;
        CHECK_NOTHROW(m.forward(Tensor::zeros({1, 1, 48, 48})));
    }
    // Under gradients, regridding APE is rejected rather than silently detached.
    CHECK_THROWS_AS(m.forward(Tensor::zeros({1, 1, 48, 48})), ConfigError);
}

TEST_CASE("attention maps: nonnegative grid, unit total mass") {
    ModelConfig c = ModelConfig::preset("tiny");
    const Vit5Model m = build_model(c, 9);
    SynthSpec data;
    data.resolution = 32;
    const Batch b = generate(data, "eval", 0, 1);

    for (const QuerySpec q : {QuerySpec{QueryKind::Class, 0, 0, 0},
                              QuerySpec{QueryKind::Register, 2, 0, 0},
                              QuerySpec{QueryKind::Patch, 0, 3, 5}}) {
        const AttentionMap map = attention_maps(m, b.images, 1, 2, q);
        CHECK(map.grid.shape() == Shape{8, 8});
        double total = map.patch_mass;
        for (double v : map.grid.data()) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        for (double v : map.special_mass) total += v;
        CHECK(std::abs(total - 1.0) < 1e-6);
        CHECK(map.patch_mass <= 1.0 + 1e-9);
    }
    CHECK_THROWS_AS(attention_maps(m, b.images, 99, 0, QuerySpec{}), ConfigError);
    CHECK_THROWS_AS(attention_maps(m, b.images, 0, 99, QuerySpec{}), ConfigError);
}

TEST_CASE("full-model gradient check (tiny config)") {
    PrecisionScope f64(Precision::f64);
    const auto reports = run_grad_cases(model_grad_cases(2029), 1e-4);
    REQUIRE(reports.size() == 1);
    INFO("max_rel_err=" << reports[0].max_rel_err);
    CHECK(reports[0].ok);
}
