#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "vit5/nn.hpp"
#include "vit5/probes.hpp"
#include "vit5/rng.hpp"

using namespace vit5;

namespace {

Tensor randn(Rng rng, Shape shape, double scale = 1.0) {
    std::vector<double> d(static_cast<std::size_t>(shape_numel(shape)));
    for (auto& v : d) v = rng.next_normal() * scale;
    return Tensor::from_data(std::move(shape), std::move(d), false);
}

// Rotates one head vector at a 2D coordinate and returns it.
std::vector<double> rotate_at(const RopeTables& tables, const std::vector<double>& v,
                              std::int64_t x, std::int64_t y) {
    Tensor t = Tensor::from_data({1, static_cast<std::int64_t>(v.size())}, v);
    const RopeAngles a = tables.angles_for({{true, RopeTable::Patch, x, y}});
    Tensor r = ops::rope_rotate(t, a.cos_bank, a.sin_bank);
    return r.data();
}

}  // namespace

TEST_CASE("rope construction rules") {
    CHECK_THROWS_AS(RopeTables(1e-4, 1e-1, 6), ConfigError);   // not a multiple of 4
    CHECK_THROWS_AS(RopeTables(0.0, 1e-1, 8), ConfigError);
    RopeTables tables(1e-4, 1e-1, 16);
    // theta_i = B^(2i / (d_head/2)); d_head 16 -> exponent i/4.
    for (int i = 0; i < 4; ++i) {
        CHECK(tables.theta(RopeTable::Patch, i) ==
              doctest::Approx(std::pow(1e-4, i / 4.0)).epsilon(1e-12));
        CHECK(tables.theta(RopeTable::Reg, i) ==
              doctest::Approx(std::pow(1e-1, i / 4.0)).epsilon(1e-12));
    }
    CHECK(tables.theta(RopeTable::Patch, 0) == 1.0);  // shared first frequency
}

TEST_CASE("rotation at the origin is the exact identity") {
    PrecisionScope f64(Precision::f64);
    RopeTables tables(1e-4, 1e-1, 8);
    Tensor x = randn(Rng(3), {5, 8});
    std::vector<TokenCoord> coords(5, TokenCoord{true, RopeTable::Patch, 0, 0});
    const RopeAngles a = tables.angles_for(coords);
    Tensor y = ops::rope_rotate(x, a.cos_bank, a.sin_bank);
    for (std::int64_t i = 0; i < x.numel(); ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("rotation preserves per-head norms within 1e-6") {
    PrecisionScope f64(Precision::f64);
    RopeTables tables(1e-4, 1e-1, 16);
    Rng rng(11);
    Tensor x = randn(rng.split("x"), {2, 3, 4, 16});
    std::vector<TokenCoord> coords = {{true, RopeTable::Patch, 3, 9},
                                      {true, RopeTable::Reg, 2, 0},
                                      {true, RopeTable::Patch, -4, 7},
                                      {false, RopeTable::Patch, 0, 0}};
    const RopeAngles a = tables.angles_for(coords);
    Tensor y = ops::rope_rotate(x, a.cos_bank, a.sin_bank);
    for (std::int64_t g = 0; g < 2 * 3; ++g) {
        for (std::int64_t t = 0; t < 4; ++t) {
            double nx = 0.0, ny = 0.0;
            for (std::int64_t c = 0; c < 16; ++c) {
                nx += x.data()[(g * 4 + t) * 16 + c] * x.data()[(g * 4 + t) * 16 + c];
                ny += y.data()[(g * 4 + t) * 16 + c] * y.data()[(g * 4 + t) * 16 + c];
            }
            CHECK(std::abs(std::sqrt(nx) - std::sqrt(ny)) < 1e-6);
        }
    }
}

TEST_CASE("relative property: logits depend on coordinate differences only") {
    PrecisionScope f64(Precision::f64);
    RopeTables tables(1e-4, 1e-1, 16);
    Rng rng(17);
    Rng trng = rng.split("triples");
    for (int trial = 0; trial < 100; ++trial) {
        Rng tr = trng.split(static_cast<std::uint64_t>(trial));
        const std::vector<double> q = randn(tr.split("q"), {16}).data();
        const std::vector<double> k = randn(tr.split("k"), {16}).data();
        const auto coord = [&](Rng r) {
            return static_cast<std::int64_t>(r.next_below(33)) - 16;
        };
        const std::int64_t px = coord(tr.split("px")), py = coord(tr.split("py"));
        const std::int64_t qx = coord(tr.split("qx")), qy = coord(tr.split("qy"));
        const std::int64_t tx = coord(tr.split("tx")), ty = coord(tr.split("ty"));

        auto logit = [&](std::int64_t ax, std::int64_t ay, std::int64_t bx, std::int64_t by) {
            const auto rq = rotate_at(tables, q, ax, ay);
            const auto rk = rotate_at(tables, k, bx, by);
            double dot = 0.0;
            for (int c = 0; c < 16; ++c) dot += rq[c] * rk[c];
            return dot / 4.0;  // sqrt(d_head) = 4
        };
        const double base = logit(px, py, qx, qy);
        const double shifted = logit(px + tx, py + ty, qx + tx, qy + ty);
        CHECK(std::abs(base - shifted) < 1e-5);
    }
}

TEST_CASE("tables extend lazily and handle negative coordinates") {
    RopeTables tables(1e-4, 1e-1, 8);
    std::vector<double> cs(2), sn(2);
    tables.angles_at(RopeTable::Patch, 1000, cs.data(), sn.data());
    CHECK(cs[0] == doctest::Approx(std::cos(1000.0)).epsilon(1e-9));
    std::vector<double> csn(2), snn(2);
    tables.angles_at(RopeTable::Patch, -1000, csn.data(), snn.data());
    CHECK(csn[0] == doctest::Approx(cs[0]).epsilon(1e-12));
    CHECK(snn[0] == doctest::Approx(-sn[0]).epsilon(1e-12));
}

TEST_CASE("probes: rope identity, qk bound, register coupling") {
    ModelConfig cfg = ModelConfig::preset("tiny");
    cfg.dim = 128;  // d_head 32: enough axis frequencies for the coupling probe
    cfg.validate();

    const ProbeResult id = probe_rope_identity(cfg, 12);
    CHECK(id.pass);
    CHECK(id.measured == 0.0);

    const ProbeResult qk = probe_qk_bound(cfg, 12, 100);
    CHECK(qk.pass);

    const ProbeResult reg = probe_register_coupling(cfg, 12);
    INFO("same=" << reg.details["spread_same_base"] << " high=" << reg.details["spread_high_base"]);
    CHECK(reg.pass);
}

TEST_CASE("probes: translation invariance without APE, sensitivity with APE") {
    ModelConfig cfg = ModelConfig::preset("tiny");
    cfg.ape = false;
    const ProbeResult inv = probe_translation(cfg, 99, 40);
    INFO("max patch<->patch delta " << inv.measured);
    CHECK(inv.pass);
    CHECK(inv.measured < 1e-5);

    cfg.ape = true;
    const ProbeResult sens = probe_translation(cfg, 99, 40);
    INFO("max patch<->patch delta " << sens.measured);
    CHECK(sens.pass);
    CHECK(sens.measured > 1e-3);
}

TEST_CASE("probes: flip probe reports both variants") {
    ModelConfig cfg = ModelConfig::preset("tiny");
    const ProbeResult flip = probe_flip(cfg, 5);
    CHECK(flip.pass);  // informational
    CHECK(flip.details.contains("rope_only_max_delta"));
    CHECK(flip.details.contains("ape_rope_max_delta"));
    // APE+RoPE must be at least as flip sensitive as RoPE-only.
    const double rope_only = flip.details["rope_only_max_delta"].get<double>();
    const double with_ape = flip.details["ape_rope_max_delta"].get<double>();
    CHECK(with_ape >= rope_only * 0.5);
}
