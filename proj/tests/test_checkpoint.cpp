#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "vit5/checkpoint.hpp"
#include "vit5/synth.hpp"

using namespace vit5;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("vit5_ckpt_test_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::vector<char> slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::vector<char>((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("checkpoint roundtrip: bit-identical logits and bytes") {
    PrecisionScope f32(Precision::f32);
    TempDir tmp;
    ModelConfig cfg = ModelConfig::preset("micro");
    const Vit5Model m = build_model(cfg, 77);

    const std::string p1 = (tmp.path / "a.ckpt").string();
    const std::string p2 = (tmp.path / "b.ckpt").string();
    save_checkpoint(m, p1);
    const Vit5Model loaded = load_checkpoint(p1);
    save_checkpoint(loaded, p2);
    CHECK(slurp(p1) == slurp(p2));

    SynthSpec data;
    data.resolution = cfg.image_size;
    const Batch probe = generate(data, "eval", 0, 3);
    NoGradScope ng;
    const Tensor a = m.forward(probe.images);
    const Tensor b = loaded.forward(probe.images);
    REQUIRE(a.numel() == b.numel());
    for (std::int64_t i = 0; i < a.numel(); ++i) CHECK(a.data()[i] == b.data()[i]);

    CHECK(loaded.seed == m.seed);
}

TEST_CASE("manifest tensor count equals the closed-form group count") {
    ModelConfig cfg = ModelConfig::preset("micro");
    cfg.qkv_bias = true;
    cfg.mlp = MlpKind::SwiGlu;
    const Vit5Model m = build_model(cfg, 5);
    const auto manifest = checkpoint_manifest(m);
    CHECK(static_cast<std::int64_t>(manifest.at("tensors").size()) == param_group_count(cfg));
    CHECK(manifest.at("format").get<std::string>() == "vit5-ckpt/1");
}

TEST_CASE("corruption and format errors are distinct") {
    TempDir tmp;
    const Vit5Model m = build_model(ModelConfig::preset("micro"), 8);
    const std::string p = (tmp.path / "m.ckpt").string();
    save_checkpoint(m, p);

    SUBCASE("flipped blob byte -> hash mismatch") {
        auto bytes = slurp(p);
        bytes[bytes.size() - 3] = static_cast<char>(bytes[bytes.size() - 3] ^ 0x40);
        std::ofstream(p, std::ios::binary | std::ios::trunc)
            .write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        try {
            load_checkpoint(p);
            FAIL("expected IoError");
        } catch (const IoError& e) {
            CHECK(std::string(e.what()).find("hash mismatch") != std::string::npos);
        }
    }

    SUBCASE("truncated blob") {
        auto bytes = slurp(p);
        bytes.resize(bytes.size() - 10);
        std::ofstream(p, std::ios::binary | std::ios::trunc)
            .write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        try {
            load_checkpoint(p);
            FAIL("expected IoError");
        } catch (const IoError& e) {
            CHECK(std::string(e.what()).find("truncated") != std::string::npos);
        }
    }

    SUBCASE("bad magic") {
        auto bytes = slurp(p);
        bytes[0] = 'X';
        std::ofstream(p, std::ios::binary | std::ios::trunc)
            .write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        try {
            load_checkpoint(p);
            FAIL("expected IoError");
        } catch (const IoError& e) {
            CHECK(std::string(e.what()).find("magic") != std::string::npos);
        }
    }

    SUBCASE("version mismatch") {
        auto bytes = slurp(p);
        const std::string needle = "vit5-ckpt/1";
        auto it = std::search(bytes.begin(), bytes.end(), needle.begin(), needle.end());
        REQUIRE(it != bytes.end());
        *(it + static_cast<std::ptrdiff_t>(needle.size()) - 1) = '9';
        std::ofstream(p, std::ios::binary | std::ios::trunc)
            .write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        try {
            load_checkpoint(p);
            FAIL("expected IoError");
        } catch (const IoError& e) {
            CHECK(std::string(e.what()).find("version") != std::string::npos);
        }
    }
}
