#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "vit5/rng.hpp"
#include "vit5/tensor.hpp"

namespace vit5 {

enum class SynthTask { ShapeClass, ShapeQuadrant };

inline constexpr int kSynthShapes = 4;  // disk, square, triangle, cross

// Deterministic synthetic tasks: shape_class ignores position (translation
// tolerant), shape_quadrant multiplies the label by the quadrant of the shape
// center (absolute position is label relevant).
struct SynthSpec {
    SynthTask task = SynthTask::ShapeClass;
    int resolution = 32;
    int channels = 1;
    std::int64_t train_samples = 4096;
    std::int64_t eval_samples = 512;
    std::uint64_t seed = 1;
    double noise_std = 0.05;

    int classes() const { return task == SynthTask::ShapeClass ? kSynthShapes : kSynthShapes * 4; }
    void validate() const;
    nlohmann::json to_json() const;
    static SynthSpec from_json(const nlohmann::json& j);
};

struct Batch {
    Tensor images;  // [B, channels, H, W] in [0, 1]
    std::vector<std::int64_t> labels;
};

// Resolution-independent scene geometry in Q16 fixed point over the unit
// square; identical (spec, seed, split, index) always yields the same scene,
// and rendering is integer-exact (16x supersampled coverage), so outputs are
// byte-identical across platforms.
struct Scene {
    int shape_id = 0;
    std::int64_t cx_q = 0, cy_q = 0;  // center, [0, 65536)
    std::int64_t r_q = 0;             // half-extent
    std::int64_t fg_q[3] = {0, 0, 0};  // per-channel foreground intensity

    int quadrant() const { return (cx_q >= 32768 ? 1 : 0) + (cy_q >= 32768 ? 2 : 0); }
    int label(SynthTask task) const {
        return task == SynthTask::ShapeClass ? shape_id : shape_id * 4 + quadrant();
    }
};

Scene scene_for(const SynthSpec& spec, std::string_view split, std::int64_t index);

// Renders one channel plane of the scene at the given resolution; adds
// Gaussian-ish pixel noise from the scene's noise stream when noise_std > 0.
void render_scene(const SynthSpec& spec, const Scene& scene, std::string_view split,
                  std::int64_t index, int resolution, double* out);

std::int64_t split_size(const SynthSpec& spec, std::string_view split);

Batch generate(const SynthSpec& spec, std::string_view split, std::int64_t begin,
               std::int64_t count, int resolution = 0 /* 0: spec.resolution */);

}  // namespace vit5
