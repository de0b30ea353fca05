#include "vit5/synth.hpp"

#include <algorithm>
#include <cmath>

namespace vit5 {

using nlohmann::json;

namespace {

constexpr std::int64_t kOne = 65536;  // Q16 unit
constexpr std::int64_t kRadiusMin = 6554;   // 0.10
constexpr std::int64_t kRadiusMax = 14418;  // 0.22
constexpr std::int64_t kMarginPad = 1311;   // 0.02
constexpr std::int64_t kFgMin = 39322;      // 0.60

std::string task_name(SynthTask t) {
    return t == SynthTask::ShapeClass ? "shape_class" : "shape_quadrant";
}

Rng stream_for(const SynthSpec& spec, std::string_view split, std::int64_t index,
               std::string_view kind) {
    return Rng(spec.seed)
        .split(split)
        .split(static_cast<std::uint64_t>(index))
        .split(kind);
}

// Exact inside tests in integer arithmetic. Points are expressed relative to
// the center in units of 1/(8*res*65536); R is the half-extent in the same
// units.
bool inside_shape(int shape_id, std::int64_t dx, std::int64_t dy, std::int64_t R) {
    switch (shape_id) {
        case 0:  // disk
            return dx * dx + dy * dy <= R * R;
        case 1:  // square
            return std::llabs(dx) <= R && std::llabs(dy) <= R;
        case 2: {  // up-pointing triangle: apex (0,-R), base corners (+-R, R)
            const std::int64_t ax = 0, ay = -R;
            const std::int64_t bx = -R, by = R;
            const std::int64_t cx = R, cy = R;
            const std::int64_t d1 = (bx - ax) * (dy - ay) - (by - ay) * (dx - ax);
            const std::int64_t d2 = (cx - bx) * (dy - by) - (cy - by) * (dx - bx);
            const std::int64_t d3 = (ax - cx) * (dy - cy) - (ay - cy) * (dx - cx);
            const bool neg = (d1 < 0) || (d2 < 0) || (d3 < 0);
            const bool pos = (d1 > 0) || (d2 > 0) || (d3 > 0);
            return !(neg && pos);
        }
        case 3: {  // cross: two bars of width R/3
            const std::int64_t w = R / 3;
            const bool horizontal = std::llabs(dy) <= w && std::llabs(dx) <= R;
            const bool vertical = std::llabs(dx) <= w && std::llabs(dy) <= R;
            return horizontal || vertical;
        }
        default:
            return false;
    }
}

}  // namespace

void SynthSpec::validate() const {
    if (resolution < 8) throw ConfigError("synth: resolution must be >= 8");
    if (channels != 1 && channels != 3) throw ConfigError("synth: channels must be 1 or 3");
    if (train_samples < 1 || eval_samples < 1) throw ConfigError("synth: split sizes must be >= 1");
    if (noise_std < 0.0) throw ConfigError("synth: noise_std must be >= 0");
}

json SynthSpec::to_json() const {
    json j;
    j["task"] = task_name(task);
    j["resolution"] = resolution;
    j["channels"] = channels;
    j["train_samples"] = train_samples;
    j["eval_samples"] = eval_samples;
    j["seed"] = seed;
    j["noise_std"] = noise_std;
    return j;
}

SynthSpec SynthSpec::from_json(const json& j) {
    SynthSpec s;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string k = it.key();
        if (k != "task" && k != "resolution" && k != "channels" && k != "train_samples" &&
            k != "eval_samples" && k != "seed" && k != "noise_std") {
            throw ConfigError("synth: unknown data key '" + k + "'");
        }
    }
    if (j.contains("task")) {
        const std::string t = j.at("task").get<std::string>();
        if (t == "shape_class") {
            s.task = SynthTask::ShapeClass;
        } else if (t == "shape_quadrant") {
            s.task = SynthTask::ShapeQuadrant;
        } else {
            throw ConfigError("synth: task must be shape_class|shape_quadrant, got '" + t + "'");
        }
    }
    if (j.contains("resolution")) s.resolution = j.at("resolution").get<int>();
    if (j.contains("channels")) s.channels = j.at("channels").get<int>();
    if (j.contains("train_samples")) s.train_samples = j.at("train_samples").get<std::int64_t>();
    if (j.contains("eval_samples")) s.eval_samples = j.at("eval_samples").get<std::int64_t>();
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("noise_std")) s.noise_std = j.at("noise_std").get<double>();
    return s;
}

Scene scene_for(const SynthSpec& spec, std::string_view split, std::int64_t index) {
    Rng rng = stream_for(spec, split, index, "geom");
    Scene s;
    s.shape_id = static_cast<int>(rng.next_below(kSynthShapes));
    s.r_q = kRadiusMin + static_cast<std::int64_t>(rng.next_below(kRadiusMax - kRadiusMin + 1));
    const std::int64_t margin = s.r_q + kMarginPad;
    const std::int64_t span = kOne - 2 * margin;
    s.cx_q = margin + static_cast<std::int64_t>(rng.next_below(static_cast<std::uint64_t>(span)));
    s.cy_q = margin + static_cast<std::int64_t>(rng.next_below(static_cast<std::uint64_t>(span)));
    const int nch = spec.channels;
    for (int c = 0; c < nch; ++c) {
        s.fg_q[c] = kFgMin + static_cast<std::int64_t>(rng.next_below(kOne - kFgMin + 1));
    }
    return s;
}

void render_scene(const SynthSpec& spec, const Scene& scene, std::string_view split,
                  std::int64_t index, int resolution, double* out) {
    const std::int64_t N = resolution;
    // Sample grid: 4x4 subsamples per pixel, coordinates in 1/(8N) image
    // units; scene quantities scaled to the common denominator 8N * 65536.
    const std::int64_t scale = 8 * N;
    const std::int64_t cx = scene.cx_q * scale;
    const std::int64_t cy = scene.cy_q * scale;
    const std::int64_t R = scene.r_q * scale;

    std::vector<int> coverage(static_cast<std::size_t>(N * N), 0);
    for (std::int64_t py = 0; py < N; ++py) {
        for (std::int64_t px = 0; px < N; ++px) {
            int count = 0;
            for (int sy = 0; sy < 4; ++sy) {
                const std::int64_t Y = (2 * (4 * py + sy) + 1) * kOne;  // 1/(8N) units * 65536
                for (int sx = 0; sx < 4; ++sx) {
                    const std::int64_t X = (2 * (4 * px + sx) + 1) * kOne;
                    if (inside_shape(scene.shape_id, X - cx, Y - cy, R)) ++count;
                }
            }
            coverage[static_cast<std::size_t>(py * N + px)] = count;
        }
    }

    Rng noise = stream_for(spec, split, index, "noise");
    const bool noisy = spec.noise_std > 0.0;
    for (int c = 0; c < spec.channels; ++c) {
        const double fg = static_cast<double>(scene.fg_q[c]) / static_cast<double>(kOne);
        double* plane = out + static_cast<std::int64_t>(c) * N * N;
        for (std::int64_t i = 0; i < N * N; ++i) {
            double v = fg * (static_cast<double>(coverage[static_cast<std::size_t>(i)]) / 16.0);
            if (noisy) v += spec.noise_std * noise.next_normal();
            plane[i] = std::clamp(v, 0.0, 1.0);
        }
    }
}

std::int64_t split_size(const SynthSpec& spec, std::string_view split) {
    if (split == "train") return spec.train_samples;
    if (split == "eval") return spec.eval_samples;
    throw ConfigError("synth: unknown split '" + std::string(split) + "'");
}

Batch generate(const SynthSpec& spec, std::string_view split, std::int64_t begin,
               std::int64_t count, int resolution) {
    spec.validate();
    const std::int64_t size = split_size(spec, split);
    if (begin < 0 || count < 1 || begin + count > size) {
        throw ConfigError("synth: range [" + std::to_string(begin) + ", " +
                          std::to_string(begin + count) + ") outside split of " +
                          std::to_string(size));
    }
    const int res = resolution > 0 ? resolution : spec.resolution;
    Batch batch;
    std::vector<double> images(static_cast<std::size_t>(count) * spec.channels * res * res);
    batch.labels.resize(static_cast<std::size_t>(count));
    for (std::int64_t i = 0; i < count; ++i) {
        const Scene scene = scene_for(spec, split, begin + i);
        batch.labels[static_cast<std::size_t>(i)] = scene.label(spec.task);
        render_scene(spec, scene, split, begin + i, res,
                     images.data() + i * spec.channels * res * res);
    }
    batch.images = Tensor::from_data({count, spec.channels, res, res}, std::move(images));
    return batch;
}

}  // namespace vit5
