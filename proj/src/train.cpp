#include "vit5/train.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <limits>

#include "vit5/ops.hpp"

namespace vit5 {

using nlohmann::json;

void TrainSpec::validate() const {
    if (lr < 0.0) throw ConfigError("train: lr must be >= 0");
    if (steps < 1) throw ConfigError("train: steps must be >= 1");
    if (warmup_steps < 0 || warmup_steps > steps) {
        throw ConfigError("train: warmup " + std::to_string(warmup_steps) +
                          " must lie in [0, steps=" + std::to_string(steps) + "]");
    }
    if (batch < 1) throw ConfigError("train: batch must be >= 1");
    if (spike_window < 1) throw ConfigError("train: spike_window must be >= 1");
    if (spike_factor <= 1.0) throw ConfigError("train: spike_factor must be > 1");
    if (spike_lr_multiplier <= 0.0) throw ConfigError("train: spike_lr_multiplier must be > 0");
}

json TrainSpec::to_json() const {
    json j;
    j["lr"] = lr;
    j["beta1"] = beta1;
    j["beta2"] = beta2;
    j["weight_decay"] = weight_decay;
    j["adam_eps"] = adam_eps;
    j["warmup_steps"] = warmup_steps;
    j["steps"] = steps;
    j["batch"] = batch;
    j["seed"] = seed;
    j["precision"] = run_precision == Precision::f32 ? "f32" : "f64";
    j["spike_lr_multiplier"] = spike_lr_multiplier;
    j["min_lr_ratio"] = min_lr_ratio;
    j["clip_norm"] = clip_norm;
    j["eval_every"] = eval_every;
    j["eval_batch"] = eval_batch;
    j["spike_window"] = spike_window;
    j["spike_factor"] = spike_factor;
    return j;
}

TrainSpec TrainSpec::from_json(const json& j) {
    TrainSpec s;
    const std::vector<std::string> known = {
        "lr", "beta1", "beta2", "weight_decay", "adam_eps", "warmup_steps", "steps", "batch",
        "seed", "precision", "spike_lr_multiplier", "min_lr_ratio", "clip_norm", "eval_every",
        "eval_batch", "spike_window", "spike_factor"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
            throw ConfigError("train: unknown train key '" + it.key() + "'");
        }
    }
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("lr", s.lr);
    get("beta1", s.beta1);
    get("beta2", s.beta2);
    get("weight_decay", s.weight_decay);
    get("adam_eps", s.adam_eps);
    get("warmup_steps", s.warmup_steps);
    get("steps", s.steps);
    get("batch", s.batch);
    get("seed", s.seed);
    if (j.contains("precision")) {
        const std::string p = j.at("precision").get<std::string>();
        if (p == "f32") {
            s.run_precision = Precision::f32;
        } else if (p == "f64") {
            s.run_precision = Precision::f64;
        } else {
            throw ConfigError("train: precision must be f32|f64, got '" + p + "'");
        }
    }
    get("spike_lr_multiplier", s.spike_lr_multiplier);
    get("min_lr_ratio", s.min_lr_ratio);
    get("clip_norm", s.clip_norm);
    get("eval_every", s.eval_every);
    get("eval_batch", s.eval_batch);
    get("spike_window", s.spike_window);
    get("spike_factor", s.spike_factor);
    return s;
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double cosine_lr(const TrainSpec& spec, std::int64_t step) {
    const double peak = spec.lr * spec.spike_lr_multiplier;
    const double min_lr = peak * spec.min_lr_ratio;
    if (step < spec.warmup_steps) {
        return peak * static_cast<double>(step + 1) / static_cast<double>(spec.warmup_steps);
    }
    const std::int64_t last = spec.steps - 1;
    if (step >= last && spec.steps > spec.warmup_steps + 1) return min_lr;
    if (last <= spec.warmup_steps) return peak;
    if (step == spec.warmup_steps) return peak;
    const double progress = static_cast<double>(step - spec.warmup_steps) /
                            static_cast<double>(last - spec.warmup_steps);
    return min_lr + 0.5 * (peak - min_lr) * (1.0 + std::cos(progress * 3.14159265358979323846));
}

// ---------------------------------------------------------------------------
// AdamW
// ---------------------------------------------------------------------------

AdamW::AdamW(const std::vector<ParamRef>& params, const TrainSpec& spec)
    : params_(params),
      beta1_(spec.beta1),
      beta2_(spec.beta2),
      eps_(spec.adam_eps),
      weight_decay_(spec.weight_decay),
      clip_norm_(spec.clip_norm) {
    for (const auto& p : params_) {
        m_.emplace_back(static_cast<std::size_t>(p.tensor.numel()), 0.0);
        v_.emplace_back(static_cast<std::size_t>(p.tensor.numel()), 0.0);
    }
}

double AdamW::step(double lr) {
    ++t_;
    double sq = 0.0;
    for (auto& p : params_) {
        for (double g : p.tensor.grad()) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    const double clip_scale = (clip_norm_ > 0.0 && norm > clip_norm_) ? clip_norm_ / norm : 1.0;

    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const Precision prec = precision();
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto& p = params_[i];
        auto& data = p.tensor.mutable_data();
        const auto& grad = p.tensor.grad();
        auto& m = m_[i];
        auto& v = v_[i];
        const double wd = p.decay ? weight_decay_ : 0.0;
        for (std::size_t k = 0; k < data.size(); ++k) {
            const double g = grad[k] * clip_scale;
            m[k] = beta1_ * m[k] + (1.0 - beta1_) * g;
            v[k] = beta2_ * v[k] + (1.0 - beta2_) * g * g;
            const double mhat = m[k] / bc1;
            const double vhat = v[k] / bc2;
            const double update = mhat / (std::sqrt(vhat) + eps_) + wd * data[k];
            data[k] = quantize_value(data[k] - lr * update, prec);
        }
        p.tensor.zero_grad();
    }
    return norm;
}

// ---------------------------------------------------------------------------
// spike detection
// ---------------------------------------------------------------------------

namespace {

class SpikeDetector {
public:
    SpikeDetector(int window, double factor) : window_(window), factor_(factor) {}

    bool check(double loss) {
        bool spike = false;
        if (!history_.empty() && std::isfinite(loss)) {
            std::vector<double> sorted(history_.begin(), history_.end());
            std::sort(sorted.begin(), sorted.end());
            const std::size_t n = sorted.size();
            const double median =
                n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
            spike = loss > factor_ * median;
        }
        if (std::isfinite(loss)) {
            history_.push_back(loss);
            if (static_cast<int>(history_.size()) > window_) history_.pop_front();
        }
        return spike;
    }

private:
    int window_;
    double factor_;
    std::deque<double> history_;
};

}  // namespace

std::pair<std::int64_t, std::int64_t> spike_metrics(const std::vector<StepRow>& rows, int window,
                                                    double factor) {
    if (window < 1) throw ConfigError("spike_metrics: window must be >= 1");
    if (factor <= 1.0) throw ConfigError("spike_metrics: factor must be > 1");
    SpikeDetector det(window, factor);
    std::int64_t spikes = 0, nans = 0;
    for (const auto& r : rows) {
        if (r.nan || !std::isfinite(r.loss)) {
            ++nans;
            continue;
        }
        if (det.check(r.loss)) ++spikes;
    }
    return {spikes, nans};
}

// ---------------------------------------------------------------------------
// record I/O
// ---------------------------------------------------------------------------

std::string RunRecord::metrics_csv() const {
    std::string out = "step,loss,lr,grad_norm,spike,nan\n";
    for (const auto& r : steps) {
        out += std::to_string(r.step) + "," + format_double(r.loss) + "," + format_double(r.lr) +
               "," + format_double(r.grad_norm) + "," + std::to_string(r.spike) + "," +
               std::to_string(r.nan) + "\n";
    }
    return out;
}

std::string RunRecord::evals_csv() const {
    std::string out = "step,split,accuracy\n";
    for (const auto& r : evals) {
        out += std::to_string(r.step) + "," + r.split + "," + format_double(r.accuracy) + "\n";
    }
    return out;
}

void RunRecord::write(const std::string& dir) const {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    auto dump = [&](const std::string& name, const std::string& content) {
        std::ofstream out(fs::path(dir) / name, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("run: cannot write '" + name + "' under '" + dir + "'");
        out << content;
    };
    dump("metrics.csv", metrics_csv());
    dump("evals.csv", evals_csv());
    dump("manifest.json", manifest.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// evaluate / train
// ---------------------------------------------------------------------------

double evaluate(const Vit5Model& model, const SynthSpec& data, int resolution, int eval_batch) {
    const int res = resolution > 0 ? resolution : data.resolution;
    if (res % model.config.patch != 0) {
        throw ConfigError("evaluate: resolution " + std::to_string(res) +
                          " not divisible by patch " + std::to_string(model.config.patch));
    }
    if (res < 4 * model.config.patch) {
        throw ConfigError("evaluate: resolution " + std::to_string(res) + " below 4x patch " +
                          std::to_string(model.config.patch));
    }
    NoGradScope ng;
    const std::int64_t total = data.eval_samples;
    std::int64_t correct = 0;
    for (std::int64_t begin = 0; begin < total; begin += eval_batch) {
        const std::int64_t count = std::min<std::int64_t>(eval_batch, total - begin);
        const Batch b = generate(data, "eval", begin, count, res);
        const Tensor logits = model.forward(b.images);
        const std::int64_t C = logits.dim(1);
        for (std::int64_t i = 0; i < count; ++i) {
            const double* row = logits.data().data() + i * C;
            std::int64_t best = 0;
            for (std::int64_t c = 1; c < C; ++c) {
                if (row[c] > row[best]) best = c;
            }
            if (best == b.labels[static_cast<std::size_t>(i)]) ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(total);
}

TrainResult train(const ModelConfig& model_cfg, const SynthSpec& data, const TrainSpec& spec,
                  const std::string& out_dir) {
    model_cfg.validate();
    data.validate();
    spec.validate();
    if (model_cfg.num_classes != data.classes()) {
        throw ConfigError("train: model has " + std::to_string(model_cfg.num_classes) +
                          " classes but task provides " + std::to_string(data.classes()));
    }
    if (data.resolution != model_cfg.image_size) {
        throw ConfigError("train: data resolution " + std::to_string(data.resolution) +
                          " differs from model image_size " + std::to_string(model_cfg.image_size));
    }
    if (data.channels != model_cfg.in_channels) {
        throw ConfigError("train: data channels differ from model in_channels");
    }
    if (data.resolution < 4 * model_cfg.patch) {
        throw ConfigError("train: resolution " + std::to_string(data.resolution) +
                          " below 4x patch " + std::to_string(model_cfg.patch));
    }

    const auto t0 = std::chrono::steady_clock::now();
    PrecisionScope prec(spec.run_precision);

    TrainResult result;
    result.model = build_model(model_cfg, spec.seed);
    auto params = result.model.parameters();
    AdamW opt(params, spec);
    SpikeDetector spikes(spec.spike_window, spec.spike_factor);
    const Rng batch_root = Rng(spec.seed).split("batches");

    result.record.steps.reserve(static_cast<std::size_t>(spec.steps));
    for (int step = 0; step < spec.steps; ++step) {
        Rng brng = batch_root.split(static_cast<std::uint64_t>(step));
        std::vector<std::int64_t> indices(static_cast<std::size_t>(spec.batch));
        for (auto& ix : indices) {
            ix = static_cast<std::int64_t>(
                brng.next_below(static_cast<std::uint64_t>(data.train_samples)));
        }
        // Assemble the batch from per-index scenes.
        const int res = data.resolution;
        std::vector<double> images(static_cast<std::size_t>(spec.batch) * data.channels * res * res);
        std::vector<std::int64_t> labels(indices.size());
        for (std::size_t i = 0; i < indices.size(); ++i) {
            const Scene scene = scene_for(data, "train", indices[i]);
            labels[i] = scene.label(data.task);
            render_scene(data, scene, "train", indices[i], res,
                         images.data() + static_cast<std::int64_t>(i) * data.channels * res * res);
        }
        const Tensor batch_images = Tensor::from_data(
            {spec.batch, data.channels, res, res}, std::move(images));

        const double lr = cosine_lr(spec, step);
        double loss_value = std::numeric_limits<double>::quiet_NaN();
        bool numeric_failure = false;
        try {
            Tensor logits = result.model.forward(batch_images);
            Tensor loss = ops::cross_entropy_with_logits(logits, labels);
            loss_value = loss.item();
            if (std::isfinite(loss_value)) {
                loss.backward();
            } else {
                numeric_failure = true;
            }
        } catch (const NumericError&) {
            numeric_failure = true;
        }

        if (numeric_failure) {
            result.record.steps.push_back({step, loss_value, lr, 0.0, 0, 1});
            result.halted_nan = true;
            break;
        }

        const bool spike = spikes.check(loss_value);
        const double grad_norm = opt.step(lr);
        result.record.steps.push_back({step, loss_value, lr, grad_norm, spike ? 1 : 0, 0});

        if (spec.eval_every > 0 && (step + 1) % spec.eval_every == 0 && step + 1 < spec.steps) {
            const double acc = evaluate(result.model, data, 0, spec.eval_batch);
            result.record.evals.push_back({step + 1, "eval", acc});
        }
    }

    if (!result.halted_nan) {
        result.final_eval_accuracy = evaluate(result.model, data, 0, spec.eval_batch);
        result.record.evals.push_back({spec.steps, "eval", result.final_eval_accuracy});
    }

    const auto [spike_count, nan_count] = spike_metrics(result.record.steps, spec.spike_window,
                                                        spec.spike_factor);
    const auto wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    json manifest;
    manifest["model"] = model_cfg.to_json();
    manifest["data"] = data.to_json();
    manifest["train"] = spec.to_json();
    {
        const std::string cfg_dump = model_cfg.to_json().dump();
        const std::string data_dump = data.to_json().dump();
        manifest["config_hash"] = fnv1a64_bytes(
            reinterpret_cast<const unsigned char*>(cfg_dump.data()), cfg_dump.size());
        manifest["data_hash"] = fnv1a64_bytes(
            reinterpret_cast<const unsigned char*>(data_dump.data()), data_dump.size());
    }
    manifest["seed"] = spec.seed;
    manifest["halted_nan"] = result.halted_nan;
    manifest["steps_run"] = result.record.steps.size();
    manifest["spike_count"] = spike_count;
    manifest["nan_count"] = nan_count;
    manifest["final_eval_accuracy"] = result.final_eval_accuracy;
    manifest["wall_time_s"] = wall;
    result.record.manifest = manifest;

    if (!out_dir.empty()) {
        namespace fs = std::filesystem;
        fs::create_directories(out_dir);
        result.record.write(out_dir);
        save_checkpoint(result.model, (fs::path(out_dir) / "model.ckpt").string());
    }
    return result;
}

}  // namespace vit5
