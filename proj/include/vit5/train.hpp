#pragma once

#include <string>
#include <vector>

#include "vit5/checkpoint.hpp"
#include "vit5/model.hpp"
#include "vit5/synth.hpp"

namespace vit5 {

struct TrainSpec {
    double lr = 3e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double weight_decay = 0.05;
    double adam_eps = 1e-8;
    int warmup_steps = 50;
    int steps = 500;
    int batch = 32;
    std::uint64_t seed = 1;
    Precision run_precision = Precision::f32;
    double spike_lr_multiplier = 1.0;  // scales peak lr for stability runs
    double min_lr_ratio = 0.01;        // min lr = peak / 100 by default
    double clip_norm = 1.0;            // global gradient norm clip; <= 0 disables
    int eval_every = 0;                // 0: final eval only
    int eval_batch = 64;
    int spike_window = 50;
    double spike_factor = 2.0;

    void validate() const;
    nlohmann::json to_json() const;
    static TrainSpec from_json(const nlohmann::json& j);
};

struct StepRow {
    std::int64_t step;
    double loss;
    double lr;
    double grad_norm;
    int spike;
    int nan;
};

struct EvalRow {
    std::int64_t step;
    std::string split;
    double accuracy;
};

struct RunRecord {
    std::vector<StepRow> steps;
    std::vector<EvalRow> evals;
    nlohmann::json manifest;

    std::string metrics_csv() const;  // header: step,loss,lr,grad_norm,spike,nan
    std::string evals_csv() const;    // header: step,split,accuracy
    void write(const std::string& dir) const;
};

struct TrainResult {
    Vit5Model model;
    RunRecord record;
    bool halted_nan = false;
    double final_eval_accuracy = 0.0;
};

// Deterministic end-to-end: (model config, data spec, train spec) fixes the
// parameter init, the batch streams, and therefore every recorded row and the
// final checkpoint bit-for-bit. When out_dir is non-empty, writes config.json,
// metrics.csv, evals.csv, manifest.json and model.ckpt there.
TrainResult train(const ModelConfig& model_cfg, const SynthSpec& data, const TrainSpec& spec,
                  const std::string& out_dir = "");

// Top-1 accuracy over the eval split at the given resolution (0 = native).
double evaluate(const Vit5Model& model, const SynthSpec& data, int resolution = 0,
                int eval_batch = 64);

// spike = step whose loss exceeds factor x running median of the previous
// window. Returns (spike_count, nan_count).
std::pair<std::int64_t, std::int64_t> spike_metrics(const std::vector<StepRow>& rows,
                                                    int window = 50, double factor = 2.0);

double cosine_lr(const TrainSpec& spec, std::int64_t step);

// Shortest-roundtrip decimal formatting; keeps CSVs byte-stable.
std::string format_double(double v);

// AdamW with decoupled weight decay over the model's parameter registry.
class AdamW {
public:
    AdamW(const std::vector<ParamRef>& params, const TrainSpec& spec);

    // Returns the pre-clip global gradient norm; applies clipping, the update
    // and zeroes gradients.
    double step(double lr);

private:
    std::vector<ParamRef> params_;
    std::vector<std::vector<double>> m_, v_;
    double beta1_, beta2_, eps_, weight_decay_, clip_norm_;
    std::int64_t t_ = 0;
};

}  // namespace vit5
