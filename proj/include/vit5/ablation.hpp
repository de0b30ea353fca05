#pragma once

#include <string>
#include <vector>

#include "vit5/train.hpp"

namespace vit5 {

enum class Suite { Table1, Table2, Table3, Table9, Table10, Table11 };

Suite suite_from_name(const std::string& name);
std::string suite_name(Suite s);
std::vector<std::string> suite_names();

// One row of the seven-component toggle matrix. postnorm marks rows that use
// post-normalization in place of an explicit LayerScale vector.
struct ToggleRow {
    const char* name;
    bool layerscale, rmsnorm, swiglu, rope, registers, qk_norm, qkv_bias;
    bool postnorm;
};

const std::vector<ToggleRow>& table9_rows();
ModelConfig apply_toggles(const ModelConfig& base, const ToggleRow& row);

struct AblationRow {
    std::string name;
    ModelConfig config;
};

std::vector<AblationRow> suite_rows(Suite suite, const ModelConfig& base);

struct RowResult {
    std::string name;
    nlohmann::json toggles;
    bool completed = false;       // training ran to the last step
    bool nan_halted = false;
    double final_loss = 0.0;
    double eval_accuracy = 0.0;
    std::int64_t spike_count = 0;
    std::int64_t nan_count = 0;
    double mlp_sparsity = -1.0;   // gating diagnostic on one eval batch
    std::string error;            // non-empty on row-level failure
};

struct AblationReport {
    Suite suite;
    std::vector<RowResult> rows;

    bool any_error() const;
    nlohmann::json to_json() const;
    std::string to_csv() const;
    std::string render_table() const;
};

// Rows must share dims (they differ only in toggles / scalar hyperparameters);
// heterogeneous dims are rejected. Each row trains with the shared data and
// train spec; nan-halted rows are recorded, not errors.
AblationReport run_rows(Suite suite, const std::vector<AblationRow>& rows, const SynthSpec& data,
                        const TrainSpec& spec, const std::string& out_dir);

AblationReport run_suite(Suite suite, const ModelConfig& base, const SynthSpec& data,
                         const TrainSpec& spec, const std::string& out_dir);

}  // namespace vit5
