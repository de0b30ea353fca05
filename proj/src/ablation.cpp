#include "vit5/ablation.hpp"

#include <filesystem>
#include <fstream>

namespace vit5 {

using nlohmann::json;

Suite suite_from_name(const std::string& name) {
    if (name == "table1") return Suite::Table1;
    if (name == "table2") return Suite::Table2;
    if (name == "table3") return Suite::Table3;
    if (name == "table9") return Suite::Table9;
    if (name == "table10") return Suite::Table10;
    if (name == "table11") return Suite::Table11;
    throw ConfigError("ablate: unknown suite '" + name + "' (want table1|table2|table3|table9|table10|table11)");
}

std::string suite_name(Suite s) {
    switch (s) {
        case Suite::Table1: return "table1";
        case Suite::Table2: return "table2";
        case Suite::Table3: return "table3";
        case Suite::Table9: return "table9";
        case Suite::Table10: return "table10";
        case Suite::Table11: return "table11";
    }
    return "?";
}

std::vector<std::string> suite_names() {
    return {"table1", "table2", "table3", "table9", "table10", "table11"};
}

const std::vector<ToggleRow>& table9_rows() {
    // Columns: LayerScale, RMSNorm, SwiGLU, RoPE, Registers, QK-Norm, QKV-Bias.
    static const std::vector<ToggleRow> rows = {
        {"Vanilla",     false, false, false, false, false, false, true,  false},
        {"DeiT-III",    true,  false, false, false, false, false, true,  false},
        {"DINOv2",      true,  false, false, false, true,  false, true,  false},
        {"VisionLlama", false, false, true,  true,  false, false, true,  false},
        {"DINOv3",      true,  false, false, false, true,  false, false, false},
        {"NEPA",        true,  false, true,  true,  false, true,  true,  false},
        {"LLaMA",       false, true,  true,  true,  false, false, false, false},
        {"Qwen",        false, true,  true,  true,  false, false, true,  false},
        {"GPT-oss",     true,  true,  true,  true,  false, false, false, true},
        {"Gemma3",      false, true,  true,  true,  false, true,  false, false},
        {"ViT-5",       true,  true,  false, true,  true,  true,  false, false},
    };
    return rows;
}

ModelConfig apply_toggles(const ModelConfig& base, const ToggleRow& row) {
    ModelConfig c = base;
    c.layerscale = row.layerscale
                       ? (row.postnorm ? LayerScaleMode::PostNorm : LayerScaleMode::On)
                       : LayerScaleMode::Off;
    c.norm = row.rmsnorm ? NormKind::Rms : NormKind::Layer;
    c.mlp = row.swiglu ? MlpKind::SwiGlu : MlpKind::Gelu;
    c.rope = row.rope;
    c.registers = row.registers ? base.registers : 0;
    c.registers_rope = (row.registers && row.rope) ? RegRope::HighBase : RegRope::None;
    c.qk_norm = row.qk_norm;
    c.qkv_bias = row.qkv_bias;
    return c;
}

std::vector<AblationRow> suite_rows(Suite suite, const ModelConfig& base) {
    std::vector<AblationRow> rows;
    auto vit5 = [&] {
        ModelConfig c = base;
        c.layerscale = LayerScaleMode::On;
        c.norm = NormKind::Rms;
        c.mlp = MlpKind::Gelu;
        c.rope = true;
        c.ape = true;
        c.registers_rope = RegRope::HighBase;
        c.qk_norm = true;
        c.qkv_bias = false;
        return c;
    };
    switch (suite) {
        case Suite::Table1: {
            ModelConfig ls = vit5();
            ModelConfig pn = vit5();
            pn.layerscale = LayerScaleMode::PostNorm;
            rows.push_back({"layerscale", ls});
            rows.push_back({"postnorm", pn});
            break;
        }
        case Suite::Table2: {
            // Grid order follows the printed table: (x,x), (x,v), (v,v), (v,x).
            struct Cell { const char* name; bool ls, swiglu; };
            const Cell cells[] = {{"plain_gelu", false, false},
                                  {"plain_swiglu", false, true},
                                  {"layerscale_swiglu", true, true},
                                  {"layerscale_gelu", true, false}};
            for (const auto& cell : cells) {
                ModelConfig c = vit5();
                c.layerscale = cell.ls ? LayerScaleMode::On : LayerScaleMode::Off;
                c.mlp = cell.swiglu ? MlpKind::SwiGlu : MlpKind::Gelu;
                rows.push_back({cell.name, c});
            }
            break;
        }
        case Suite::Table3: {
            ModelConfig none = vit5();
            none.registers = 0;
            none.registers_rope = RegRope::None;
            ModelConfig vanilla = vit5();
            vanilla.registers_rope = RegRope::None;
            ModelConfig same = vit5();
            same.registers_rope = RegRope::SameBase;
            ModelConfig high = vit5();
            high.registers_rope = RegRope::HighBase;
            rows.push_back({"no_register", none});
            rows.push_back({"vanilla_registers", vanilla});
            rows.push_back({"rope_same_base", same});
            rows.push_back({"rope_high_base", high});
            break;
        }
        case Suite::Table9: {
            for (const ToggleRow& t : table9_rows()) {
                rows.push_back({t.name, apply_toggles(base, t)});
            }
            break;
        }
        case Suite::Table10: {
            struct Change { const char* name; void (*apply)(ModelConfig&); };
            const Change changes[] = {
                {"remove_layerscale", [](ModelConfig& c) { c.layerscale = LayerScaleMode::Off; }},
                {"rmsnorm_to_layernorm", [](ModelConfig& c) { c.norm = NormKind::Layer; }},
                {"gelu_to_swiglu", [](ModelConfig& c) { c.mlp = MlpKind::SwiGlu; }},
                {"remove_rope",
                 [](ModelConfig& c) {
                     c.rope = false;
                     c.registers_rope = RegRope::None;
                 }},
                {"remove_registers",
                 [](ModelConfig& c) {
                     c.registers = 0;
                     c.registers_rope = RegRope::None;
                 }},
                {"remove_qk_norm", [](ModelConfig& c) { c.qk_norm = false; }},
                {"keep_qkv_bias", [](ModelConfig& c) { c.qkv_bias = true; }},
            };
            for (const auto& ch : changes) {
                ModelConfig c = vit5();
                ch.apply(c);
                rows.push_back({ch.name, c});
            }
            rows.push_back({"complete_vit5", vit5()});
            break;
        }
        case Suite::Table11: {
            for (double init : {1e-6, 1e-5, 1e-4}) {
                ModelConfig c = vit5();
                c.lambda_init = init;
                rows.push_back({"ls_init_" + format_double(init), c});
            }
            for (double b : {1e-5, 1e-4, 1e-3}) {
                ModelConfig c = vit5();
                c.rope_base_patch = b;
                rows.push_back({"rope_base_" + format_double(b), c});
            }
            for (int r : {4, 16, 64}) {
                ModelConfig c = vit5();
                c.registers = r;
                rows.push_back({"registers_" + std::to_string(r), c});
            }
            break;
        }
    }
    return rows;
}

namespace {

json toggles_json(const ModelConfig& c) {
    json t;
    t["layerscale"] = to_string(c.layerscale);
    t["norm"] = to_string(c.norm);
    t["mlp"] = to_string(c.mlp);
    t["rope"] = c.rope;
    t["ape"] = c.ape;
    t["registers"] = c.registers;
    t["registers_rope"] = to_string(c.registers_rope);
    t["qk_norm"] = c.qk_norm;
    t["qkv_bias"] = c.qkv_bias;
    t["lambda_init"] = c.lambda_init;
    t["rope_base_patch"] = c.rope_base_patch;
    return t;
}

double measure_sparsity(const Vit5Model& model, const SynthSpec& data) {
    NoGradScope ng;
    const std::int64_t count = std::min<std::int64_t>(32, data.eval_samples);
    const Batch b = generate(data, "eval", 0, count);
    std::vector<Tensor> hidden;
    ForwardOptions opts;
    opts.mlp_hidden = &hidden;
    model.forward(b.images, opts);
    double total = 0.0;
    for (const Tensor& h : hidden) total += nn::gating_sparsity(h);
    return hidden.empty() ? 0.0 : total / static_cast<double>(hidden.size());
}

}  // namespace

bool AblationReport::any_error() const {
    for (const auto& r : rows) {
        if (!r.error.empty()) return true;
    }
    return false;
}

json AblationReport::to_json() const {
    json j;
    j["suite"] = suite_name(suite);
    json rws = json::array();
    for (const auto& r : rows) {
        json e;
        e["name"] = r.name;
        e["toggles"] = r.toggles;
        e["completed"] = r.completed;
        e["nan_halted"] = r.nan_halted;
        e["final_loss"] = r.final_loss;
        e["eval_accuracy"] = r.eval_accuracy;
        e["spike_count"] = r.spike_count;
        e["nan_count"] = r.nan_count;
        e["mlp_sparsity"] = r.mlp_sparsity;
        e["error"] = r.error;
        rws.push_back(e);
    }
    j["rows"] = rws;
    return j;
}

std::string AblationReport::to_csv() const {
    std::string out = "name,completed,nan_halted,final_loss,eval_accuracy,spike_count,nan_count,mlp_sparsity,error\n";
    for (const auto& r : rows) {
        out += r.name + "," + (r.completed ? "1" : "0") + "," + (r.nan_halted ? "1" : "0") + "," +
               format_double(r.final_loss) + "," + format_double(r.eval_accuracy) + "," +
               std::to_string(r.spike_count) + "," + std::to_string(r.nan_count) + "," +
               format_double(r.mlp_sparsity) + "," + r.error + "\n";
    }
    return out;
}

std::string AblationReport::render_table() const {
    auto mark = [](bool on) { return on ? "yes" : "  -"; };
    std::string out;
    char line[256];
    std::snprintf(line, sizeof(line), "%-22s %-4s %-4s %-7s %-4s %-4s %-7s %-8s %8s %8s\n",
                  "configuration", "LS", "RMS", "SwiGLU", "RoPE", "Reg", "QK-Norm", "QKV-Bias",
                  "acc", "loss");
    out += line;
    out += std::string(96, '-') + "\n";
    for (const auto& r : rows) {
        const auto& t = r.toggles;
        const std::string ls = t.value("layerscale", "?");
        std::snprintf(line, sizeof(line), "%-22s %-4s %-4s %-7s %-4s %-4s %-7s %-8s %8.4f %8.4f\n",
                      r.name.c_str(),
                      ls == "off" ? "  -" : (ls == "postnorm" ? "pn" : "yes"),
                      mark(t.value("norm", "") == "rmsnorm"),
                      mark(t.value("mlp", "") == "swiglu"), mark(t.value("rope", false)),
                      mark(t.value("registers", 0) > 0), mark(t.value("qk_norm", false)),
                      mark(t.value("qkv_bias", false)), r.eval_accuracy, r.final_loss);
        out += line;
        if (!r.error.empty()) out += "    error: " + r.error + "\n";
        if (r.nan_halted) out += "    (halted: non-finite loss)\n";
    }
    return out;
}

AblationReport run_rows(Suite suite, const std::vector<AblationRow>& rows, const SynthSpec& data,
                        const TrainSpec& spec, const std::string& out_dir) {
    if (rows.empty()) throw ConfigError("ablate: empty row set");
    for (const auto& r : rows) {
        if (r.config.dim != rows[0].config.dim || r.config.layers != rows[0].config.layers ||
            r.config.heads != rows[0].config.heads) {
            throw ConfigError("ablate: heterogeneous dims across rows ('" + rows[0].name +
                              "' vs '" + r.name + "')");
        }
    }
    namespace fs = std::filesystem;
    AblationReport report;
    report.suite = suite;
    for (const auto& row : rows) {
        RowResult res;
        res.name = row.name;
        res.toggles = toggles_json(row.config);
        try {
            const std::string row_dir =
                out_dir.empty() ? "" : (fs::path(out_dir) / row.name).string();
            TrainResult tr = train(row.config, data, spec, row_dir);
            res.nan_halted = tr.halted_nan;
            res.completed = !tr.halted_nan;
            if (!tr.record.steps.empty()) {
                const auto& last = tr.record.steps.back();
                res.final_loss = last.loss;
            }
            res.eval_accuracy = tr.final_eval_accuracy;
            const auto [sp, nn_] = spike_metrics(tr.record.steps, spec.spike_window,
                                                 spec.spike_factor);
            res.spike_count = sp;
            res.nan_count = nn_;
            if (!tr.halted_nan) res.mlp_sparsity = measure_sparsity(tr.model, data);
        } catch (const std::exception& e) {
            res.error = e.what();
        }
        report.rows.push_back(std::move(res));
    }

    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        auto dump = [&](const std::string& name, const std::string& content) {
            std::ofstream out(fs::path(out_dir) / name, std::ios::binary | std::ios::trunc);
            if (!out) throw IoError("ablate: cannot write '" + name + "'");
            out << content;
        };
        dump("report.json", report.to_json().dump(2) + "\n");
        dump("report.csv", report.to_csv());
        dump("report.txt", report.render_table());
    }
    return report;
}

AblationReport run_suite(Suite suite, const ModelConfig& base, const SynthSpec& data,
                         const TrainSpec& spec, const std::string& out_dir) {
    return run_rows(suite, suite_rows(suite, base), data, spec, out_dir);
}

}  // namespace vit5
