#include "vit5/config.hpp"

namespace vit5 {

using nlohmann::json;

std::string to_string(LayerScaleMode m) {
    switch (m) {
        case LayerScaleMode::On: return "on";
        case LayerScaleMode::Off: return "off";
        case LayerScaleMode::PostNorm: return "postnorm";
    }
    return "?";
}

std::string to_string(NormKind k) { return k == NormKind::Rms ? "rmsnorm" : "layernorm"; }
std::string to_string(MlpKind k) { return k == MlpKind::Gelu ? "gelu" : "swiglu"; }

std::string to_string(RegRope r) {
    switch (r) {
        case RegRope::None: return "none";
        case RegRope::SameBase: return "same_base";
        case RegRope::HighBase: return "high_base";
    }
    return "?";
}

std::string to_string(Readout r) { return r == Readout::MeanPool ? "mean_pool" : "class_token"; }

namespace {

template <typename T>
T parse_enum(const std::string& v, const std::vector<std::pair<std::string, T>>& table,
             const char* field) {
    for (const auto& [name, value] : table) {
        if (name == v) return value;
    }
    std::string allowed;
    for (const auto& [name, value] : table) {
        if (!allowed.empty()) allowed += "|";
        allowed += name;
    }
    throw ConfigError(std::string("config: ") + field + " must be one of {" + allowed + "}, got '" +
                      v + "'");
}

}  // namespace

void ModelConfig::validate() const {
    auto fail = [](const std::string& what) { throw ConfigError("config: " + what); };
    if (layers < 1) fail("layers must be >= 1, got " + std::to_string(layers));
    if (dim < 1) fail("dim must be >= 1");
    if (heads < 1) fail("heads must be >= 1");
    if (dim % heads != 0) {
        fail("dim " + std::to_string(dim) + " not divisible by heads " + std::to_string(heads));
    }
    if (rope && (dim / heads) % 4 != 0) {
        fail("head dim " + std::to_string(dim / heads) + " must be divisible by 4 when rope is on");
    }
    if (registers < 0) fail("registers must be >= 0");
    if (patch < 1) fail("patch must be >= 1");
    if (image_size < patch || image_size % patch != 0) {
        fail("image_size " + std::to_string(image_size) + " not divisible by patch " +
             std::to_string(patch));
    }
    if (in_channels != 1 && in_channels != 3) fail("in_channels must be 1 or 3");
    if (num_classes < 2) fail("num_classes must be >= 2");
    if (lambda_init < 0.0) fail("lambda_init must be >= 0");
    if (rope_base_patch <= 0.0 || rope_base_reg <= 0.0) fail("rope bases must be positive");
}

json ModelConfig::to_json() const {
    json j;
    j["layers"] = layers;
    j["dim"] = dim;
    j["heads"] = heads;
    j["registers"] = registers;
    j["patch"] = patch;
    j["image_size"] = image_size;
    j["in_channels"] = in_channels;
    j["num_classes"] = num_classes;
    j["layerscale"] = to_string(layerscale);
    j["norm"] = to_string(norm);
    j["mlp"] = to_string(mlp);
    j["rope"] = rope;
    j["ape"] = ape;
    j["registers_rope"] = to_string(registers_rope);
    j["qk_norm"] = qk_norm;
    j["qkv_bias"] = qkv_bias;
    j["lambda_init"] = lambda_init;
    j["rope_base_patch"] = rope_base_patch;
    j["rope_base_reg"] = rope_base_reg;
    j["readout"] = to_string(readout);
    return j;
}

ModelConfig ModelConfig::from_json(const json& j) {
    ModelConfig c;
    const std::vector<std::string> known = {
        "layers", "dim", "heads", "registers", "patch", "image_size", "in_channels",
        "num_classes", "layerscale", "norm", "mlp", "rope", "ape", "registers_rope",
        "qk_norm", "qkv_bias", "lambda_init", "rope_base_patch", "rope_base_reg", "readout"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const auto& k : known) {
            if (k == it.key()) {
                ok = true;
                break;
            }
        }
        if (!ok) throw ConfigError("config: unknown model key '" + it.key() + "'");
    }
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("layers", c.layers);
    get("dim", c.dim);
    get("heads", c.heads);
    get("registers", c.registers);
    get("patch", c.patch);
    get("image_size", c.image_size);
    get("in_channels", c.in_channels);
    get("num_classes", c.num_classes);
    if (j.contains("layerscale")) {
        c.layerscale = parse_enum<LayerScaleMode>(
            j.at("layerscale").get<std::string>(),
            {{"on", LayerScaleMode::On}, {"off", LayerScaleMode::Off},
             {"postnorm", LayerScaleMode::PostNorm}},
            "layerscale");
    }
    if (j.contains("norm")) {
        c.norm = parse_enum<NormKind>(j.at("norm").get<std::string>(),
                                      {{"rmsnorm", NormKind::Rms}, {"layernorm", NormKind::Layer}},
                                      "norm");
    }
    if (j.contains("mlp")) {
        c.mlp = parse_enum<MlpKind>(j.at("mlp").get<std::string>(),
                                    {{"gelu", MlpKind::Gelu}, {"swiglu", MlpKind::SwiGlu}}, "mlp");
    }
    get("rope", c.rope);
    get("ape", c.ape);
    if (j.contains("registers_rope")) {
        c.registers_rope = parse_enum<RegRope>(
            j.at("registers_rope").get<std::string>(),
            {{"none", RegRope::None}, {"same_base", RegRope::SameBase},
             {"high_base", RegRope::HighBase}},
            "registers_rope");
    }
    get("qk_norm", c.qk_norm);
    get("qkv_bias", c.qkv_bias);
    get("lambda_init", c.lambda_init);
    get("rope_base_patch", c.rope_base_patch);
    get("rope_base_reg", c.rope_base_reg);
    if (j.contains("readout")) {
        c.readout = parse_enum<Readout>(
            j.at("readout").get<std::string>(),
            {{"mean_pool", Readout::MeanPool}, {"class_token", Readout::ClassToken}}, "readout");
    }
    return c;
}

ModelConfig ModelConfig::preset(std::string_view name) {
    ModelConfig c;
    if (name == "vit5-s") {
        c.layers = 12; c.dim = 384; c.heads = 6; c.registers = 4;
    } else if (name == "vit5-b") {
        c.layers = 12; c.dim = 768; c.heads = 12; c.registers = 4;
    } else if (name == "vit5-l") {
        c.layers = 24; c.dim = 1024; c.heads = 16; c.registers = 4;
    } else if (name == "vit5-xl") {
        c.layers = 28; c.dim = 1152; c.heads = 16; c.registers = 4;
    } else if (name == "tiny") {
        c.layers = 2; c.dim = 64; c.heads = 4; c.registers = 4;
    } else if (name == "micro") {
        c.layers = 2; c.dim = 16; c.heads = 2; c.registers = 2;
        c.image_size = 8;
    } else {
        throw ConfigError("config: unknown preset '" + std::string(name) + "'");
    }
    return c;
}

std::vector<std::string> ModelConfig::preset_names() {
    return {"vit5-s", "vit5-b", "vit5-l", "vit5-xl", "tiny", "micro"};
}

}  // namespace vit5
