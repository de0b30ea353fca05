#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "vit5/base.hpp"

namespace vit5 {

enum class LayerScaleMode { On, Off, PostNorm };
enum class NormKind { Rms, Layer };
enum class MlpKind { Gelu, SwiGlu };
enum class RegRope { None, SameBase, HighBase };
enum class Readout { MeanPool, ClassToken };

// The seven architectural toggles plus dimensions: one record fully
// determines a model variant.
struct ModelConfig {
    int layers = 12;
    int dim = 384;
    int heads = 6;
    int registers = 4;
    int patch = 4;
    int image_size = 32;
    int in_channels = 1;
    int num_classes = 4;

    LayerScaleMode layerscale = LayerScaleMode::On;
    NormKind norm = NormKind::Rms;
    MlpKind mlp = MlpKind::Gelu;
    bool rope = true;
    bool ape = true;
    RegRope registers_rope = RegRope::HighBase;
    bool qk_norm = true;
    bool qkv_bias = false;

    double lambda_init = 1e-4;
    double rope_base_patch = 1e-4;
    double rope_base_reg = 1e-1;
    Readout readout = Readout::ClassToken;

    int head_dim() const { return heads > 0 ? dim / heads : 0; }
    int grid_side() const { return patch > 0 ? image_size / patch : 0; }
    bool has_class_token() const { return readout == Readout::ClassToken; }

    // Throws ConfigError naming the violated constraint.
    void validate() const;

    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);

    // vit5-s / vit5-b / vit5-l / vit5-xl (full-size dims), plus the desk
    // presets tiny (2x64) and micro (2x16) used by experiments and gradient
    // checks.
    static ModelConfig preset(std::string_view name);
    static std::vector<std::string> preset_names();
};

std::string to_string(LayerScaleMode m);
std::string to_string(NormKind k);
std::string to_string(MlpKind k);
std::string to_string(RegRope r);
std::string to_string(Readout r);

}  // namespace vit5
