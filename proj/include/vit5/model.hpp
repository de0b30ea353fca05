#pragma once

#include <memory>
#include <string>
#include <vector>

#include "vit5/config.hpp"
#include "vit5/nn.hpp"
#include "vit5/rng.hpp"

namespace vit5 {

struct BlockParams {
    nn::NormParams norm1, norm2;
    nn::AttentionParams attn;
    nn::MlpParams mlp;
    nn::LayerScaleParams ls1, ls2;  // layerscale == on
    nn::PostNormParams pn1, pn2;    // layerscale == postnorm
};

struct ParamRef {
    std::string name;
    Tensor tensor;
    bool decay;  // weight decay applies
};

struct ForwardOptions {
    int capture_attention_layer = -1;  // -1: none
    nn::AttentionCapture* attention = nullptr;
    std::vector<Tensor>* mlp_hidden = nullptr;  // detached per-layer activations
};

struct Vit5Model {
    ModelConfig config;
    std::uint64_t seed = 0;

    Tensor patch_w, patch_b;  // [C*p*p, d], [d]
    Tensor ape;               // [grid*grid, d] when config.ape
    Tensor registers;         // [R, d] when R > 0
    Tensor class_token;       // [1, d] when readout == class_token
    std::vector<BlockParams> blocks;
    nn::NormParams final_norm;
    Tensor head_w, head_b;  // [d, C], [C]

    std::shared_ptr<RopeTables> rope_tables;

    // Ordered registry; names are stable and drive checkpoint layout, init
    // streams, and weight-decay masks.
    std::vector<ParamRef> parameters() const;

    // images [B, C, H, W] -> logits [B, num_classes]. H and W must be
    // divisible by patch; APE is bilinearly resized when the grid differs
    // from the build grid (eval paths only).
    Tensor forward(const Tensor& images, const ForwardOptions& opts = {}) const;

    // Token bookkeeping for the current config at a given patch grid.
    std::int64_t special_tokens() const;  // class + registers
    std::vector<TokenCoord> token_coords(std::int64_t hp, std::int64_t wp) const;
};

// init=false allocates zeroed parameters (checkpoint loading, counting).
Vit5Model build_model(const ModelConfig& config, std::uint64_t seed, bool init = true);

std::int64_t param_count(const ModelConfig& config);        // closed form
std::int64_t param_group_count(const ModelConfig& config);  // closed form

enum class QueryKind { Class, Register, Patch };

struct QuerySpec {
    QueryKind kind = QueryKind::Class;
    int index = 0;  // register index
    int px = 0, py = 0;
};

struct AttentionMap {
    Tensor grid;                       // [hp, wp] weights onto patch tokens
    std::vector<double> special_mass;  // class + per-register attention mass
    double patch_mass = 0.0;
};

AttentionMap attention_maps(const Vit5Model& model, const Tensor& image, int layer, int head,
                            const QuerySpec& query);

// Bilinear grid resize with corner alignment (exact identity on equal grids).
std::vector<double> resize_grid_bilinear(const std::vector<double>& src, std::int64_t hp,
                                         std::int64_t wp, std::int64_t nhp, std::int64_t nwp,
                                         std::int64_t dim);

}  // namespace vit5
