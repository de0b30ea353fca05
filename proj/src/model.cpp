#include "vit5/model.hpp"

#include <cmath>

namespace vit5 {

namespace {

constexpr double kInitStd = 0.02;

Tensor init_trunc_normal(Rng rng, Shape shape) {
    std::vector<double> d(static_cast<std::size_t>(shape_numel(shape)));
    for (auto& v : d) v = rng.next_trunc_normal(kInitStd);
    return Tensor::from_data(std::move(shape), std::move(d), true);
}

Tensor param_tensor(const Rng& root, const std::string& name, Shape shape, bool init,
                    double constant = 0.0) {
    if (!init) return Tensor::zeros(std::move(shape), true);
    if (constant != 0.0) return Tensor::full(std::move(shape), constant, true);
    return init_trunc_normal(root.split(name), std::move(shape));
}

nn::NormParams make_norm(const ModelConfig& cfg, bool /*init*/) {
    nn::NormParams n;
    n.is_rms = cfg.norm == NormKind::Rms;
    n.gain = Tensor::full({cfg.dim}, 1.0, true);
    if (!n.is_rms) n.bias = Tensor::zeros({cfg.dim}, true);
    return n;
}

}  // namespace

Vit5Model build_model(const ModelConfig& config, std::uint64_t seed, bool init) {
    config.validate();
    Vit5Model m;
    m.config = config;
    m.seed = seed;
    const Rng root(seed);
    const std::int64_t d = config.dim;
    const std::int64_t feat = static_cast<std::int64_t>(config.in_channels) * config.patch * config.patch;
    const std::int64_t grid = static_cast<std::int64_t>(config.grid_side()) * config.grid_side();

    m.patch_w = param_tensor(root, "patch_embed.w", {feat, d}, init);
    m.patch_b = Tensor::zeros({d}, true);
    if (config.ape) m.ape = param_tensor(root, "ape", {grid, d}, init);
    if (config.registers > 0) m.registers = param_tensor(root, "registers", {config.registers, d}, init);
    if (config.has_class_token()) m.class_token = param_tensor(root, "class_token", {1, d}, init);

    const std::int64_t dh = config.head_dim();
    for (int l = 0; l < config.layers; ++l) {
        const std::string prefix = "blocks." + std::to_string(l) + ".";
        BlockParams b;
        b.norm1 = make_norm(config, init);
        b.norm2 = make_norm(config, init);

        b.attn.heads = config.heads;
        b.attn.w_q = param_tensor(root, prefix + "attn.w_q", {d, d}, init);
        b.attn.w_k = param_tensor(root, prefix + "attn.w_k", {d, d}, init);
        b.attn.w_v = param_tensor(root, prefix + "attn.w_v", {d, d}, init);
        b.attn.w_o = param_tensor(root, prefix + "attn.w_o", {d, d}, init);
        if (config.qkv_bias) {
            b.attn.b_q = Tensor::zeros({d}, true);
            b.attn.b_k = Tensor::zeros({d}, true);
            b.attn.b_v = Tensor::zeros({d}, true);
        }
        if (config.qk_norm) {
            b.attn.qk_q_gain = Tensor::full({config.heads, dh}, 1.0, true);
            b.attn.qk_k_gain = Tensor::full({config.heads, dh}, 1.0, true);
        }

        b.mlp.variant = config.mlp == MlpKind::Gelu ? nn::MlpVariant::Gelu : nn::MlpVariant::SwiGlu;
        b.mlp.hidden_dim = b.mlp.variant == nn::MlpVariant::Gelu ? 4 * d : nn::swiglu_hidden_dim(d);
        b.mlp.w_in = param_tensor(root, prefix + "mlp.w_in", {d, b.mlp.hidden_dim}, init);
        if (b.mlp.variant == nn::MlpVariant::SwiGlu) {
            b.mlp.w_gate = param_tensor(root, prefix + "mlp.w_gate", {d, b.mlp.hidden_dim}, init);
        }
        b.mlp.w_out = param_tensor(root, prefix + "mlp.w_out", {b.mlp.hidden_dim, d}, init);

        if (config.layerscale == LayerScaleMode::On) {
            b.ls1.lambda = Tensor::full({d}, init ? config.lambda_init : 0.0, true);
            b.ls2.lambda = Tensor::full({d}, init ? config.lambda_init : 0.0, true);
        } else if (config.layerscale == LayerScaleMode::PostNorm) {
            b.pn1.lambda_p = Tensor::full({d}, init ? config.lambda_init : 0.0, true);
            b.pn2.lambda_p = Tensor::full({d}, init ? config.lambda_init : 0.0, true);
        }
        m.blocks.push_back(std::move(b));
    }

    m.final_norm = make_norm(config, init);
    m.head_w = Tensor::zeros({d, config.num_classes}, true);
    m.head_b = Tensor::zeros({config.num_classes}, true);

    if (config.rope) {
        m.rope_tables = std::make_shared<RopeTables>(config.rope_base_patch, config.rope_base_reg,
                                                     static_cast<int>(dh));
    }
    return m;
}

std::vector<ParamRef> Vit5Model::parameters() const {
    std::vector<ParamRef> ps;
    auto push = [&](const std::string& name, const Tensor& t, bool decay) {
        if (t.defined()) ps.push_back({name, t, decay});
    };
    push("patch_embed.w", patch_w, true);
    push("patch_embed.b", patch_b, false);
    push("ape", ape, false);
    push("registers", registers, false);
    push("class_token", class_token, false);
    for (std::size_t l = 0; l < blocks.size(); ++l) {
        const std::string p = "blocks." + std::to_string(l) + ".";
        const BlockParams& b = blocks[l];
        push(p + "norm1.gain", b.norm1.gain, false);
        push(p + "norm1.bias", b.norm1.bias, false);
        push(p + "attn.w_q", b.attn.w_q, true);
        push(p + "attn.w_k", b.attn.w_k, true);
        push(p + "attn.w_v", b.attn.w_v, true);
        push(p + "attn.w_o", b.attn.w_o, true);
        push(p + "attn.b_q", b.attn.b_q, false);
        push(p + "attn.b_k", b.attn.b_k, false);
        push(p + "attn.b_v", b.attn.b_v, false);
        push(p + "attn.qk_norm.q_gain", b.attn.qk_q_gain, false);
        push(p + "attn.qk_norm.k_gain", b.attn.qk_k_gain, false);
        push(p + "ls1.lambda", b.ls1.lambda, false);
        push(p + "pn1.lambda_p", b.pn1.lambda_p, false);
        push(p + "norm2.gain", b.norm2.gain, false);
        push(p + "norm2.bias", b.norm2.bias, false);
        push(p + "mlp.w_in", b.mlp.w_in, true);
        push(p + "mlp.w_gate", b.mlp.w_gate, true);
        push(p + "mlp.w_out", b.mlp.w_out, true);
        push(p + "ls2.lambda", b.ls2.lambda, false);
        push(p + "pn2.lambda_p", b.pn2.lambda_p, false);
    }
    push("final_norm.gain", final_norm.gain, false);
    push("final_norm.bias", final_norm.bias, false);
    push("head.w", head_w, true);
    push("head.b", head_b, false);
    return ps;
}

std::int64_t Vit5Model::special_tokens() const {
    return (config.has_class_token() ? 1 : 0) + config.registers;
}

std::vector<TokenCoord> Vit5Model::token_coords(std::int64_t hp, std::int64_t wp) const {
    std::vector<TokenCoord> coords;
    coords.reserve(static_cast<std::size_t>(special_tokens() + hp * wp));
    const bool reg_rotate = config.rope && config.registers_rope != RegRope::None;
    const RopeTable reg_table =
        config.registers_rope == RegRope::HighBase ? RopeTable::Reg : RopeTable::Patch;
    // Class token behaves like register R: reserved coordinate (R, 0) on the
    // register table.
    if (config.has_class_token()) {
        coords.push_back({reg_rotate, reg_table, config.registers, 0});
    }
    for (int r = 0; r < config.registers; ++r) {
        coords.push_back({reg_rotate, reg_table, r, 0});
    }
    for (std::int64_t iy = 0; iy < hp; ++iy) {
        for (std::int64_t ix = 0; ix < wp; ++ix) {
            coords.push_back({config.rope, RopeTable::Patch, ix, iy});
        }
    }
    return coords;
}

std::vector<double> resize_grid_bilinear(const std::vector<double>& src, std::int64_t hp,
                                         std::int64_t wp, std::int64_t nhp, std::int64_t nwp,
                                         std::int64_t dim) {
    std::vector<double> dst(static_cast<std::size_t>(nhp * nwp * dim));
    for (std::int64_t y = 0; y < nhp; ++y) {
        const double fy = nhp > 1 ? static_cast<double>(y) * (hp - 1) / (nhp - 1) : 0.0;
        const std::int64_t y0 = static_cast<std::int64_t>(fy);
        const std::int64_t y1 = std::min(y0 + 1, hp - 1);
        const double wy = fy - static_cast<double>(y0);
        for (std::int64_t x = 0; x < nwp; ++x) {
            const double fx = nwp > 1 ? static_cast<double>(x) * (wp - 1) / (nwp - 1) : 0.0;
            const std::int64_t x0 = static_cast<std::int64_t>(fx);
            const std::int64_t x1 = std::min(x0 + 1, wp - 1);
            const double wx = fx - static_cast<double>(x0);
            double* out = dst.data() + (y * nwp + x) * dim;
            const double* s00 = src.data() + (y0 * wp + x0) * dim;
            const double* s01 = src.data() + (y0 * wp + x1) * dim;
            const double* s10 = src.data() + (y1 * wp + x0) * dim;
            const double* s11 = src.data() + (y1 * wp + x1) * dim;
            for (std::int64_t c = 0; c < dim; ++c) {
                const double top = s00[c] * (1.0 - wx) + s01[c] * wx;
                const double bot = s10[c] * (1.0 - wx) + s11[c] * wx;
                out[c] = top * (1.0 - wy) + bot * wy;
            }
        }
    }
    return dst;
}

Tensor Vit5Model::forward(const Tensor& images, const ForwardOptions& opts) const {
    if (images.ndim() != 4) {
        throw ShapeError("forward: expected images [batch, channels, height, width], got " +
                         shape_str(images.shape()));
    }
    const std::int64_t B = images.dim(0), C = images.dim(1), H = images.dim(2), W = images.dim(3);
    if (C != config.in_channels) {
        throw ShapeError("forward: expected " + std::to_string(config.in_channels) +
                         " channels, got " + std::to_string(C));
    }
    if (H % config.patch != 0 || W % config.patch != 0) {
        throw ShapeError("forward: resolution " + std::to_string(H) + "x" + std::to_string(W) +
                         " not divisible by patch " + std::to_string(config.patch));
    }
    const std::int64_t hp = H / config.patch, wp = W / config.patch;

    Tensor tok = ops::matmul(ops::extract_patches(images, config.patch), patch_w);
    tok = ops::add_rowvec(tok, patch_b);

    if (config.ape) {
        const std::int64_t g = config.grid_side();
        Tensor pos = ape;
        if (hp != g || wp != g) {
            if (grad_enabled()) {
                throw ConfigError("forward: APE resolution transfer is an inference path; "
                                  "disable gradients to evaluate at a new grid");
            }
            pos = Tensor::from_data({hp * wp, config.dim},
                                    resize_grid_bilinear(ape.data(), g, g, hp, wp, config.dim));
        }
        tok = ops::add(tok, ops::tile_batch(pos, B));
    }

    std::vector<Tensor> parts;
    if (config.has_class_token()) parts.push_back(ops::tile_batch(class_token, B));
    if (config.registers > 0) parts.push_back(ops::tile_batch(registers, B));
    parts.push_back(tok);
    Tensor x = parts.size() > 1 ? ops::concat_tokens(parts) : parts[0];

    RopeAngles angles;
    const RopeAngles* angles_ptr = nullptr;
    if (config.rope) {
        angles = rope_tables->angles_for(token_coords(hp, wp));
        angles_ptr = &angles;
    }

    for (int l = 0; l < config.layers; ++l) {
        const BlockParams& b = blocks[static_cast<std::size_t>(l)];
        nn::AttentionCapture* cap =
            (opts.attention && opts.capture_attention_layer == l) ? opts.attention : nullptr;
        Tensor a = nn::qk_normalized_attention(nn::apply_norm(x, b.norm1), b.attn, angles_ptr, l, cap);
        switch (config.layerscale) {
            case LayerScaleMode::On: x = nn::layerscale_residual(x, a, b.ls1); break;
            case LayerScaleMode::Off: x = ops::add(x, a); break;
            case LayerScaleMode::PostNorm: x = nn::postnorm_residual(x, a, b.pn1); break;
        }
        Tensor hidden;
        Tensor mo = nn::mlp_forward(nn::apply_norm(x, b.norm2), b.mlp,
                                    opts.mlp_hidden ? &hidden : nullptr);
        if (opts.mlp_hidden) opts.mlp_hidden->push_back(hidden);
        switch (config.layerscale) {
            case LayerScaleMode::On: x = nn::layerscale_residual(x, mo, b.ls2); break;
            case LayerScaleMode::Off: x = ops::add(x, mo); break;
            case LayerScaleMode::PostNorm: x = nn::postnorm_residual(x, mo, b.pn2); break;
        }
    }

    x = nn::apply_norm(x, final_norm);
    Tensor readout;
    if (config.has_class_token()) {
        readout = ops::reshape(ops::slice_tokens(x, 0, 1), {B, config.dim});
    } else {
        // mean over patch tokens only
        const std::int64_t skip = special_tokens();
        Tensor patches_only = skip > 0 ? ops::slice_tokens(x, skip, hp * wp) : x;
        readout = ops::mean_tokens(patches_only);
    }
    Tensor logits = ops::add_rowvec(ops::matmul(readout, head_w), head_b);
    if (!ops::all_finite(logits)) {
        throw NumericError("forward: non-finite logits after head (layer " +
                           std::to_string(config.layers) + ")", config.layers);
    }
    return logits;
}

// ---------------------------------------------------------------------------
// closed-form counters
// ---------------------------------------------------------------------------

std::int64_t param_count(const ModelConfig& c) {
    const std::int64_t d = c.dim;
    const std::int64_t feat = static_cast<std::int64_t>(c.in_channels) * c.patch * c.patch;
    const std::int64_t grid = static_cast<std::int64_t>(c.grid_side()) * c.grid_side();
    const std::int64_t norm_params = c.norm == NormKind::Rms ? d : 2 * d;

    std::int64_t n = feat * d + d;               // patch embed
    if (c.ape) n += grid * d;
    n += static_cast<std::int64_t>(c.registers) * d;
    if (c.has_class_token()) n += d;

    std::int64_t per_block = 2 * norm_params;    // norm1, norm2
    per_block += 4 * d * d;                      // qkvo
    if (c.qkv_bias) per_block += 3 * d;
    if (c.qk_norm) per_block += 2 * d;           // per-head gains sum to 2*d
    per_block += nn::mlp_param_count(
        c.mlp == MlpKind::Gelu ? nn::MlpVariant::Gelu : nn::MlpVariant::SwiGlu, d);
    if (c.layerscale != LayerScaleMode::Off) per_block += 2 * d;
    n += static_cast<std::int64_t>(c.layers) * per_block;

    n += norm_params;                            // final norm
    n += d * c.num_classes + c.num_classes;      // head
    return n;
}

std::int64_t param_group_count(const ModelConfig& c) {
    std::int64_t n = 2;  // patch w, b
    if (c.ape) ++n;
    if (c.registers > 0) ++n;
    if (c.has_class_token()) ++n;
    std::int64_t per_block = 2;                      // norm gains
    if (c.norm == NormKind::Layer) per_block += 2;   // norm biases
    per_block += 4;                                  // qkvo
    if (c.qkv_bias) per_block += 3;
    if (c.qk_norm) per_block += 2;
    per_block += c.mlp == MlpKind::Gelu ? 2 : 3;     // mlp mats
    if (c.layerscale != LayerScaleMode::Off) per_block += 2;
    n += static_cast<std::int64_t>(c.layers) * per_block;
    n += c.norm == NormKind::Rms ? 1 : 2;            // final norm
    n += 2;                                          // head
    return n;
}

// ---------------------------------------------------------------------------
// attention maps
// ---------------------------------------------------------------------------

AttentionMap attention_maps(const Vit5Model& model, const Tensor& image, int layer, int head,
                            const QuerySpec& query) {
    const ModelConfig& cfg = model.config;
    if (layer < 0 || layer >= cfg.layers) {
        throw ConfigError("attention_maps: layer " + std::to_string(layer) + " out of range [0, " +
                          std::to_string(cfg.layers) + ")");
    }
    if (head < 0 || head >= cfg.heads) {
        throw ConfigError("attention_maps: head " + std::to_string(head) + " out of range [0, " +
                          std::to_string(cfg.heads) + ")");
    }
    Tensor batch = image;
    if (image.ndim() == 3) {
        batch = ops::reshape(image, {1, image.dim(0), image.dim(1), image.dim(2)});
    }
    if (batch.ndim() != 4 || batch.dim(0) != 1) {
        throw ShapeError("attention_maps: expected one image, got " + shape_str(image.shape()));
    }
    const std::int64_t hp = batch.dim(2) / cfg.patch, wp = batch.dim(3) / cfg.patch;
    const std::int64_t specials = model.special_tokens();

    std::int64_t q_index = 0;
    switch (query.kind) {
        case QueryKind::Class:
            if (!cfg.has_class_token()) throw ConfigError("attention_maps: model has no class token");
            q_index = 0;
            break;
        case QueryKind::Register:
            if (query.index < 0 || query.index >= cfg.registers) {
                throw ConfigError("attention_maps: register " + std::to_string(query.index) +
                                  " out of range [0, " + std::to_string(cfg.registers) + ")");
            }
            q_index = (cfg.has_class_token() ? 1 : 0) + query.index;
            break;
        case QueryKind::Patch:
            if (query.px < 0 || query.px >= wp || query.py < 0 || query.py >= hp) {
                throw ConfigError("attention_maps: patch query out of grid");
            }
            q_index = specials + static_cast<std::int64_t>(query.py) * wp + query.px;
            break;
    }

    NoGradScope ng;
    nn::AttentionCapture cap;
    ForwardOptions opts;
    opts.capture_attention_layer = layer;
    opts.attention = &cap;
    model.forward(batch, opts);

    const std::int64_t T = cap.probs.dim(2);
    const double* row =
        cap.probs.data().data() + ((static_cast<std::int64_t>(head) * T) + q_index) * T;

    AttentionMap out;
    std::vector<double> grid(static_cast<std::size_t>(hp * wp));
    double patch_mass = 0.0;
    for (std::int64_t t = 0; t < hp * wp; ++t) {
        grid[static_cast<std::size_t>(t)] = row[specials + t];
        patch_mass += row[specials + t];
    }
    out.grid = Tensor::from_data({hp, wp}, std::move(grid));
    out.patch_mass = patch_mass;
    for (std::int64_t s = 0; s < specials; ++s) out.special_mass.push_back(row[s]);
    return out;
}

}  // namespace vit5
