#pragma once

#include <string>

#include "vit5/model.hpp"

namespace vit5 {

struct ProbeResult {
    std::string kind;
    double measured = 0.0;
    double threshold = 0.0;
    bool pass = false;
    nlohmann::json details;

    nlohmann::json to_json() const;
};

// Rotation at coordinate (0, 0) must be the exact identity.
ProbeResult probe_rope_identity(const ModelConfig& cfg, std::uint64_t seed);

// Rigid integer translation of all patch coordinates: with RoPE only, every
// patch<->patch attention logit is unchanged (< 1e-5); with APE enabled the
// same translation must move logits (> 1e-3). Register coordinates stay
// fixed. Runs in f64.
ProbeResult probe_translation(const ModelConfig& cfg, std::uint64_t seed, int translations = 100);

// Reported (never asserted): logit deltas under a horizontal patch flip for
// the RoPE-only and APE+RoPE variants of cfg.
ProbeResult probe_flip(const ModelConfig& cfg, std::uint64_t seed);

// With unit QK-Norm gains every pre-softmax logit obeys
// |logit| <= sqrt(d_head) + 1e-5 across random token sets.
ProbeResult probe_qk_bound(const ModelConfig& cfg, std::uint64_t seed, int trials = 1000);

// Positional-similarity spread between a register and patches at increasing
// distance: the high-base register table must give a strictly lower spread
// than reusing the patch table.
ProbeResult probe_register_coupling(const ModelConfig& cfg, std::uint64_t seed);

ProbeResult run_probe(const std::string& kind, const ModelConfig& cfg, std::uint64_t seed);
std::vector<std::string> probe_kinds();

}  // namespace vit5
