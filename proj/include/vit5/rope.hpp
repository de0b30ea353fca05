#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "vit5/base.hpp"

namespace vit5 {

enum class RopeTable { Patch, Reg };

// Where a token sits for rotary purposes. rotate=false means the identity
// rotation (vanilla registers, or RoPE disabled for the whole model).
struct TokenCoord {
    bool rotate = false;
    RopeTable table = RopeTable::Patch;
    std::int64_t x = 0;
    std::int64_t y = 0;
};

// Packed per-token cos/sin banks, laid out [tokens, d_head/2]: the first
// d_head/4 pairs carry the x-axis angles, the rest the y-axis (axial split).
struct RopeAngles {
    std::shared_ptr<const std::vector<double>> cos_bank;
    std::shared_ptr<const std::vector<double>> sin_bank;
    std::int64_t tokens = 0;
};

// Precomputed rotation banks for the patch-token base and the separate
// register/class base. Rows are cached per integer coordinate and extended
// on demand, so resolution sweeps and translation probes can request any
// coordinate (negatives included).
class RopeTables {
public:
    RopeTables(double patch_base, double reg_base, int d_head);

    int d_head() const { return d_head_; }
    int pairs_per_axis() const { return d_head_ / 4; }
    double base(RopeTable t) const { return t == RopeTable::Patch ? patch_base_ : reg_base_; }

    // theta_i = base^(2i / (d_head/2)) for pair i within one axis.
    double theta(RopeTable t, int pair) const;

    // cos/sin of coord * theta_i; cached per non-negative coordinate,
    // derived by symmetry for negative ones.
    void angles_at(RopeTable t, std::int64_t coord, double* cos_out, double* sin_out) const;

    RopeAngles angles_for(const std::vector<TokenCoord>& coords) const;

private:
    struct Bank {
        std::vector<double> thetas;               // per axis pair
        mutable std::vector<std::vector<double>> cos_rows;  // [coord][pair]
        mutable std::vector<std::vector<double>> sin_rows;
        void ensure(std::int64_t coord) const;
    };

    const Bank& bank(RopeTable t) const { return t == RopeTable::Patch ? patch_ : reg_; }

    double patch_base_;
    double reg_base_;
    int d_head_;
    Bank patch_;
    Bank reg_;
};

}  // namespace vit5
