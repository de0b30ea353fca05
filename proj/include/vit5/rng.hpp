#pragma once

#include <cstdint>
#include <string_view>

namespace vit5 {

// Counter-based splittable generator. A stream is (key, counter); draws hash
// the pair, so identical seed and draw sequence give identical bits on every
// platform. Child streams are derived from labels or indices, which lets
// model variants consume identical randomness for the parameter groups they
// share. Floats are derived from integer draws with exact IEEE arithmetic
// only (no libm), so generated values are platform-exact too; normals use a
// sum-of-12-uniforms approximation for that reason.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    Rng split(std::string_view label) const;
    Rng split(std::uint64_t index) const;

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64();
    // Uniform in [0, n), unbiased via rejection.
    std::uint64_t next_below(std::uint64_t n);
    // Uniform in [0, 1) with 53 random mantissa bits.
    double next_unit();
    // Approximately standard normal (Irwin-Hall with k=12), support [-6, 6].
    double next_normal();
    // Normal truncated to [-trunc_sd, trunc_sd] standard deviations, scaled.
    double next_trunc_normal(double stddev, double trunc_sd = 2.0);

private:
    Rng(std::uint64_t seed, std::uint64_t key) : seed_(seed), key_(key) {}

    std::uint64_t seed_;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace vit5
