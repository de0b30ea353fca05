#include "vit5/rng.hpp"

namespace vit5 {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

std::uint64_t combine(std::uint64_t a, std::uint64_t b) {
    return mix64(a + kGolden + (b ^ (b << 1)));
}

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed), key_(mix64(seed + kGolden)) {}

Rng Rng::split(std::string_view label) const {
    return Rng(seed_, combine(key_, fnv1a64(label)));
}

Rng Rng::split(std::uint64_t index) const {
    return Rng(seed_, combine(key_, mix64(index + 0x632BE59BD9B4E019ull)));
}

std::uint64_t Rng::next_u64() {
    return mix64(key_ + (counter_++) * kGolden);
}

std::uint64_t Rng::next_below(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t rem = (~std::uint64_t{0} % n + 1) % n;
    const std::uint64_t limit = ~std::uint64_t{0} - rem;
    std::uint64_t u;
    do {
        u = next_u64();
    } while (u > limit);
    return u % n;
}

double Rng::next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::next_normal() {
    double s = 0.0;
    for (int i = 0; i < 12; ++i) s += next_unit();
    return s - 6.0;
}

double Rng::next_trunc_normal(double stddev, double trunc_sd) {
    double z;
    do {
        z = next_normal();
    } while (z < -trunc_sd || z > trunc_sd);
    return z * stddev;
}

}  // namespace vit5
