#include "vit5/rope.hpp"

#include <cmath>
#include <cstdlib>

namespace vit5 {

void RopeTables::Bank::ensure(std::int64_t coord) const {
    while (static_cast<std::int64_t>(cos_rows.size()) <= coord) {
        const std::int64_t p = static_cast<std::int64_t>(cos_rows.size());
        std::vector<double> cs(thetas.size()), sn(thetas.size());
        for (std::size_t i = 0; i < thetas.size(); ++i) {
            const double a = static_cast<double>(p) * thetas[i];
            cs[i] = std::cos(a);
            sn[i] = std::sin(a);
        }
        cos_rows.push_back(std::move(cs));
        sin_rows.push_back(std::move(sn));
    }
}

RopeTables::RopeTables(double patch_base, double reg_base, int d_head)
    : patch_base_(patch_base), reg_base_(reg_base), d_head_(d_head) {
    if (d_head <= 0 || d_head % 4 != 0) {
        throw ConfigError("rope: head dim must be a positive multiple of 4, got " +
                          std::to_string(d_head));
    }
    if (patch_base <= 0.0 || reg_base <= 0.0) {
        throw ConfigError("rope: frequency bases must be positive");
    }
    const int pairs = d_head / 4;
    const double d_axis = static_cast<double>(d_head) / 2.0;
    auto fill = [&](Bank& b, double base) {
        b.thetas.resize(static_cast<std::size_t>(pairs));
        for (int i = 0; i < pairs; ++i) {
            b.thetas[static_cast<std::size_t>(i)] = std::pow(base, 2.0 * i / d_axis);
        }
    };
    fill(patch_, patch_base);
    fill(reg_, reg_base);
}

double RopeTables::theta(RopeTable t, int pair) const {
    const Bank& b = bank(t);
    if (pair < 0 || pair >= static_cast<int>(b.thetas.size())) {
        throw ConfigError("rope: pair index out of range");
    }
    return b.thetas[static_cast<std::size_t>(pair)];
}

void RopeTables::angles_at(RopeTable t, std::int64_t coord, double* cos_out,
                           double* sin_out) const {
    const Bank& b = bank(t);
    const std::int64_t a = std::llabs(coord);
    b.ensure(a);
    const auto& cs = b.cos_rows[static_cast<std::size_t>(a)];
    const auto& sn = b.sin_rows[static_cast<std::size_t>(a)];
    const double sign = coord < 0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < cs.size(); ++i) {
        cos_out[i] = cs[i];
        sin_out[i] = sign * sn[i];
    }
}

RopeAngles RopeTables::angles_for(const std::vector<TokenCoord>& coords) const {
    const std::int64_t T = static_cast<std::int64_t>(coords.size());
    const int pairs = pairs_per_axis();
    auto cos_bank = std::make_shared<std::vector<double>>(static_cast<std::size_t>(T * 2 * pairs));
    auto sin_bank = std::make_shared<std::vector<double>>(cos_bank->size());
    for (std::int64_t t = 0; t < T; ++t) {
        double* cs = cos_bank->data() + t * 2 * pairs;
        double* sn = sin_bank->data() + t * 2 * pairs;
        const TokenCoord& c = coords[static_cast<std::size_t>(t)];
        if (!c.rotate) {
            for (int i = 0; i < 2 * pairs; ++i) {
                cs[i] = 1.0;
                sn[i] = 0.0;
            }
            continue;
        }
        angles_at(c.table, c.x, cs, sn);
        angles_at(c.table, c.y, cs + pairs, sn + pairs);
    }
    return RopeAngles{std::move(cos_bank), std::move(sin_bank), T};
}

}  // namespace vit5
