#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "skg/common.hpp"
#include "skg/filterbank.hpp"

namespace skg {

enum class QuantDomain { linear, decibel };

inline QuantDomain quant_domain_from_string(const std::string& s) {
    if (s == "linear") return QuantDomain::linear;
    if (s == "decibel" || s == "db") return QuantDomain::decibel;
    throw ConfigError("quant: domain must be 'linear' or 'decibel'");
}

inline std::string to_string(QuantDomain d) { return d == QuantDomain::linear ? "linear" : "decibel"; }

struct QuantConfig {
    std::size_t levels = 16;
    QuantDomain domain = QuantDomain::decibel;

    void validate() const {
        if (levels < 2 || !std::has_single_bit(levels)) throw ConfigError("quant: levels must be a power of two >= 2");
    }

    std::size_t bits_per_measurement() const { return static_cast<std::size_t>(std::countr_zero(levels)); }
};

inline unsigned gray_encode(unsigned level) { return level ^ (level >> 1); }

inline unsigned gray_decode(unsigned code) {
    unsigned level = 0;
    for (; code; code >>= 1) level ^= code;
    return level;
}

/// Maps each measurement to its level index: Q even cells over [min, max],
/// half-open except that the maximum lands in the top cell. A degenerate range
/// puts everything in level 0.
inline std::vector<unsigned> quantize_levels(std::span<const double> powers, const QuantConfig& cfg) {
    cfg.validate();
    std::vector<double> v(powers.begin(), powers.end());
    for (auto& x : v) {
        if (!std::isfinite(x) || x < 0) throw InputError("quantize: powers must be finite and nonnegative");
        if (cfg.domain == QuantDomain::decibel) {
            if (x == 0) throw InputError("quantize: zero power has no decibel value");
            x = 10 * std::log10(x);
        }
    }
    std::vector<unsigned> levels(v.size(), 0);
    if (v.empty()) return levels;
    const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    if (hi == lo) return levels;

    const std::size_t Q = cfg.levels;
    std::vector<double> edges(Q);
    for (std::size_t i = 0; i < Q; ++i) edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(Q);
    for (std::size_t k = 0; k < v.size(); ++k) {
        // Largest i with edges[i] <= v; edges are nondecreasing so this is monotone in v.
        auto it = std::upper_bound(edges.begin(), edges.end(), v[k]);
        levels[k] = static_cast<unsigned>(std::distance(edges.begin(), it) - 1);
    }
    return levels;
}

/// Gray-coded bits of every subband power, concatenated in subband order, MSB first.
inline BitBlock quantize_frame(const PowerVector& p, const QuantConfig& cfg) {
    if (p.powers.size() < 2) throw InputError("quantize: need at least two measurements per frame");
    const auto levels = quantize_levels(p.powers, cfg);
    const std::size_t b = cfg.bits_per_measurement();
    BitBlock block{Bits(levels.size() * b), p.frame_index, p.node};
    for (std::size_t k = 0; k < levels.size(); ++k) {
        const unsigned code = gray_encode(levels[k]);
        for (std::size_t j = 0; j < b; ++j) block.bits[k * b + j] = (code >> (b - 1 - j)) & 1u;
    }
    return block;
}

/// Mean fraction of differing bits across paired blocks.
inline double mismatch_probability(std::span<const BitBlock> a, std::span<const BitBlock> b) {
    if (a.size() != b.size()) throw InputError("mismatch_probability: block counts differ");
    if (a.empty()) throw InputError("mismatch_probability: no blocks");
    double total = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].bits.size() != b[i].bits.size() || a[i].bits.empty())
            throw InputError("mismatch_probability: block lengths differ");
        total += static_cast<double>(hamming_distance(a[i].bits, b[i].bits)) / static_cast<double>(a[i].bits.size());
    }
    return total / static_cast<double>(a.size());
}

} // namespace skg
