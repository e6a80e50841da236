#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "skg/common.hpp"

namespace skg {

/// Slepian-Wolf polar code: the source block x is transformed to u = x G_n
/// (G_n = F^{(x) log2 n}, natural order) and the u-values at the m least
/// reliable synthetic channels are published as the syndrome.
struct PolarSWCode {
    std::size_t block_length = 0;
    double code_rate = 0;
    std::size_t syndrome_length = 0;
    std::vector<std::size_t> syndrome_positions;  // sorted ascending
    std::vector<bool> is_syndrome;                 // indexed by position
    std::vector<double> bhattacharyya;             // per synthetic channel
    double design_param = 0.1;
};

struct Syndrome {
    Bits bits;
    std::size_t frame_index = 0;

    friend bool operator==(const Syndrome&, const Syndrome&) = default;
};

/// m = ceil((1 - r) n), at least 1. A small slack absorbs representation error
/// in r so that e.g. (1 - 0.3) * 64 is not pushed to 45 by rounding noise alone.
inline std::size_t syndrome_length_for(std::size_t n, double rate) {
    const double exact = (1.0 - rate) * static_cast<double>(n);
    auto m = static_cast<std::size_t>(std::ceil(exact - 1e-9));
    return std::clamp<std::size_t>(m, 1, n);
}

/// Bhattacharyya parameters of the n synthetic channels over BSC(p). Index bits
/// are consumed MSB first: 0 -> degraded branch (2z - z^2), 1 -> upgraded (z^2).
inline std::vector<double> polar_bhattacharyya(std::size_t n, double p) {
    const double z0 = 2 * std::sqrt(p * (1 - p));
    const int levels = std::countr_zero(n);
    std::vector<double> z(n);
    for (std::size_t i = 0; i < n; ++i) {
        double v = z0;
        for (int b = levels - 1; b >= 0; --b) v = ((i >> b) & 1u) ? v * v : 2 * v - v * v;
        z[i] = v;
    }
    return z;
}

inline PolarSWCode construct_code(std::size_t n, double rate, double design_param = 0.1) {
    if (n < 2 || !std::has_single_bit(n)) throw ConfigError("polar: block length must be a power of two >= 2");
    if (!(rate > 0 && rate < 1)) throw ConfigError("polar: code rate must be in (0,1)");
    if (!(design_param > 0 && design_param < 0.5)) throw ConfigError("polar: design parameter must be in (0,0.5)");

    PolarSWCode code;
    code.block_length = n;
    code.code_rate = rate;
    code.design_param = design_param;
    code.syndrome_length = syndrome_length_for(n, rate);
    code.bhattacharyya = polar_bhattacharyya(n, design_param);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    // Least reliable first; ties resolved toward lower index.
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return code.bhattacharyya[a] > code.bhattacharyya[b]; });
    code.syndrome_positions.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(code.syndrome_length));
    std::sort(code.syndrome_positions.begin(), code.syndrome_positions.end());
    code.is_syndrome.assign(n, false);
    for (auto i : code.syndrome_positions) code.is_syndrome[i] = true;
    return code;
}

/// In-place x -> x G_n over GF(2). G_n is an involution, so this also inverts.
inline void polar_transform(std::span<std::uint8_t> v) {
    const std::size_t n = v.size();
    for (std::size_t len = 1; len < n; len <<= 1)
        for (std::size_t i = 0; i < n; i += 2 * len)
            for (std::size_t j = i; j < i + len; ++j) v[j] ^= v[j + len];
}

inline Syndrome make_syndrome(const BitBlock& block, const PolarSWCode& code) {
    if (block.bits.size() != code.block_length) throw InputError("make_syndrome: block length does not match code");
    Bits u = block.bits;
    polar_transform(u);
    Syndrome s{Bits(code.syndrome_length), block.frame_index};
    for (std::size_t i = 0; i < code.syndrome_length; ++i) s.bits[i] = u[code.syndrome_positions[i]];
    return s;
}

struct DecodeResult {
    BitBlock decoded;
    bool success_hint = false;  // syndrome of decoded block equals the received syndrome
};

namespace detail {

// Check-node LLR combination (exact box-plus).
inline double boxplus(double a, double b) {
    const double s = (a < 0) != (b < 0) ? -1.0 : 1.0;
    return s * std::min(std::abs(a), std::abs(b)) + std::log1p(std::exp(-std::abs(a + b))) -
           std::log1p(std::exp(-std::abs(a - b)));
}

class ScDecoder {
public:
    ScDecoder(const PolarSWCode& code, std::span<const std::uint8_t> frozen_values)
        : code_(code), frozen_(frozen_values) {}

    // Decodes the u-values with indices [base, base + llr.size()) and returns
    // their image under G (the corresponding x-part).
    Bits decode(std::span<const double> llr, std::size_t base) {
        const std::size_t n = llr.size();
        if (n == 1) {
            std::uint8_t u = code_.is_syndrome[base] ? frozen_[base] : (llr[0] >= 0 ? 0 : 1);
            return Bits{u};
        }
        const std::size_t h = n / 2;
        std::vector<double> sub(h);
        for (std::size_t i = 0; i < h; ++i) sub[i] = boxplus(llr[i], llr[i + h]);
        Bits va = decode(sub, base);
        for (std::size_t i = 0; i < h; ++i) sub[i] = llr[i + h] + (va[i] ? -llr[i] : llr[i]);
        Bits vb = decode(sub, base + h);
        Bits v(n);
        for (std::size_t i = 0; i < h; ++i) {
            v[i] = va[i] ^ vb[i];
            v[i + h] = vb[i];
        }
        return v;
    }

private:
    const PolarSWCode& code_;
    std::span<const std::uint8_t> frozen_;
};

} // namespace detail

/// Syndrome-guided successive-cancellation decoding of the source block from
/// a correlated observation modeled as the output of BSC(crossover).
inline DecodeResult sw_decode(const BitBlock& observed, const Syndrome& synd, const PolarSWCode& code,
                              double crossover) {
    const std::size_t n = code.block_length;
    if (observed.bits.size() != n) throw InputError("sw_decode: observed block length does not match code");
    if (synd.bits.size() != code.syndrome_length) throw InputError("sw_decode: syndrome length does not match code");
    if (!(crossover >= 0 && crossover < 0.5)) throw InputError("sw_decode: crossover must be in [0, 0.5)");

    const double p = std::max(crossover, 1e-12);
    const double magnitude = std::log((1 - p) / p);
    std::vector<double> llr(n);
    for (std::size_t i = 0; i < n; ++i) llr[i] = observed.bits[i] ? -magnitude : magnitude;

    Bits frozen(n, 0);
    for (std::size_t i = 0; i < code.syndrome_length; ++i) frozen[code.syndrome_positions[i]] = synd.bits[i];

    detail::ScDecoder dec(code, frozen);
    DecodeResult r;
    r.decoded = BitBlock{dec.decode(llr, 0), observed.frame_index, observed.node};
    r.success_hint = make_syndrome(r.decoded, code).bits == synd.bits;
    if (!r.success_hint) throw std::logic_error("sw_decode: decoded block violates the syndrome");
    return r;
}

/// Fraction of frames whose decoded block differs from the reference in any bit.
inline double frame_error_rate(std::span<const BitBlock> reference, std::span<const BitBlock> decoded) {
    if (reference.size() != decoded.size()) throw InputError("frame_error_rate: block counts differ");
    if (reference.empty()) throw InputError("frame_error_rate: no blocks");
    std::size_t errors = 0;
    for (std::size_t i = 0; i < reference.size(); ++i) errors += reference[i].bits != decoded[i].bits ? 1 : 0;
    return static_cast<double>(errors) / static_cast<double>(reference.size());
}

} // namespace skg
