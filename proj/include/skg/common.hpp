#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace skg {

/// Thrown when a configuration object violates its invariants.
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Thrown when an operation receives data it cannot process.
struct InputError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

enum class Node : std::uint8_t { alice = 0, bob = 1, eve = 2 };

inline std::string_view to_string(Node node) {
    switch (node) {
        case Node::alice: return "alice";
        case Node::bob: return "bob";
        case Node::eve: return "eve";
    }
    return "unknown";
}

inline Node node_from_string(std::string_view name) {
    if (name == "alice") return Node::alice;
    if (name == "bob") return Node::bob;
    if (name == "eve") return Node::eve;
    throw InputError("unknown node '" + std::string(name) + "'");
}

/// One bit per element, each element 0 or 1.
using Bits = std::vector<std::uint8_t>;

/// Quantizer output or reconciled block for one frame.
struct BitBlock {
    Bits bits;
    std::size_t frame_index = 0;
    Node node = Node::alice;

    friend bool operator==(const BitBlock&, const BitBlock&) = default;
};

inline std::size_t hamming_distance(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
    if (a.size() != b.size()) throw InputError("hamming_distance: length mismatch");
    std::size_t d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] != b[i]) ? 1 : 0;
    return d;
}

/// MSB-first packing, zero padded to a byte boundary.
inline std::vector<std::uint8_t> pack_bits(std::span<const std::uint8_t> bits) {
    std::vector<std::uint8_t> out((bits.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i]) out[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
    }
    return out;
}

inline Bits unpack_bits(std::span<const std::uint8_t> bytes, std::size_t bit_length) {
    if (bytes.size() * 8 < bit_length) throw InputError("unpack_bits: not enough bytes");
    Bits out(bit_length);
    for (std::size_t i = 0; i < bit_length; ++i) out[i] = (bytes[i / 8] >> (7 - i % 8)) & 1u;
    return out;
}

inline std::string to_hex(std::span<const std::uint8_t> bytes) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string s;
    s.reserve(bytes.size() * 2);
    for (auto b : bytes) {
        s.push_back(digits[b >> 4]);
        s.push_back(digits[b & 0xf]);
    }
    return s;
}

inline std::vector<std::uint8_t> from_hex(std::string_view hex) {
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    if (hex.size() % 2 != 0) throw InputError("from_hex: odd number of digits");
    std::vector<std::uint8_t> out(hex.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        int hi = nibble(hex[2 * i]);
        int lo = nibble(hex[2 * i + 1]);
        if (hi < 0 || lo < 0) throw InputError("from_hex: invalid digit");
        out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
    }
    return out;
}

/// Mixes a master seed with stream identifiers (splitmix64 finalizer).
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    };
    return mix(mix(mix(seed) ^ a) ^ (b * 0xd1b54a32d192ed03ull));
}

} // namespace skg
