#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "skg/common.hpp"
#include "skg/sha256.hpp"

namespace skg {

/// No key can be distilled from a source without conditional min-entropy.
struct UnusableEntropyError : std::domain_error {
    using std::domain_error::domain_error;
};

/// Not enough reconciled material from the start index onward.
struct ExhaustionError : std::runtime_error {
    ExhaustionError(std::size_t required_bits, std::size_t available_bits)
        : std::runtime_error("distill_key: need " + std::to_string(required_bits) + " bits, only " +
                             std::to_string(available_bits) + " available (short by " +
                             std::to_string(required_bits - available_bits) + ")"),
          required(required_bits),
          available(available_bits) {}
    std::size_t required;
    std::size_t available;
};

inline constexpr std::size_t key_bits = 256;

struct KeyMaterial {
    std::string scenario;
    int eve_position = 0;
    std::size_t start_frame_index = 0;
    Bits input_bits;
    double cme_per_bit_effective = 0;
    Digest256 key{};
};

/// ceil(256 / H) input bits for a 256-bit key at H bits of min-entropy per bit.
inline std::size_t required_input_length(double cme_per_bit) {
    if (!(cme_per_bit > 0) || !std::isfinite(cme_per_bit))
        throw UnusableEntropyError("required_input_length: conditional min-entropy must be positive");
    return static_cast<std::size_t>(std::ceil(static_cast<double>(key_bits) / cme_per_bit));
}

/// Injective byte encoding of a bit string: 8-byte big-endian bit count, then
/// the bits MSB first, zero padded.
inline std::vector<std::uint8_t> encode_hash_input(std::span<const std::uint8_t> bits) {
    std::vector<std::uint8_t> out(8);
    const auto len = static_cast<std::uint64_t>(bits.size());
    for (int i = 0; i < 8; ++i) out[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(len >> (56 - 8 * i));
    const auto packed = pack_bits(bits);
    out.insert(out.end(), packed.begin(), packed.end());
    return out;
}

/// 16-bit public check value used to confirm a frame was reconciled.
inline std::uint16_t block_check_value(const BitBlock& block) {
    const auto d = sha256(encode_hash_input(block.bits));
    return static_cast<std::uint16_t>((d[0] << 8) | d[1]);
}

/// Concatenates successful blocks with frame_index >= start_index (in order)
/// up to the required length, truncating the last block, and hashes the result.
inline KeyMaterial distill_key(std::span<const BitBlock> blocks, std::span<const std::uint8_t> success,
                               std::size_t start_index, double cme_effective) {
    if (success.size() != blocks.size()) throw InputError("distill_key: success flags do not match blocks");
    const std::size_t need = required_input_length(cme_effective);
    KeyMaterial km;
    km.start_frame_index = start_index;
    km.cme_per_bit_effective = cme_effective;
    km.input_bits.reserve(need);
    for (std::size_t i = 0; i < blocks.size() && km.input_bits.size() < need; ++i) {
        if (!success[i] || blocks[i].frame_index < start_index) continue;
        const std::size_t take = std::min(need - km.input_bits.size(), blocks[i].bits.size());
        km.input_bits.insert(km.input_bits.end(), blocks[i].bits.begin(),
                             blocks[i].bits.begin() + static_cast<std::ptrdiff_t>(take));
    }
    if (km.input_bits.size() < need) throw ExhaustionError(need, km.input_bits.size());
    km.key = sha256(encode_hash_input(km.input_bits));
    return km;
}

inline KeyMaterial distill_key(std::span<const BitBlock> blocks, std::size_t start_index, double cme_effective) {
    std::vector<std::uint8_t> all(blocks.size(), 1);
    return distill_key(blocks, all, start_index, cme_effective);
}

/// Secret bits per frame: K log2(Q) (1 - FER) H, with H the margin-reduced per-bit CME.
inline double key_rate(std::size_t num_filters, std::size_t levels, double fer, double cme_per_bit_hat) {
    if (!(fer >= 0 && fer <= 1)) throw InputError("key_rate: FER must be in [0,1]");
    if (!(cme_per_bit_hat >= 0 && cme_per_bit_hat <= 1)) throw InputError("key_rate: CME must be in [0,1]");
    return static_cast<double>(num_filters) * std::log2(static_cast<double>(levels)) * (1 - fer) * cme_per_bit_hat;
}

/// First 8 hex characters of SHA-256(key); identifies a key without exposing its bits.
inline std::string key_fingerprint(const Digest256& key) { return to_hex(sha256(key)).substr(0, 8); }

/// Relative path plus content hash of an evidence file.
struct FileRef {
    std::string path;
    std::string sha256;

    friend bool operator==(const FileRef&, const FileRef&) = default;
};

inline std::string file_sha256(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    Sha256 h;
    std::vector<std::uint8_t> buf(1 << 16);
    while (in) {
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        h.update(std::span(buf.data(), static_cast<std::size_t>(in.gcount())));
    }
    return to_hex(h.finish());
}

struct KeyManifestEntry {
    std::string scenario;
    int eve_position = 0;
    std::size_t start_index = 0;
    std::size_t input_length = 0;
    double cme_per_bit = 0;
    double cme_per_bit_effective = 0;
    std::string fingerprint;
    std::optional<std::string> key_hex;  // only when revealed
    std::optional<FileRef> eve_frames;
    std::optional<FileRef> syndromes;

    friend bool operator==(const KeyManifestEntry&, const KeyManifestEntry&) = default;
};

inline KeyManifestEntry make_manifest_entry(const KeyMaterial& km, double cme_per_bit, bool reveal) {
    KeyManifestEntry e;
    e.scenario = km.scenario;
    e.eve_position = km.eve_position;
    e.start_index = km.start_frame_index;
    e.input_length = km.input_bits.size();
    e.cme_per_bit = cme_per_bit;
    e.cme_per_bit_effective = km.cme_per_bit_effective;
    e.fingerprint = key_fingerprint(km.key);
    if (reveal) e.key_hex = to_hex(km.key);
    return e;
}

inline nlohmann::json to_json(const FileRef& r) { return {{"path", r.path}, {"sha256", r.sha256}}; }
inline FileRef file_ref_from_json(const nlohmann::json& j) {
    return {j.at("path").get<std::string>(), j.at("sha256").get<std::string>()};
}

inline nlohmann::json to_json(const KeyManifestEntry& e) {
    nlohmann::json j = {{"scenario", e.scenario},
                        {"eve_position", e.eve_position},
                        {"start_index", e.start_index},
                        {"input_length", e.input_length},
                        {"cme_per_bit", e.cme_per_bit},
                        {"cme_per_bit_effective", e.cme_per_bit_effective},
                        {"fingerprint", e.fingerprint}};
    if (e.key_hex) j["key"] = *e.key_hex;
    if (e.eve_frames) j["eve_frames"] = to_json(*e.eve_frames);
    if (e.syndromes) j["syndromes"] = to_json(*e.syndromes);
    return j;
}

inline KeyManifestEntry key_manifest_entry_from_json(const nlohmann::json& j) {
    KeyManifestEntry e;
    e.scenario = j.at("scenario").get<std::string>();
    e.eve_position = j.at("eve_position").get<int>();
    e.start_index = j.at("start_index").get<std::size_t>();
    e.input_length = j.at("input_length").get<std::size_t>();
    e.cme_per_bit = j.at("cme_per_bit").get<double>();
    e.cme_per_bit_effective = j.at("cme_per_bit_effective").get<double>();
    e.fingerprint = j.at("fingerprint").get<std::string>();
    if (j.contains("key")) e.key_hex = j.at("key").get<std::string>();
    if (j.contains("eve_frames")) e.eve_frames = file_ref_from_json(j.at("eve_frames"));
    if (j.contains("syndromes")) e.syndromes = file_ref_from_json(j.at("syndromes"));
    return e;
}

inline void write_key_manifest(const std::string& path, std::span<const KeyManifestEntry> entries) {
    nlohmann::json j = {{"format", "skg-key-manifest"}, {"version", 1}, {"keys", nlohmann::json::array()}};
    for (const auto& e : entries) j["keys"].push_back(to_json(e));
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << '\n';
}

inline std::vector<KeyManifestEntry> read_key_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
        if (j.at("format") != "skg-key-manifest") throw InputError(path + ": not a key manifest");
        std::vector<KeyManifestEntry> entries;
        for (const auto& e : j.at("keys")) entries.push_back(key_manifest_entry_from_json(e));
        return entries;
    } catch (const nlohmann::json::exception& ex) {
        throw InputError(path + ": malformed key manifest: " + ex.what());
    }
}

} // namespace skg
