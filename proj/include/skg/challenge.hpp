#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "skg/amplify.hpp"
#include "skg/common.hpp"

namespace skg {

/// Malformed challenge submission.
struct ParseError : InputError {
    using InputError::InputError;
};

inline constexpr std::size_t challenge_entries = 20;
inline constexpr std::size_t block_bytes = 32;

using Block256 = std::array<std::uint8_t, block_bytes>;

inline const std::array<std::string, 4>& challenge_scenarios() {
    static const std::array<std::string, 4> names{"nlos-dynamic", "nlos-static", "los-dynamic", "los-static"};
    return names;
}
inline constexpr std::array<int, 5> challenge_positions{2, 3, 4, 5, 6};

/// A distilled key together with the public facts recorded next to its ciphertext.
struct ChallengeKey {
    std::string scenario;
    int eve_position = 0;
    std::size_t start_frame_index = 0;
    double cme_per_bit = 0;
    Digest256 key{};
    std::optional<FileRef> eve_frames;
    std::optional<FileRef> syndromes;
};

inline ChallengeKey challenge_key_from_manifest(const KeyManifestEntry& e) {
    if (!e.key_hex) throw InputError("key manifest entry for " + e.scenario + " does not reveal its key");
    const auto bytes = from_hex(*e.key_hex);
    if (bytes.size() != key_bits / 8) throw InputError("key manifest entry has a key of the wrong length");
    ChallengeKey k{e.scenario, e.eve_position, e.start_index, e.cme_per_bit, {}, e.eve_frames, e.syndromes};
    std::copy(bytes.begin(), bytes.end(), k.key.begin());
    return k;
}

struct ChallengeEntry {
    std::string scenario;
    int eve_position = 0;
    Block256 ciphertext{};
    std::size_t start_frame_index = 0;
    double cme_per_bit = 0;
    std::optional<FileRef> eve_frames;
    std::optional<FileRef> syndromes;

    friend bool operator==(const ChallengeEntry&, const ChallengeEntry&) = default;
};

struct ChallengeBundle {
    std::vector<ChallengeEntry> entries;

    friend bool operator==(const ChallengeBundle&, const ChallengeBundle&) = default;
};

inline Block256 xor_blocks(const Block256& a, const Block256& b) {
    Block256 out{};
    for (std::size_t i = 0; i < block_bytes; ++i) out[i] = a[i] ^ b[i];
    return out;
}

/// One-time-pad encryption of 20 plaintext blocks, one per (scenario, position).
inline ChallengeBundle make_challenge(std::span<const ChallengeKey> keys, std::span<const Block256> plaintexts) {
    if (keys.size() != challenge_entries || plaintexts.size() != challenge_entries)
        throw InputError("make_challenge: exactly 20 keys and 20 plaintext blocks are required");
    std::set<Digest256> distinct;
    std::set<std::pair<std::string, int>> cells;
    const auto& names = challenge_scenarios();
    for (const auto& k : keys) {
        if (std::find(names.begin(), names.end(), k.scenario) == names.end())
            throw InputError("make_challenge: unknown scenario '" + k.scenario + "'");
        if (std::find(challenge_positions.begin(), challenge_positions.end(), k.eve_position) == challenge_positions.end())
            throw InputError("make_challenge: eve position must be 2..6 wavelengths");
        if (!cells.emplace(k.scenario, k.eve_position).second)
            throw InputError("make_challenge: duplicate scenario/position " + k.scenario + "/" +
                             std::to_string(k.eve_position));
        if (!distinct.insert(k.key).second) throw InputError("make_challenge: keys must be distinct");
    }
    ChallengeBundle bundle;
    for (std::size_t i = 0; i < challenge_entries; ++i) {
        const auto& k = keys[i];
        bundle.entries.push_back({k.scenario, k.eve_position, xor_blocks(plaintexts[i], k.key), k.start_frame_index,
                                  k.cme_per_bit, k.eve_frames, k.syndromes});
    }
    return bundle;
}

/// Organizer-side decryption with the true keys.
inline std::vector<Block256> decrypt_challenge(const ChallengeBundle& bundle, std::span<const ChallengeKey> keys) {
    if (keys.size() != bundle.entries.size()) throw InputError("decrypt_challenge: key count mismatch");
    std::vector<Block256> out;
    for (std::size_t i = 0; i < keys.size(); ++i) out.push_back(xor_blocks(bundle.entries[i].ciphertext, keys[i].key));
    return out;
}

/// ASCII plaintexts so a recovered block is recognizable by eye.
inline std::vector<Block256> default_plaintexts() {
    static const char* const words[] = {"alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf",
                                        "hotel", "india", "juliett", "kilo", "lima", "mike", "november",
                                        "oscar", "papa", "quebec", "romeo", "sierra", "tango"};
    std::vector<Block256> out(challenge_entries);
    for (std::size_t i = 0; i < challenge_entries; ++i) {
        std::string s = "Block " + std::to_string(i + 1) + " says " + words[i] + ".";
        s.resize(block_bytes, ' ');
        std::copy(s.begin(), s.end(), out[i].begin());
    }
    return out;
}

inline void write_plaintexts(const std::string& path, std::span<const Block256> blocks) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& b : blocks) out.write(reinterpret_cast<const char*>(b.data()), block_bytes);
}

inline std::vector<Block256> read_plaintexts(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (data.size() != challenge_entries * block_bytes)
        throw InputError(path + ": plaintext file must hold exactly 20 x 32 bytes");
    std::vector<Block256> out(challenge_entries);
    for (std::size_t i = 0; i < challenge_entries; ++i)
        std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(i * block_bytes), block_bytes, out[i].begin());
    return out;
}

inline nlohmann::json to_json(const ChallengeBundle& bundle) {
    nlohmann::json j = {{"format", "skg-challenge-bundle"}, {"version", 1}, {"entries", nlohmann::json::array()}};
    for (std::size_t i = 0; i < bundle.entries.size(); ++i) {
        const auto& e = bundle.entries[i];
        nlohmann::json je = {{"index", i},
                             {"scenario", e.scenario},
                             {"eve_position", e.eve_position},
                             {"ciphertext", to_hex(e.ciphertext)},
                             {"start_frame_index", e.start_frame_index},
                             {"cme_per_bit", e.cme_per_bit}};
        je["eve_frames"] = e.eve_frames ? to_json(*e.eve_frames) : nlohmann::json(nullptr);
        je["syndromes"] = e.syndromes ? to_json(*e.syndromes) : nlohmann::json(nullptr);
        j["entries"].push_back(je);
    }
    return j;
}

inline ChallengeBundle bundle_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format") != "skg-challenge-bundle") throw InputError("not a challenge bundle manifest");
        ChallengeBundle b;
        for (const auto& je : j.at("entries")) {
            ChallengeEntry e;
            e.scenario = je.at("scenario").get<std::string>();
            e.eve_position = je.at("eve_position").get<int>();
            const auto ct = from_hex(je.at("ciphertext").get<std::string>());
            if (ct.size() != block_bytes) throw InputError("ciphertext must be 256 bits");
            std::copy(ct.begin(), ct.end(), e.ciphertext.begin());
            e.start_frame_index = je.at("start_frame_index").get<std::size_t>();
            e.cme_per_bit = je.at("cme_per_bit").get<double>();
            if (!je.at("eve_frames").is_null()) e.eve_frames = file_ref_from_json(je.at("eve_frames"));
            if (!je.at("syndromes").is_null()) e.syndromes = file_ref_from_json(je.at("syndromes"));
            b.entries.push_back(std::move(e));
        }
        if (b.entries.size() != challenge_entries) throw InputError("bundle must hold exactly 20 entries");
        return b;
    } catch (const nlohmann::json::exception& ex) {
        throw InputError(std::string("malformed challenge bundle: ") + ex.what());
    }
}

inline constexpr const char* bundle_manifest_name = "challenge.json";

inline void write_bundle(const std::filesystem::path& dir, const ChallengeBundle& bundle) {
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / bundle_manifest_name, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write bundle manifest in " + dir.string());
    out << to_json(bundle).dump(2) << '\n';
}

inline ChallengeBundle read_bundle(const std::filesystem::path& dir) {
    std::ifstream in(dir / bundle_manifest_name, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open bundle manifest in " + dir.string());
    try {
        return bundle_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& ex) {
        throw InputError(std::string("malformed challenge bundle: ") + ex.what());
    }
}

/// Entries whose referenced evidence file is missing or no longer matches its hash.
inline std::vector<std::string> check_evidence(const std::filesystem::path& dir, const ChallengeBundle& bundle) {
    std::vector<std::string> problems;
    auto check = [&](const std::optional<FileRef>& ref, std::size_t i, const char* what) {
        if (!ref) return;
        const auto path = dir / ref->path;
        std::string actual;
        try {
            actual = file_sha256(path.string());
        } catch (const std::exception&) {
            problems.push_back("entry " + std::to_string(i) + ": " + what + " missing (" + ref->path + ")");
            return;
        }
        if (actual != ref->sha256)
            problems.push_back("entry " + std::to_string(i) + ": " + what + " hash mismatch (" + ref->path + ")");
    };
    for (std::size_t i = 0; i < bundle.entries.size(); ++i) {
        check(bundle.entries[i].eve_frames, i, "eve frames");
        check(bundle.entries[i].syndromes, i, "syndromes");
    }
    return problems;
}

/// Claimed plaintexts by entry index (0..19). Partial submissions are allowed.
using Submission = std::map<std::size_t, Block256>;

/// Parses lines of "<entry index> <64 hex digits>"; '#' starts a comment.
inline Submission parse_submission(std::istream& in) {
    Submission sub;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ss(line);
        std::string index_text, hex, extra;
        if (!(ss >> index_text)) continue;
        const auto where = "submission line " + std::to_string(line_no) + ": ";
        if (!(ss >> hex) || (ss >> extra)) throw ParseError(where + "expected '<index> <hex>'");
        std::size_t index = 0;
        try {
            std::size_t used = 0;
            index = std::stoul(index_text, &used);
            if (used != index_text.size()) throw ParseError(where + "bad entry index");
        } catch (const std::logic_error&) {
            throw ParseError(where + "bad entry index");
        }
        if (index >= challenge_entries) throw ParseError(where + "entry index out of range");
        if (hex.size() != 2 * block_bytes) throw ParseError(where + "plaintext must be 64 hex digits");
        std::vector<std::uint8_t> bytes;
        try {
            bytes = from_hex(hex);
        } catch (const InputError&) {
            throw ParseError(where + "invalid hex");
        }
        Block256 block{};
        std::copy(bytes.begin(), bytes.end(), block.begin());
        if (!sub.emplace(index, block).second) throw ParseError(where + "duplicate entry index");
    }
    return sub;
}

struct VerifyReport {
    std::vector<std::optional<bool>> matched;  // nullopt = not submitted
    std::size_t correct = 0;
    std::size_t total = challenge_entries;
};

inline VerifyReport verify_attempt(const ChallengeBundle& bundle, const Submission& claimed,
                                   std::span<const Block256> truth) {
    if (truth.size() != bundle.entries.size()) throw InputError("verify_attempt: plaintext store does not match bundle");
    VerifyReport report;
    report.total = bundle.entries.size();
    report.matched.assign(bundle.entries.size(), std::nullopt);
    for (const auto& [index, block] : claimed) {
        if (index >= bundle.entries.size()) throw ParseError("verify_attempt: entry index out of range");
        const bool ok = block == truth[index];
        report.matched[index] = ok;
        report.correct += ok ? 1 : 0;
    }
    return report;
}

} // namespace skg
