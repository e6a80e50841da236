#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "skg/challenge.hpp"
#include "test_support.hpp"

using namespace skg;

namespace {

std::vector<ChallengeKey> make_keys(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<ChallengeKey> keys;
    for (const auto& s : challenge_scenarios()) {
        for (int pos : challenge_positions) {
            ChallengeKey k;
            k.scenario = s;
            k.eve_position = pos;
            k.start_frame_index = 100;
            k.cme_per_bit = 0.2;
            for (auto& b : k.key) b = static_cast<std::uint8_t>(rng());
            keys.push_back(k);
        }
    }
    return keys;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), {});
}

Submission parse(const std::string& text) {
    std::istringstream in(text);
    return parse_submission(in);
}

} // namespace

TEST(Challenge, ShapeIsFourScenariosByFivePositions) {
    EXPECT_EQ(challenge_scenarios().size() * challenge_positions.size(), challenge_entries);
    EXPECT_EQ(make_keys(1).size(), 20u);
}

TEST(Challenge, ZeroPlaintextRevealsKeyAndDecryptRecovers) {
    const auto keys = make_keys(2);
    const std::vector<Block256> zeros(20, Block256{});
    const auto bundle = make_challenge(keys, zeros);
    for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(bundle.entries[i].ciphertext, keys[i].key);

    const auto plain = default_plaintexts();
    const auto b2 = make_challenge(keys, plain);
    EXPECT_EQ(decrypt_challenge(b2, keys), plain);
}

TEST(Challenge, RejectsMisconfiguredKeySets) {
    auto keys = make_keys(3);
    const auto plain = default_plaintexts();
    auto dup = keys;
    dup[5].key = dup[9].key;
    EXPECT_THROW(make_challenge(dup, plain), InputError);
    auto cell = keys;
    cell[1].eve_position = cell[0].eve_position;
    EXPECT_THROW(make_challenge(cell, plain), InputError);
    auto scen = keys;
    scen[0].scenario = "outdoor";
    EXPECT_THROW(make_challenge(scen, plain), InputError);
    EXPECT_THROW(make_challenge(std::span(keys).first(19), plain), InputError);
    EXPECT_THROW(make_challenge(keys, std::span(plain).first(19)), InputError);
}

TEST(Challenge, BundleRoundTripWithoutKeyMaterial) {
    skg::test::TempDir dir("bundle");
    auto keys = make_keys(4);
    keys[0].syndromes = FileRef{"evidence/a.synd", std::string(64, '0')};
    const auto bundle = make_challenge(keys, default_plaintexts());
    write_bundle(dir.path(), bundle);
    EXPECT_EQ(read_bundle(dir.path()), bundle);

    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir.path())) {
        if (!entry.is_regular_file()) continue;
        const auto text = slurp(entry.path());
        for (const auto& k : keys) {
            const auto hex = to_hex(k.key);
            EXPECT_EQ(text.find(hex), std::string::npos);
            const std::string raw(k.key.begin(), k.key.end());
            EXPECT_EQ(text.find(raw), std::string::npos);
            std::string upper = hex;
            for (auto& c : upper) c = static_cast<char>(std::toupper(c));
            EXPECT_EQ(text.find(upper), std::string::npos);
        }
    }
}

TEST(Challenge, EvidenceCheck) {
    skg::test::TempDir dir("bundle");
    {
        std::ofstream out(dir.file("eve.iqf"), std::ios::binary);
        out << "frames";
    }
    auto keys = make_keys(5);
    keys[2].eve_frames = FileRef{"eve.iqf", file_sha256(dir.file("eve.iqf"))};
    keys[3].eve_frames = FileRef{"gone.iqf", std::string(64, '0')};
    const auto bundle = make_challenge(keys, default_plaintexts());
    const auto problems = check_evidence(dir.path(), bundle);
    ASSERT_EQ(problems.size(), 1u);
    EXPECT_NE(problems[0].find("entry 3"), std::string::npos);
}

TEST(Verify, Scoring) {
    const auto keys = make_keys(6);
    const auto plain = default_plaintexts();
    const auto bundle = make_challenge(keys, plain);

    const auto none = verify_attempt(bundle, {}, plain);
    EXPECT_EQ(none.correct, 0u);
    EXPECT_EQ(none.total, 20u);

    Submission one{{7, plain[7]}};
    const auto r1 = verify_attempt(bundle, one, plain);
    EXPECT_EQ(r1.correct, 1u);
    EXPECT_TRUE(r1.matched[7].value());
    EXPECT_FALSE(r1.matched[6].has_value());

    Submission all;
    for (std::size_t i = 0; i < 20; ++i) all[i] = plain[i];
    all[3][0] ^= 1u;
    EXPECT_EQ(verify_attempt(bundle, all, plain).correct, 19u);
    all[3] = plain[3];
    EXPECT_EQ(verify_attempt(bundle, all, plain).correct, 20u);
}

TEST(Verify, SubmissionParsing) {
    const auto plain = default_plaintexts();
    const auto text = "# attempt\n7 " + to_hex(plain[7]) + "  # guess\n\n0 " + to_hex(plain[0]) + "\n";
    const auto sub = parse(text);
    ASSERT_EQ(sub.size(), 2u);
    EXPECT_EQ(sub.at(7), plain[7]);
    EXPECT_THROW(parse("20 " + to_hex(plain[0])), ParseError);
    EXPECT_THROW(parse("x " + to_hex(plain[0])), ParseError);
    EXPECT_THROW(parse("1 abcd"), ParseError);
    EXPECT_THROW(parse("1 " + std::string(64, 'g')), ParseError);
    EXPECT_THROW(parse("1 " + to_hex(plain[0]) + " extra"), ParseError);
    EXPECT_THROW(parse("1 " + to_hex(plain[0]) + "\n1 " + to_hex(plain[1])), ParseError);
}

TEST(Plaintexts, DefaultAreDistinctAsciiAndRoundTrip) {
    skg::test::TempDir dir("plain");
    const auto plain = default_plaintexts();
    ASSERT_EQ(plain.size(), 20u);
    std::set<Block256> distinct(plain.begin(), plain.end());
    EXPECT_EQ(distinct.size(), 20u);
    for (const auto& b : plain)
        for (auto c : b) EXPECT_TRUE(c >= 0x20 && c < 0x7f);
    write_plaintexts(dir.file("p.bin"), plain);
    EXPECT_EQ(std::filesystem::file_size(dir.file("p.bin")), 640u);
    EXPECT_EQ(read_plaintexts(dir.file("p.bin")), plain);
    std::filesystem::resize_file(dir.file("p.bin"), 639);
    EXPECT_THROW(read_plaintexts(dir.file("p.bin")), InputError);
}
