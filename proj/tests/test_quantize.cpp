#include <gtest/gtest.h>

#include <bit>
#include <random>

#include "skg/quantize.hpp"
#include "test_support.hpp"

using namespace skg;

namespace {
PowerVector pv(std::vector<double> p) { return {Node::alice, 0, std::move(p)}; }
} // namespace

TEST(Gray, FourLevelTable) {
    EXPECT_EQ(gray_encode(0), 0b00u);
    EXPECT_EQ(gray_encode(1), 0b01u);
    EXPECT_EQ(gray_encode(2), 0b11u);
    EXPECT_EQ(gray_encode(3), 0b10u);
}

TEST(Gray, AdjacentLevelsDifferInOneBit) {
    for (unsigned i = 0; i + 1 < 1024; ++i) {
        EXPECT_EQ(std::popcount(gray_encode(i) ^ gray_encode(i + 1)), 1);
        EXPECT_EQ(gray_decode(gray_encode(i)), i);
    }
}

TEST(Quantize, ReferenceFrameDecibel) {
    // Reference bits from tests/oracles/reference_values.py.
    const auto b = quantize_frame(pv({1.0, 2.0, 4.0, 8.0, 3.0, 0.5, 16.0, 1.5}), {4, QuantDomain::decibel});
    EXPECT_EQ(b.bits, (Bits{0, 0, 0, 1, 1, 1, 1, 0, 1, 1, 0, 0, 1, 0, 0, 1}));
}

TEST(Quantize, ReferenceFrameLinear) {
    const auto b = quantize_frame(pv({1.0, 2.0, 4.0, 8.0, 3.0, 0.5, 16.0, 1.5}), {4, QuantDomain::linear});
    EXPECT_EQ(b.bits, (Bits{0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0}));
}

TEST(Quantize, BlockLengthIsKLog2Q) {
    std::vector<double> p(16);
    for (std::size_t k = 0; k < 16; ++k) p[k] = 1.0 + double(k);
    EXPECT_EQ(quantize_frame(pv(p), {16, QuantDomain::decibel}).bits.size(), 64u);
    EXPECT_EQ(quantize_frame(pv(p), {4, QuantDomain::decibel}).bits.size(), 32u);
}

TEST(Quantize, ExtremesMapToBottomAndTopLevels) {
    const auto lv = quantize_levels(std::vector<double>{5, 1, 3, 9}, {16, QuantDomain::linear});
    EXPECT_EQ(lv[1], 0u);
    EXPECT_EQ(lv[3], 15u);
    EXPECT_EQ(lv[2], 4u);  // (3-1)/(9-1)*16 = 4
}

TEST(Quantize, EqualPowersGiveAllZeroBlock) {
    const auto b = quantize_frame(pv(std::vector<double>(16, 2.5)), {16, QuantDomain::decibel});
    EXPECT_EQ(b.bits, Bits(64, 0));
}

TEST(Quantize, InvariantToPositiveScaling) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.01, 10);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> p(16);
        for (auto& v : p) v = u(rng);
        auto scaled = p;
        for (auto& v : scaled) v *= 1024.0;  // exact in binary floating point
        for (auto d : {QuantDomain::decibel, QuantDomain::linear}) {
            const QuantConfig q{16, d};
            ASSERT_EQ(quantize_frame(pv(p), q).bits, quantize_frame(pv(scaled), q).bits);
        }
    }
}

TEST(Quantize, RejectsBadInput) {
    EXPECT_THROW(quantize_frame(pv({1.0, std::nan("")}), {4}), InputError);
    EXPECT_THROW(quantize_frame(pv({1.0, -1.0}), {4}), InputError);
    EXPECT_THROW(quantize_frame(pv({1.0, 0.0}), {4, QuantDomain::decibel}), InputError);
    EXPECT_NO_THROW(quantize_frame(pv({1.0, 0.0}), {4, QuantDomain::linear}));
    EXPECT_THROW(quantize_frame(pv({1.0}), {4}), InputError);
    EXPECT_THROW(quantize_frame(pv({1.0, 2.0}), {6}), ConfigError);
    EXPECT_THROW(quantize_frame(pv({1.0, 2.0}), {1}), ConfigError);
    EXPECT_THROW(quant_domain_from_string("log"), ConfigError);
}

TEST(Mismatch, IdenticalComplementaryAndRandom) {
    std::mt19937_64 rng(9);
    std::vector<BitBlock> a, b, c;
    for (std::size_t i = 0; i < 10000; ++i) {
        a.push_back({skg::test::random_bits(rng, 64), i, Node::alice});
        auto comp = a.back();
        for (auto& x : comp.bits) x ^= 1u;
        b.push_back(comp);
        c.push_back({skg::test::random_bits(rng, 64), i, Node::eve});
    }
    EXPECT_EQ(mismatch_probability(a, a), 0.0);
    EXPECT_EQ(mismatch_probability(a, b), 1.0);
    EXPECT_NEAR(mismatch_probability(a, c), 0.5, 0.01);
    EXPECT_THROW(mismatch_probability(std::span(a).first(3), std::span(c).first(4)), InputError);
}
