#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <random>

#include "skg/dataio.hpp"
#include "test_support.hpp"

using namespace skg;
using skg::test::TempDir;

namespace {

std::vector<IQFrame> random_frames(std::size_t count, std::size_t len, Node node, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> g;
    std::vector<IQFrame> out;
    for (std::size_t i = 0; i < count; ++i) {
        IQFrame f{node, i, std::vector<std::complex<float>>(len)};
        for (auto& s : f.samples) s = {g(rng), g(rng)};
        out.push_back(std::move(f));
    }
    return out;
}

DataIoErrorKind kind_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const DataIoError& e) {
        return e.kind;
    }
    ADD_FAILURE() << "no DataIoError thrown";
    return DataIoErrorKind::io;
}

void truncate_by(const std::string& path, std::uintmax_t bytes) {
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - bytes);
}

void patch_byte(const std::string& path, std::streamoff where, char value) {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(where);
    f.put(value);
}

} // namespace

TEST(FrameStore, RoundTripIsBitIdentical) {
    TempDir dir("frames");
    const ChirpConfig cfg;
    const auto frames = random_frames(3, cfg.samples_per_frame, Node::bob, 1);
    write_frames(dir.file("b.iqf"), frames, cfg);
    const auto back = read_frames(dir.file("b.iqf"));
    // The header echoes bandwidth, sample rate and frame length; duration is spf / fs.
    EXPECT_EQ(back.chirp.bandwidth_hz, cfg.bandwidth_hz);
    EXPECT_EQ(back.chirp.sample_rate_hz, cfg.sample_rate_hz);
    EXPECT_EQ(back.chirp.samples_per_frame, cfg.samples_per_frame);
    EXPECT_DOUBLE_EQ(back.chirp.symbol_duration_s, 2406 / 140e6);
    EXPECT_EQ(back.node, Node::bob);
    EXPECT_EQ(back.frames, frames);
}

TEST(FrameStore, PayloadSizeIsEightBytesPerSample) {
    TempDir dir("frames");
    const ChirpConfig cfg;
    write_frames(dir.file("a.iqf"), random_frames(2, 2406, Node::alice, 2), cfg);
    EXPECT_EQ(std::filesystem::file_size(dir.file("a.iqf")), iqf_header_size + 2 * 2406 * 8);
}

TEST(FrameStore, EmptyStore) {
    TempDir dir("frames");
    write_frames(dir.file("e.iqf"), std::vector<IQFrame>{}, ChirpConfig{}, Node::eve);
    const auto back = read_frames(dir.file("e.iqf"));
    EXPECT_TRUE(back.frames.empty());
    EXPECT_EQ(back.node, Node::eve);
}

TEST(FrameStore, RandomAccessReader) {
    TempDir dir("frames");
    const auto cfg = ChirpConfig::make(1e6, 1e-4, 2e6);
    const auto frames = random_frames(5, cfg.samples_per_frame, Node::eve, 3);
    write_frames(dir.file("e.iqf"), frames, cfg);
    FrameReader r(dir.file("e.iqf"));
    EXPECT_EQ(r.size(), 5u);
    EXPECT_EQ(r.read(3), frames[3]);
    EXPECT_EQ(r.read(0), frames[0]);
    EXPECT_THROW(r.read(5), DataIoError);
}

TEST(FrameStore, WriterRejectsBadInput) {
    TempDir dir("frames");
    const ChirpConfig cfg;
    auto frames = random_frames(2, 2406, Node::alice, 4);
    frames[1].samples.pop_back();
    EXPECT_EQ(kind_of([&] { write_frames(dir.file("x.iqf"), frames, cfg); }), DataIoErrorKind::format);
    frames = random_frames(2, 2406, Node::alice, 4);
    frames[1].node = Node::bob;
    EXPECT_EQ(kind_of([&] { write_frames(dir.file("x.iqf"), frames, cfg); }), DataIoErrorKind::format);
    frames = random_frames(2, 2406, Node::alice, 4);
    frames[1].frame_index = 7;
    EXPECT_EQ(kind_of([&] { write_frames(dir.file("x.iqf"), frames, cfg); }), DataIoErrorKind::format);
    FrameWriter w(dir.file("y.iqf"), cfg, Node::alice, 2);
    w.append(random_frames(1, 2406, Node::alice, 5)[0]);
    EXPECT_EQ(kind_of([&] { w.close(); }), DataIoErrorKind::format);
    EXPECT_EQ(kind_of([&] { write_frames((dir.path() / "no" / "such.iqf").string(), frames, cfg); }),
              DataIoErrorKind::io);
}

TEST(FrameStore, DistinctErrorVariants) {
    TempDir dir("frames");
    const ChirpConfig cfg;
    const auto path = dir.file("a.iqf");
    auto fresh = [&] { write_frames(path, random_frames(2, 2406, Node::alice, 6), cfg); };

    fresh();
    truncate_by(path, 5);
    EXPECT_EQ(kind_of([&] { read_frames(path); }), DataIoErrorKind::truncated);

    fresh();
    patch_byte(path, 0, 'X');
    EXPECT_EQ(kind_of([&] { read_frames(path); }), DataIoErrorKind::bad_magic);

    fresh();
    patch_byte(path, 8, 9);
    EXPECT_EQ(kind_of([&] { read_frames(path); }), DataIoErrorKind::version_mismatch);

    fresh();
    patch_byte(path, 10, 7);  // node id
    EXPECT_EQ(kind_of([&] { read_frames(path); }), DataIoErrorKind::corrupt_header);

    fresh();
    std::filesystem::resize_file(path, 12);
    EXPECT_EQ(kind_of([&] { read_frames(path); }), DataIoErrorKind::corrupt_header);

    fresh();
    {
        std::ofstream extra(path, std::ios::app | std::ios::binary);
        extra << "junk";
    }
    EXPECT_EQ(kind_of([&] { read_frames(path); }), DataIoErrorKind::format);

    EXPECT_EQ(kind_of([&] { read_frames(dir.file("missing.iqf")); }), DataIoErrorKind::io);
}

TEST(BitStore, RoundTripWithPadding) {
    TempDir dir("bits");
    std::mt19937_64 rng(7);
    std::vector<BitBlock> blocks;
    for (std::size_t i = 0; i < 10; ++i) blocks.push_back({skg::test::random_bits(rng, 45), i, Node::bob});
    write_bit_blocks(dir.file("b.bits"), blocks);
    EXPECT_EQ(std::filesystem::file_size(dir.file("b.bits")), 16u + 10 * 6);
    EXPECT_EQ(read_bit_blocks(dir.file("b.bits"), Node::bob), blocks);
}

TEST(BitStore, RejectsMixedLengthsAndWrongMagic) {
    TempDir dir("bits");
    std::vector<BitBlock> blocks{{Bits(8, 1), 0, Node::alice}, {Bits(9, 0), 1, Node::alice}};
    EXPECT_EQ(kind_of([&] { write_bit_blocks(dir.file("x.bits"), blocks); }), DataIoErrorKind::format);
    std::vector<Syndrome> synd{{Bits(5, 1), 0}};
    write_syndromes(dir.file("s.synd"), synd);
    EXPECT_EQ(read_syndromes(dir.file("s.synd")), synd);
    EXPECT_EQ(kind_of([&] { read_bit_blocks(dir.file("s.synd")); }), DataIoErrorKind::bad_magic);
    truncate_by(dir.file("s.synd"), 1);
    EXPECT_EQ(kind_of([&] { read_syndromes(dir.file("s.synd")); }), DataIoErrorKind::truncated);
}

TEST(PowerCsv, RoundTripsExactly) {
    TempDir dir("csv");
    std::vector<PowerVector> rows;
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(1e-9, 1e3);
    for (std::size_t i = 0; i < 20; ++i) {
        PowerVector p{Node::eve, i, {}};
        for (int k = 0; k < 16; ++k) p.powers.push_back(u(rng));
        rows.push_back(p);
    }
    write_power_csv(dir.file("p.csv"), rows);
    const auto back = read_power_csv(dir.file("p.csv"), Node::eve);
    ASSERT_EQ(back.size(), rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        EXPECT_EQ(back[i].frame_index, rows[i].frame_index);
        EXPECT_EQ(back[i].powers, rows[i].powers);
    }
}

TEST(PowerCsv, RejectsMalformedRows) {
    TempDir dir("csv");
    {
        std::ofstream out(dir.file("bad.csv"));
        out << "frame_index,p1,p2\n0,1.0\n";
    }
    EXPECT_EQ(kind_of([&] { read_power_csv(dir.file("bad.csv")); }), DataIoErrorKind::format);
    {
        std::ofstream out(dir.file("nohdr.csv"));
        out << "0,1.0,2.0\n";
    }
    EXPECT_EQ(kind_of([&] { read_power_csv(dir.file("nohdr.csv")); }), DataIoErrorKind::corrupt_header);
}

TEST(DecodeReport, RoundTrip) {
    TempDir dir("report");
    const std::vector<DecodeRecord> rows{{0, true, 0}, {1, false, 3}, {2, true, 0}};
    write_decode_report(dir.file("r.csv"), rows);
    EXPECT_EQ(read_decode_report(dir.file("r.csv")), rows);
}
