#pragma once

// Binary stores shared by every pipeline stage. All integers and floats are
// little-endian regardless of host.
//
//   .iqf   "SKGIQF01" u16 version, u8 node, u32 frame_count, u32 samples_per_frame,
//          f64 bandwidth_hz, f64 sample_rate_hz, then interleaved f32 re/im samples
//   .bits  "SKGBITS1" u32 block_count, u32 bits_per_block, then each block packed
//          MSB first and zero padded to a byte boundary
//   .synd  same layout as .bits with magic "SKGSYN01"
//
// Frame indices are positional: record i holds frame i.

#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "skg/common.hpp"
#include "skg/filterbank.hpp"
#include "skg/reconcile.hpp"
#include "skg/waveform.hpp"

namespace skg {

enum class DataIoErrorKind { io, bad_magic, version_mismatch, corrupt_header, truncated, format };

struct DataIoError : std::runtime_error {
    DataIoError(DataIoErrorKind k, const std::string& what) : std::runtime_error(what), kind(k) {}
    DataIoErrorKind kind;
};

inline constexpr std::string_view iqf_magic = "SKGIQF01";
inline constexpr std::string_view bits_magic = "SKGBITS1";
inline constexpr std::string_view synd_magic = "SKGSYN01";
inline constexpr std::uint16_t iqf_version = 1;
inline constexpr std::size_t iqf_header_size = 8 + 2 + 1 + 4 + 4 + 8 + 8;

namespace detail {

class ByteWriter {
public:
    void raw(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
    void bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
    template <typename T>
    void le(T value) {
        using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                     std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                        std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>>;
        const U u = std::bit_cast<U>(value);
        for (std::size_t i = 0; i < sizeof(U); ++i) buf_.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
    }
    const std::vector<char>& data() const { return buf_; }

private:
    std::vector<char> buf_;
};

class ByteReader {
public:
    explicit ByteReader(std::vector<char> data) : data_(std::move(data)) {}
    std::size_t remaining() const { return data_.size() - pos_; }
    bool has(std::size_t n) const { return remaining() >= n; }
    std::string_view raw(std::size_t n) {
        std::string_view v(data_.data() + pos_, n);
        pos_ += n;
        return v;
    }
    template <typename T>
    T le() {
        using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                     std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                        std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>>;
        U u = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i)
            u |= static_cast<U>(static_cast<U>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i));
        pos_ += sizeof(U);
        return std::bit_cast<T>(u);
    }

private:
    std::vector<char> data_;
    std::size_t pos_ = 0;
};

inline void write_file(const std::string& path, const std::vector<char>& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataIoError(DataIoErrorKind::io, "cannot open " + path + " for writing");
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw DataIoError(DataIoErrorKind::io, "write failed: " + path);
}

inline std::vector<char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataIoError(DataIoErrorKind::io, "cannot open " + path);
    return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_packed_blocks(const std::string& path, std::string_view magic, std::span<const Bits> blocks,
                                std::size_t bits_per_block) {
    for (const auto& b : blocks)
        if (b.size() != bits_per_block) throw DataIoError(DataIoErrorKind::format, path + ": blocks differ in length");
    if (blocks.size() > std::numeric_limits<std::uint32_t>::max() || bits_per_block > std::numeric_limits<std::uint32_t>::max())
        throw DataIoError(DataIoErrorKind::format, path + ": too many blocks or bits");
    ByteWriter w;
    w.raw(magic);
    w.le(static_cast<std::uint32_t>(blocks.size()));
    w.le(static_cast<std::uint32_t>(bits_per_block));
    for (const auto& b : blocks) w.bytes(pack_bits(b));
    write_file(path, w.data());
}

inline std::vector<Bits> read_packed_blocks(const std::string& path, std::string_view magic,
                                            std::size_t* bits_per_block_out) {
    ByteReader r(read_file(path));
    if (!r.has(magic.size() + 8)) throw DataIoError(DataIoErrorKind::corrupt_header, path + ": header too short");
    if (r.raw(magic.size()) != magic) throw DataIoError(DataIoErrorKind::bad_magic, path + ": bad magic");
    const auto count = r.le<std::uint32_t>();
    const auto bits_per_block = r.le<std::uint32_t>();
    const std::size_t bytes_per_block = (bits_per_block + 7) / 8;
    const auto need = static_cast<std::uint64_t>(count) * bytes_per_block;
    if (r.remaining() < need) throw DataIoError(DataIoErrorKind::truncated, path + ": payload truncated");
    if (r.remaining() > need) throw DataIoError(DataIoErrorKind::format, path + ": trailing bytes after payload");
    std::vector<Bits> blocks(count);
    for (auto& b : blocks) {
        auto raw = r.raw(bytes_per_block);
        b = unpack_bits(std::span(reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size()), bits_per_block);
    }
    if (bits_per_block_out) *bits_per_block_out = bits_per_block;
    return blocks;
}

} // namespace detail

struct FrameFile {
    ChirpConfig chirp;
    Node node = Node::alice;
    std::vector<IQFrame> frames;
};

namespace detail {

inline void encode_iqf_header(ByteWriter& w, const ChirpConfig& cfg, Node node, std::size_t count) {
    w.raw(iqf_magic);
    w.le(iqf_version);
    w.le(static_cast<std::uint8_t>(node));
    w.le(static_cast<std::uint32_t>(count));
    w.le(static_cast<std::uint32_t>(cfg.samples_per_frame));
    w.le(cfg.bandwidth_hz);
    w.le(cfg.sample_rate_hz);
}

} // namespace detail

/// Streams frames of one node into an .iqf store whose frame count is fixed
/// up front. Frame i must carry frame_index i and cfg.samples_per_frame samples.
class FrameWriter {
public:
    FrameWriter(const std::string& path, const ChirpConfig& cfg, Node node, std::size_t frame_count)
        : path_(path), cfg_(cfg), node_(node), expected_(frame_count) {
        if (frame_count > std::numeric_limits<std::uint32_t>::max() ||
            cfg.samples_per_frame > std::numeric_limits<std::uint32_t>::max())
            throw DataIoError(DataIoErrorKind::format, path + ": store too large");
        out_.open(path, std::ios::binary | std::ios::trunc);
        if (!out_) throw DataIoError(DataIoErrorKind::io, "cannot open " + path + " for writing");
        detail::ByteWriter w;
        detail::encode_iqf_header(w, cfg, node, frame_count);
        put(w);
    }

    void append(const IQFrame& f) {
        if (f.node != node_) throw DataIoError(DataIoErrorKind::format, path_ + ": frames from mixed nodes");
        if (f.samples.size() != cfg_.samples_per_frame)
            throw DataIoError(DataIoErrorKind::format, path_ + ": frame length differs from samples_per_frame");
        if (f.frame_index != written_)
            throw DataIoError(DataIoErrorKind::format, path_ + ": frame indices must be 0..count-1 in order");
        if (written_ == expected_) throw DataIoError(DataIoErrorKind::format, path_ + ": more frames than declared");
        detail::ByteWriter w;
        for (const auto& s : f.samples) {
            w.le(s.real());
            w.le(s.imag());
        }
        put(w);
        ++written_;
    }

    /// Verifies the declared count was reached and flushes.
    void close() {
        if (written_ != expected_)
            throw DataIoError(DataIoErrorKind::format, path_ + ": fewer frames written than declared");
        out_.flush();
        if (!out_) throw DataIoError(DataIoErrorKind::io, "write failed: " + path_);
        out_.close();
    }

private:
    void put(const detail::ByteWriter& w) {
        out_.write(w.data().data(), static_cast<std::streamsize>(w.data().size()));
        if (!out_) throw DataIoError(DataIoErrorKind::io, "write failed: " + path_);
    }

    std::string path_;
    ChirpConfig cfg_;
    Node node_;
    std::size_t expected_;
    std::size_t written_ = 0;
    std::ofstream out_;
};

inline void write_frames(const std::string& path, std::span<const IQFrame> frames, const ChirpConfig& cfg,
                         Node node = Node::alice) {
    if (!frames.empty()) node = frames.front().node;
    FrameWriter w(path, cfg, node, frames.size());
    for (const auto& f : frames) w.append(f);
    w.close();
}

/// Random access to the frames of an .iqf store; the header is validated on open.
class FrameReader {
public:
    explicit FrameReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw DataIoError(DataIoErrorKind::io, "cannot open " + path);
        std::vector<char> head(iqf_header_size);
        in_.read(head.data(), static_cast<std::streamsize>(head.size()));
        if (static_cast<std::size_t>(in_.gcount()) != iqf_header_size)
            throw DataIoError(DataIoErrorKind::corrupt_header, path + ": header too short");
        detail::ByteReader r(std::move(head));
        if (r.raw(iqf_magic.size()) != iqf_magic) throw DataIoError(DataIoErrorKind::bad_magic, path + ": bad magic");
        const auto version = r.le<std::uint16_t>();
        if (version != iqf_version)
            throw DataIoError(DataIoErrorKind::version_mismatch, path + ": unsupported version " + std::to_string(version));
        const auto node = r.le<std::uint8_t>();
        count_ = r.le<std::uint32_t>();
        const auto spf = r.le<std::uint32_t>();
        const auto bw = r.le<double>();
        const auto fs = r.le<double>();
        if (node > 2) throw DataIoError(DataIoErrorKind::corrupt_header, path + ": invalid node id");
        if (spf == 0 || !(bw > 0) || !(fs >= bw) || !std::isfinite(fs))
            throw DataIoError(DataIoErrorKind::corrupt_header, path + ": invalid chirp parameters");
        node_ = static_cast<Node>(node);
        chirp_ = ChirpConfig{bw, static_cast<double>(spf) / fs, fs, spf};

        in_.seekg(0, std::ios::end);
        const auto size = static_cast<std::uint64_t>(in_.tellg());
        const auto need = static_cast<std::uint64_t>(count_) * spf * 8 + iqf_header_size;
        if (size < need) throw DataIoError(DataIoErrorKind::truncated, path + ": payload truncated");
        if (size > need) throw DataIoError(DataIoErrorKind::format, path + ": trailing bytes after payload");
    }

    const ChirpConfig& chirp() const { return chirp_; }
    Node node() const { return node_; }
    std::size_t size() const { return count_; }

    IQFrame read(std::size_t index) {
        if (index >= count_) throw DataIoError(DataIoErrorKind::format, path_ + ": frame index out of range");
        const std::size_t bytes = chirp_.samples_per_frame * 8;
        in_.clear();
        in_.seekg(static_cast<std::streamoff>(iqf_header_size + index * bytes));
        std::vector<char> raw(bytes);
        in_.read(raw.data(), static_cast<std::streamsize>(bytes));
        if (static_cast<std::size_t>(in_.gcount()) != bytes)
            throw DataIoError(DataIoErrorKind::truncated, path_ + ": payload truncated");
        detail::ByteReader r(std::move(raw));
        IQFrame f{node_, index, std::vector<std::complex<float>>(chirp_.samples_per_frame)};
        for (auto& s : f.samples) {
            const float re = r.le<float>();
            const float im = r.le<float>();
            s = {re, im};
        }
        return f;
    }

private:
    std::string path_;
    std::ifstream in_;
    ChirpConfig chirp_;
    Node node_ = Node::alice;
    std::size_t count_ = 0;
};

inline FrameFile read_frames(const std::string& path) {
    FrameReader reader(path);
    FrameFile file{reader.chirp(), reader.node(), {}};
    file.frames.reserve(reader.size());
    for (std::size_t i = 0; i < reader.size(); ++i) file.frames.push_back(reader.read(i));
    return file;
}

inline void write_bit_blocks(const std::string& path, std::span<const BitBlock> blocks) {
    std::vector<Bits> raw;
    raw.reserve(blocks.size());
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        if (blocks[i].frame_index != i)
            throw DataIoError(DataIoErrorKind::format, path + ": block indices must be 0..count-1 in order");
        raw.push_back(blocks[i].bits);
    }
    detail::write_packed_blocks(path, bits_magic, raw, raw.empty() ? 0 : raw.front().size());
}

inline std::vector<BitBlock> read_bit_blocks(const std::string& path, Node node = Node::alice) {
    auto raw = detail::read_packed_blocks(path, bits_magic, nullptr);
    std::vector<BitBlock> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = BitBlock{std::move(raw[i]), i, node};
    return out;
}

inline void write_syndromes(const std::string& path, std::span<const Syndrome> syndromes) {
    std::vector<Bits> raw;
    raw.reserve(syndromes.size());
    for (std::size_t i = 0; i < syndromes.size(); ++i) {
        if (syndromes[i].frame_index != i)
            throw DataIoError(DataIoErrorKind::format, path + ": syndrome indices must be 0..count-1 in order");
        raw.push_back(syndromes[i].bits);
    }
    detail::write_packed_blocks(path, synd_magic, raw, raw.empty() ? 0 : raw.front().size());
}

inline std::vector<Syndrome> read_syndromes(const std::string& path) {
    auto raw = detail::read_packed_blocks(path, synd_magic, nullptr);
    std::vector<Syndrome> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = Syndrome{std::move(raw[i]), i};
    return out;
}

/// One row per frame: frame_index followed by the K powers (17 significant
/// digits, so values round-trip exactly).
inline void write_power_csv(std::ostream& out, std::span<const PowerVector> rows) {
    const std::size_t K = rows.empty() ? 0 : rows.front().powers.size();
    out << "frame_index";
    for (std::size_t k = 1; k <= K; ++k) out << ",p" << k;
    out << '\n';
    out << std::setprecision(17);
    for (const auto& row : rows) {
        if (row.powers.size() != K) throw DataIoError(DataIoErrorKind::format, "power rows differ in length");
        out << row.frame_index;
        for (double p : row.powers) out << ',' << p;
        out << '\n';
    }
}

inline void write_power_csv(const std::string& path, std::span<const PowerVector> rows) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataIoError(DataIoErrorKind::io, "cannot open " + path + " for writing");
    write_power_csv(out, rows);
}

inline std::vector<PowerVector> read_power_csv(const std::string& path, Node node = Node::alice) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataIoError(DataIoErrorKind::io, "cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("frame_index", 0) != 0)
        throw DataIoError(DataIoErrorKind::corrupt_header, path + ": missing power CSV header");
    std::size_t K = 0;
    for (char c : line) K += c == ',' ? 1 : 0;
    std::vector<PowerVector> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string cell;
        PowerVector pv;
        pv.node = node;
        try {
            std::getline(ss, cell, ',');
            pv.frame_index = std::stoull(cell);
            while (std::getline(ss, cell, ',')) pv.powers.push_back(std::stod(cell));
        } catch (const std::exception&) {
            throw DataIoError(DataIoErrorKind::format, path + ": unparsable row: " + line);
        }
        if (pv.powers.size() != K) throw DataIoError(DataIoErrorKind::format, path + ": wrong column count");
        rows.push_back(std::move(pv));
    }
    return rows;
}

/// Per-frame decode outcome (reconcile report CSV).
struct DecodeRecord {
    std::size_t frame_index = 0;
    bool success = false;
    std::size_t bit_errors = 0;

    friend bool operator==(const DecodeRecord&, const DecodeRecord&) = default;
};

inline void write_decode_report(const std::string& path, std::span<const DecodeRecord> rows) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataIoError(DataIoErrorKind::io, "cannot open " + path + " for writing");
    out << "frame_index,success,bit_errors\n";
    for (const auto& r : rows) out << r.frame_index << ',' << (r.success ? 1 : 0) << ',' << r.bit_errors << '\n';
}

inline std::vector<DecodeRecord> read_decode_report(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataIoError(DataIoErrorKind::io, "cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "frame_index,success,bit_errors")
        throw DataIoError(DataIoErrorKind::corrupt_header, path + ": missing decode report header");
    std::vector<DecodeRecord> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        DecodeRecord r;
        char c1 = 0, c2 = 0;
        int success = 0;
        std::istringstream ss(line);
        if (!(ss >> r.frame_index >> c1 >> success >> c2 >> r.bit_errors) || c1 != ',' || c2 != ',')
            throw DataIoError(DataIoErrorKind::format, path + ": unparsable row: " + line);
        r.success = success != 0;
        rows.push_back(r);
    }
    return rows;
}

} // namespace skg
