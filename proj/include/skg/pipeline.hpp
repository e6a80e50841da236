#pragma once

// End-to-end run: simulate, extract, quantize, reconcile, estimate, distill.
// Every stage leaves its output in the run directory in the dataio formats,
// so any stage can be repeated from disk with the standalone commands.

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "skg/amplify.hpp"
#include "skg/config.hpp"
#include "skg/dataio.hpp"
#include "skg/entropy.hpp"
#include "skg/eval.hpp"
#include "skg/filterbank.hpp"
#include "skg/parallel.hpp"
#include "skg/quantize.hpp"
#include "skg/reconcile.hpp"
#include "skg/waveform.hpp"

namespace skg {

/// A pipeline stage failed; `stage` names it.
struct StageError : std::runtime_error {
    StageError(std::string stage_name, const std::string& what)
        : std::runtime_error(stage_name + ": " + what), stage(std::move(stage_name)) {}
    std::string stage;
};

struct PipelineResult {
    std::vector<std::string> artifacts;  // relative to the output directory
    double crossover = 0;
    double ab_mismatch = 0;
    double ae_mismatch = 0;
    double ab_fer = 0;
    double ae_fer = 0;
    EntropyEstimate entropy;
    KeyManifestEntry alice_key;
    KeyManifestEntry bob_key;
    bool keys_match = false;
};

/// Per-frame decode outcome: success is decided by the public check value.
inline std::vector<DecodeRecord> decode_records(std::span<const BitBlock> reference, std::span<const BitBlock> decoded) {
    if (reference.size() != decoded.size()) throw InputError("decode_records: block counts differ");
    std::vector<DecodeRecord> rows(reference.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        rows[i] = {decoded[i].frame_index, block_check_value(reference[i]) == block_check_value(decoded[i]),
                   hamming_distance(reference[i].bits, decoded[i].bits)};
    return rows;
}

/// Simulates `frames` frames, streams the three .iqf stores to `dir` when
/// given, and returns the subband powers (empty without a filterbank).
inline NodePowers simulate_and_extract(const ChannelSimulator& sim, const Filterbank* bank, std::size_t frames,
                                       const std::filesystem::path& dir = {}) {
    NodePowers p;
    if (bank) {
        p.alice.resize(frames);
        p.bob.resize(frames);
        p.eve.resize(frames);
    }
    std::vector<FrameWriter> writers;
    if (!dir.empty()) {
        writers.emplace_back((dir / "alice.iqf").string(), sim.chirp_config(), Node::alice, frames);
        writers.emplace_back((dir / "bob.iqf").string(), sim.chirp_config(), Node::bob, frames);
        writers.emplace_back((dir / "eve.iqf").string(), sim.chirp_config(), Node::eve, frames);
    }
    constexpr std::size_t chunk = 256;
    std::vector<std::array<IQFrame, 3>> buffer;
    for (std::size_t start = 0; start < frames; start += chunk) {
        const std::size_t count = std::min(chunk, frames - start);
        buffer.assign(count, {});
        parallel_for(count, [&](std::size_t j) {
            const std::size_t i = start + j;
            buffer[j] = sim.frame(i);
            if (!bank) return;
            p.alice[i] = bank->extract_power(buffer[j][0]);
            p.bob[i] = bank->extract_power(buffer[j][1]);
            p.eve[i] = bank->extract_power(buffer[j][2]);
        });
        for (auto& w : buffer)
            for (std::size_t n = 0; n < writers.size(); ++n) writers[n].append(w[n]);
    }
    for (auto& w : writers) w.close();
    return p;
}

inline PipelineResult run_pipeline(const PipelineConfig& cfg) {
    cfg.validate();
    namespace fs = std::filesystem;
    const fs::path dir = cfg.paths.output_dir;
    PipelineResult res;
    auto stage = [](const char* name, auto&& body) {
        try {
            return body();
        } catch (const StageError&) {
            throw;
        } catch (const std::exception& ex) {
            throw StageError(name, ex.what());
        }
    };
    auto path = [&](const char* name) {
        res.artifacts.emplace_back(name);
        return (dir / name).string();
    };

    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw StageError("setup", "cannot create " + dir.string() + ": " + ec.message());

    const auto powers = stage("simulate", [&] {
        const ChannelSimulator sim(cfg.chirp, cfg.scenario);
        const Filterbank bank(cfg.filterbank);
        auto p = simulate_and_extract(sim, &bank, cfg.run.frames, dir);
        res.artifacts.insert(res.artifacts.end(), {"alice.iqf", "bob.iqf", "eve.iqf"});
        write_power_csv(path("alice_power.csv"), p.alice);
        write_power_csv(path("bob_power.csv"), p.bob);
        write_power_csv(path("eve_power.csv"), p.eve);
        return p;
    });

    struct Quantized {
        std::vector<BitBlock> alice, bob, eve;
    };
    const auto q = stage("quantize", [&] {
        Quantized out{quantize_all(powers.alice, cfg.quant), quantize_all(powers.bob, cfg.quant),
                      quantize_all(powers.eve, cfg.quant)};
        write_bit_blocks(path("alice.bits"), out.alice);
        write_bit_blocks(path("bob.bits"), out.bob);
        write_bit_blocks(path("eve.bits"), out.eve);
        return out;
    });
    res.ab_mismatch = mismatch_probability(q.alice, q.bob);
    res.ae_mismatch = mismatch_probability(q.alice, q.eve);

    struct Reconciled {
        std::vector<Syndrome> synd;
        std::vector<BitBlock> bob, eve;
        std::vector<DecodeRecord> bob_report;
    };
    const auto rec = stage("reconcile", [&] {
        const auto code = construct_code(cfg.code.block_length, cfg.code.rate, cfg.code.design_param);
        res.crossover = cfg.code.crossover ? *cfg.code.crossover
                                           : estimate_crossover(q.alice, q.bob, cfg.code.calibration_fraction);
        Reconciled r;
        r.synd = syndromes_for(q.alice, code);
        write_syndromes(path("alice.synd"), r.synd);
        r.bob = decode_all(q.bob, r.synd, code, res.crossover);
        r.eve = decode_all(q.eve, r.synd, code, res.crossover);
        write_bit_blocks(path("bob_decoded.bits"), r.bob);
        write_bit_blocks(path("eve_decoded.bits"), r.eve);
        r.bob_report = decode_records(q.alice, r.bob);
        write_decode_report(path("bob_report.csv"), r.bob_report);
        write_decode_report(path("eve_report.csv"), decode_records(q.alice, r.eve));
        return r;
    });
    res.ab_fer = frame_error_rate(q.alice, rec.bob);
    res.ae_fer = frame_error_rate(q.alice, rec.eve);

    res.entropy = stage("entropy", [&] {
        std::vector<SecretObservationPair> pairs(q.alice.size());
        for (std::size_t i = 0; i < pairs.size(); ++i)
            pairs[i] = {q.alice[i].bits, eve_observation(powers.eve[i], rec.synd[i], cfg.quant, cfg.run.observation)};
        auto est = conditional_min_entropy(pairs, q.alice, cfg.entropy);
        const EntropyReportRow row{cfg.run.label, cfg.run.eve_position, cfg.code.rate, est};
        std::ofstream out(path("entropy.csv"), std::ios::binary);
        if (!out) throw std::runtime_error("cannot write entropy.csv");
        write_entropy_csv(out, std::span(&row, 1));
        return est;
    });

    stage("distill", [&] {
        const double cme_eff = apply_safety_margin(res.entropy);
        std::vector<std::uint8_t> ok(rec.bob_report.size());
        for (std::size_t i = 0; i < ok.size(); ++i) ok[i] = rec.bob_report[i].success ? 1 : 0;
        auto alice = distill_key(q.alice, ok, cfg.key_start_index(), cme_eff);
        auto bob = distill_key(rec.bob, ok, cfg.key_start_index(), cme_eff);
        const FileRef eve_ref{"eve.iqf", file_sha256((dir / "eve.iqf").string())};
        const FileRef synd_ref{"alice.synd", file_sha256((dir / "alice.synd").string())};
        for (auto* km : {&alice, &bob}) {
            km->scenario = cfg.run.label;
            km->eve_position = cfg.run.eve_position;
        }
        res.alice_key = make_manifest_entry(alice, res.entropy.cme_per_bit, cfg.run.reveal);
        res.bob_key = make_manifest_entry(bob, res.entropy.cme_per_bit, cfg.run.reveal);
        for (auto* e : {&res.alice_key, &res.bob_key}) {
            e->eve_frames = eve_ref;
            e->syndromes = synd_ref;
        }
        res.keys_match = alice.key == bob.key;
        write_key_manifest(path("keys_alice.json"), std::span(&res.alice_key, 1));
        write_key_manifest(path("keys_bob.json"), std::span(&res.bob_key, 1));
        return 0;
    });
    return res;
}

} // namespace skg
