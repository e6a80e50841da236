#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "skg/amplify.hpp"
#include "skg/common.hpp"
#include "skg/entropy.hpp"
#include "skg/filterbank.hpp"
#include "skg/parallel.hpp"
#include "skg/quantize.hpp"
#include "skg/reconcile.hpp"
#include "skg/waveform.hpp"

namespace skg {

/// Subband powers of every frame at the three nodes.
struct NodePowers {
    std::vector<PowerVector> alice;
    std::vector<PowerVector> bob;
    std::vector<PowerVector> eve;
};

/// Simulates `frames` frames and runs them through the filterbank.
inline NodePowers simulate_powers(const ChannelSimulator& sim, const Filterbank& bank, std::size_t frames) {
    NodePowers p;
    p.alice.resize(frames);
    p.bob.resize(frames);
    p.eve.resize(frames);
    parallel_for(frames, [&](std::size_t i) {
        const auto f = sim.frame(i);
        p.alice[i] = bank.extract_power(f[0]);
        p.bob[i] = bank.extract_power(f[1]);
        p.eve[i] = bank.extract_power(f[2]);
    });
    return p;
}

inline std::vector<BitBlock> quantize_all(std::span<const PowerVector> powers, const QuantConfig& cfg) {
    std::vector<BitBlock> out(powers.size());
    parallel_for(powers.size(), [&](std::size_t i) { out[i] = quantize_frame(powers[i], cfg); });
    return out;
}

inline std::vector<Syndrome> syndromes_for(std::span<const BitBlock> blocks, const PolarSWCode& code) {
    std::vector<Syndrome> out(blocks.size());
    parallel_for(blocks.size(), [&](std::size_t i) { out[i] = make_syndrome(blocks[i], code); });
    return out;
}

inline std::vector<BitBlock> decode_all(std::span<const BitBlock> observed, std::span<const Syndrome> synd,
                                        const PolarSWCode& code, double crossover) {
    if (observed.size() != synd.size()) throw InputError("decode_all: block and syndrome counts differ");
    std::vector<BitBlock> out(observed.size());
    parallel_for(observed.size(), [&](std::size_t i) { out[i] = sw_decode(observed[i], synd[i], code, crossover).decoded; });
    return out;
}

inline constexpr double min_crossover = 1e-3;
inline constexpr double max_crossover = 0.45;

/// Virtual BSC crossover for decoding, from the mismatch on the first
/// `fraction` of frames (the calibration split), clamped to a usable range.
inline double estimate_crossover(std::span<const BitBlock> a, std::span<const BitBlock> b, double fraction) {
    if (a.size() != b.size() || a.empty()) throw InputError("estimate_crossover: need paired, nonempty blocks");
    if (!(fraction > 0 && fraction <= 1)) throw ConfigError("calibration fraction must be in (0,1]");
    const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(a.size()))));
    const double p = mismatch_probability(a.first(n), b.first(n));
    return std::clamp(p, min_crossover, max_crossover);
}

struct CellResult {
    std::string scenario;
    std::size_t levels = 0;
    double rate = 0;
    std::size_t block_length = 0;
    std::size_t syndrome_length = 0;
    double crossover = 0;
    double ab_mismatch = 0;
    double ae_mismatch = 0;
    double ab_fer = 1;
    double ae_fer = 1;
    EntropyEstimate entropy;
    double cme_effective = 0;
    double key_rate = 0;
    bool ok = false;
    std::string status;
};

struct NamedScenario {
    std::string name;
    ChannelScenario scenario;
};

struct ExperimentGrid {
    ChirpConfig chirp;
    FilterbankConfig filterbank;
    std::vector<NamedScenario> scenarios;
    std::vector<std::size_t> levels{4, 16};
    std::vector<double> rates{0.1, 0.3, 0.5, 0.7, 0.9};
    std::size_t frames = 1000;
    std::uint64_t seed = 1;
    QuantDomain domain = QuantDomain::decibel;
    double design_param = 0.1;
    double calibration_fraction = 0.1;
    bool estimate_entropy = true;
    EntropySettings entropy;

    void validate() const {
        chirp.validate();
        filterbank.validate();
        if (frames < 100) throw ConfigError("grid: at least 100 frames per cell");
        if (scenarios.empty() || levels.empty() || rates.empty()) throw ConfigError("grid: empty axis");
        if (filterbank.bandwidth_hz != chirp.bandwidth_hz || filterbank.sample_rate_hz != chirp.sample_rate_hz)
            throw ConfigError("grid: filterbank and chirp must share bandwidth and sample rate");
    }
};

/// Evaluates one (Q, r) cell over already-extracted powers.
inline CellResult run_cell(const NodePowers& powers, std::size_t num_filters, std::size_t levels, double rate,
                           const ExperimentGrid& grid, const std::string& scenario_name) {
    CellResult cell;
    cell.scenario = scenario_name;
    cell.levels = levels;
    cell.rate = rate;
    try {
        const QuantConfig quant{levels, grid.domain};
        quant.validate();
        const auto alice = quantize_all(powers.alice, quant);
        const auto bob = quantize_all(powers.bob, quant);
        const auto eve = quantize_all(powers.eve, quant);
        cell.block_length = num_filters * quant.bits_per_measurement();
        const auto code = construct_code(cell.block_length, rate, grid.design_param);
        cell.syndrome_length = code.syndrome_length;
        cell.ab_mismatch = mismatch_probability(alice, bob);
        cell.ae_mismatch = mismatch_probability(alice, eve);
        cell.crossover = estimate_crossover(alice, bob, grid.calibration_fraction);

        const auto synd = syndromes_for(alice, code);
        cell.ab_fer = frame_error_rate(alice, decode_all(bob, synd, code, cell.crossover));
        cell.ae_fer = frame_error_rate(alice, decode_all(eve, synd, code, cell.crossover));

        if (grid.estimate_entropy) {
            std::vector<SecretObservationPair> pairs(alice.size());
            for (std::size_t i = 0; i < alice.size(); ++i)
                pairs[i] = {alice[i].bits, eve_observation(powers.eve[i], synd[i], quant)};
            cell.entropy = conditional_min_entropy(pairs, alice, grid.entropy);
            cell.cme_effective = apply_safety_margin(cell.entropy);
            cell.key_rate = key_rate(num_filters, levels, cell.ab_fer, cell.cme_effective);
        }
        cell.ok = true;
        cell.status = "ok";
    } catch (const std::exception& ex) {
        cell.ok = false;
        cell.status = ex.what();
    }
    return cell;
}

/// Runs every (scenario, Q, r) cell. Each scenario is simulated once with a
/// seed derived from the master seed; a failing cell is recorded, not fatal.
inline std::vector<CellResult> run_grid(const ExperimentGrid& grid) {
    grid.validate();
    const Filterbank bank(grid.filterbank);
    std::vector<CellResult> results;
    for (std::size_t s = 0; s < grid.scenarios.size(); ++s) {
        auto scn = grid.scenarios[s].scenario;
        scn.rng_seed = mix_seed(grid.seed, s);
        NodePowers powers;
        std::string failure;
        try {
            powers = simulate_powers(ChannelSimulator(grid.chirp, scn), bank, grid.frames);
        } catch (const std::exception& ex) {
            failure = ex.what();
        }
        for (auto q : grid.levels) {
            for (auto r : grid.rates) {
                if (!failure.empty()) {
                    CellResult c;
                    c.scenario = grid.scenarios[s].name;
                    c.levels = q;
                    c.rate = r;
                    c.status = failure;
                    results.push_back(c);
                    continue;
                }
                results.push_back(run_cell(powers, grid.filterbank.num_filters, q, r, grid, grid.scenarios[s].name));
            }
        }
    }
    return results;
}

namespace detail {
inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c == '\n' ? ' ' : c;
    }
    return out + "\"";
}
} // namespace detail

inline void write_grid_csv(std::ostream& out, std::span<const CellResult> cells) {
    out << "scenario,levels,rate,block_length,syndrome_length,crossover,ab_mismatch,ae_mismatch,ab_fer,ae_fer,"
           "min_entropy_bits,leakage_bits,cme_bits,cme_per_bit,cme_effective,key_rate,converged,status\n";
    const auto old = out.precision(8);
    for (const auto& c : cells) {
        out << detail::csv_escape(c.scenario) << ',' << c.levels << ',' << c.rate << ',' << c.block_length << ','
            << c.syndrome_length << ',' << c.crossover << ',' << c.ab_mismatch << ',' << c.ae_mismatch << ','
            << c.ab_fer << ',' << c.ae_fer << ',' << c.entropy.min_entropy_bits_per_block << ','
            << c.entropy.leakage_bits << ',' << c.entropy.cme_bits_per_block << ',' << c.entropy.cme_per_bit << ','
            << c.cme_effective << ',' << c.key_rate << ',' << (c.entropy.converged ? 1 : 0) << ','
            << detail::csv_escape(c.status) << '\n';
    }
    out.precision(old);
}

struct EntropyReportRow {
    std::string scenario;
    int position = 0;
    double rate = 0;
    EntropyEstimate estimate;
};

/// Entropy report: scenario, position, rate, estimator, H, leakage, CME, converged.
inline void write_entropy_csv(std::ostream& out, std::span<const EntropyReportRow> rows) {
    out << "scenario,position,rate,estimator,min_entropy_bits,leakage_bits,cme_bits,cme_per_bit,converged\n";
    const auto old = out.precision(17);
    for (const auto& r : rows) {
        out << detail::csv_escape(r.scenario) << ',' << r.position << ',' << r.rate << ','
            << to_string(r.estimate.estimator) << ',' << r.estimate.min_entropy_bits_per_block << ','
            << r.estimate.leakage_bits << ',' << r.estimate.cme_bits_per_block << ',' << r.estimate.cme_per_bit << ','
            << (r.estimate.converged ? 1 : 0) << '\n';
    }
    out.precision(old);
}

} // namespace skg
