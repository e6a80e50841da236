#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "skg/common.hpp"

namespace skg {

/// Baseband linear chirp parameters. Defaults are the 70 MHz / 140 MS/s sounding setup.
struct ChirpConfig {
    double bandwidth_hz = 70e6;
    double symbol_duration_s = 17.1875e-6;
    double sample_rate_hz = 140e6;
    std::size_t samples_per_frame = 2406;

    /// Builds a config whose frame length is derived from duration and rate.
    static ChirpConfig make(double bandwidth_hz, double symbol_duration_s, double sample_rate_hz) {
        ChirpConfig cfg{bandwidth_hz, symbol_duration_s, sample_rate_hz, 0};
        const double n = std::round(symbol_duration_s * sample_rate_hz);
        cfg.samples_per_frame = (std::isfinite(n) && n > 0) ? static_cast<std::size_t>(n) : 0;
        cfg.validate();
        return cfg;
    }

    double chirp_rate() const { return bandwidth_hz / symbol_duration_s; }

    void validate() const {
        if (!(bandwidth_hz > 0) || !std::isfinite(bandwidth_hz)) throw ConfigError("chirp: bandwidth_hz must be positive");
        if (!(symbol_duration_s > 0) || !std::isfinite(symbol_duration_s))
            throw ConfigError("chirp: symbol_duration_s must be positive");
        if (!(sample_rate_hz >= bandwidth_hz) || !std::isfinite(sample_rate_hz))
            throw ConfigError("chirp: sample_rate_hz must be >= bandwidth_hz (complex baseband)");
        if (samples_per_frame == 0) throw ConfigError("chirp: samples_per_frame must be positive");
        if (static_cast<double>(samples_per_frame) != std::round(symbol_duration_s * sample_rate_hz))
            throw ConfigError("chirp: samples_per_frame must equal round(symbol_duration_s * sample_rate_hz)");
        const double c = chirp_rate();
        if (!std::isfinite(c) || !(c > 0)) throw ConfigError("chirp: chirp rate must be finite and positive");
    }

    friend bool operator==(const ChirpConfig&, const ChirpConfig&) = default;
};

/// Multipath channel shared by the three nodes.
struct ChannelScenario {
    std::size_t num_taps = 16;
    std::vector<double> tap_power_profile;  // linear, sums to 1
    double reciprocity_coeff = 0.9995;      // Alice/Bob tap correlation
    double eve_correlation = 0.3;           // Bob/Eve tap correlation
    double snr_db = 30.0;                   // +inf disables noise
    bool dynamic = true;
    std::uint64_t rng_seed = 1;

    void validate() const {
        if (num_taps == 0) throw ConfigError("scenario: num_taps must be positive");
        if (tap_power_profile.size() != num_taps)
            throw ConfigError("scenario: tap_power_profile must have num_taps entries");
        double sum = 0;
        for (double p : tap_power_profile) {
            if (!(p >= 0) || !std::isfinite(p)) throw ConfigError("scenario: tap powers must be finite and nonnegative");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("scenario: tap_power_profile must sum to 1");
        if (!(reciprocity_coeff >= 0 && reciprocity_coeff <= 1))
            throw ConfigError("scenario: reciprocity_coeff must be in [0,1]");
        if (!(eve_correlation >= 0 && eve_correlation <= 1))
            throw ConfigError("scenario: eve_correlation must be in [0,1]");
        if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity())
            throw ConfigError("scenario: snr_db must be a number or +inf");
    }
};

/// Exponentially decaying power-delay profile, normalized to unit total power.
inline std::vector<double> exponential_profile(std::size_t num_taps, double decay_taps) {
    if (num_taps == 0) throw ConfigError("exponential_profile: num_taps must be positive");
    if (!(decay_taps > 0)) throw ConfigError("exponential_profile: decay must be positive");
    std::vector<double> p(num_taps);
    for (std::size_t i = 0; i < num_taps; ++i) p[i] = std::exp(-static_cast<double>(i) / decay_taps);
    const double total = std::accumulate(p.begin(), p.end(), 0.0);
    for (auto& v : p) v /= total;
    return p;
}

inline ChannelScenario default_scenario() {
    ChannelScenario scn;
    scn.tap_power_profile = exponential_profile(scn.num_taps, 8.0);
    return scn;
}

struct IQFrame {
    Node node = Node::alice;
    std::size_t frame_index = 0;
    std::vector<std::complex<float>> samples;

    friend bool operator==(const IQFrame&, const IQFrame&) = default;
};

using Taps = std::vector<std::complex<double>>;

struct ChannelDraw {
    Taps alice;
    Taps bob;
    Taps eve;
};

/// x[n] = (1/T) exp(j*pi*c*t_n^2), t_n = n/fs - T/2, sweeping -B/2 .. +B/2.
inline std::vector<std::complex<double>> generate_chirp(const ChirpConfig& cfg) {
    cfg.validate();
    const double T = cfg.symbol_duration_s;
    const double c = cfg.chirp_rate();
    std::vector<std::complex<double>> x(cfg.samples_per_frame);
    for (std::size_t n = 0; n < x.size(); ++n) {
        const double t = static_cast<double>(n) / cfg.sample_rate_hz - T / 2;
        x[n] = std::polar(1.0 / T, std::numbers::pi * c * t * t);
    }
    return x;
}

namespace detail {

enum class RngStream : std::uint64_t { channel = 0, noise_alice = 1, noise_bob = 2, noise_eve = 3 };

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t frame, RngStream stream) {
    return std::mt19937_64(mix_seed(seed, frame, static_cast<std::uint64_t>(stream)));
}

inline Taps draw_taps(std::mt19937_64& rng, const std::vector<double>& profile) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Taps h(profile.size());
    for (std::size_t i = 0; i < h.size(); ++i) {
        const double s = std::sqrt(profile[i] / 2);
        const double re = gauss(rng);
        const double im = gauss(rng);
        h[i] = {s * re, s * im};
    }
    return h;
}

} // namespace detail

/// Correlated complex Gaussian taps for Alice, Bob and Eve. Deterministic in
/// (rng_seed, frame_index); static scenarios reuse the frame-0 draw.
inline ChannelDraw draw_channels(const ChannelScenario& scn, std::size_t frame_index) {
    scn.validate();
    const std::uint64_t key = scn.dynamic ? frame_index : 0;
    auto rng = detail::make_rng(scn.rng_seed, key, detail::RngStream::channel);
    ChannelDraw d;
    d.alice = detail::draw_taps(rng, scn.tap_power_profile);
    const Taps g_bob = detail::draw_taps(rng, scn.tap_power_profile);
    const Taps g_eve = detail::draw_taps(rng, scn.tap_power_profile);

    const double rho = scn.reciprocity_coeff;
    const double rho_e = scn.eve_correlation;
    d.bob.resize(scn.num_taps);
    d.eve.resize(scn.num_taps);
    for (std::size_t i = 0; i < scn.num_taps; ++i) {
        d.bob[i] = rho == 1.0 ? d.alice[i] : rho * d.alice[i] + std::sqrt(1 - rho * rho) * g_bob[i];
        d.eve[i] = rho_e == 1.0 ? d.bob[i] : rho_e * d.bob[i] + std::sqrt(1 - rho_e * rho_e) * g_eve[i];
    }
    return d;
}

/// Synthesizes received frames y = x * h + w for all three nodes. The chirp is
/// computed once; frames are pure functions of the frame index.
class ChannelSimulator {
public:
    ChannelSimulator(ChirpConfig chirp, ChannelScenario scenario)
        : chirp_cfg_(chirp), scenario_(std::move(scenario)), chirp_(generate_chirp(chirp_cfg_)) {
        scenario_.validate();
        const double signal_power = 1.0 / (chirp_cfg_.symbol_duration_s * chirp_cfg_.symbol_duration_s);
        noise_variance_ = std::isinf(scenario_.snr_db) ? 0.0 : signal_power / std::pow(10.0, scenario_.snr_db / 10);
    }

    const ChirpConfig& chirp_config() const { return chirp_cfg_; }
    const ChannelScenario& scenario() const { return scenario_; }
    const std::vector<std::complex<double>>& chirp() const { return chirp_; }

    /// Complex noise variance per sample; zero when noise is disabled.
    double noise_variance() const { return noise_variance_; }

    std::array<IQFrame, 3> frame(std::size_t frame_index) const {
        const ChannelDraw ch = draw_channels(scenario_, frame_index);
        return {receive(Node::alice, ch.alice, frame_index), receive(Node::bob, ch.bob, frame_index),
                receive(Node::eve, ch.eve, frame_index)};
    }

    /// Noise-free received signal for one set of taps (causal, tail discarded).
    std::vector<std::complex<double>> convolve(const Taps& h) const {
        std::vector<std::complex<double>> y(chirp_.size());
        for (std::size_t n = 0; n < y.size(); ++n) {
            std::complex<double> acc{};
            const std::size_t jmax = std::min(h.size(), n + 1);
            for (std::size_t j = 0; j < jmax; ++j) acc += h[j] * chirp_[n - j];
            y[n] = acc;
        }
        return y;
    }

private:
    IQFrame receive(Node node, const Taps& h, std::size_t frame_index) const {
        auto clean = convolve(h);
        IQFrame f{node, frame_index, std::vector<std::complex<float>>(clean.size())};
        if (noise_variance_ > 0) {
            const auto stream = static_cast<detail::RngStream>(1 + static_cast<std::uint64_t>(node));
            auto rng = detail::make_rng(scenario_.rng_seed, frame_index, stream);
            std::normal_distribution<double> gauss(0.0, std::sqrt(noise_variance_ / 2));
            for (auto& v : clean) {
                const double re = gauss(rng);
                const double im = gauss(rng);
                v += std::complex<double>(re, im);
            }
        }
        for (std::size_t n = 0; n < clean.size(); ++n) f.samples[n] = std::complex<float>(clean[n]);
        return f;
    }

    ChirpConfig chirp_cfg_;
    ChannelScenario scenario_;
    std::vector<std::complex<double>> chirp_;
    double noise_variance_ = 0;
};

/// Frames for Alice, Bob and Eve at one frame index.
inline std::array<IQFrame, 3> synthesize_frame(const ChirpConfig& cfg, const ChannelScenario& scn,
                                               std::size_t frame_index) {
    return ChannelSimulator(cfg, scn).frame(frame_index);
}

} // namespace skg
