#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <ostream>
#include <span>
#include <vector>

#include "skg/common.hpp"
#include "skg/fft.hpp"
#include "skg/waveform.hpp"

namespace skg {

struct FilterbankConfig {
    std::size_t num_filters = 16;
    double rolloff = 0.25;
    std::size_t prototype_taps = 129;
    double bandwidth_hz = 70e6;
    double sample_rate_hz = 140e6;

    void validate() const {
        if (num_filters < 2) throw ConfigError("filterbank: num_filters must be >= 2");
        if (!(rolloff >= 0 && rolloff <= 1)) throw ConfigError("filterbank: rolloff must be in [0,1]");
        if (prototype_taps == 0) throw ConfigError("filterbank: prototype_taps must be positive");
        if (!(bandwidth_hz > 0) || !std::isfinite(bandwidth_hz))
            throw ConfigError("filterbank: bandwidth_hz must be positive");
        if (!(sample_rate_hz >= bandwidth_hz) || !std::isfinite(sample_rate_hz))
            throw ConfigError("filterbank: sample_rate_hz must be >= bandwidth_hz");
    }

    double subband_width_hz() const { return bandwidth_hz / static_cast<double>(num_filters); }

    /// f_k = -B(K - 2k + 1) / (2K) for k = 1..K (returned 0-based).
    std::vector<double> center_frequencies() const {
        const double K = static_cast<double>(num_filters);
        std::vector<double> f(num_filters);
        for (std::size_t i = 0; i < num_filters; ++i) {
            const double k = static_cast<double>(i + 1);
            f[i] = -bandwidth_hz * (K - 2 * k + 1) / (2 * K);
        }
        return f;
    }
};

/// Time-averaged subband powers of one frame.
struct PowerVector {
    Node node = Node::alice;
    std::size_t frame_index = 0;
    std::vector<double> powers;

    friend bool operator==(const PowerVector&, const PowerVector&) = default;
};

/// Raised-cosine prototype (spectral roll-off `rolloff`, -6 dB width `width_hz`),
/// Hamming windowed, normalized to unit DC gain.
inline std::vector<double> raised_cosine_prototype(std::size_t taps, double width_hz, double rolloff,
                                                   double sample_rate_hz) {
    const double symbol = 1.0 / width_hz;
    const double center = static_cast<double>(taps - 1) / 2;
    auto sinc = [](double x) { return x == 0 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x); };
    std::vector<double> g(taps);
    double sum = 0;
    for (std::size_t n = 0; n < taps; ++n) {
        const double t = (static_cast<double>(n) - center) / sample_rate_hz;
        const double x = t / symbol;
        const double denom = 1 - 4 * rolloff * rolloff * x * x;
        double v;
        if (std::abs(denom) < 1e-12) {
            v = std::numbers::pi / 4 * sinc(1 / (2 * rolloff));
        } else {
            v = sinc(x) * std::cos(std::numbers::pi * rolloff * x) / denom;
        }
        const double w = taps == 1 ? 1.0
                                   : 0.54 - 0.46 * std::cos(2 * std::numbers::pi * static_cast<double>(n) /
                                                            static_cast<double>(taps - 1));
        g[n] = v * w;
        sum += g[n];
    }
    for (auto& v : g) v /= sum;
    return g;
}

/// K complex band-pass filters g_k[n] = g[n] exp(j 2 pi f_k (n - c) / fs), with the
/// modulation referenced to the filter center c. Immutable after construction;
/// extract_power may be called concurrently.
class Filterbank {
public:
    explicit Filterbank(FilterbankConfig cfg) : cfg_(cfg) {
        cfg_.validate();
        prototype_ = raised_cosine_prototype(cfg_.prototype_taps, cfg_.subband_width_hz(), cfg_.rolloff,
                                             cfg_.sample_rate_hz);
        centers_ = cfg_.center_frequencies();
        const double c = static_cast<double>(cfg_.prototype_taps - 1) / 2;
        filters_.resize(cfg_.num_filters);
        for (std::size_t k = 0; k < cfg_.num_filters; ++k) {
            filters_[k].resize(cfg_.prototype_taps);
            for (std::size_t n = 0; n < cfg_.prototype_taps; ++n) {
                const double t = (static_cast<double>(n) - c) / cfg_.sample_rate_hz;
                filters_[k][n] = prototype_[n] * std::polar(1.0, 2 * std::numbers::pi * centers_[k] * t);
            }
        }
    }

    const FilterbankConfig& config() const { return cfg_; }
    std::size_t size() const { return filters_.size(); }
    const std::vector<double>& prototype() const { return prototype_; }
    const std::vector<double>& center_frequencies() const { return centers_; }
    const std::vector<std::complex<double>>& filter(std::size_t k) const { return filters_.at(k); }

    /// Frequency response of filter k at frequency f (Hz).
    std::complex<double> response(std::size_t k, double f_hz) const {
        const auto& h = filters_.at(k);
        std::complex<double> acc{};
        for (std::size_t n = 0; n < h.size(); ++n) {
            acc += h[n] * std::polar(1.0, -2 * std::numbers::pi * f_hz * static_cast<double>(n) / cfg_.sample_rate_hz);
        }
        return acc;
    }

    /// powers[k] = mean_n |(frame (*) g_k)[n]|^2 over the "same"-length output.
    PowerVector extract_power(const IQFrame& frame) const {
        const std::size_t N = frame.samples.size();
        if (N < cfg_.prototype_taps) throw InputError("extract_power: frame shorter than prototype filter");
        const auto engine = engine_for(N);
        std::vector<std::complex<double>> buf(engine->nfft), spec(engine->nfft), y(engine->nfft);
        for (std::size_t n = 0; n < N; ++n) buf[n] = std::complex<double>(frame.samples[n]);
        engine->forward.execute(buf, spec);

        const std::size_t offset = (cfg_.prototype_taps - 1) / 2;
        const double scale = 1.0 / static_cast<double>(engine->nfft);
        PowerVector pv{frame.node, frame.frame_index, std::vector<double>(cfg_.num_filters)};
        for (std::size_t k = 0; k < cfg_.num_filters; ++k) {
            const auto& H = engine->spectra[k];
            for (std::size_t i = 0; i < engine->nfft; ++i) buf[i] = spec[i] * H[i];
            engine->backward.execute(buf, y);
            double acc = 0;
            for (std::size_t n = offset; n < offset + N; ++n) acc += std::norm(y[n] * scale);
            pv.powers[k] = acc / static_cast<double>(N);
        }
        return pv;
    }

private:
    struct Engine {
        std::size_t nfft;
        FftPlan forward;
        FftPlan backward;
        std::vector<std::vector<std::complex<double>>> spectra;

        explicit Engine(std::size_t n) : nfft(n), forward(n, FftDirection::forward), backward(n, FftDirection::backward) {}
    };

    std::shared_ptr<const Engine> engine_for(std::size_t frame_len) const {
        std::lock_guard lock(cache_mutex_);
        auto it = engines_.find(frame_len);
        if (it != engines_.end()) return it->second;
        auto e = std::make_shared<Engine>(next_pow2(frame_len + cfg_.prototype_taps - 1));
        std::vector<std::complex<double>> padded(e->nfft);
        for (const auto& h : filters_) {
            std::fill(padded.begin(), padded.end(), std::complex<double>{});
            std::copy(h.begin(), h.end(), padded.begin());
            std::vector<std::complex<double>> H(e->nfft);
            e->forward.execute(padded, H);
            e->spectra.push_back(std::move(H));
        }
        engines_.emplace(frame_len, e);
        return e;
    }

    FilterbankConfig cfg_;
    std::vector<double> prototype_;
    std::vector<double> centers_;
    std::vector<std::vector<std::complex<double>>> filters_;
    mutable std::mutex cache_mutex_;
    mutable std::map<std::size_t, std::shared_ptr<const Engine>> engines_;
};

inline Filterbank build_filterbank(const FilterbankConfig& cfg) { return Filterbank(cfg); }

inline PowerVector extract_power(const IQFrame& frame, const Filterbank& bank) { return bank.extract_power(frame); }

/// Two-sided power spectral density, frequencies ascending from -fs/2.
struct Psd {
    std::vector<double> frequencies_hz;
    std::vector<double> density;  // power per Hz
};

/// Welch estimate with a periodic Hann window, averaging segments of
/// `segment_len` samples that overlap by `overlap` samples.
inline Psd welch_psd(std::span<const std::complex<float>> samples, double sample_rate_hz, std::size_t segment_len,
                     std::size_t overlap) {
    if (segment_len == 0 || segment_len > samples.size())
        throw InputError("welch_psd: segment length must be in [1, frame length]");
    if (overlap >= segment_len) throw InputError("welch_psd: overlap must be smaller than segment length");
    if (!(sample_rate_hz > 0)) throw InputError("welch_psd: sample rate must be positive");

    std::vector<double> window(segment_len);
    double wsum = 0;
    for (std::size_t n = 0; n < segment_len; ++n) {
        window[n] = 0.5 - 0.5 * std::cos(2 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(segment_len));
        wsum += window[n] * window[n];
    }
    if (segment_len == 1) {
        window[0] = 1;
        wsum = 1;
    }

    FftPlan plan(segment_len, FftDirection::forward);
    std::vector<std::complex<double>> seg(segment_len), spec(segment_len);
    std::vector<double> acc(segment_len, 0.0);
    const std::size_t step = segment_len - overlap;
    std::size_t segments = 0;
    for (std::size_t start = 0; start + segment_len <= samples.size(); start += step, ++segments) {
        for (std::size_t n = 0; n < segment_len; ++n) seg[n] = std::complex<double>(samples[start + n]) * window[n];
        plan.execute(seg, spec);
        for (std::size_t i = 0; i < segment_len; ++i) acc[i] += std::norm(spec[i]);
    }

    Psd psd;
    psd.frequencies_hz.resize(segment_len);
    psd.density.resize(segment_len);
    const double scale = 1.0 / (sample_rate_hz * wsum * static_cast<double>(segments));
    const std::size_t half = segment_len / 2;
    for (std::size_t i = 0; i < segment_len; ++i) {
        // fftshift: output slot i holds DFT bin (i + ceil(N/2)) mod N.
        const std::size_t bin = (i + segment_len - half) % segment_len;
        const double f = static_cast<double>(bin) * sample_rate_hz / static_cast<double>(segment_len);
        psd.frequencies_hz[i] = bin >= (segment_len + 1) / 2 ? f - sample_rate_hz : f;
        psd.density[i] = acc[bin] * scale;
    }
    return psd;
}

inline void write_psd_csv(std::ostream& out, const Psd& psd) {
    out << "frequency_hz,psd_db\n";
    auto old = out.precision(10);
    for (std::size_t i = 0; i < psd.density.size(); ++i) {
        out << psd.frequencies_hz[i] << ',' << 10 * std::log10(psd.density[i]) << '\n';
    }
    out.precision(old);
}

} // namespace skg
