#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "skg/common.hpp"
#include "skg/filterbank.hpp"
#include "skg/parallel.hpp"
#include "skg/quantize.hpp"
#include "skg/reconcile.hpp"

namespace skg {

/// Raised when an estimator cannot produce a meaningful value from the data.
struct ConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Alice's secret block and the attacker-side observation it is conditioned on.
struct SecretObservationPair {
    Bits secret;
    std::vector<double> observation;
};

enum class BayesMethod { frequentist, nn, combined };
enum class PriorEstimator { plugin, mcv };

inline std::string to_string(BayesMethod m) {
    switch (m) {
        case BayesMethod::frequentist: return "frequentist";
        case BayesMethod::nn: return "nn";
        case BayesMethod::combined: return "combined";
    }
    return "unknown";
}

inline BayesMethod bayes_method_from_string(const std::string& s) {
    if (s == "frequentist") return BayesMethod::frequentist;
    if (s == "nn") return BayesMethod::nn;
    if (s == "combined") return BayesMethod::combined;
    throw ConfigError("entropy: method must be frequentist, nn or combined");
}

inline PriorEstimator prior_estimator_from_string(const std::string& s) {
    if (s == "plugin") return PriorEstimator::plugin;
    if (s == "mcv") return PriorEstimator::mcv;
    throw ConfigError("entropy: prior must be plugin or mcv");
}

inline std::string to_string(PriorEstimator p) { return p == PriorEstimator::plugin ? "plugin" : "mcv"; }

struct EntropySettings {
    BayesMethod method = BayesMethod::combined;
    PriorEstimator prior = PriorEstimator::plugin;
    double test_fraction = 0.25;
    std::size_t folds = 4;          // rotating 75/25 splits, averaged
    std::size_t checkpoints = 20;   // training-size evaluation points
    std::size_t window = 10;        // convergence window W
    double delta = 0.01;            // convergence tolerance
    std::size_t min_pairs = 100;
    std::uint64_t seed = 0x5eed;

    void validate() const {
        if (!(test_fraction > 0 && test_fraction < 1)) throw ConfigError("entropy: test_fraction must be in (0,1)");
        if (folds == 0) throw ConfigError("entropy: folds must be positive");
        if (checkpoints == 0 || window == 0) throw ConfigError("entropy: checkpoints and window must be positive");
        if (!(delta >= 0)) throw ConfigError("entropy: delta must be nonnegative");
    }
};

struct BayesRiskEstimate {
    double risk = 1;
    bool converged = false;
    std::vector<double> curve;  // risk at each checkpoint
};

struct EntropyEstimate {
    double min_entropy_bits_per_block = 0;
    double leakage_bits = 0;
    double cme_bits_per_block = 0;
    double cme_per_bit = 0;
    BayesMethod estimator = BayesMethod::combined;
    std::size_t sample_count = 0;
    bool converged = false;
    // Diagnostics beyond the core fields.
    std::size_t block_length = 0;
    double mcv_min_entropy_bits = 0;
    double posterior_success = 0;
    double frequentist_risk = 1;
    double nn_risk = 1;
};

namespace detail {

/// Dense class ids in order of first appearance.
inline std::vector<std::uint32_t> label_secrets(std::span<const Bits> secrets, std::size_t* num_classes = nullptr) {
    std::unordered_map<std::string, std::uint32_t> ids;
    std::vector<std::uint32_t> out(secrets.size());
    for (std::size_t i = 0; i < secrets.size(); ++i) {
        std::string key(secrets[i].begin(), secrets[i].end());
        auto [it, inserted] = ids.try_emplace(std::move(key), static_cast<std::uint32_t>(ids.size()));
        out[i] = it->second;
    }
    if (num_classes) *num_classes = ids.size();
    return out;
}

inline double max_frequency(std::span<const std::uint32_t> labels) {
    std::unordered_map<std::uint32_t, std::size_t> counts;
    std::size_t best = 0;
    for (auto l : labels) best = std::max(best, ++counts[l]);
    return static_cast<double>(best) / static_cast<double>(labels.size());
}

/// NIST SP 800-90B most-common-value bound from a modal frequency.
inline double mcv_from_frequency(double p_hat, std::size_t samples) {
    const double L = static_cast<double>(samples);
    const double p_u = std::min(1.0, p_hat + 2.576 * std::sqrt(p_hat * (1 - p_hat) / (L - 1)));
    return -std::log2(p_u);
}

struct Fold {
    std::vector<std::size_t> train;  // training order defines the prefixes
    std::vector<std::size_t> test;
};

inline std::vector<Fold> make_folds(std::size_t n, const EntropySettings& s) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(s.seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto test_size = std::max<std::size_t>(1, static_cast<std::size_t>(std::round(s.test_fraction * static_cast<double>(n))));
    std::vector<Fold> folds(s.folds);
    for (std::size_t f = 0; f < s.folds; ++f) {
        // Fold f tests on a contiguous (cyclic) window of the permutation.
        const std::size_t start = (f * n) / s.folds;
        std::vector<bool> in_test(n, false);
        for (std::size_t i = 0; i < test_size; ++i) in_test[(start + i) % n] = true;
        for (std::size_t i = 0; i < n; ++i) (in_test[i] ? folds[f].test : folds[f].train).push_back(perm[i]);
    }
    return folds;
}

inline std::vector<std::size_t> checkpoint_sizes(std::size_t n_train, std::size_t count) {
    std::vector<std::size_t> sizes;
    for (std::size_t c = 1; c <= count; ++c) {
        auto s = std::max<std::size_t>(1, (n_train * c + count - 1) / count);
        if (sizes.empty() || s > sizes.back()) sizes.push_back(s);
    }
    return sizes;
}

/// k grows as ln(n), the universally consistent k-NN schedule.
inline std::size_t knn_k(std::size_t n) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(std::log(static_cast<double>(n)))));
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double t = a[i] - b[i];
        d += t * t;
    }
    return d;
}

/// Majority vote among neighbors; ties go to the label whose first vote is nearest.
inline std::uint32_t vote(std::span<const std::pair<double, std::uint32_t>> neighbors) {
    std::vector<std::pair<std::uint32_t, std::size_t>> counts;  // first-appearance order
    for (const auto& [d, label] : neighbors) {
        auto it = std::find_if(counts.begin(), counts.end(), [&](const auto& c) { return c.first == label; });
        if (it == counts.end()) counts.emplace_back(label, 1);
        else ++it->second;
    }
    auto best = counts.front();
    for (const auto& c : counts)
        if (c.second > best.second) best = c;
    return best.first;
}

// Per-checkpoint error counts of the k-NN rule for one fold.
inline std::vector<std::size_t> nn_fold_errors(const std::vector<std::vector<double>>& obs,
                                               std::span<const std::uint32_t> labels, const Fold& fold,
                                               std::span<const std::size_t> sizes) {
    const std::size_t k_max = knn_k(sizes.back());
    std::vector<std::vector<std::uint8_t>> wrong(fold.test.size(), std::vector<std::uint8_t>(sizes.size(), 0));
    parallel_for(fold.test.size(), [&](std::size_t t) {
        const auto& x = obs[fold.test[t]];
        const auto truth = labels[fold.test[t]];
        // All training points within the current k_max-th smallest distance, sorted.
        std::vector<std::pair<double, std::uint32_t>> best;
        std::size_t next_checkpoint = 0;
        for (std::size_t j = 0; j < sizes.back(); ++j) {
            const double d = squared_distance(x, obs[fold.train[j]]);
            if (best.size() < k_max || d <= best[k_max - 1].first) {
                auto pos = std::upper_bound(best.begin(), best.end(), d,
                                            [](double v, const auto& e) { return v < e.first; });
                best.insert(pos, {d, labels[fold.train[j]]});
                if (best.size() > k_max) {
                    const double kth = best[k_max - 1].first;
                    while (best.back().first > kth) best.pop_back();
                }
            }
            while (next_checkpoint < sizes.size() && j + 1 == sizes[next_checkpoint]) {
                const std::size_t k = std::min(knn_k(sizes[next_checkpoint]), best.size());
                const double kth = best[k - 1].first;
                std::size_t m = k;
                while (m < best.size() && best[m].first == kth) ++m;
                wrong[t][next_checkpoint] = vote(std::span(best).first(m)) != truth ? 1 : 0;
                ++next_checkpoint;
            }
        }
    });
    std::vector<std::size_t> errors(sizes.size(), 0);
    for (const auto& w : wrong)
        for (std::size_t c = 0; c < sizes.size(); ++c) errors[c] += w[c];
    return errors;
}

inline constexpr double frequentist_cell_occupancy = 16;

// Per-checkpoint error counts of the plug-in (frequentist) rule on equal-width bins.
inline std::vector<std::size_t> frequentist_fold_errors(const std::vector<std::vector<double>>& obs,
                                                        std::span<const std::uint32_t> labels, const Fold& fold,
                                                        std::span<const std::size_t> sizes) {
    const std::size_t dim = obs.front().size();
    const std::size_t n_train = sizes.back();
    // Roughly frequentist_cell_occupancy training samples per cell.
    const double target_cells = static_cast<double>(n_train) / frequentist_cell_occupancy;
    const auto bins = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::floor(std::pow(target_cells, 1.0 / static_cast<double>(dim)))), 2, 65535);
    std::vector<double> lo(dim, std::numeric_limits<double>::infinity());
    std::vector<double> hi(dim, -std::numeric_limits<double>::infinity());
    for (std::size_t j = 0; j < n_train; ++j) {
        const auto& x = obs[fold.train[j]];
        for (std::size_t d = 0; d < dim; ++d) {
            lo[d] = std::min(lo[d], x[d]);
            hi[d] = std::max(hi[d], x[d]);
        }
    }
    auto cell_key = [&](const std::vector<double>& x) {
        std::string key(dim * sizeof(std::uint16_t), '\0');
        for (std::size_t d = 0; d < dim; ++d) {
            std::size_t b = 0;
            if (hi[d] > lo[d]) {
                const double pos = (x[d] - lo[d]) / (hi[d] - lo[d]) * static_cast<double>(bins);
                b = pos <= 0 ? 0 : std::min(bins - 1, static_cast<std::size_t>(pos));
            }
            const auto v = static_cast<std::uint16_t>(b);
            key[2 * d] = static_cast<char>(v & 0xff);
            key[2 * d + 1] = static_cast<char>(v >> 8);
        }
        return key;
    };

    std::unordered_map<std::string, std::uint32_t> cell_ids;
    auto cell_of = [&](std::size_t idx) {
        auto [it, ins] = cell_ids.try_emplace(cell_key(obs[idx]), static_cast<std::uint32_t>(cell_ids.size()));
        return it->second;
    };
    std::vector<std::uint32_t> train_cells(n_train), test_cells(fold.test.size());
    for (std::size_t j = 0; j < n_train; ++j) train_cells[j] = cell_of(fold.train[j]);
    for (std::size_t t = 0; t < fold.test.size(); ++t) test_cells[t] = cell_of(fold.test[t]);

    struct Tally {
        std::unordered_map<std::uint32_t, std::size_t> counts;
        std::uint32_t best = 0;
        std::size_t best_count = 0;
        void add(std::uint32_t label) {
            const auto c = ++counts[label];
            if (c > best_count || (c == best_count && label < best)) {
                best_count = c;
                best = label;
            }
        }
    };
    std::vector<Tally> cells(cell_ids.size());
    Tally prior;
    std::vector<std::size_t> errors(sizes.size(), 0);
    std::size_t next_checkpoint = 0;
    for (std::size_t j = 0; j < n_train; ++j) {
        const auto label = labels[fold.train[j]];
        cells[train_cells[j]].add(label);
        prior.add(label);
        while (next_checkpoint < sizes.size() && j + 1 == sizes[next_checkpoint]) {
            std::size_t err = 0;
            for (std::size_t t = 0; t < fold.test.size(); ++t) {
                const auto& cell = cells[test_cells[t]];
                const auto guess = cell.best_count > 0 ? cell.best : prior.best;
                err += guess != labels[fold.test[t]] ? 1 : 0;
            }
            errors[next_checkpoint++] = err;
        }
    }
    return errors;
}

inline BayesRiskEstimate bayes_risk_from_labels(const std::vector<std::vector<double>>& obs,
                                                std::span<const std::uint32_t> labels, BayesMethod method,
                                                const EntropySettings& settings) {
    if (method == BayesMethod::combined) {
        auto f = bayes_risk_from_labels(obs, labels, BayesMethod::frequentist, settings);
        auto n = bayes_risk_from_labels(obs, labels, BayesMethod::nn, settings);
        return n.risk <= f.risk ? n : f;
    }
    const auto folds = make_folds(obs.size(), settings);
    std::vector<double> curve;
    std::size_t total_test = 0;
    std::vector<std::size_t> errors;
    for (const auto& fold : folds) {
        const auto sizes = checkpoint_sizes(fold.train.size(), settings.checkpoints);
        auto e = method == BayesMethod::nn ? nn_fold_errors(obs, labels, fold, sizes)
                                           : frequentist_fold_errors(obs, labels, fold, sizes);
        if (errors.empty()) errors.assign(e.size(), 0);
        // Folds differ in training size by at most one sample; align by checkpoint index.
        for (std::size_t c = 0; c < std::min(e.size(), errors.size()); ++c) errors[c] += e[c];
        errors.resize(std::min(e.size(), errors.size()));
        total_test += fold.test.size();
    }
    BayesRiskEstimate est;
    for (auto e : errors) est.curve.push_back(static_cast<double>(e) / static_cast<double>(total_test));
    est.risk = est.curve.back();
    const std::size_t w = std::min(settings.window, est.curve.size());
    const auto [mn, mx] = std::minmax_element(est.curve.end() - static_cast<std::ptrdiff_t>(w), est.curve.end());
    est.converged = est.curve.size() >= settings.window && (*mx - *mn) <= settings.delta;
    return est;
}

inline void check_pairs(std::span<const SecretObservationPair> pairs, const EntropySettings& settings) {
    settings.validate();
    if (pairs.size() < std::max<std::size_t>(settings.min_pairs, 2))
        throw ConvergenceError("bayes risk: at least " + std::to_string(settings.min_pairs) + " pairs required");
    const std::size_t dim = pairs.front().observation.size();
    if (dim == 0) throw InputError("bayes risk: observations must be nonempty");
    for (const auto& p : pairs) {
        if (p.observation.size() != dim) throw InputError("bayes risk: observation dimension varies");
        for (double v : p.observation)
            if (!std::isfinite(v)) throw InputError("bayes risk: observations must be finite");
    }
}

} // namespace detail

/// Most-common-value min-entropy (bits per block) with the 99% upper confidence bound.
inline double mcv_min_entropy(std::span<const BitBlock> secrets) {
    if (secrets.size() < 2) throw InputError("mcv_min_entropy: at least two samples required");
    std::vector<Bits> bits;
    bits.reserve(secrets.size());
    for (const auto& b : secrets) bits.push_back(b.bits);
    const auto labels = detail::label_secrets(bits);
    return detail::mcv_from_frequency(detail::max_frequency(labels), labels.size());
}

/// Hold-out Bayes risk of guessing the secret from the observation.
inline BayesRiskEstimate fbleau_bayes_risk(std::span<const SecretObservationPair> pairs, BayesMethod method,
                                           const EntropySettings& settings = {}) {
    detail::check_pairs(pairs, settings);
    std::vector<Bits> secrets;
    std::vector<std::vector<double>> obs;
    for (const auto& p : pairs) {
        secrets.push_back(p.secret);
        obs.push_back(p.observation);
    }
    const auto labels = detail::label_secrets(secrets);
    return detail::bayes_risk_from_labels(obs, labels, method, settings);
}

/// Conditional min-entropy of the secrets given the observations: prior
/// min-entropy minus min-entropy leakage, clamped to [0, H].
inline EntropyEstimate conditional_min_entropy(std::span<const SecretObservationPair> pairs,
                                               std::span<const BitBlock> secrets,
                                               const EntropySettings& settings = {}) {
    detail::check_pairs(pairs, settings);
    if (secrets.empty()) throw InputError("conditional_min_entropy: no secrets");
    const std::size_t block_length = secrets.front().bits.size();
    if (block_length == 0) throw InputError("conditional_min_entropy: empty secret blocks");
    for (const auto& s : secrets)
        if (s.bits.size() != block_length) throw InputError("conditional_min_entropy: secret lengths differ");
    for (const auto& p : pairs)
        if (p.secret.size() != block_length) throw InputError("conditional_min_entropy: pair secret length differs");

    std::vector<Bits> prior_bits;
    for (const auto& s : secrets) prior_bits.push_back(s.bits);
    const auto prior_labels = detail::label_secrets(prior_bits);
    const double p_max = detail::max_frequency(prior_labels);

    EntropyEstimate est;
    est.block_length = block_length;
    est.sample_count = pairs.size();
    est.estimator = settings.method;
    est.mcv_min_entropy_bits = prior_labels.size() >= 2 ? detail::mcv_from_frequency(p_max, prior_labels.size()) : 0;
    const double h_prior = settings.prior == PriorEstimator::plugin ? -std::log2(p_max) : est.mcv_min_entropy_bits;
    est.min_entropy_bits_per_block = std::clamp(h_prior, 0.0, static_cast<double>(block_length));

    std::vector<Bits> secrets_in_pairs;
    std::vector<std::vector<double>> obs;
    for (const auto& p : pairs) {
        secrets_in_pairs.push_back(p.secret);
        obs.push_back(p.observation);
    }
    const auto labels = detail::label_secrets(secrets_in_pairs);

    BayesRiskEstimate chosen;
    if (settings.method != BayesMethod::nn) {
        auto f = detail::bayes_risk_from_labels(obs, labels, BayesMethod::frequentist, settings);
        est.frequentist_risk = f.risk;
        chosen = f;
    }
    if (settings.method != BayesMethod::frequentist) {
        auto n = detail::bayes_risk_from_labels(obs, labels, BayesMethod::nn, settings);
        est.nn_risk = n.risk;
        if (settings.method == BayesMethod::nn || n.risk <= chosen.risk) chosen = n;
    }
    est.converged = chosen.converged;
    est.posterior_success = 1 - chosen.risk;

    // leakage = log2(P_s) - log2(max prior) with log2(max prior) = -H.
    const double leakage = std::log2(est.posterior_success) + est.min_entropy_bits_per_block;
    est.leakage_bits = std::max(0.0, leakage);
    est.cme_bits_per_block = std::max(0.0, est.min_entropy_bits_per_block - est.leakage_bits);
    est.cme_per_bit = est.cme_bits_per_block / static_cast<double>(block_length);
    return est;
}

/// Per-bit budget after compressing 10% more than the estimate.
inline double apply_safety_margin(const EntropyEstimate& est) { return 0.9 * est.cme_per_bit; }

enum class ObservationKind { powers, bits };

inline ObservationKind observation_kind_from_string(const std::string& s) {
    if (s == "powers") return ObservationKind::powers;
    if (s == "bits") return ObservationKind::bits;
    throw ConfigError("entropy: observation must be powers or bits");
}

/// Eve's conditioning vector: her measurements followed by the public syndrome
/// bits. Powers are expressed as continuous level positions (per-frame min/max
/// normalized, in quantizer units) so they share the quantizer's scale.
inline std::vector<double> eve_observation(const PowerVector& eve, const Syndrome& syndrome, const QuantConfig& quant,
                                           ObservationKind kind = ObservationKind::powers) {
    std::vector<double> obs;
    if (kind == ObservationKind::bits) {
        const auto block = quantize_frame(eve, quant);
        obs.assign(block.bits.begin(), block.bits.end());
    } else {
        std::vector<double> v = eve.powers;
        for (auto& x : v) {
            if (!std::isfinite(x) || x < 0) throw InputError("eve_observation: invalid power");
            if (quant.domain == QuantDomain::decibel) x = 10 * std::log10(std::max(x, std::numeric_limits<double>::min()));
        }
        const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        const double range = *hi - *lo;
        const double lo_v = *lo;
        for (auto& x : v) obs.push_back(range > 0 ? (x - lo_v) / range * static_cast<double>(quant.levels) : 0.0);
    }
    obs.insert(obs.end(), syndrome.bits.begin(), syndrome.bits.end());
    return obs;
}

} // namespace skg
