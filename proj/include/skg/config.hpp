#pragma once

// Pipeline configuration: one INI file with a section per module, plus
// `section.key=value` overrides. Unknown sections or keys are rejected.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "skg/common.hpp"
#include "skg/entropy.hpp"
#include "skg/filterbank.hpp"
#include "skg/quantize.hpp"
#include "skg/reconcile.hpp"
#include "skg/waveform.hpp"

namespace skg {

struct CodeSettings {
    std::size_t block_length = 64;
    double rate = 0.3;
    double design_param = 0.1;
    std::optional<double> crossover;  // empty: estimate from the calibration split
    double calibration_fraction = 0.1;
};

struct RunSettings {
    std::string label = "nlos-dynamic";
    int eve_position = 2;
    std::size_t frames = 1000;
    std::optional<std::size_t> start_index;  // empty: first frame after the calibration split
    bool reveal = false;
    double tap_decay = 8.0;
    ObservationKind observation = ObservationKind::powers;
};

struct PathSettings {
    std::string output_dir = "out";
};

struct PipelineConfig {
    ChirpConfig chirp;
    ChannelScenario scenario = default_scenario();
    FilterbankConfig filterbank;
    QuantConfig quant;
    CodeSettings code;
    EntropySettings entropy;
    RunSettings run;
    PathSettings paths;

    /// Checks every section and the cross-module invariants before any compute.
    void validate() const {
        chirp.validate();
        scenario.validate();
        filterbank.validate();
        quant.validate();
        if (filterbank.bandwidth_hz != chirp.bandwidth_hz || filterbank.sample_rate_hz != chirp.sample_rate_hz)
            throw ConfigError("filterbank bandwidth and sample rate must match the chirp");
        const std::size_t expected = filterbank.num_filters * quant.bits_per_measurement();
        if (code.block_length != expected)
            throw ConfigError("code.block_length is " + std::to_string(code.block_length) + " but num_filters * log2(levels) = " +
                              std::to_string(filterbank.num_filters) + " * " +
                              std::to_string(quant.bits_per_measurement()) + " = " + std::to_string(expected) +
                              "; set block_length = " + std::to_string(expected) + " or change filters/levels");
        if (!is_power_of_two(code.block_length) || code.block_length < 2)
            throw ConfigError("code.block_length = " + std::to_string(code.block_length) +
                              " is not a power of two; polar codes need num_filters * log2(levels) to be one");
        if (!(code.rate > 0 && code.rate < 1)) throw ConfigError("code.rate must be in (0,1)");
        if (!(code.design_param > 0 && code.design_param < 0.5)) throw ConfigError("code.design_param must be in (0,0.5)");
        if (code.crossover && !(*code.crossover >= 0 && *code.crossover < 0.5))
            throw ConfigError("code.crossover must be in [0,0.5) or auto");
        if (!(code.calibration_fraction > 0 && code.calibration_fraction < 1))
            throw ConfigError("code.calibration_fraction must be in (0,1)");
        if (run.frames < 2) throw ConfigError("run.frames must be at least 2");
        if (run.start_index && *run.start_index >= run.frames) throw ConfigError("run.start_index must be below run.frames");
        if (!(entropy.test_fraction > 0 && entropy.test_fraction < 1)) throw ConfigError("entropy.test_fraction must be in (0,1)");
        if (entropy.folds == 0 || entropy.checkpoints < 2 || entropy.window < 2 || entropy.window > entropy.checkpoints)
            throw ConfigError("entropy: need folds >= 1 and 2 <= window <= checkpoints");
        if (!(entropy.delta >= 0)) throw ConfigError("entropy.delta must be nonnegative");
        if (run.label.empty()) throw ConfigError("run.label must not be empty");
        if (paths.output_dir.empty()) throw ConfigError("paths.output_dir must not be empty");
    }

    /// Frames consumed by the crossover estimate; never used for keys.
    std::size_t calibration_frames() const {
        return static_cast<std::size_t>(std::ceil(code.calibration_fraction * static_cast<double>(run.frames)));
    }

    std::size_t key_start_index() const { return run.start_index.value_or(calibration_frames()); }

private:
    static bool is_power_of_two(std::size_t v) { return v && !(v & (v - 1)); }
};

namespace detail {

inline double parse_double(const std::string& key, const std::string& v) {
    if (v == "inf" || v == "+inf") return std::numeric_limits<double>::infinity();
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos == v.size()) return d;
    } catch (const std::exception&) {
    }
    throw ConfigError(key + ": expected a number, got '" + v + "'");
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        if (!v.empty() && v[0] != '-') {
            const auto u = std::stoull(v, &pos, 0);
            if (pos == v.size()) return u;
        }
    } catch (const std::exception&) {
    }
    throw ConfigError(key + ": expected a nonnegative integer, got '" + v + "'");
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

inline std::vector<double> parse_double_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b == std::string::npos) throw ConfigError(key + ": empty list element");
        out.push_back(parse_double(key, item.substr(b, e - b + 1)));
    }
    if (out.empty()) throw ConfigError(key + ": empty list");
    return out;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

} // namespace detail

/// Flat section.key -> value map.
using ConfigValues = std::map<std::string, std::string>;

inline const std::set<std::string>& known_config_keys() {
    static const std::set<std::string> keys = {
        "chirp.bandwidth_hz",       "chirp.symbol_duration_s",  "chirp.sample_rate_hz",
        "scenario.num_taps",        "scenario.tap_decay",       "scenario.tap_power_profile",
        "scenario.reciprocity_coeff", "scenario.eve_correlation", "scenario.snr_db",
        "scenario.dynamic",         "scenario.seed",            "filterbank.num_filters",
        "filterbank.rolloff",       "filterbank.prototype_taps", "quant.levels",
        "quant.domain",             "code.block_length",        "code.rate",
        "code.design_param",        "code.crossover",           "code.calibration_fraction",
        "entropy.method",           "entropy.prior",            "entropy.observation",
        "entropy.test_fraction",    "entropy.folds",            "entropy.checkpoints",
        "entropy.window",           "entropy.delta",            "entropy.min_pairs",
        "entropy.seed",             "run.label",                "run.eve_position",
        "run.frames",               "run.start_index",          "run.reveal",
        "paths.output_dir",
    };
    return keys;
}

inline ConfigValues read_ini_values(std::istream& in, const std::string& origin = "config") {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& ex) {
        throw ConfigError(origin + ": " + ex.message() + " (line " + std::to_string(ex.line()) + ")");
    }
    ConfigValues values;
    for (const auto& [section, body] : tree) {
        if (body.empty()) throw ConfigError(origin + ": key '" + section + "' outside any section");
        for (const auto& [key, value] : body) {
            const std::string full = section + "." + key;
            if (!known_config_keys().count(full)) throw ConfigError(origin + ": unknown key '" + full + "'");
            values[full] = detail::trim(value.data());
        }
    }
    return values;
}

inline ConfigValues read_ini_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    return read_ini_values(in, path);
}

/// Parses "section.key=value".
inline std::pair<std::string, std::string> parse_override(const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + text + "' is not section.key=value");
    auto key = detail::trim(text.substr(0, eq));
    if (!known_config_keys().count(key)) throw ConfigError("override: unknown key '" + key + "'");
    return {key, detail::trim(text.substr(eq + 1))};
}

/// Builds a config from defaults plus the given values. Does not validate.
inline PipelineConfig config_from_values(const ConfigValues& v) {
    using namespace detail;
    PipelineConfig cfg;
    auto get = [&](const std::string& k) -> const std::string* {
        auto it = v.find(k);
        return it == v.end() ? nullptr : &it->second;
    };
    auto num = [&](const std::string& k, double& out) {
        if (auto s = get(k)) out = parse_double(k, *s);
    };
    auto uint = [&](const std::string& k, auto& out) {
        if (auto s = get(k)) out = static_cast<std::remove_reference_t<decltype(out)>>(parse_uint(k, *s));
    };

    double bw = cfg.chirp.bandwidth_hz, dur = cfg.chirp.symbol_duration_s, fs = cfg.chirp.sample_rate_hz;
    num("chirp.bandwidth_hz", bw);
    num("chirp.symbol_duration_s", dur);
    num("chirp.sample_rate_hz", fs);
    cfg.chirp = ChirpConfig::make(bw, dur, fs);

    auto& scn = cfg.scenario;
    uint("scenario.num_taps", scn.num_taps);
    num("scenario.tap_decay", cfg.run.tap_decay);
    if (auto s = get("scenario.tap_power_profile")) {
        if (get("scenario.tap_decay")) throw ConfigError("scenario: give tap_decay or tap_power_profile, not both");
        scn.tap_power_profile = parse_double_list("scenario.tap_power_profile", *s);
        if (!get("scenario.num_taps")) scn.num_taps = scn.tap_power_profile.size();
    } else {
        if (scn.num_taps == 0) throw ConfigError("scenario.num_taps must be positive");
        scn.tap_power_profile = exponential_profile(scn.num_taps, cfg.run.tap_decay);
    }
    num("scenario.reciprocity_coeff", scn.reciprocity_coeff);
    num("scenario.eve_correlation", scn.eve_correlation);
    num("scenario.snr_db", scn.snr_db);
    if (auto s = get("scenario.dynamic")) scn.dynamic = parse_bool("scenario.dynamic", *s);
    uint("scenario.seed", scn.rng_seed);

    auto& fb = cfg.filterbank;
    uint("filterbank.num_filters", fb.num_filters);
    num("filterbank.rolloff", fb.rolloff);
    uint("filterbank.prototype_taps", fb.prototype_taps);
    fb.bandwidth_hz = cfg.chirp.bandwidth_hz;
    fb.sample_rate_hz = cfg.chirp.sample_rate_hz;

    uint("quant.levels", cfg.quant.levels);
    if (auto s = get("quant.domain")) cfg.quant.domain = quant_domain_from_string(*s);

    // The block length follows K and Q unless stated explicitly.
    cfg.code.block_length = fb.num_filters * (cfg.quant.levels >= 2 ? static_cast<std::size_t>(std::log2(cfg.quant.levels)) : 0);
    uint("code.block_length", cfg.code.block_length);
    num("code.rate", cfg.code.rate);
    num("code.design_param", cfg.code.design_param);
    if (auto s = get("code.crossover"); s && *s != "auto") cfg.code.crossover = parse_double("code.crossover", *s);
    num("code.calibration_fraction", cfg.code.calibration_fraction);

    auto& e = cfg.entropy;
    if (auto s = get("entropy.method")) e.method = bayes_method_from_string(*s);
    if (auto s = get("entropy.prior")) e.prior = prior_estimator_from_string(*s);
    if (auto s = get("entropy.observation")) cfg.run.observation = observation_kind_from_string(*s);
    num("entropy.test_fraction", e.test_fraction);
    uint("entropy.folds", e.folds);
    uint("entropy.checkpoints", e.checkpoints);
    uint("entropy.window", e.window);
    num("entropy.delta", e.delta);
    uint("entropy.min_pairs", e.min_pairs);
    uint("entropy.seed", e.seed);

    if (auto s = get("run.label")) cfg.run.label = *s;
    if (auto s = get("run.eve_position")) {
        const auto p = parse_uint("run.eve_position", *s);
        if (p > 1000) throw ConfigError("run.eve_position out of range");
        cfg.run.eve_position = static_cast<int>(p);
    }
    uint("run.frames", cfg.run.frames);
    if (auto s = get("run.start_index"); s && *s != "auto") cfg.run.start_index = parse_uint("run.start_index", *s);
    if (auto s = get("run.reveal")) cfg.run.reveal = parse_bool("run.reveal", *s);
    if (auto s = get("paths.output_dir")) cfg.paths.output_dir = *s;
    return cfg;
}

/// Loads an optional INI file, then SKG_SEED, then overrides, and validates.
inline PipelineConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {},
                                  bool use_environment = true) {
    ConfigValues values;
    if (!path.empty()) values = read_ini_file(path);
    if (use_environment) {
        if (const char* env = std::getenv("SKG_SEED"); env && *env) values["scenario.seed"] = env;
    }
    for (const auto& o : overrides) {
        auto [k, val] = parse_override(o);
        values[k] = val;
    }
    auto cfg = config_from_values(values);
    cfg.validate();
    return cfg;
}

} // namespace skg
