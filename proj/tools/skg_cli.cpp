#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "skg/skg.hpp"

namespace fs = std::filesystem;

namespace {

struct ConfigArgs {
    std::string path;
    std::vector<std::string> overrides;

    void attach(CLI::App* cmd) {
        cmd->add_option("-c,--config", path, "INI configuration file (defaults apply when omitted)")
            ->check(CLI::ExistingFile);
        cmd->add_option("--set", overrides, "Override a config value, as section.key=value (repeatable)");
    }

    skg::PipelineConfig load() const { return skg::load_config(path, overrides); }
};

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    if (out.empty()) throw skg::ConfigError("empty list: " + text);
    return out;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    return out;
}

// cme_per_bit of the first row of an entropy report.
double read_entropy_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string header, row;
    if (!std::getline(in, header) || !std::getline(in, row)) throw skg::InputError(path + ": empty entropy report");
    auto split = [](const std::string& s) {
        std::vector<std::string> cells;
        std::stringstream ss(s);
        std::string c;
        while (std::getline(ss, c, ',')) cells.push_back(c);
        return cells;
    };
    const auto names = split(header);
    const auto cells = split(row);
    for (std::size_t i = 0; i < names.size() && i < cells.size(); ++i)
        if (names[i] == "cme_per_bit") return std::stod(cells[i]);
    throw skg::InputError(path + ": no cme_per_bit column");
}

// Manifest evidence paths are relative to the manifest's directory.
std::optional<skg::FileRef> evidence_ref(const std::string& file, const fs::path& manifest_dir) {
    if (file.empty()) return std::nullopt;
    const auto rel = fs::relative(fs::absolute(file), fs::absolute(manifest_dir));
    return skg::FileRef{rel.generic_string(), skg::file_sha256(file)};
}

void print_pipeline(const skg::PipelineConfig& cfg, const skg::PipelineResult& r) {
    std::cout << "run " << cfg.run.label << " (eve position label " << cfg.run.eve_position << "), " << cfg.run.frames
              << " frames -> " << cfg.paths.output_dir << "\n"
              << "  crossover " << r.crossover << "  A-B mismatch " << r.ab_mismatch << "  A-E mismatch "
              << r.ae_mismatch << "\n"
              << "  A-B FER " << r.ab_fer << "  A-E FER " << r.ae_fer << "\n"
              << "  min-entropy " << r.entropy.min_entropy_bits_per_block << " bits, leakage " << r.entropy.leakage_bits
              << " bits, CME/bit " << r.entropy.cme_per_bit << (r.entropy.converged ? "" : " (not converged)") << "\n"
              << "  key " << r.alice_key.fingerprint << " from " << r.alice_key.input_length << " bits starting at frame "
              << r.alice_key.start_index << (r.keys_match ? ", Alice and Bob agree" : ", ALICE AND BOB DISAGREE")
              << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Secret key generation from simulated chirp channel measurements"};
    app.require_subcommand(1);
    app.fallthrough();
    unsigned threads = 0;
    app.add_option("--threads", threads, "Cap on worker threads (0 = hardware concurrency)");

    // simulate
    ConfigArgs sim_cfg;
    std::string sim_out;
    std::optional<std::size_t> sim_frames;
    auto* sim = app.add_subcommand("simulate", "Synthesize Alice, Bob and Eve frame stores");
    sim_cfg.attach(sim);
    sim->add_option("-o,--out", sim_out, "Output directory for alice.iqf, bob.iqf, eve.iqf")->required();
    sim->add_option("-n,--frames", sim_frames, "Number of frames (overrides run.frames)");

    // extract
    ConfigArgs ext_cfg;
    std::string ext_in, ext_out, ext_psd;
    std::size_t psd_frame = 0, psd_segment = 256, psd_overlap = 128;
    auto* ext = app.add_subcommand("extract", "Filterbank subband powers from a frame store");
    ext_cfg.attach(ext);
    ext->add_option("-i,--in", ext_in, "Input .iqf store")->required()->check(CLI::ExistingFile);
    ext->add_option("-o,--out", ext_out, "Output power CSV")->required();
    ext->add_option("--psd", ext_psd, "Also write a Welch PSD CSV of one frame");
    ext->add_option("--psd-frame", psd_frame, "Frame used for --psd");
    ext->add_option("--psd-segment", psd_segment, "Welch segment length");
    ext->add_option("--psd-overlap", psd_overlap, "Welch segment overlap");

    // quantize
    ConfigArgs qnt_cfg;
    std::string qnt_in, qnt_out;
    auto* qnt = app.add_subcommand("quantize", "Gray-coded bit blocks from a power CSV");
    qnt_cfg.attach(qnt);
    qnt->add_option("-i,--in", qnt_in, "Input power CSV")->required()->check(CLI::ExistingFile);
    qnt->add_option("-o,--out", qnt_out, "Output .bits store")->required();

    // reconcile
    ConfigArgs rec_cfg;
    std::string rec_source, rec_synd_out, rec_observed, rec_synd, rec_out, rec_reference, rec_report;
    std::optional<double> rec_crossover;
    auto* rec = app.add_subcommand("reconcile",
                                   "Publish syndromes (--source) or decode against published syndromes (--observed)");
    rec_cfg.attach(rec);
    auto* opt_source = rec->add_option("--source", rec_source, "Source .bits store to publish syndromes for")
                           ->check(CLI::ExistingFile);
    rec->add_option("--syndrome-out", rec_synd_out, "Syndrome store written with --source")->needs(opt_source);
    auto* opt_observed =
        rec->add_option("--observed", rec_observed, "Own .bits store to decode")->check(CLI::ExistingFile)->excludes(opt_source);
    rec->add_option("--syndrome", rec_synd, "Published syndrome store")->needs(opt_observed)->check(CLI::ExistingFile);
    rec->add_option("-o,--out", rec_out, "Decoded .bits store")->needs(opt_observed);
    rec->add_option("--crossover", rec_crossover, "BSC crossover for decoding (default: config or calibration)");
    rec->add_option("--reference", rec_reference, "Source blocks, for calibration and the decode report")
        ->check(CLI::ExistingFile);
    rec->add_option("--report", rec_report, "Decode report CSV (needs --reference)");

    // entropy
    ConfigArgs ent_cfg;
    std::string ent_secret, ent_power, ent_synd, ent_out;
    auto* ent = app.add_subcommand("entropy", "Conditional min-entropy of the source given Eve's view");
    ent_cfg.attach(ent);
    ent->add_option("--secret", ent_secret, "Source .bits store")->required()->check(CLI::ExistingFile);
    ent->add_option("--eve-power", ent_power, "Eve's power CSV")->required()->check(CLI::ExistingFile);
    ent->add_option("--syndrome", ent_synd, "Published syndrome store")->required()->check(CLI::ExistingFile);
    ent->add_option("-o,--out", ent_out, "Entropy report CSV")->required();

    // distill
    ConfigArgs dst_cfg;
    std::string dst_bits, dst_report, dst_entropy, dst_out, dst_eve, dst_synd;
    std::optional<double> dst_cme;
    std::optional<std::size_t> dst_start;
    bool dst_reveal = false;
    auto* dst = app.add_subcommand("distill", "Hash reconciled blocks into a 256-bit key");
    dst_cfg.attach(dst);
    dst->add_option("--bits", dst_bits, "Reconciled .bits store")->required()->check(CLI::ExistingFile);
    dst->add_option("--report", dst_report, "Decode report; failed frames are skipped")->check(CLI::ExistingFile);
    auto* opt_ent = dst->add_option("--entropy", dst_entropy, "Entropy report supplying CME per bit")
                        ->check(CLI::ExistingFile);
    dst->add_option("--cme", dst_cme, "CME per bit before the safety margin")->excludes(opt_ent);
    dst->add_option("--start", dst_start, "First frame index usable for the key (default: after calibration)");
    dst->add_option("-o,--out", dst_out, "Key manifest JSON")->required();
    dst->add_option("--evidence-eve", dst_eve, "Eve's .iqf store to reference in the manifest")->check(CLI::ExistingFile);
    dst->add_option("--evidence-syndromes", dst_synd, "Syndrome store to reference in the manifest")
        ->check(CLI::ExistingFile);
    dst->add_flag("--reveal", dst_reveal, "Write the raw key into the manifest");

    // challenge
    auto* chl = app.add_subcommand("challenge", "One-time-pad challenge bundles");
    chl->require_subcommand(1);
    std::vector<std::string> mk_keys;
    std::string mk_plain, mk_out;
    auto* mk = chl->add_subcommand("make", "Encrypt 20 plaintexts under 20 revealed keys");
    mk->add_option("--keys", mk_keys, "Key manifests (revealed) covering 4 scenarios x 5 positions")
        ->required()
        ->check(CLI::ExistingFile);
    mk->add_option("--plaintexts", mk_plain, "Plaintext store, 20 x 32 bytes")->required()->check(CLI::ExistingFile);
    mk->add_option("-o,--out", mk_out, "Bundle directory")->required();
    std::string vf_bundle, vf_sub, vf_plain;
    auto* vf = chl->add_subcommand("verify", "Score a submission against the true plaintexts");
    vf->add_option("--bundle", vf_bundle, "Bundle directory")->required()->check(CLI::ExistingDirectory);
    vf->add_option("--submission", vf_sub, "Lines of '<index> <64 hex>'")->required()->check(CLI::ExistingFile);
    vf->add_option("--plaintexts", vf_plain, "True plaintext store")->required()->check(CLI::ExistingFile);
    std::string pt_out;
    auto* pt = chl->add_subcommand("plaintexts", "Write the default plaintext store");
    pt->add_option("-o,--out", pt_out, "Output file")->required();

    // eval
    ConfigArgs evl_cfg;
    std::string evl_out, evl_levels = "4,16", evl_rates = "0.1,0.3,0.5,0.7,0.9", evl_rho = "0.9,0.7,0.5,0.3,0.1",
                         evl_channels = "dynamic,static";
    std::optional<std::size_t> evl_frames;
    bool evl_no_entropy = false;
    auto* evl = app.add_subcommand("eval", "Sweep quantization levels, code rates and eavesdropper correlation");
    evl_cfg.attach(evl);
    evl->add_option("-o,--out", evl_out, "Grid CSV")->required();
    evl->add_option("-n,--frames", evl_frames, "Frames per scenario (overrides run.frames)");
    evl->add_option("--levels", evl_levels, "Comma-separated quantization levels");
    evl->add_option("--rates", evl_rates, "Comma-separated code rates");
    evl->add_option("--eve-correlations", evl_rho, "Comma-separated Bob/Eve tap correlations");
    evl->add_option("--channels", evl_channels, "Comma-separated subset of dynamic,static");
    evl->add_flag("--no-entropy", evl_no_entropy, "Skip the entropy estimate (faster)");

    // pipeline
    ConfigArgs pip_cfg;
    std::string pip_out;
    bool pip_reveal = false;
    auto* pip = app.add_subcommand("pipeline", "Run every stage and write all artifacts to one directory");
    pip_cfg.attach(pip);
    pip->add_option("-o,--out", pip_out, "Output directory (overrides paths.output_dir)");
    pip->add_flag("--reveal", pip_reveal, "Write raw keys into the manifests");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    skg::set_max_threads(threads);

    try {
        if (*sim) {
            auto cfg = sim_cfg.load();
            const std::size_t frames = sim_frames.value_or(cfg.run.frames);
            fs::create_directories(sim_out);
            const skg::ChannelSimulator simulator(cfg.chirp, cfg.scenario);
            skg::simulate_and_extract(simulator, nullptr, frames, sim_out);
            std::cout << "wrote " << frames << " frames per node to " << sim_out << "\n";
        } else if (*ext) {
            auto cfg = ext_cfg.load();
            skg::FrameReader reader(ext_in);
            cfg.filterbank.bandwidth_hz = reader.chirp().bandwidth_hz;
            cfg.filterbank.sample_rate_hz = reader.chirp().sample_rate_hz;
            const skg::Filterbank bank(cfg.filterbank);
            std::vector<skg::PowerVector> rows(reader.size());
            for (std::size_t i = 0; i < reader.size(); ++i) rows[i] = bank.extract_power(reader.read(i));
            skg::write_power_csv(ext_out, rows);
            if (!ext_psd.empty()) {
                const auto frame = reader.read(psd_frame);
                auto out = open_out(ext_psd);
                skg::write_psd_csv(out, skg::welch_psd(frame.samples, reader.chirp().sample_rate_hz, psd_segment,
                                                       psd_overlap));
            }
            std::cout << "extracted " << rows.size() << " frames\n";
        } else if (*qnt) {
            const auto cfg = qnt_cfg.load();
            const auto powers = skg::read_power_csv(qnt_in);
            skg::write_bit_blocks(qnt_out, skg::quantize_all(powers, cfg.quant));
            std::cout << "quantized " << powers.size() << " frames\n";
        } else if (*rec) {
            const auto cfg = rec_cfg.load();
            const auto code = skg::construct_code(cfg.code.block_length, cfg.code.rate, cfg.code.design_param);
            if (!rec_source.empty()) {
                if (rec_synd_out.empty()) throw skg::ConfigError("--source needs --syndrome-out");
                const auto src = skg::read_bit_blocks(rec_source);
                skg::write_syndromes(rec_synd_out, skg::syndromes_for(src, code));
                std::cout << "published " << src.size() << " syndromes of " << code.syndrome_length << " bits\n";
            } else if (!rec_observed.empty()) {
                if (rec_synd.empty() || rec_out.empty()) throw skg::ConfigError("--observed needs --syndrome and --out");
                if (!rec_report.empty() && rec_reference.empty()) throw skg::ConfigError("--report needs --reference");
                const auto obs = skg::read_bit_blocks(rec_observed);
                const auto synd = skg::read_syndromes(rec_synd);
                std::vector<skg::BitBlock> ref;
                if (!rec_reference.empty()) ref = skg::read_bit_blocks(rec_reference);
                double p = 0;
                if (rec_crossover) p = *rec_crossover;
                else if (cfg.code.crossover) p = *cfg.code.crossover;
                else if (!ref.empty()) p = skg::estimate_crossover(ref, obs, cfg.code.calibration_fraction);
                else throw skg::ConfigError("no crossover: pass --crossover, set code.crossover, or give --reference");
                const auto decoded = skg::decode_all(obs, synd, code, p);
                skg::write_bit_blocks(rec_out, decoded);
                if (!rec_report.empty()) skg::write_decode_report(rec_report, skg::decode_records(ref, decoded));
                std::cout << "decoded " << decoded.size() << " blocks at crossover " << p;
                if (!ref.empty()) std::cout << ", FER " << skg::frame_error_rate(ref, decoded);
                std::cout << "\n";
            } else {
                throw skg::ConfigError("reconcile needs --source or --observed");
            }
        } else if (*ent) {
            const auto cfg = ent_cfg.load();
            const auto secret = skg::read_bit_blocks(ent_secret);
            const auto eve = skg::read_power_csv(ent_power, skg::Node::eve);
            const auto synd = skg::read_syndromes(ent_synd);
            if (eve.size() != secret.size() || synd.size() != secret.size())
                throw skg::InputError("entropy: secret, Eve power and syndrome stores differ in frame count");
            std::vector<skg::SecretObservationPair> pairs(secret.size());
            for (std::size_t i = 0; i < pairs.size(); ++i)
                pairs[i] = {secret[i].bits, skg::eve_observation(eve[i], synd[i], cfg.quant, cfg.run.observation)};
            const auto est = skg::conditional_min_entropy(pairs, secret, cfg.entropy);
            const skg::EntropyReportRow row{cfg.run.label, cfg.run.eve_position, cfg.code.rate, est};
            auto out = open_out(ent_out);
            skg::write_entropy_csv(out, std::span(&row, 1));
            std::cout << "CME per bit " << est.cme_per_bit << (est.converged ? "" : " (not converged)") << "\n";
        } else if (*dst) {
            const auto cfg = dst_cfg.load();
            const auto blocks = skg::read_bit_blocks(dst_bits);
            std::vector<std::uint8_t> ok(blocks.size(), 1);
            if (!dst_report.empty()) {
                const auto rows = skg::read_decode_report(dst_report);
                if (rows.size() != blocks.size()) throw skg::InputError("distill: report and blocks differ in length");
                for (std::size_t i = 0; i < rows.size(); ++i) ok[i] = rows[i].success ? 1 : 0;
            }
            double cme = 0;
            if (dst_cme) cme = *dst_cme;
            else if (!dst_entropy.empty()) cme = read_entropy_report(dst_entropy);
            else throw skg::ConfigError("distill needs --entropy or --cme");
            skg::EntropyEstimate est;
            est.cme_per_bit = cme;
            auto km = skg::distill_key(blocks, ok, dst_start.value_or(cfg.key_start_index()), skg::apply_safety_margin(est));
            km.scenario = cfg.run.label;
            km.eve_position = cfg.run.eve_position;
            auto entry = skg::make_manifest_entry(km, cme, dst_reveal);
            const auto manifest_dir = fs::path(dst_out).parent_path();
            entry.eve_frames = evidence_ref(dst_eve, manifest_dir);
            entry.syndromes = evidence_ref(dst_synd, manifest_dir);
            skg::write_key_manifest(dst_out, std::span(&entry, 1));
            std::cout << "key " << entry.fingerprint << " from " << entry.input_length << " bits\n";
        } else if (*mk) {
            std::vector<skg::ChallengeKey> keys;
            const fs::path bundle_dir = mk_out;
            fs::create_directories(bundle_dir);
            for (const auto& m : mk_keys) {
                const auto src_dir = fs::path(m).parent_path();
                for (const auto& e : skg::read_key_manifest(m)) {
                    auto k = skg::challenge_key_from_manifest(e);
                    // Copy evidence into the bundle so it is self-contained.
                    const auto cell = fs::path("evidence") / (k.scenario + "-p" + std::to_string(k.eve_position));
                    for (auto* ref : {&k.eve_frames, &k.syndromes}) {
                        if (!*ref) continue;
                        const auto from = src_dir / (*ref)->path;
                        if (skg::file_sha256(from.string()) != (*ref)->sha256)
                            throw skg::InputError(m + ": evidence " + (*ref)->path + " does not match its hash");
                        fs::create_directories(bundle_dir / cell);
                        const auto rel = cell / fs::path((*ref)->path).filename();
                        fs::copy_file(from, bundle_dir / rel, fs::copy_options::overwrite_existing);
                        (*ref)->path = rel.generic_string();
                    }
                    keys.push_back(std::move(k));
                }
            }
            const auto bundle = skg::make_challenge(keys, skg::read_plaintexts(mk_plain));
            skg::write_bundle(bundle_dir, bundle);
            std::cout << "wrote challenge with " << bundle.entries.size() << " entries to " << mk_out << "\n";
        } else if (*vf) {
            const auto bundle = skg::read_bundle(vf_bundle);
            for (const auto& problem : skg::check_evidence(vf_bundle, bundle)) std::cerr << "warning: " << problem << "\n";
            std::ifstream in(vf_sub);
            const auto report = skg::verify_attempt(bundle, skg::parse_submission(in), skg::read_plaintexts(vf_plain));
            for (std::size_t i = 0; i < report.matched.size(); ++i) {
                if (!report.matched[i]) continue;
                const auto& e = bundle.entries[i];
                std::cout << i << ' ' << e.scenario << " p" << e.eve_position << ' '
                          << (*report.matched[i] ? "correct" : "wrong") << "\n";
            }
            std::cout << "score " << report.correct << "/" << report.total << "\n";
        } else if (*pt) {
            skg::write_plaintexts(pt_out, skg::default_plaintexts());
        } else if (*evl) {
            const auto cfg = evl_cfg.load();
            skg::ExperimentGrid grid;
            grid.chirp = cfg.chirp;
            grid.filterbank = cfg.filterbank;
            grid.frames = evl_frames.value_or(cfg.run.frames);
            grid.seed = cfg.scenario.rng_seed;
            grid.domain = cfg.quant.domain;
            grid.design_param = cfg.code.design_param;
            grid.calibration_fraction = cfg.code.calibration_fraction;
            grid.estimate_entropy = !evl_no_entropy;
            grid.entropy = cfg.entropy;
            grid.levels.clear();
            for (double q : parse_list(evl_levels)) grid.levels.push_back(static_cast<std::size_t>(q));
            grid.rates = parse_list(evl_rates);
            std::stringstream channels(evl_channels);
            std::string kind;
            while (std::getline(channels, kind, ',')) {
                if (kind != "dynamic" && kind != "static") throw skg::ConfigError("--channels: unknown kind " + kind);
                for (double rho : parse_list(evl_rho)) {
                    auto scn = cfg.scenario;
                    scn.dynamic = kind == "dynamic";
                    scn.eve_correlation = rho;
                    std::ostringstream name;
                    name << kind << "-rhoE" << rho;
                    grid.scenarios.push_back({name.str(), scn});
                }
            }
            const auto cells = skg::run_grid(grid);
            auto out = open_out(evl_out);
            skg::write_grid_csv(out, cells);
            std::size_t failed = 0;
            for (const auto& c : cells) failed += c.ok ? 0 : 1;
            std::cout << "evaluated " << cells.size() << " cells (" << failed << " failed) -> " << evl_out << "\n";
        } else if (*pip) {
            auto values = pip_cfg.path.empty() ? skg::ConfigValues{} : skg::read_ini_file(pip_cfg.path);
            std::vector<std::string> overrides = pip_cfg.overrides;
            if (!pip_out.empty()) overrides.push_back("paths.output_dir=" + pip_out);
            if (pip_reveal) overrides.push_back("run.reveal=true");
            const auto cfg = skg::load_config(pip_cfg.path, overrides);
            const auto result = skg::run_pipeline(cfg);
            print_pipeline(cfg, result);
            if (!result.keys_match) return 1;
        }
    } catch (const skg::ConfigError& ex) {
        std::cerr << "configuration error: " << ex.what() << "\n";
        return 2;
    } catch (const skg::StageError& ex) {
        std::cerr << "stage " << ex.stage << " failed: " << ex.what() << "\n";
        return 1;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
    return 0;
}
