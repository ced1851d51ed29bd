// omnitrack command line: track / eval / entropy-report / dssm-check.
//
// Exit codes: 0 success, 1 usage, 2 validation, 3 I/O.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <random>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "omnitrack/dssm.hpp"
#include "omnitrack/metrics.hpp"
#include "omnitrack/mot_io.hpp"
#include "omnitrack/tracklet_manager.hpp"

namespace fs = std::filesystem;
using namespace omnitrack;

namespace {

constexpr const char* kVersion = "0.1.0";

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitIo = 3;

struct SequenceInput {
    std::string name;
    fs::path det_file;
    fs::path meta_file;
};

// A sequence directory holds <name>.txt next to <name>.meta.
std::vector<SequenceInput> discover_sequences(const fs::path& dir) {
    std::vector<SequenceInput> out;
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() != ".txt") continue;
        SequenceInput s;
        s.name = entry.path().stem().string();
        s.det_file = entry.path();
        s.meta_file = entry.path().parent_path() / (s.name + ".meta");
        if (!fs::exists(s.meta_file))
            throw IoError("missing meta sidecar for sequence " + s.name + ": " +
                          s.meta_file.string());
        out.push_back(s);
    }
    std::sort(out.begin(), out.end(),
              [](const SequenceInput& a, const SequenceInput& b) { return a.name < b.name; });
    return out;
}

void write_file_atomic(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw IoError("cannot write " + tmp.string());
        out << content;
    }
    fs::rename(tmp, path);
}

std::string config_snapshot(const TrackerConfig& cfg, const std::string& panoramic_flag) {
    std::ostringstream out;
    out << "mode=" << (cfg.mode == TrackerMode::e2e ? "e2e" : "da") << '\n'
        << "tau_init=" << cfg.tau_init << '\n'
        << "tau_update=" << cfg.tau_update << '\n'
        << "noise=" << cfg.noise_scale << '\n'
        << "gate=" << cfg.gate_radius << '\n'
        << "gate_threshold=" << cfg.gate_threshold << '\n'
        << "max_age=" << cfg.max_age << '\n'
        << "min_hits=" << cfg.min_hits << '\n'
        << "conf_split=" << cfg.conf_split << '\n'
        << "da_rebind=" << (cfg.da_rebind ? 1 : 0) << '\n'
        << "emit_coasted=" << (cfg.emit_coasted ? 1 : 0) << '\n'
        << "seed=" << cfg.rng_seed << '\n'
        << "panoramic=" << panoramic_flag << '\n';
    return out.str();
}

struct TrackArgs {
    std::string det_dir, out_dir;
    TrackerConfig cfg;
    std::string mode = "da";
    std::string panoramic = "auto";
    double min_area = 0.0;  // 0: keep everything
    unsigned jobs = std::thread::hardware_concurrency();
};

int run_track(TrackArgs& a) {
    a.cfg.mode = a.mode == "e2e" ? TrackerMode::e2e : TrackerMode::da;
    a.cfg.validate();

    const auto t0 = std::chrono::steady_clock::now();
    const auto sequences = discover_sequences(a.det_dir);
    fs::create_directories(a.out_dir);

    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::vector<std::string> errors;

    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= sequences.size()) return;
            const SequenceInput& seq = sequences[i];
            try {
                SequenceMeta meta = load_meta_file(seq.meta_file.string());
                if (a.panoramic == "on") meta.panoramic = true;
                if (a.panoramic == "off") meta.panoramic = false;

                FrameMap dets = load_mot_file(seq.det_file.string(), meta,
                                              /*is_gt=*/false,
                                              a.min_area > 0.0 ? a.min_area : 800.0);
                if (a.min_area > 0.0) {
                    for (auto& [f, recs] : dets)
                        recs.erase(std::remove_if(recs.begin(), recs.end(),
                                                  [&](const AnnotationRecord& r) {
                                                      return r.below_min_area;
                                                  }),
                                   recs.end());
                }
                const FrameMap out = run_sequence(dets, meta, a.cfg);
                write_tracks(out, (fs::path(a.out_dir) / (seq.name + ".txt")).string());
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(err_mutex);
                errors.push_back(seq.name + ": " + e.what());
            }
        }
    };

    const unsigned n_workers = std::max(1u, std::min<unsigned>(a.jobs, sequences.size()));
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    if (!errors.empty()) {
        for (const std::string& e : errors) std::cerr << "error: " << e << '\n';
        return kExitValidation;
    }

    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
    std::ostringstream manifest;
    manifest << "tool=omnitrack " << kVersion << '\n'
             << config_snapshot(a.cfg, a.panoramic)
             << "min_area=" << a.min_area << '\n'
             << "det_dir=" << a.det_dir << '\n'
             << "out_dir=" << a.out_dir << '\n';
    for (const auto& s : sequences) manifest << "sequence=" << s.name << '\n';
    manifest << "duration_ms=" << ms << '\n';
    write_file_atomic(fs::path(a.out_dir) / "manifest.txt", manifest.str());
    return kExitOk;
}

struct EvalArgs {
    std::string gt_dir, res_dir, out_file;
    bool allow_partial = false;
    bool csv = false;
    double min_area = 0.0;
};

int run_eval(EvalArgs& a) {
    const auto gts = discover_sequences(a.gt_dir);
    std::vector<std::string> missing;
    std::vector<EvalResult> results;
    for (const SequenceInput& seq : gts) {
        const fs::path res = fs::path(a.res_dir) / (seq.name + ".txt");
        if (!fs::exists(res)) {
            missing.push_back(seq.name);
            continue;
        }
        SequenceMeta meta = load_meta_file(seq.meta_file.string());
        const FrameMap gt = load_mot_file(seq.det_file.string(), meta, /*is_gt=*/true);
        const FrameMap pred = load_mot_file(res.string(), meta, /*is_gt=*/false);
        EvalOptions opt;
        opt.min_box_area = a.min_area;
        results.push_back(evaluate(gt, pred, meta, opt));
    }
    if (!missing.empty() && !a.allow_partial) {
        for (const std::string& m : missing)
            std::cerr << "error: no result file for sequence " << m << '\n';
        return kExitValidation;
    }
    if (results.empty()) {
        std::cerr << "error: no sequences evaluated\n";
        return kExitValidation;
    }

    const std::string text =
        report(results, a.csv ? ReportFormat::csv : ReportFormat::text);
    std::cout << text;
    if (!a.out_file.empty()) write_file_atomic(a.out_file, text);
    return kExitOk;
}

struct EntropyArgs {
    std::string det_dir, manifest_file, out_file;
    TrackerConfig cfg;
    std::string mode = "da";
    std::string panoramic = "auto";
    bool csv = false;
};

// pulls config values back out of a track-run manifest
void apply_manifest(const std::string& path, EntropyArgs& a) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest " + path);
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = line.substr(0, eq), val = line.substr(eq + 1);
        if (key == "mode") a.mode = val;
        else if (key == "tau_init") a.cfg.tau_init = std::stod(val);
        else if (key == "tau_update") a.cfg.tau_update = std::stod(val);
        else if (key == "noise") a.cfg.noise_scale = std::stod(val);
        else if (key == "gate") a.cfg.gate_radius = std::stod(val);
        else if (key == "gate_threshold") a.cfg.gate_threshold = std::stod(val);
        else if (key == "max_age") a.cfg.max_age = std::stoi(val);
        else if (key == "min_hits") a.cfg.min_hits = std::stoi(val);
        else if (key == "conf_split") a.cfg.conf_split = std::stod(val);
        else if (key == "da_rebind") a.cfg.da_rebind = val == "1";
        else if (key == "emit_coasted") a.cfg.emit_coasted = val == "1";
        else if (key == "seed") a.cfg.rng_seed = std::stoull(val);
        else if (key == "panoramic") a.panoramic = val;
        else if (key == "det_dir" && a.det_dir.empty()) a.det_dir = val;
    }
}

int run_entropy(EntropyArgs& a) {
    if (!a.manifest_file.empty()) apply_manifest(a.manifest_file, a);
    if (a.det_dir.empty()) {
        std::cerr << "error: no detection directory (give --det or a manifest)\n";
        return kExitUsage;
    }
    a.cfg.mode = a.mode == "e2e" ? TrackerMode::e2e : TrackerMode::da;
    a.cfg.validate();

    std::ostringstream text, csv;
    csv << "sequence,h_independent,h_feedback,reduction\n";
    bool violation = false;
    for (const SequenceInput& seq : discover_sequences(a.det_dir)) {
        SequenceMeta meta = load_meta_file(seq.meta_file.string());
        if (a.panoramic == "on") meta.panoramic = true;
        if (a.panoramic == "off") meta.panoramic = false;
        const FrameMap dets =
            load_mot_file(seq.det_file.string(), meta, /*is_gt=*/false);
        const EntropyReport rep = entropy_for_sequence(dets, meta, a.cfg);
        const double reduction = rep.h_independent - rep.h_feedback;
        text << "sequence=" << seq.name << '\n'
             << "h_independent=" << rep.h_independent << '\n'
             << "h_feedback=" << rep.h_feedback << '\n'
             << "reduction=" << reduction << '\n';
        csv << seq.name << ',' << rep.h_independent << ',' << rep.h_feedback << ','
            << reduction << '\n';
        if (rep.h_feedback > rep.h_independent + 1e-9) {
            text << "defect=h_feedback exceeds h_independent\n";
            violation = true;
        }
    }
    std::cout << text.str();
    if (!a.out_file.empty()) write_file_atomic(a.out_file, a.csv ? csv.str() : text.str());
    return violation ? kExitValidation : kExitOk;
}

struct DssmArgs {
    std::string params_file;
    std::uint64_t seed = 7;
    int trials = 20;
};

int run_dssm_check(DssmArgs& a) {
    int failures = 0;
    auto check = [&](bool ok, const std::string& what) {
        std::cout << (ok ? "[ok]   " : "[FAIL] ") << what << '\n';
        if (!ok) ++failures;
    };

    std::mt19937_64 rng(a.seed);
    auto unif = [&]() { return (rng() >> 11) * (1.0 / 9007199254740992.0) * 2.0 - 1.0; };

    for (int trial = 0; trial < a.trials; ++trial) {
        const int C = 1 + static_cast<int>(rng() % 3);
        const int Wd = 2 + static_cast<int>(rng() % 5);
        const int Hd = 2 + static_cast<int>(rng() % 5);
        DssmParams p = a.params_file.empty()
                           ? DssmParams::random(C, C, C, rng())
                           : [&] {
                                 std::ifstream in(a.params_file);
                                 std::stringstream ss;
                                 ss << in.rdbuf();
                                 return DssmParams::from_text(ss.str());
                             }();
        if (!a.params_file.empty() && p.channels != C) continue;

        FeatureMap u(1, C, Wd, Hd), v(1, C, Wd, Hd);
        for (auto& x : u.data) x = unif();
        for (auto& x : v.data) x = unif();

        const auto [d, s] = distortion_scale(u, p);
        bool sig_ok = d.same_shape(u) && s.same_shape(u);
        for (double x : s.data) sig_ok = sig_ok && x > 0.0 && x < 1.0;
        check(sig_ok, "sigmoid range + shape, trial " + std::to_string(trial));

        const FeatureMap su = ssm_scan(u, p), sv = ssm_scan(v, p);
        FeatureMap mix(1, C, Wd, Hd);
        for (std::size_t i = 0; i < mix.data.size(); ++i)
            mix.data[i] = 0.3 * u.data[i] - 1.7 * v.data[i];
        const FeatureMap smix = ssm_scan(mix, p);
        double err = 0.0;
        for (std::size_t i = 0; i < mix.data.size(); ++i)
            err = std::max(err,
                           std::abs(smix.data[i] - (0.3 * su.data[i] - 1.7 * sv.data[i])));
        check(err <= 1e-10, "scan linearity, trial " + std::to_string(trial));

        const FeatureMap out = dssm_forward(u, p);
        check(out.same_shape(u), "pipeline shape, trial " + std::to_string(trial));
    }
    std::cout << (failures == 0 ? "all checks passed\n"
                                : std::to_string(failures) + " checks failed\n");
    return failures == 0 ? kExitOk : kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"omnitrack: panoramic multi-object tracking and evaluation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);
    app.set_config("--config")->envname("OMNITRACK_CONFIG");

    auto in01 = CLI::Range(0.0, 1.0);

    TrackArgs ta;
    CLI::App* track = app.add_subcommand("track", "run the tracker over detection files");
    track->add_option("--det", ta.det_dir, "directory of <seq>.txt + <seq>.meta")->required();
    track->add_option("--out", ta.out_dir, "output directory")->required();
    track->add_option("--mode", ta.mode)->check(CLI::IsMember({"e2e", "da"}))
        ->envname("OMNITRACK_MODE");
    track->add_option("--tau-init", ta.cfg.tau_init)->check(in01)
        ->envname("OMNITRACK_TAU_INIT");
    track->add_option("--tau-update", ta.cfg.tau_update)->check(in01)
        ->envname("OMNITRACK_TAU_UPDATE");
    track->add_option("--noise", ta.cfg.noise_scale)->check(CLI::NonNegativeNumber)
        ->envname("OMNITRACK_NOISE");
    track->add_option("--gate", ta.cfg.gate_radius)->check(CLI::PositiveNumber);
    track->add_option("--gate-threshold", ta.cfg.gate_threshold)->check(in01);
    track->add_option("--max-age", ta.cfg.max_age)->check(CLI::PositiveNumber);
    track->add_option("--min-hits", ta.cfg.min_hits)->check(CLI::PositiveNumber);
    track->add_option("--conf-split", ta.cfg.conf_split)->check(in01);
    track->add_flag("--da-rebind", ta.cfg.da_rebind);
    track->add_flag("--emit-coasted", ta.cfg.emit_coasted);
    track->add_option("--seed", ta.cfg.rng_seed)->envname("OMNITRACK_SEED");
    track->add_option("--panoramic", ta.panoramic)->check(CLI::IsMember({"on", "off", "auto"}));
    track->add_option("--min-area", ta.min_area, "drop detections below this area (px^2)");
    track->add_option("--jobs", ta.jobs)->check(CLI::PositiveNumber);

    EvalArgs ea;
    CLI::App* eval = app.add_subcommand("eval", "evaluate tracker output against gt");
    eval->add_option("--gt", ea.gt_dir, "gt directory of <seq>.txt + <seq>.meta")->required();
    eval->add_option("--res", ea.res_dir, "result directory of <seq>.txt")->required();
    eval->add_option("--out", ea.out_file, "also write the report here");
    eval->add_flag("--allow-partial", ea.allow_partial);
    eval->add_flag("--csv", ea.csv);
    eval->add_option("--min-area", ea.min_area);

    EntropyArgs na;
    CLI::App* ent = app.add_subcommand("entropy-report", "feedback entropy diagnostics");
    ent->add_option("--det", na.det_dir, "detection directory");
    ent->add_option("--manifest", na.manifest_file, "manifest of a completed track run");
    ent->add_option("--out", na.out_file);
    ent->add_option("--mode", na.mode)->check(CLI::IsMember({"e2e", "da"}));
    ent->add_option("--gate", na.cfg.gate_radius)->check(CLI::PositiveNumber);
    ent->add_option("--noise", na.cfg.noise_scale)->check(CLI::NonNegativeNumber);
    ent->add_option("--seed", na.cfg.rng_seed);
    ent->add_option("--panoramic", na.panoramic)->check(CLI::IsMember({"on", "off", "auto"}));
    ent->add_flag("--csv", na.csv);

    DssmArgs da;
    CLI::App* dc = app.add_subcommand("dssm-check", "run DynamicSSM invariants on random maps");
    dc->add_option("--params", da.params_file, "parameter file (text format)");
    dc->add_option("--seed", da.seed);
    dc->add_option("--trials", da.trials)->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (track->parsed()) return run_track(ta);
        if (eval->parsed()) return run_eval(ea);
        if (ent->parsed()) return run_entropy(na);
        if (dc->parsed()) return run_dssm_check(da);
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return kExitIo;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    }
    return kExitUsage;
}
