#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "encsim/harness.hpp"
#include "encsim/personality.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace encsim;

namespace {

int log_level() {
    const char* v = std::getenv("ENCSIM_LOG");
    if (!v || !*v) return 1;
    std::string s = v;
    if (s == "debug") return 3;
    if (s == "info" || s == "1") return 2;
    if (s == "off" || s == "0") return 0;
    return 1;
}

void info(const std::string& msg) {
    if (log_level() >= 2) std::cerr << "[encsim] " << msg << "\n";
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
    out.flush();
    if (!out) throw IoError("write failed for " + path.string());
    info("wrote " + path.string());
}

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

EncounterTrace read_trace(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    return parse_encounter_csv(in);
}

json peaks_json(const PeakSet& peaks, std::size_t n, std::int64_t bin_width_s) {
    json arr = json::array();
    for (const auto& p : peaks.peaks) {
        double period = static_cast<double>(n) * static_cast<double>(bin_width_s) /
                        static_cast<double>(p.k);
        arr.push_back(
            {{"k", p.k}, {"period_s", period}, {"magnitude", p.magnitude}, {"phase", p.phase}});
    }
    return arr;
}

struct AnalyzeArgs {
    std::string trace;
    std::string out_dir = ".";
    std::int64_t bin = 86400;
    double peak_c = 2.0;
    std::size_t max_peaks = 4;
    bool node_level = false;
};

int cmd_analyze(const AnalyzeArgs& a) {
    EncounterTrace trace = read_trace(a.trace);
    PeakPolicy policy{a.peak_c, a.max_peaks};
    json out = json::array();
    if (a.node_level) {
        for (const auto& node : trace.nodes) {
            auto series = bin_node_series(trace, node, a.bin, BinMode::indicator);
            if (series.values.size() < 2) continue;
            auto spec = dft(series);
            auto peaks = detect_peaks(spec, policy);
            out.push_back({{"node", node},
                           {"n", spec.n},
                           {"bin_width_s", a.bin},
                           {"peaks", peaks_json(peaks, spec.n, a.bin)}});
        }
    } else {
        for (const auto& pair : pairs_with_records(trace)) {
            auto series = bin_pair_series(trace, pair.first, pair.second, a.bin, BinMode::indicator);
            if (series.values.size() < 2) continue;
            auto spec = dft(series);
            auto peaks = detect_peaks(spec, policy);
            out.push_back({{"pair", {pair.first, pair.second}},
                           {"n", spec.n},
                           {"bin_width_s", a.bin},
                           {"peaks", peaks_json(peaks, spec.n, a.bin)}});
        }
    }
    ensure_dir(a.out_dir);
    write_file(fs::path(a.out_dir) / "analysis.json", dump(out));
    return 0;
}

struct FitArgs {
    std::string trace;
    std::string out_dir = ".";
    std::int64_t bin = 86400;
    double peak_c = 2.0;
    std::size_t max_peaks = 4;
    std::size_t top_m = 4;
    double drag = 0.0;
    double intent_threshold = 0.0;
};

int cmd_fit(const FitArgs& a) {
    EncounterTrace trace = read_trace(a.trace);
    FitConfig cfg;
    cfg.bin_width_s = a.bin;
    cfg.peaks = PeakPolicy{a.peak_c, a.max_peaks};
    cfg.top_m = a.top_m;
    cfg.default_drag = a.drag;
    cfg.intent_threshold = a.intent_threshold;
    ensure_dir(a.out_dir);
    for (const auto& node : trace.nodes) {
        Personality p = fit_personality(trace, node, cfg);
        write_file(fs::path(a.out_dir) / (node + ".personality.json"), dump(personality_to_json(p)));
    }
    return 0;
}

void apply_mode_overrides(SimConfig& cfg, const std::optional<std::string>& mode,
                          const std::optional<double>& sigma, const std::optional<double>& epsilon) {
    if (!mode && !sigma && !epsilon) return;
    for (auto& b : cfg.bundles) {
        if (mode) {
            if (*mode == "targeted") {
                b.mode = TargetedGradient{};
            } else if (*mode == "interest") {
                b.mode = InterestDissemination{};
            } else {
                throw ConfigError("--mode must be 'targeted' or 'interest'");
            }
        }
        std::visit(
            [&](auto& m) {
                using T = std::decay_t<decltype(m)>;
                if (sigma) m.sigma = *sigma;
                if constexpr (std::is_same_v<T, TargetedGradient>) {
                    if (epsilon) m.epsilon = *epsilon;
                }
            },
            b.mode);
    }
    validate(cfg);
}

struct SimulateArgs {
    std::string config;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    std::optional<std::string> mode;
    std::optional<double> sigma;
    std::optional<double> epsilon;
};

int cmd_simulate(const SimulateArgs& a) {
    SimConfig cfg = load_sim_config_file(a.config);
    if (a.seed) cfg.seed = *a.seed;
    apply_mode_overrides(cfg, a.mode, a.sigma, a.epsilon);
    info("simulating " + std::to_string(cfg.nodes.size()) + " nodes for " +
         format_double(cfg.duration_s) + "s");
    RunResult run = run_scenario(cfg);
    ensure_dir(a.out_dir);
    fs::path dir(a.out_dir);
    write_file(dir / "positions.csv", run.logs.positions_csv);
    write_file(dir / "encounters.csv", run.logs.encounters_csv);
    write_file(dir / "messages.csv", run.logs.messages_csv);
    std::ostringstream trace_csv;
    write_encounter_csv(run.logs.generated, trace_csv);
    write_file(dir / "trace.csv", trace_csv.str());
    write_file(dir / "metrics.json", dump(metrics_to_json(run.metrics)));
    return 0;
}

struct InferArgs {
    std::string trace;
    std::string out_dir = ".";
    std::int64_t slot = 60;
    int max_iters = 200;
    double step = 0.5;
    std::uint64_t seed = 0;
    double width = 100.0;
    double height = 100.0;
    double range = 10.0;
    double v_max = 0.5;
};

int cmd_infer(const InferArgs& a) {
    EncounterTrace trace = read_trace(a.trace);
    Arena arena;
    arena.width = a.width;
    arena.height = a.height;
    arena.range = a.range;
    arena.v_max = a.v_max;
    InferConfig cfg;
    cfg.slot_width_s = a.slot;
    cfg.max_iters = a.max_iters;
    cfg.step_size = a.step;
    cfg.seed = a.seed;
    PositionTrace positions = infer_plausible_positions(trace, arena, cfg);

    std::string csv = "slot,node,x,y\n";
    for (std::size_t s = 0; s < positions.positions.size(); ++s) {
        for (std::size_t i = 0; i < positions.nodes.size(); ++i) {
            const Vec2& p = positions.positions[s][i];
            csv += std::to_string(s) + "," + positions.nodes[i] + "," + format_double(p.x) + "," +
                   format_double(p.y) + "\n";
        }
    }
    double min_sat = 1.0;
    for (double s : positions.satisfaction) min_sat = std::min(min_sat, s);
    json report{{"nodes", positions.nodes},
                {"slot_width_s", positions.slot_width_s},
                {"slots", positions.positions.size()},
                {"satisfaction", positions.satisfaction},
                {"min_satisfaction", min_sat},
                {"infeasible_slots", positions.infeasible_slots}};
    ensure_dir(a.out_dir);
    write_file(fs::path(a.out_dir) / "positions.csv", csv);
    write_file(fs::path(a.out_dir) / "inference.json", dump(report));
    return 0;
}

struct RouteArgs {
    std::string encounters;
    std::string config;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    std::optional<std::string> mode;
    std::optional<double> sigma;
    std::optional<double> epsilon;
};

int cmd_route(const RouteArgs& a) {
    SimConfig cfg = load_sim_config_file(a.config);
    if (a.seed) cfg.seed = *a.seed;
    apply_mode_overrides(cfg, a.mode, a.sigma, a.epsilon);
    std::ifstream in(a.encounters);
    if (!in) throw IoError("cannot read " + a.encounters);
    auto events = parse_encounter_events_csv(in);
    info("routing over " + std::to_string(events.size()) + " encounter events");
    RouteResult r = route_encounters(events, cfg);
    ensure_dir(a.out_dir);
    fs::path dir(a.out_dir);
    write_file(dir / "messages.csv", r.messages_csv);
    write_file(dir / "metrics.json", dump(metrics_to_json(r.metrics)));
    return 0;
}

struct ReportArgs {
    std::string config;
    std::string out_dir = ".";
    std::int64_t bin = 60;
    double peak_c = 1.0;
    std::size_t max_peaks = 16;
};

int cmd_report(const ReportArgs& a) {
    SimConfig cfg = load_sim_config_file(a.config);
    fs::path dir(a.out_dir);
    std::ifstream enc_in(dir / "encounters.csv");
    if (!enc_in) throw IoError("cannot read " + (dir / "encounters.csv").string());
    auto events = parse_encounter_events_csv(enc_in);
    std::ifstream msg_in(dir / "messages.csv");
    if (!msg_in) throw IoError("cannot read " + (dir / "messages.csv").string());
    auto messages = parse_message_events_csv(msg_in);

    Metrics metrics = metrics_from_logs(events, messages, cfg);
    EncounterTrace generated = events_to_trace(events, cfg.duration_s);
    SpectrumConfig scfg;
    scfg.bin_width_s = a.bin;
    scfg.peaks = PeakPolicy{a.peak_c, a.max_peaks};
    FidelityReport fidelity = evaluate_fidelity(generated, source_components_from(cfg), scfg);

    json out{{"metrics", metrics_to_json(metrics)}, {"fidelity", fidelity_to_json(fidelity)}};
    write_file(dir / "report.json", dump(out));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"encounter-driven mobility and DTN forwarding simulator"};
    app.require_subcommand(1);

    AnalyzeArgs analyze_args;
    auto* analyze = app.add_subcommand("analyze", "per-pair encounter spectra and peaks");
    analyze->add_option("--trace", analyze_args.trace, "encounter CSV")->required();
    analyze->add_option("--bin", analyze_args.bin, "bin width in seconds");
    analyze->add_option("--peak-c", analyze_args.peak_c, "peak threshold multiplier");
    analyze->add_option("--max-peaks", analyze_args.max_peaks, "max peaks per spectrum");
    analyze->add_flag("--node-level", analyze_args.node_level, "aggregate per node");
    analyze->add_option("--out-dir", analyze_args.out_dir, "output directory");

    FitArgs fit_args;
    auto* fit = app.add_subcommand("fit", "fit per-node personalities from a trace");
    fit->add_option("--trace", fit_args.trace, "encounter CSV")->required();
    fit->add_option("--bin", fit_args.bin, "bin width in seconds");
    fit->add_option("--peak-c", fit_args.peak_c, "peak threshold multiplier");
    fit->add_option("--max-peaks", fit_args.max_peaks, "max peaks per spectrum");
    fit->add_option("--top-m", fit_args.top_m, "components kept per pair");
    fit->add_option("--drag", fit_args.drag, "drag assigned to fitted personalities");
    fit->add_option("--intent-threshold", fit_args.intent_threshold, "intent activation threshold");
    fit->add_option("--out-dir", fit_args.out_dir, "output directory");

    SimulateArgs sim_args;
    auto* simulate = app.add_subcommand("simulate", "run a scenario end to end");
    simulate->add_option("--config", sim_args.config, "scenario JSON")->required();
    simulate->add_option("--seed", sim_args.seed, "override the scenario seed");
    simulate->add_option("--mode", sim_args.mode, "override bundle mode (targeted|interest)");
    simulate->add_option("--sigma", sim_args.sigma, "override bundle sigma");
    simulate->add_option("--epsilon", sim_args.epsilon, "override targeted epsilon");
    simulate->add_option("--out-dir", sim_args.out_dir, "output directory");

    InferArgs infer_args;
    auto* infer = app.add_subcommand("infer", "plausible positions from a contact trace");
    infer->add_option("--trace", infer_args.trace, "encounter CSV")->required();
    infer->add_option("--slot", infer_args.slot, "slot width in seconds");
    infer->add_option("--max-iters", infer_args.max_iters, "relaxation sweeps per slot");
    infer->add_option("--step", infer_args.step, "relaxation step size");
    infer->add_option("--seed", infer_args.seed, "placement seed");
    infer->add_option("--width", infer_args.width, "arena width");
    infer->add_option("--height", infer_args.height, "arena height");
    infer->add_option("--range", infer_args.range, "contact range");
    infer->add_option("--v-max", infer_args.v_max, "speed cap");
    infer->add_option("--out-dir", infer_args.out_dir, "output directory");

    RouteArgs route_args;
    auto* route = app.add_subcommand("route", "replay forwarding over an encounter event log");
    route->add_option("--encounters", route_args.encounters, "encounter event CSV")->required();
    route->add_option("--config", route_args.config, "scenario JSON")->required();
    route->add_option("--seed", route_args.seed, "override the scenario seed");
    route->add_option("--mode", route_args.mode, "override bundle mode (targeted|interest)");
    route->add_option("--sigma", route_args.sigma, "override bundle sigma");
    route->add_option("--epsilon", route_args.epsilon, "override targeted epsilon");
    route->add_option("--out-dir", route_args.out_dir, "output directory");

    ReportArgs report_args;
    auto* report = app.add_subcommand("report", "metrics and spectral fidelity for run logs");
    report->add_option("--config", report_args.config, "scenario JSON")->required();
    report->add_option("--bin", report_args.bin, "fidelity bin width in seconds");
    report->add_option("--peak-c", report_args.peak_c, "peak threshold multiplier");
    report->add_option("--max-peaks", report_args.max_peaks, "max peaks per spectrum");
    report->add_option("--out-dir", report_args.out_dir, "directory holding run logs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (analyze->parsed()) return cmd_analyze(analyze_args);
        if (fit->parsed()) return cmd_fit(fit_args);
        if (simulate->parsed()) return cmd_simulate(sim_args);
        if (infer->parsed()) return cmd_infer(infer_args);
        if (route->parsed()) return cmd_route(route_args);
        if (report->parsed()) return cmd_report(report_args);
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
