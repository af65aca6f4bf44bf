#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstdint>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "encsim/harness.hpp"
#include "encsim/personality.hpp"

namespace py = pybind11;
using namespace encsim;
using nlohmann::json;

namespace {

json parse_json(const std::string& text, const char* what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("invalid JSON ") + what + ": " + e.what());
    }
}

}  // namespace

PYBIND11_MODULE(encsim, m) {
    m.doc() = "Encounter-driven mobility and DTN forwarding simulator";

    auto base = py::register_exception<Error>(m, "Error");
    py::register_exception<ConfigError>(m, "ConfigError", base);
    py::register_exception<IoError>(m, "IoError", base);
    py::register_exception<NoOverlap>(m, "NoOverlap", base);

    py::class_<Vec2>(m, "Vec2")
        .def(py::init<>())
        .def(py::init([](double x, double y) { return Vec2{x, y}; }), py::arg("x"), py::arg("y"))
        .def_readwrite("x", &Vec2::x)
        .def_readwrite("y", &Vec2::y)
        .def("__repr__", [](const Vec2& v) {
            return "Vec2(" + format_double(v.x) + ", " + format_double(v.y) + ")";
        });

    py::class_<EncounterRecord>(m, "EncounterRecord")
        .def(py::init([](NodeId a, NodeId b, std::int64_t start_s, std::int64_t end_s) {
                 return EncounterRecord{std::move(a), std::move(b), start_s, end_s};
             }),
             py::arg("a"), py::arg("b"), py::arg("start_s"), py::arg("end_s"))
        .def_readonly("a", &EncounterRecord::a)
        .def_readonly("b", &EncounterRecord::b)
        .def_readonly("start_s", &EncounterRecord::start_s)
        .def_readonly("end_s", &EncounterRecord::end_s);

    py::class_<EncounterTrace>(m, "EncounterTrace")
        .def_readonly("records", &EncounterTrace::records)
        .def_readonly("horizon_s", &EncounterTrace::horizon_s)
        .def_readonly("nodes", &EncounterTrace::nodes);

    py::class_<VisitRecord>(m, "VisitRecord")
        .def(py::init([](NodeId node, std::string location, std::int64_t start_s,
                         std::int64_t end_s) {
                 return VisitRecord{std::move(node), std::move(location), start_s, end_s};
             }),
             py::arg("node"), py::arg("location"), py::arg("start_s"), py::arg("end_s"))
        .def_readonly("node", &VisitRecord::node)
        .def_readonly("location", &VisitRecord::location)
        .def_readonly("start_s", &VisitRecord::start_s)
        .def_readonly("end_s", &VisitRecord::end_s);

    py::enum_<BinMode>(m, "BinMode")
        .value("indicator", BinMode::indicator)
        .value("count", BinMode::count)
        .value("duration", BinMode::duration);

    py::class_<BinnedSeries>(m, "BinnedSeries")
        .def_readonly("values", &BinnedSeries::values)
        .def_readonly("bin_width_s", &BinnedSeries::bin_width_s)
        .def_readonly("mode", &BinnedSeries::mode);

    m.def(
        "make_trace",
        [](std::vector<EncounterRecord> records, std::optional<std::int64_t> horizon_s) {
            return make_trace(std::move(records), horizon_s);
        },
        py::arg("records"), py::arg("horizon_s") = std::nullopt);
    m.def("parse_encounter_csv", [](const std::string& text) {
        std::istringstream in(text);
        return parse_encounter_csv(in);
    });
    m.def("write_encounter_csv", [](const EncounterTrace& trace) {
        std::ostringstream out;
        write_encounter_csv(trace, out);
        return out.str();
    });
    m.def(
        "derive_encounters_from_visits",
        [](const std::vector<VisitRecord>& visits, std::int64_t min_overlap_s) {
            return derive_encounters_from_visits(visits, min_overlap_s);
        },
        py::arg("visits"), py::arg("min_overlap_s") = 1);
    m.def("bin_pair_series", &bin_pair_series, py::arg("trace"), py::arg("a"), py::arg("b"),
          py::arg("bin_width_s"), py::arg("mode") = BinMode::indicator);
    m.def("bin_node_series", &bin_node_series, py::arg("trace"), py::arg("node"),
          py::arg("bin_width_s"), py::arg("mode") = BinMode::indicator);
    m.def("pairs_with_records", &pairs_with_records);

    py::class_<Spectrum>(m, "Spectrum")
        .def_readonly("magnitudes", &Spectrum::magnitudes)
        .def_readonly("phases", &Spectrum::phases)
        .def_readonly("n", &Spectrum::n)
        .def_readonly("bin_width_s", &Spectrum::bin_width_s);

    py::class_<Peak>(m, "Peak")
        .def_readonly("k", &Peak::k)
        .def_readonly("magnitude", &Peak::magnitude)
        .def_readonly("phase", &Peak::phase);

    py::class_<PeakSet>(m, "PeakSet").def_readonly("peaks", &PeakSet::peaks);

    py::class_<PeakPolicy>(m, "PeakPolicy")
        .def(py::init([](double c, std::size_t max_peaks) { return PeakPolicy{c, max_peaks}; }),
             py::arg("c") = 2.0, py::arg("max_peaks") = 4)
        .def_readwrite("c", &PeakPolicy::c)
        .def_readwrite("max_peaks", &PeakPolicy::max_peaks);

    py::class_<PeriodicComponent>(m, "PeriodicComponent")
        .def(py::init([](double period_s, double magnitude, double phase) {
                 return PeriodicComponent{period_s, magnitude, phase};
             }),
             py::arg("period_s"), py::arg("magnitude") = 1.0, py::arg("phase") = 0.0)
        .def_readonly("period_s", &PeriodicComponent::period_s)
        .def_readonly("magnitude", &PeriodicComponent::magnitude)
        .def_readonly("phase", &PeriodicComponent::phase);

    m.def("dft", &dft);
    m.def("detect_peaks", &detect_peaks, py::arg("spectrum"), py::arg("policy") = PeakPolicy{});
    m.def("to_periods", &to_periods, py::arg("peaks"), py::arg("n"), py::arg("bin_width_s"));

    py::class_<Personality>(m, "Personality")
        .def_readonly("node", &Personality::node)
        .def_readonly("drag", &Personality::drag)
        .def("peers", [](const Personality& p) {
            std::vector<NodeId> out;
            for (const auto& [peer, pp] : p.pairs) {
                (void)pp;
                out.push_back(peer);
            }
            return out;
        });

    py::class_<FitConfig>(m, "FitConfig")
        .def(py::init<>())
        .def_readwrite("bin_width_s", &FitConfig::bin_width_s)
        .def_readwrite("peaks", &FitConfig::peaks)
        .def_readwrite("top_m", &FitConfig::top_m)
        .def_readwrite("default_drag", &FitConfig::default_drag)
        .def_readwrite("intent_threshold", &FitConfig::intent_threshold);

    m.def("fit_personality", &fit_personality, py::arg("trace"), py::arg("node"),
          py::arg("config") = FitConfig{});
    m.def("personality_to_json",
          [](const Personality& p) { return personality_to_json(p).dump(2); });
    m.def("personality_from_json", [](const std::string& text) {
        return personality_from_json(parse_json(text, "personality"));
    });

    py::class_<BehavioralProfile>(m, "BehavioralProfile")
        .def(py::init([](std::map<std::string, double> weights) {
                 return BehavioralProfile{std::move(weights)};
             }),
             py::arg("weights"))
        .def_readonly("weights", &BehavioralProfile::weights);

    m.def("similarity", &similarity);
    m.def("build_profile", [](const std::vector<VisitRecord>& visits, const NodeId& node) {
        return build_profile(visits, node);
    });

    py::class_<Arena>(m, "Arena")
        .def(py::init<>())
        .def_readwrite("width", &Arena::width)
        .def_readwrite("height", &Arena::height)
        .def_readwrite("range", &Arena::range)
        .def_readwrite("v_max", &Arena::v_max)
        .def_readwrite("dt", &Arena::dt);

    py::enum_<EventType>(m, "EventType").value("start", EventType::start).value("end", EventType::end);

    py::class_<EncounterEvent>(m, "EncounterEvent")
        .def(py::init([](EventType type, NodeId a, NodeId b, double t_s) {
                 return EncounterEvent{type, std::move(a), std::move(b), t_s};
             }),
             py::arg("type"), py::arg("a"), py::arg("b"), py::arg("t_s"))
        .def_readonly("type", &EncounterEvent::type)
        .def_readonly("a", &EncounterEvent::a)
        .def_readonly("b", &EncounterEvent::b)
        .def_readonly("t_s", &EncounterEvent::t_s);

    py::class_<InferConfig>(m, "InferConfig")
        .def(py::init<>())
        .def_readwrite("slot_width_s", &InferConfig::slot_width_s)
        .def_readwrite("max_iters", &InferConfig::max_iters)
        .def_readwrite("step_size", &InferConfig::step_size)
        .def_readwrite("seed", &InferConfig::seed);

    py::class_<PositionTrace>(m, "PositionTrace")
        .def_readonly("nodes", &PositionTrace::nodes)
        .def_readonly("positions", &PositionTrace::positions)
        .def_readonly("slot_width_s", &PositionTrace::slot_width_s)
        .def_readonly("satisfaction", &PositionTrace::satisfaction)
        .def_readonly("infeasible_slots", &PositionTrace::infeasible_slots);

    m.def("infer_plausible_positions", &infer_plausible_positions, py::arg("trace"),
          py::arg("arena") = Arena{}, py::arg("config") = InferConfig{});

    py::class_<LatencyStats>(m, "LatencyStats")
        .def_readonly("min_s", &LatencyStats::min_s)
        .def_readonly("median_s", &LatencyStats::median_s)
        .def_readonly("max_s", &LatencyStats::max_s);

    py::class_<Metrics>(m, "Metrics")
        .def_readonly("delivery_ratio", &Metrics::delivery_ratio)
        .def_readonly("latency", &Metrics::latency)
        .def_readonly("forwards", &Metrics::forwards)
        .def_readonly("encounters", &Metrics::encounters)
        .def_readonly("encounters_total", &Metrics::encounters_total)
        .def_readonly("buffer_evictions", &Metrics::buffer_evictions)
        .def_readonly("delivered", &Metrics::delivered)
        .def_readonly("qualifying", &Metrics::qualifying)
        .def_readonly("created", &Metrics::created)
        .def_readonly("expired", &Metrics::expired);

    py::class_<DeliveryRecord>(m, "DeliveryRecord")
        .def_readonly("bundle_id", &DeliveryRecord::bundle_id)
        .def_readonly("node", &DeliveryRecord::node)
        .def_readonly("t_s", &DeliveryRecord::t_s);

    py::class_<RunLogs>(m, "RunLogs")
        .def_readonly("positions_csv", &RunLogs::positions_csv)
        .def_readonly("encounters_csv", &RunLogs::encounters_csv)
        .def_readonly("messages_csv", &RunLogs::messages_csv)
        .def_readonly("generated", &RunLogs::generated)
        .def_readonly("deliveries", &RunLogs::deliveries);

    py::class_<RunResult>(m, "RunResult")
        .def_readonly("logs", &RunResult::logs)
        .def_readonly("metrics", &RunResult::metrics);

    py::class_<RouteResult>(m, "RouteResult")
        .def_readonly("messages_csv", &RouteResult::messages_csv)
        .def_readonly("metrics", &RouteResult::metrics)
        .def_readonly("deliveries", &RouteResult::deliveries);

    py::class_<SimConfig>(m, "SimConfig")
        .def_readwrite("arena", &SimConfig::arena)
        .def_readwrite("duration_s", &SimConfig::duration_s)
        .def_readwrite("seed", &SimConfig::seed)
        .def_readwrite("contact_refresh_s", &SimConfig::contact_refresh_s)
        .def_readwrite("buffer_capacity", &SimConfig::buffer_capacity)
        .def("node_ids", [](const SimConfig& cfg) {
            std::vector<NodeId> out;
            for (const auto& n : cfg.nodes) out.push_back(n.id);
            return out;
        });

    m.def(
        "load_sim_config",
        [](const std::string& text, const std::filesystem::path& base_dir) {
            return load_sim_config(parse_json(text, "config"), base_dir);
        },
        py::arg("text"), py::arg("base_dir") = std::filesystem::path("."));
    m.def("load_sim_config_file", &load_sim_config_file);
    m.def("run_scenario", &run_scenario);
    m.def("route_encounters", &route_encounters);
    m.def("parse_encounter_events_csv", [](const std::string& text) {
        std::istringstream in(text);
        return parse_encounter_events_csv(in);
    });
    m.def("encounter_events_csv", &encounter_events_csv);
    m.def("events_to_trace", &events_to_trace, py::arg("events"), py::arg("horizon_s"));
    m.def("metrics_json", [](const Metrics& metrics) { return metrics_to_json(metrics).dump(2); });
    m.def(
        "fidelity_report",
        [](const EncounterTrace& generated, const SimConfig& cfg, std::int64_t bin_width_s,
           double peak_c, std::size_t max_peaks) {
            SpectrumConfig sc;
            sc.bin_width_s = bin_width_s;
            sc.peaks = PeakPolicy{peak_c, max_peaks};
            return fidelity_to_json(evaluate_fidelity(generated, source_components_from(cfg), sc))
                .dump(2);
        },
        py::arg("generated"), py::arg("config"), py::arg("bin_width_s") = 60,
        py::arg("peak_c") = 1.0, py::arg("max_peaks") = 16);
    m.def("format_double", &format_double);
}
