#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "encsim/mobility.hpp"
#include "encsim/profilecast.hpp"

namespace encsim {

struct NodeSpec {
    NodeId id;
    Personality personality;
    BehavioralProfile profile;
    std::optional<BehavioralProfile> interest;
    std::optional<Vec2> pos;  // seeded uniform placement when absent
};

struct SimConfig {
    Arena arena;
    double duration_s = 0.0;
    std::uint64_t seed = 0;
    double contact_refresh_s = 30.0;
    std::size_t buffer_capacity = 1024;
    std::vector<NodeSpec> nodes;
    std::vector<MessageBundle> bundles;  // injected at each bundle's created_s
};

// Parses a scenario document; personality entries may be inline objects or
// paths resolved against base_dir. Throws ConfigError with field diagnostics.
SimConfig load_sim_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
SimConfig load_sim_config_file(const std::filesystem::path& path);
void validate(const SimConfig& cfg);

struct LatencyStats {
    double min_s = 0.0;
    double median_s = 0.0;
    double max_s = 0.0;
};

struct Metrics {
    double delivery_ratio = 1.0;
    LatencyStats latency;
    std::size_t forwards = 0;
    std::map<NodePair, std::size_t> encounters;
    std::size_t encounters_total = 0;
    std::size_t buffer_evictions = 0;
    std::size_t delivered = 0;
    std::size_t qualifying = 0;
    std::size_t created = 0;
    std::size_t expired = 0;
};

struct DeliveryRecord {
    std::string bundle_id;
    NodeId node;
    double t_s = 0.0;
};

struct RunLogs {
    std::string positions_csv;   // tick,node,x,y,heading,state
    std::string encounters_csv;  // type,node_a,node_b,t_s
    std::string messages_csv;    // event,bundle_id,from,to,t_s,similarity
    EncounterTrace generated;
    std::vector<DeliveryRecord> deliveries;
};

struct RunResult {
    RunLogs logs;
    Metrics metrics;
};

// Deterministic simulation of the whole scenario: mobility, contact events,
// bundle injection, and profile-based exchanges at every contact start and
// every contact_refresh_s while in range.
RunResult run_scenario(const SimConfig& cfg);

struct RouteResult {
    std::string messages_csv;
    Metrics metrics;
    std::vector<DeliveryRecord> deliveries;
};

// Replays a recorded encounter event log through the forwarding layer only.
// Exchange cadence and ordering match run_scenario, so deliveries reproduce a
// simulation that produced the events.
RouteResult route_encounters(const std::vector<EncounterEvent>& events, const SimConfig& cfg);

// Encounter event log helpers (CSV schema type,node_a,node_b,t_s).
std::string encounter_events_csv(const std::vector<EncounterEvent>& events);
std::vector<EncounterEvent> parse_encounter_events_csv(std::istream& input);

// Message event log rows (CSV schema event,bundle_id,from,to,t_s,similarity).
enum class MessageEvent { create, forward, deliver, expire, evict };

struct MessageLogRow {
    MessageEvent event = MessageEvent::create;
    std::string bundle_id;
    NodeId from;
    NodeId to;
    double t_s = 0.0;
    std::optional<double> similarity;
};

std::vector<MessageLogRow> parse_message_events_csv(std::istream& input);

using PairComponents = std::map<NodePair, std::vector<PeriodicComponent>>;

// Recomputes run metrics from exported logs plus the scenario they came from
// (the config supplies profiles and bundle definitions for the qualifying
// set and latency baselines).
Metrics metrics_from_logs(const std::vector<EncounterEvent>& encounters,
                          const std::vector<MessageLogRow>& messages, const SimConfig& cfg);

// Per-pair source components pulled from the scenario personalities: for pair
// {a,b} the a→b entry's components when non-empty, else the b→a entry's.
PairComponents source_components_from(const SimConfig& cfg);

// Pairs start/end events into a trace; contacts still open are closed at
// horizon_s.
EncounterTrace events_to_trace(const std::vector<EncounterEvent>& events, double horizon_s);

struct SpectrumConfig {
    std::int64_t bin_width_s = 60;
    PeakPolicy peaks{1.0, 16};
};

struct PairFidelity {
    NodePair pair;
    std::vector<PeriodicComponent> source;
    std::vector<PeriodicComponent> recovered;
    std::vector<std::size_t> recovered_k;
    bool present = false;  // pair appears in the generated trace
    bool matched = false;
};

struct FidelityReport {
    std::vector<PairFidelity> pairs;
    std::size_t evaluable = 0;
    std::size_t matched = 0;
    std::optional<double> match_ratio;  // empty when no pair has source components
};

// Runs bin→dft→detect_peaks→to_periods on the generated trace per source
// pair; a pair matches when every source component has a recovered peak
// within one frequency bin. Throws NoOverlap when no source pair appears in
// the generated trace.
FidelityReport evaluate_fidelity(const EncounterTrace& generated, const PairComponents& source,
                                 const SpectrumConfig& cfg);

nlohmann::json metrics_to_json(const Metrics& m);
nlohmann::json fidelity_to_json(const FidelityReport& r);

// Shortest-round-trip decimal rendering used by every CSV/JSON writer.
std::string format_double(double v);

}  // namespace encsim
