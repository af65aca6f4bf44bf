#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "encsim/rng.hpp"
#include "encsim/spectrum.hpp"
#include "encsim/trace.hpp"

namespace encsim {

// How one agent relates to one peer: force gains, the periodic intent
// schedule recovered from the encounter spectrum, and dwell behavior.
struct PairPersonality {
    double attract_gain = 0.0;
    double repulse_gain = 0.0;
    std::vector<PeriodicComponent> components;
    double intent_threshold = 0.0;
    std::vector<double> dwell_samples_s;  // empirical dwell distribution, values > 0
    double refractory_s = 0.0;
};

struct Personality {
    NodeId node;
    std::map<NodeId, PairPersonality> pairs;  // never keyed by `node` itself
    double drag = 0.0;
};

// Behavioral state machine. Dwell carries the duration sampled on entry so a
// dwell length is drawn exactly once.
struct Idle {};
struct Seek {
    NodeId target;
};
struct Dwell {
    NodeId target;
    double since_s = 0.0;
    double duration_s = 0.0;
};
struct Repel {
    NodeId target;
    double until_s = 0.0;
};
using BehaviorState = std::variant<Idle, Seek, Dwell, Repel>;

// Command side of the personality/robot protocol. Drive speeds are the
// pre-clamp commanded magnitude; the executing side enforces v_max.
struct Drive {
    double speed = 0.0;         // m/s
    double heading_rate = 0.0;  // rad/s
};
struct Stop {};
using MotionCommand = std::variant<Drive, Stop>;

// Sensor side of the protocol. virtual_wall holds an entry per peer within
// range; in_range is the same peer set.
struct SensorReading {
    std::map<NodeId, bool> virtual_wall;
    bool bump = false;
    std::set<NodeId> in_range;
};

// Σ_k magnitude_k · cos(2π·t/period_k + phase_k). Attraction toward the peer
// is active when the value reaches intent_threshold.
double intent(const PairPersonality& pp, double t_s);

struct StepResult {
    BehaviorState state;
    MotionCommand command;
};

// Advances the state machine one tick (one transition per call) and emits the
// motion command for the resulting state. Throws UnknownPeer when the sensor
// reading references a node absent from personality.pairs.
StepResult step_state(const BehaviorState& state, const SensorReading& sensors,
                      const Personality& personality, double t_s, Rng& rng);

struct FitConfig {
    std::int64_t bin_width_s = 86400;
    PeakPolicy peaks;
    std::size_t top_m = 4;
    double default_drag = 0.0;
    double intent_threshold = 0.0;
};

// Fits a personality from the node's pair encounter history: periodic
// components from each pair's indicator-series spectrum, dwell samples from
// the pair's encounter durations, attraction gain from relative encounter
// counts (max pair = 1), refractory = mean dwell.
Personality fit_personality(const EncounterTrace& trace, const NodeId& node,
                            const FitConfig& cfg);

nlohmann::json personality_to_json(const Personality& p);
Personality personality_from_json(const nlohmann::json& j);

}  // namespace encsim
