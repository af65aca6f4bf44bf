#include "encsim/personality.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <nlohmann/json.hpp>

namespace encsim {

double intent(const PairPersonality& pp, double t_s) {
    double sum = 0.0;
    for (const auto& c : pp.components) {
        sum += c.magnitude * std::cos(2.0 * std::numbers::pi * t_s / c.period_s + c.phase);
    }
    return sum;
}

namespace {

double sample_dwell(const PairPersonality& pp, Rng& rng) {
    if (pp.dwell_samples_s.empty()) return 0.0;
    return pp.dwell_samples_s[rng.index(pp.dwell_samples_s.size())];
}

bool in_range(const SensorReading& sensors, const NodeId& peer) {
    auto it = sensors.virtual_wall.find(peer);
    return it != sensors.virtual_wall.end() && it->second;
}

const PairPersonality& pair_of(const Personality& personality, const NodeId& target) {
    auto it = personality.pairs.find(target);
    if (it == personality.pairs.end()) {
        throw UnknownPeer("behavior targets unknown peer " + target + " for node " +
                          personality.node);
    }
    return it->second;
}

MotionCommand command_for(const BehaviorState& state, const Personality& personality) {
    return std::visit(
        [&](const auto& s) -> MotionCommand {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Seek>) {
                const auto& pp = pair_of(personality, s.target);
                return Drive{pp.attract_gain / (1.0 + personality.drag), 0.0};
            } else if constexpr (std::is_same_v<T, Repel>) {
                const auto& pp = pair_of(personality, s.target);
                return Drive{pp.repulse_gain / (1.0 + personality.drag), 0.0};
            } else {
                return Stop{};
            }
        },
        state);
}

}  // namespace

StepResult step_state(const BehaviorState& state, const SensorReading& sensors,
                      const Personality& personality, double t_s, Rng& rng) {
    for (const auto& peer : sensors.in_range) {
        if (!personality.pairs.count(peer)) {
            throw UnknownPeer("sensor reading references unknown peer " + peer + " for node " +
                              personality.node);
        }
    }

    BehaviorState next = std::visit(
        [&](const auto& s) -> BehaviorState {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Idle>) {
                // Highest active intent wins; map order breaks ties by NodeId.
                const NodeId* best = nullptr;
                double best_intent = 0.0;
                for (const auto& [peer, pp] : personality.pairs) {
                    double v = intent(pp, t_s);
                    if (v < pp.intent_threshold) continue;
                    if (!best || v > best_intent) {
                        best = &peer;
                        best_intent = v;
                    }
                }
                if (best) return Seek{*best};
                return s;
            } else if constexpr (std::is_same_v<T, Seek>) {
                if (in_range(sensors, s.target)) {
                    return Dwell{s.target, t_s, sample_dwell(pair_of(personality, s.target), rng)};
                }
                return s;
            } else if constexpr (std::is_same_v<T, Dwell>) {
                if (t_s - s.since_s >= s.duration_s) {
                    return Repel{s.target, t_s + pair_of(personality, s.target).refractory_s};
                }
                if (!in_range(sensors, s.target)) {
                    // Target moved away before the dwell elapsed: re-trigger attraction.
                    return Seek{s.target};
                }
                return s;
            } else {
                if (t_s >= s.until_s) return Idle{};
                return s;
            }
        },
        state);

    return {next, command_for(next, personality)};
}

Personality fit_personality(const EncounterTrace& trace, const NodeId& node,
                            const FitConfig& cfg) {
    if (!trace.nodes.count(node)) throw UnknownNode("node " + node + " not in trace");

    Personality p;
    p.node = node;
    p.drag = cfg.default_drag;

    std::map<NodeId, std::size_t> counts;
    std::map<NodeId, std::vector<double>> durations;
    for (const auto& r : trace.records) {
        const NodeId* peer = nullptr;
        if (r.a == node) peer = &r.b;
        if (r.b == node) peer = &r.a;
        if (!peer) continue;
        counts[*peer] += 1;
        durations[*peer].push_back(static_cast<double>(r.end_s - r.start_s));
    }
    if (counts.empty()) return p;

    std::size_t max_count = 0;
    for (const auto& [peer, c] : counts) max_count = std::max(max_count, c);

    for (const auto& [peer, c] : counts) {
        PairPersonality pp;
        pp.attract_gain = static_cast<double>(c) / static_cast<double>(max_count);
        pp.repulse_gain = pp.attract_gain;
        pp.intent_threshold = cfg.intent_threshold;
        pp.dwell_samples_s = durations[peer];
        pp.refractory_s = std::accumulate(pp.dwell_samples_s.begin(), pp.dwell_samples_s.end(),
                                          0.0) /
                          static_cast<double>(pp.dwell_samples_s.size());

        BinnedSeries series = bin_pair_series(trace, node, peer, cfg.bin_width_s,
                                              BinMode::indicator);
        if (series.values.size() >= 2) {
            Spectrum spec = dft(series);
            PeakSet peaks = detect_peaks(spec, cfg.peaks);
            auto components = to_periods(peaks, spec.n, spec.bin_width_s);
            if (components.size() > cfg.top_m) components.resize(cfg.top_m);
            pp.components = std::move(components);
        }
        p.pairs.emplace(peer, std::move(pp));
    }
    return p;
}

nlohmann::json personality_to_json(const Personality& p) {
    nlohmann::json pairs = nlohmann::json::object();
    for (const auto& [peer, pp] : p.pairs) {
        nlohmann::json components = nlohmann::json::array();
        for (const auto& c : pp.components) {
            components.push_back({{"period_s", c.period_s},
                                  {"magnitude", c.magnitude},
                                  {"phase", c.phase}});
        }
        pairs[peer] = {{"attract_gain", pp.attract_gain},
                       {"repulse_gain", pp.repulse_gain},
                       {"intent_threshold", pp.intent_threshold},
                       {"refractory_s", pp.refractory_s},
                       {"components", std::move(components)},
                       {"dwell_samples_s", pp.dwell_samples_s}};
    }
    return {{"node", p.node}, {"drag", p.drag}, {"pairs", std::move(pairs)}};
}

namespace {

double require_number(const nlohmann::json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || !j[key].is_number()) {
        throw ConfigError("personality " + where + ": missing numeric field '" + key + "'");
    }
    return j[key].get<double>();
}

}  // namespace

Personality personality_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("node") || !j["node"].is_string()) {
        throw ConfigError("personality document needs a string 'node' field");
    }
    Personality p;
    p.node = j["node"].get<std::string>();
    p.drag = require_number(j, "drag", p.node);
    if (p.drag < 0.0) throw ConfigError("personality " + p.node + ": drag must be >= 0");
    if (j.contains("pairs")) {
        if (!j["pairs"].is_object()) throw ConfigError("personality " + p.node + ": 'pairs' must be an object");
        for (const auto& [peer, pj] : j["pairs"].items()) {
            if (peer == p.node) {
                throw ConfigError("personality " + p.node + ": pair entry keyed by the node itself");
            }
            const std::string where = p.node + " pair " + peer;
            PairPersonality pp;
            pp.attract_gain = require_number(pj, "attract_gain", where);
            pp.repulse_gain = require_number(pj, "repulse_gain", where);
            pp.intent_threshold = require_number(pj, "intent_threshold", where);
            pp.refractory_s = require_number(pj, "refractory_s", where);
            if (pp.attract_gain < 0.0 || pp.repulse_gain < 0.0) {
                throw ConfigError("personality " + where + ": gains must be >= 0");
            }
            if (pp.refractory_s < 0.0) {
                throw ConfigError("personality " + where + ": refractory_s must be >= 0");
            }
            if (pj.contains("components")) {
                for (const auto& cj : pj["components"]) {
                    PeriodicComponent c;
                    c.period_s = require_number(cj, "period_s", where);
                    c.magnitude = require_number(cj, "magnitude", where);
                    c.phase = require_number(cj, "phase", where);
                    if (c.period_s <= 0.0) {
                        throw ConfigError("personality " + where + ": period_s must be > 0");
                    }
                    pp.components.push_back(c);
                }
            }
            if (pj.contains("dwell_samples_s")) {
                for (const auto& dj : pj["dwell_samples_s"]) {
                    if (!dj.is_number()) {
                        throw ConfigError("personality " + where + ": dwell samples must be numeric");
                    }
                    double d = dj.get<double>();
                    if (d <= 0.0) {
                        throw ConfigError("personality " + where + ": dwell samples must be > 0");
                    }
                    pp.dwell_samples_s.push_back(d);
                }
            }
            p.pairs.emplace(peer, std::move(pp));
        }
    }
    return p;
}

}  // namespace encsim
