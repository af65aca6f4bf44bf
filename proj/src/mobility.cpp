#include "encsim/mobility.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace encsim {

double norm(Vec2 v) { return std::hypot(v.x, v.y); }

namespace {

Vec2 unit_toward(Vec2 from, Vec2 to) {
    Vec2 d = to - from;
    double len = norm(d);
    if (len == 0.0) return {0.0, 0.0};
    return {d.x / len, d.y / len};
}

}  // namespace

Vec2 compute_force(const NodeId& i, const std::map<NodeId, NodeState>& states,
                   const std::map<NodeId, Personality>& personalities) {
    const NodeState& self = states.at(i);
    auto pit = personalities.find(i);
    if (pit == personalities.end()) return {0.0, 0.0};
    const Personality& personality = pit->second;

    return std::visit(
        [&](const auto& s) -> Vec2 {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Seek>) {
                auto target = states.find(s.target);
                auto pp = personality.pairs.find(s.target);
                if (target == states.end() || pp == personality.pairs.end()) return {0.0, 0.0};
                return pp->second.attract_gain * unit_toward(self.pos, target->second.pos);
            } else if constexpr (std::is_same_v<T, Repel>) {
                auto target = states.find(s.target);
                auto pp = personality.pairs.find(s.target);
                if (target == states.end() || pp == personality.pairs.end()) return {0.0, 0.0};
                return -pp->second.repulse_gain * unit_toward(self.pos, target->second.pos);
            } else {
                return {0.0, 0.0};
            }
        },
        self.behavior);
}

Vec2 commanded_velocity(Vec2 force, double drag, double v_max) {
    Vec2 v = (1.0 / (1.0 + drag)) * force;
    double speed = norm(v);
    if (speed > v_max && speed > 0.0) {
        v = (v_max / speed) * v;
    }
    return v;
}

namespace {

// Reflects a coordinate into [0, limit], negating the matching velocity
// component per crossing.
void reflect_axis(double& coord, double& vel, double limit) {
    while (coord < 0.0 || coord > limit) {
        if (coord < 0.0) {
            coord = -coord;
            vel = -vel;
        } else {
            coord = 2.0 * limit - coord;
            vel = -vel;
        }
    }
}

bool on_boundary(const Vec2& p, const Arena& a) {
    constexpr double eps = 1e-9;
    return p.x < eps || p.y < eps || p.x > a.width - eps || p.y > a.height - eps;
}

}  // namespace

std::vector<EncounterEvent> step_world(World& world, double t_s) {
    const Arena& arena = world.arena;

    // Start-of-tick position snapshot drives sensors, events, and forces.
    std::map<NodeId, Vec2> snapshot;
    for (const auto& [id, s] : world.states) snapshot.emplace(id, s.pos);

    std::vector<EncounterEvent> events;
    for (auto ai = snapshot.begin(); ai != snapshot.end(); ++ai) {
        for (auto bi = std::next(ai); bi != snapshot.end(); ++bi) {
            NodePair key{ai->first, bi->first};
            double d = norm(bi->second - ai->second);
            bool contact = world.in_contact.count(key) != 0;
            if (d <= arena.range && !contact) {
                world.in_contact.insert(key);
                events.push_back({EventType::start, key.first, key.second, t_s});
            } else if (d > arena.range && contact) {
                world.in_contact.erase(key);
                events.push_back({EventType::end, key.first, key.second, t_s});
            }
        }
    }

    for (auto& [id, state] : world.states) {
        SensorReading sensors;
        const Vec2& here = snapshot.at(id);
        for (const auto& [peer, pos] : snapshot) {
            if (peer == id) continue;
            if (norm(pos - here) <= arena.range) {
                sensors.virtual_wall[peer] = true;
                sensors.in_range.insert(peer);
            }
        }
        sensors.bump = on_boundary(here, arena);
        auto rng = world.rngs.find(id);
        if (rng == world.rngs.end()) {
            rng = world.rngs.emplace(id, Rng::for_node(0, id)).first;
        }
        StepResult step = step_state(state.behavior, sensors, world.personalities.at(id), t_s,
                                     rng->second);
        state.behavior = std::move(step.state);
    }

    // Positions in `states` still hold the snapshot values here; forces read
    // them together with the just-updated behaviors.
    std::map<NodeId, Vec2> velocities;
    for (const auto& [id, state] : world.states) {
        Vec2 force = compute_force(id, world.states, world.personalities);
        double drag = world.personalities.at(id).drag;
        velocities.emplace(id, commanded_velocity(force, drag, arena.v_max));
    }

    for (auto& [id, state] : world.states) {
        Vec2 v = velocities.at(id);
        double x = state.pos.x + v.x * arena.dt;
        double y = state.pos.y + v.y * arena.dt;
        reflect_axis(x, v.x, arena.width);
        reflect_axis(y, v.y, arena.height);
        state.pos = {x, y};
        state.speed = norm(v);
        if (state.speed > 0.0) state.heading = std::atan2(v.y, v.x);
    }
    return events;
}

NodeState robot_execute(const MotionCommand& cmd, NodeState s, double dt, double v_max) {
    return std::visit(
        [&](const auto& c) -> NodeState {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, Drive>) {
                if (c.speed > v_max) {
                    throw SpeedLimit("commanded speed " + std::to_string(c.speed) +
                                     " exceeds v_max " + std::to_string(v_max));
                }
                s.heading += c.heading_rate * dt;
                s.pos.x += c.speed * std::cos(s.heading) * dt;
                s.pos.y += c.speed * std::sin(s.heading) * dt;
                s.speed = c.speed;
            } else {
                s.speed = 0.0;
            }
            return s;
        },
        cmd);
}

namespace {

struct SlotConstraints {
    // Pair indices (i, j) with i < j into the sorted node list.
    std::vector<std::pair<std::size_t, std::size_t>> contact;
    std::vector<std::pair<std::size_t, std::size_t>> apart;
};

double clamp_into(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

}  // namespace

PositionTrace infer_plausible_positions(const EncounterTrace& trace, const Arena& arena,
                                        const InferConfig& cfg) {
    if (trace.records.empty()) throw ConfigError("plausible-mobility needs a non-empty trace");
    if (cfg.slot_width_s <= 0) throw ConfigError("slot_width_s must be > 0");

    PositionTrace result;
    result.nodes.assign(trace.nodes.begin(), trace.nodes.end());
    result.slot_width_s = cfg.slot_width_s;
    const std::size_t n = result.nodes.size();
    std::map<NodeId, std::size_t> index;
    for (std::size_t i = 0; i < n; ++i) index.emplace(result.nodes[i], i);

    const std::size_t slots = static_cast<std::size_t>(
        std::max<std::int64_t>((trace.horizon_s + cfg.slot_width_s - 1) / cfg.slot_width_s, 1));

    // Contact sets per slot from record/slot interval intersection.
    std::vector<std::set<std::pair<std::size_t, std::size_t>>> contact_sets(slots);
    for (const auto& r : trace.records) {
        std::size_t i = index.at(r.a);
        std::size_t j = index.at(r.b);
        if (j < i) std::swap(i, j);
        std::int64_t first = r.start_s / cfg.slot_width_s;
        std::int64_t last = (r.end_s - 1) / cfg.slot_width_s;
        last = std::min<std::int64_t>(last, static_cast<std::int64_t>(slots) - 1);
        for (std::int64_t s = first; s <= last; ++s) {
            contact_sets[static_cast<std::size_t>(s)].insert({i, j});
        }
    }

    Rng rng(mix64(cfg.seed + 0x9e37u));
    std::vector<Vec2> current(n);
    for (std::size_t i = 0; i < n; ++i) {
        current[i] = {rng.uniform(0.0, arena.width), rng.uniform(0.0, arena.height)};
    }

    const double max_disp = arena.v_max * static_cast<double>(cfg.slot_width_s);
    // Relaxation pushes slightly past the range boundary so "distance > range"
    // holds strictly after an update.
    const double slack = 0.01 * arena.range;

    result.positions.resize(slots);
    result.satisfaction.resize(slots, 1.0);

    std::vector<Vec2> previous;
    for (std::size_t slot = 0; slot < slots; ++slot) {
        SlotConstraints cons;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                if (contact_sets[slot].count({i, j})) {
                    cons.contact.push_back({i, j});
                } else {
                    cons.apart.push_back({i, j});
                }
            }
        }

        auto satisfied = [&](std::size_t i, std::size_t j, bool want_contact) {
            double d = norm(current[j] - current[i]);
            return want_contact ? d <= arena.range : d > arena.range;
        };
        auto count_satisfied = [&]() {
            std::size_t ok = 0;
            for (auto [i, j] : cons.contact) ok += satisfied(i, j, true) ? 1 : 0;
            for (auto [i, j] : cons.apart) ok += satisfied(i, j, false) ? 1 : 0;
            return ok;
        };
        const std::size_t total = cons.contact.size() + cons.apart.size();

        auto apply_limits = [&](std::size_t i) {
            current[i].x = clamp_into(current[i].x, 0.0, arena.width);
            current[i].y = clamp_into(current[i].y, 0.0, arena.height);
            if (slot > 0) {
                Vec2 d = current[i] - previous[i];
                double len = norm(d);
                if (len > max_disp) {
                    current[i] = previous[i] + (max_disp / len) * d;
                }
            }
        };

        bool all_ok = total == 0;
        for (int iter = 0; iter < cfg.max_iters && !all_ok; ++iter) {
            for (auto [i, j] : cons.contact) {
                double d = norm(current[j] - current[i]);
                if (d <= arena.range) continue;
                // Aim for range - slack so the inequality closes in finitely
                // many sweeps instead of asymptotically.
                double move = cfg.step_size * (d - arena.range + slack) * 0.5;
                Vec2 u = unit_toward(current[i], current[j]);
                current[i] = current[i] + move * u;
                current[j] = current[j] - move * u;
                apply_limits(i);
                apply_limits(j);
            }
            for (auto [i, j] : cons.apart) {
                double d = norm(current[j] - current[i]);
                if (d > arena.range) continue;
                double move = cfg.step_size * (arena.range - d + slack) * 0.5;
                Vec2 u = unit_toward(current[i], current[j]);
                if (u.x == 0.0 && u.y == 0.0) {
                    double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
                    u = {std::cos(angle), std::sin(angle)};
                }
                current[i] = current[i] - move * u;
                current[j] = current[j] + move * u;
                apply_limits(i);
                apply_limits(j);
            }
            all_ok = count_satisfied() == total;
        }

        result.positions[slot] = current;
        result.satisfaction[slot] = total == 0 ? 1.0
                                               : static_cast<double>(count_satisfied()) /
                                                     static_cast<double>(total);
        if (!all_ok && total != 0) result.infeasible_slots.push_back(slot);
        previous = current;
    }
    return result;
}

}  // namespace encsim
