#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include "encsim/personality.hpp"
#include "encsim/trace.hpp"

namespace encsim {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
double norm(Vec2 v);

struct Arena {
    double width = 100.0;   // m
    double height = 100.0;  // m
    double range = 10.0;    // encounter/communication radius, m
    double v_max = 0.5;     // m/s
    double dt = 1.0;        // seconds per tick
};

struct NodeState {
    Vec2 pos;
    double heading = 0.0;  // rad
    double speed = 0.0;    // m/s
    BehaviorState behavior = Idle{};
};

enum class EventType { start, end };

struct EncounterEvent {
    EventType type = EventType::start;
    NodeId a;  // canonical order, a < b
    NodeId b;
    double t_s = 0.0;
};

struct World {
    Arena arena;
    std::map<NodeId, NodeState> states;
    std::map<NodeId, Personality> personalities;
    std::map<NodeId, Rng> rngs;
    std::set<NodePair> in_contact;
};

// Engagement force on node i: attract_gain·û(i→j) while seeking j,
// -repulse_gain·û(i→j) while repelling j, zero otherwise. û is the zero
// vector when the two positions coincide.
Vec2 compute_force(const NodeId& i, const std::map<NodeId, NodeState>& states,
                   const std::map<NodeId, Personality>& personalities);

// v = F/(1+drag), magnitude clamped to v_max.
Vec2 commanded_velocity(Vec2 force, double drag, double v_max);

// Advances one tick: sensors and pairwise checks use start-of-tick positions,
// behaviors step in NodeId order, velocities integrate with boundary
// reflection, and contact edges are emitted (start on the first tick within
// range, end on the first tick after leaving it).
std::vector<EncounterEvent> step_world(World& world, double t_s);

// Differential-drive execution of one command. Throws SpeedLimit when a Drive
// speed exceeds v_max.
NodeState robot_execute(const MotionCommand& cmd, NodeState s, double dt, double v_max);

struct InferConfig {
    std::int64_t slot_width_s = 60;
    int max_iters = 200;
    double step_size = 0.5;
    std::uint64_t seed = 0;
};

// Positions per slot for every node (node order = sorted ids), plus the
// per-slot fraction of satisfied pair constraints. Slots still violated after
// max_iters are listed in infeasible_slots.
struct PositionTrace {
    std::vector<NodeId> nodes;
    std::vector<std::vector<Vec2>> positions;  // [slot][node index]
    std::int64_t slot_width_s = 0;
    std::vector<double> satisfaction;
    std::vector<std::size_t> infeasible_slots;
};

// Contact-to-mobility inference: per-slot relaxation, warm-started from the
// previous slot, pulling in-contact pairs within range and pushing other
// pairs apart, with inter-slot displacement capped at v_max·slot_width.
PositionTrace infer_plausible_positions(const EncounterTrace& trace, const Arena& arena,
                                        const InferConfig& cfg);

}  // namespace encsim
