#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "encsim/trace.hpp"

namespace encsim {

// Normalized location-preference vector: non-negative weights summing to 1.
struct BehavioralProfile {
    std::map<std::string, double> weights;
};

// Cosine similarity over the union of location keys; in [0, 1].
double similarity(const BehavioralProfile& u, const BehavioralProfile& v);

// weight(l) = node's visit seconds at l / node's total visit seconds.
// Throws EmptyProfile when the node has no visits.
BehavioralProfile build_profile(std::span<const VisitRecord> visits, const NodeId& node);

// Deliver when peer similarity to the target profile reaches sigma; forward a
// copy only on a similarity improvement of more than epsilon.
struct TargetedGradient {
    double sigma = 0.8;
    double epsilon = 0.01;
};
// Copy to any peer whose interest similarity reaches sigma; such peers are
// also delivery targets and propagate among themselves.
struct InterestDissemination {
    double sigma = 0.8;
};
using DeliveryMode = std::variant<TargetedGradient, InterestDissemination>;

struct MessageBundle {
    std::string id;
    NodeId src;
    BehavioralProfile target_profile;
    DeliveryMode mode = TargetedGradient{};
    double ttl_s = 21600.0;
    int hop_limit = 8;
    double created_s = 0.0;
    std::uint64_t payload_size = 0;
};

struct BufferEntry {
    MessageBundle bundle;
    int hops = 0;
    double received_at_s = 0.0;
};

// Per-node custody store. Insertion is a no-op for a duplicate id; overflow
// evicts the oldest-created bundle (ties by id).
struct BufferState {
    std::map<std::string, BufferEntry> bundles;
    std::size_t capacity = 1024;

    bool contains(const std::string& id) const { return bundles.count(id) != 0; }
    // Returns evicted ids (possibly the incoming bundle itself when it is the
    // oldest in an already-full buffer).
    std::vector<std::string> insert(BufferEntry entry);
    // Drops bundles with created + ttl < now; returns the expired ids.
    std::vector<std::string> prune(double now_s);
};

enum class ActionKind { deliver, forward_copy };

struct ForwardAction {
    ActionKind kind = ActionKind::deliver;
    std::string bundle_id;
    NodeId from;
    NodeId to;
    double similarity = 0.0;  // recipient similarity to the bundle's target
};

// One party to an exchange. `interest` is the declared interest profile used
// by dissemination mode; dissemination falls back to `profile` when absent.
struct PeerContext {
    NodeId id;
    const BehavioralProfile* profile = nullptr;
    const BehavioralProfile* interest = nullptr;
    const BufferState* buffer = nullptr;
};

// Computes the carrier→peer transfer decisions for every live bundle the peer
// does not already hold (summary-vector exchange by id). Copies are made,
// never moved; the harness applies the returned actions.
std::vector<ForwardAction> on_encounter(const PeerContext& carrier, const PeerContext& peer,
                                        double t_s);

}  // namespace encsim
