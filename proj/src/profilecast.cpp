#include "encsim/profilecast.hpp"

#include <algorithm>
#include <cmath>

namespace encsim {

double similarity(const BehavioralProfile& u, const BehavioralProfile& v) {
    double dot = 0.0;
    double nu = 0.0;
    double nv = 0.0;
    for (const auto& [loc, w] : u.weights) {
        nu += w * w;
        auto it = v.weights.find(loc);
        if (it != v.weights.end()) dot += w * it->second;
    }
    for (const auto& [loc, w] : v.weights) nv += w * w;
    if (nu == 0.0 || nv == 0.0) return 0.0;
    double s = dot / (std::sqrt(nu) * std::sqrt(nv));
    return std::min(std::max(s, 0.0), 1.0);
}

BehavioralProfile build_profile(std::span<const VisitRecord> visits, const NodeId& node) {
    BehavioralProfile profile;
    double total = 0.0;
    for (const auto& v : visits) {
        if (v.node != node) continue;
        double len = static_cast<double>(v.end_s - v.start_s);
        profile.weights[v.location] += len;
        total += len;
    }
    if (total <= 0.0) throw EmptyProfile("node " + node + " has no visits");
    for (auto& [loc, w] : profile.weights) w /= total;
    return profile;
}

std::vector<std::string> BufferState::insert(BufferEntry entry) {
    if (bundles.count(entry.bundle.id)) return {};
    bundles.emplace(entry.bundle.id, std::move(entry));
    std::vector<std::string> evicted;
    while (bundles.size() > capacity) {
        auto oldest = bundles.begin();
        for (auto it = std::next(bundles.begin()); it != bundles.end(); ++it) {
            if (it->second.bundle.created_s < oldest->second.bundle.created_s) oldest = it;
        }
        evicted.push_back(oldest->first);
        bundles.erase(oldest);
    }
    return evicted;
}

std::vector<std::string> BufferState::prune(double now_s) {
    std::vector<std::string> expired;
    for (auto it = bundles.begin(); it != bundles.end();) {
        const auto& b = it->second.bundle;
        if (b.created_s + b.ttl_s < now_s) {
            expired.push_back(it->first);
            it = bundles.erase(it);
        } else {
            ++it;
        }
    }
    return expired;
}

std::vector<ForwardAction> on_encounter(const PeerContext& carrier, const PeerContext& peer,
                                        double t_s) {
    std::vector<ForwardAction> actions;
    if (!carrier.buffer || !peer.buffer || !carrier.profile || !peer.profile) return actions;

    for (const auto& [id, entry] : carrier.buffer->bundles) {
        const MessageBundle& bundle = entry.bundle;
        if (bundle.created_s + bundle.ttl_s < t_s) continue;  // not live
        if (peer.buffer->contains(id)) continue;              // summary-vector skip

        std::visit(
            [&](const auto& mode) {
                using T = std::decay_t<decltype(mode)>;
                if constexpr (std::is_same_v<T, TargetedGradient>) {
                    double sim_peer = similarity(*peer.profile, bundle.target_profile);
                    double sim_carrier = similarity(*carrier.profile, bundle.target_profile);
                    if (sim_peer >= mode.sigma) {
                        actions.push_back(
                            {ActionKind::deliver, id, carrier.id, peer.id, sim_peer});
                    }
                    if (sim_peer > sim_carrier + mode.epsilon && entry.hops < bundle.hop_limit) {
                        actions.push_back(
                            {ActionKind::forward_copy, id, carrier.id, peer.id, sim_peer});
                    }
                } else {
                    const BehavioralProfile& interest =
                        peer.interest ? *peer.interest : *peer.profile;
                    double sim = similarity(interest, bundle.target_profile);
                    if (sim >= mode.sigma) {
                        actions.push_back({ActionKind::deliver, id, carrier.id, peer.id, sim});
                        if (entry.hops < bundle.hop_limit) {
                            actions.push_back(
                                {ActionKind::forward_copy, id, carrier.id, peer.id, sim});
                        }
                    }
                }
            },
            bundle.mode);
    }
    return actions;
}

}  // namespace encsim
