#include "encsim/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>
#include <string_view>
#include <utility>

#include <nlohmann/json.hpp>

#include "encsim/errors.hpp"
#include "encsim/rng.hpp"
#include "encsim/spectrum.hpp"

namespace encsim {

namespace {

using nlohmann::json;

// Smallest grid point (multiple of dt) at or after x, with tolerance for
// values that already sit on the grid.
double grid_ceil(double x, double dt) {
    double k = std::ceil(x / dt - 1e-9);
    if (k < 0.0) k = 0.0;
    return k * dt;
}

// Number of simulated ticks: all k with k*dt < duration.
long long tick_count(double duration_s, double dt) {
    return static_cast<long long>(std::ceil(duration_s / dt - 1e-9));
}

std::string state_name(const BehaviorState& b) {
    return std::visit(
        [](const auto& s) -> std::string {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Idle>) {
                return "idle";
            } else if constexpr (std::is_same_v<T, Seek>) {
                return "seek:" + s.target;
            } else if constexpr (std::is_same_v<T, Dwell>) {
                return "dwell:" + s.target;
            } else {
                return "repel:" + s.target;
            }
        },
        b);
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        std::size_t comma = line.find(',', pos);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(pos));
            return out;
        }
        out.push_back(line.substr(pos, comma - pos));
        pos = comma + 1;
    }
}

double parse_double_field(std::string_view s, const std::string& ctx) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) {
        throw MalformedRow(ctx + ": bad numeric field '" + std::string(s) + "'");
    }
    return v;
}

// Strips a trailing \r so CRLF inputs parse too.
std::string_view chomp(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return line;
}

void check_identifier(const std::string& s, const std::string& ctx) {
    if (s.empty()) throw ConfigError(ctx + " must not be empty");
    if (s.find(',') != std::string::npos || s.find('\n') != std::string::npos ||
        s.find('\r') != std::string::npos) {
        throw ConfigError(ctx + " must not contain commas or line breaks");
    }
}

double sigma_of(const DeliveryMode& mode) {
    return std::visit([](const auto& m) { return m.sigma; }, mode);
}

// Nodes a bundle counts as destinations: profile (targeted) or interest
// (dissemination) similarity at or above sigma. The source is excluded; it
// holds the bundle from creation.
std::set<NodeId> qualifying_nodes(const SimConfig& cfg, const MessageBundle& b) {
    std::set<NodeId> q;
    double sigma = sigma_of(b.mode);
    bool targeted = std::holds_alternative<TargetedGradient>(b.mode);
    for (const auto& n : cfg.nodes) {
        if (n.id == b.src) continue;
        const BehavioralProfile& p = (!targeted && n.interest) ? *n.interest : n.profile;
        if (similarity(b.target_profile, p) >= sigma) q.insert(n.id);
    }
    return q;
}

LatencyStats latency_stats(std::vector<double> latencies) {
    LatencyStats s;
    if (latencies.empty()) return s;
    std::sort(latencies.begin(), latencies.end());
    s.min_s = latencies.front();
    s.max_s = latencies.back();
    std::size_t n = latencies.size();
    s.median_s = (n % 2 == 1) ? latencies[n / 2]
                              : 0.5 * (latencies[n / 2 - 1] + latencies[n / 2]);
    return s;
}

// Applies profile-cast exchanges over a shared set of buffers and logs every
// message event. run_scenario drives it tick by tick; route_encounters drives
// it from a recorded event log at the same grid times, so both produce
// identical message logs for the same contacts.
class ExchangeEngine {
  public:
    explicit ExchangeEngine(const SimConfig& cfg) : cfg_(cfg) {
        messages_ = "event,bundle_id,from,to,t_s,similarity\n";
        for (const auto& n : cfg.nodes) {
            specs_.emplace(n.id, &n);
            buffers_[n.id].capacity = cfg.buffer_capacity;
        }
        for (const auto& b : cfg.bundles) {
            pending_.push_back({&b, grid_ceil(b.created_s, cfg.arena.dt)});
            metrics_.qualifying += qualifying_nodes(cfg, b).size();
        }
        std::stable_sort(pending_.begin(), pending_.end(),
                         [](const Pending& x, const Pending& y) { return x.at < y.at; });
    }

    // Injects every bundle whose grid creation time has been reached.
    void advance(double t) {
        while (next_pending_ < pending_.size() && pending_[next_pending_].at <= t + 1e-9) {
            const Pending& p = pending_[next_pending_++];
            const MessageBundle& b = *p.bundle;
            messages_ += "create," + b.id + "," + b.src + "," + b.src + "," +
                         format_double(p.at) + ",\n";
            ++metrics_.created;
            auto evicted = buffers_.at(b.src).insert(BufferEntry{b, 0, p.at});
            log_evictions(evicted, b.src, p.at);
        }
    }

    // One contact touch: prune both buffers, then transfer a->b, then b->a.
    void exchange(const NodeId& a, const NodeId& b, double t) {
        prune_one(a, t);
        prune_one(b, t);
        transfer(a, b, t);
        transfer(b, a, t);
    }

    void finalize(double t) {
        for (auto& [id, buf] : buffers_) {
            (void)buf;
            prune_one(id, t);
        }
    }

    Metrics take_metrics() {
        metrics_.latency = latency_stats(latencies_);
        metrics_.delivery_ratio =
            metrics_.qualifying == 0
                ? 1.0
                : static_cast<double>(metrics_.delivered) / static_cast<double>(metrics_.qualifying);
        return metrics_;
    }

    const std::string& messages() const { return messages_; }
    std::vector<DeliveryRecord> take_deliveries() { return std::move(deliveries_); }

  private:
    struct Pending {
        const MessageBundle* bundle;
        double at;
    };

    void prune_one(const NodeId& n, double t) {
        auto expired = buffers_.at(n).prune(t);
        for (const auto& id : expired) {
            messages_ += "expire," + id + "," + n + ",," + format_double(t) + ",\n";
            ++metrics_.expired;
        }
    }

    void log_evictions(const std::vector<std::string>& ids, const NodeId& holder, double t) {
        for (const auto& id : ids) {
            messages_ += "evict," + id + "," + holder + ",," + format_double(t) + ",\n";
            ++metrics_.buffer_evictions;
        }
    }

    void transfer(const NodeId& from, const NodeId& to, double t) {
        const NodeSpec* sf = specs_.at(from);
        const NodeSpec* st = specs_.at(to);
        PeerContext cf{from, &sf->profile, sf->interest ? &*sf->interest : nullptr,
                       &buffers_.at(from)};
        PeerContext ct{to, &st->profile, st->interest ? &*st->interest : nullptr,
                       &buffers_.at(to)};
        auto actions = on_encounter(cf, ct, t);
        // on_encounter groups actions per bundle in id order.
        for (std::size_t i = 0; i < actions.size();) {
            const std::string& id = actions[i].bundle_id;
            double sim = actions[i].similarity;
            bool has_deliver = false;
            bool has_forward = false;
            std::size_t j = i;
            while (j < actions.size() && actions[j].bundle_id == id) {
                if (actions[j].kind == ActionKind::deliver) {
                    has_deliver = true;
                } else {
                    has_forward = true;
                }
                ++j;
            }
            const BufferEntry& src = buffers_.at(from).bundles.at(id);
            if (has_deliver && to != src.bundle.src &&
                delivered_.insert({id, to}).second) {
                messages_ += "deliver," + id + "," + from + "," + to + "," + format_double(t) +
                             "," + format_double(sim) + "\n";
                ++metrics_.delivered;
                deliveries_.push_back({id, to, t});
                latencies_.push_back(t - src.bundle.created_s);
            }
            if (has_forward) {
                messages_ += "forward," + id + "," + from + "," + to + "," + format_double(t) +
                             "," + format_double(sim) + "\n";
                ++metrics_.forwards;
            }
            BufferEntry copy{src.bundle, std::min(src.hops + 1, src.bundle.hop_limit), t};
            auto evicted = buffers_.at(to).insert(std::move(copy));
            log_evictions(evicted, to, t);
            i = j;
        }
    }

    const SimConfig& cfg_;
    std::map<NodeId, const NodeSpec*> specs_;
    std::map<NodeId, BufferState> buffers_;
    std::vector<Pending> pending_;
    std::size_t next_pending_ = 0;
    std::set<std::pair<std::string, NodeId>> delivered_;
    std::vector<DeliveryRecord> deliveries_;
    std::vector<double> latencies_;
    Metrics metrics_;
    std::string messages_;
};

const json* find_key(const json& j, const char* key) {
    auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

double number_at(const json& j, const std::string& ctx) {
    if (!j.is_number()) throw ConfigError(ctx + " must be a number");
    double v = j.get<double>();
    if (!std::isfinite(v)) throw ConfigError(ctx + " must be finite");
    return v;
}

std::string string_at(const json& j, const std::string& ctx) {
    if (!j.is_string()) throw ConfigError(ctx + " must be a string");
    return j.get<std::string>();
}

// Weight maps (profiles, interests, bundle targets) accept any non-negative
// weights with a positive sum and are normalized on load.
BehavioralProfile profile_at(const json& j, const std::string& ctx) {
    if (!j.is_object() || j.empty()) {
        throw ConfigError(ctx + " must be a non-empty object of location weights");
    }
    BehavioralProfile p;
    double sum = 0.0;
    for (auto it = j.begin(); it != j.end(); ++it) {
        double w = number_at(it.value(), ctx + "." + it.key());
        if (w < 0.0) throw ConfigError(ctx + "." + it.key() + " must be non-negative");
        p.weights[it.key()] = w;
        sum += w;
    }
    if (sum <= 0.0) throw ConfigError(ctx + " weights must not all be zero");
    for (auto& [loc, w] : p.weights) w /= sum;
    return p;
}

MessageBundle bundle_at(const json& j, const std::string& ctx) {
    if (!j.is_object()) throw ConfigError(ctx + " must be an object");
    MessageBundle b;
    const json* id = find_key(j, "id");
    if (!id) throw ConfigError(ctx + ".id is required");
    b.id = string_at(*id, ctx + ".id");
    const json* src = find_key(j, "src");
    if (!src) throw ConfigError(ctx + ".src is required");
    b.src = string_at(*src, ctx + ".src");
    const json* target = find_key(j, "target_profile");
    if (!target) throw ConfigError(ctx + ".target_profile is required");
    b.target_profile = profile_at(*target, ctx + ".target_profile");
    if (const json* mode = find_key(j, "mode")) {
        if (!mode->is_object()) throw ConfigError(ctx + ".mode must be an object");
        const json* type = find_key(*mode, "type");
        std::string kind = type ? string_at(*type, ctx + ".mode.type") : "targeted";
        if (kind == "targeted") {
            TargetedGradient m;
            if (const json* s = find_key(*mode, "sigma")) m.sigma = number_at(*s, ctx + ".mode.sigma");
            if (const json* e = find_key(*mode, "epsilon")) {
                m.epsilon = number_at(*e, ctx + ".mode.epsilon");
            }
            b.mode = m;
        } else if (kind == "interest") {
            InterestDissemination m;
            if (const json* s = find_key(*mode, "sigma")) m.sigma = number_at(*s, ctx + ".mode.sigma");
            b.mode = m;
        } else {
            throw ConfigError(ctx + ".mode.type must be 'targeted' or 'interest'");
        }
    }
    if (const json* v = find_key(j, "ttl_s")) b.ttl_s = number_at(*v, ctx + ".ttl_s");
    if (const json* v = find_key(j, "hop_limit")) {
        if (!v->is_number_integer()) throw ConfigError(ctx + ".hop_limit must be an integer");
        b.hop_limit = v->get<int>();
    }
    if (const json* v = find_key(j, "created_s")) b.created_s = number_at(*v, ctx + ".created_s");
    if (const json* v = find_key(j, "payload_size")) {
        if (!v->is_number_unsigned()) {
            throw ConfigError(ctx + ".payload_size must be a non-negative integer");
        }
        b.payload_size = v->get<std::uint64_t>();
    }
    return b;
}

void check_profile_normalized(const BehavioralProfile& p, const std::string& ctx) {
    double sum = 0.0;
    for (const auto& [loc, w] : p.weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) {
            throw ConfigError(ctx + " has a negative or non-finite weight");
        }
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw ConfigError(ctx + " weights must sum to 1");
}

}  // namespace

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (v == 0.0) v = 0.0;  // canonicalize -0
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, p);
}

SimConfig load_sim_config(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    SimConfig cfg;
    if (const json* arena = find_key(doc, "arena")) {
        if (!arena->is_object()) throw ConfigError("arena must be an object");
        if (const json* v = find_key(*arena, "width")) cfg.arena.width = number_at(*v, "arena.width");
        if (const json* v = find_key(*arena, "height")) {
            cfg.arena.height = number_at(*v, "arena.height");
        }
        if (const json* v = find_key(*arena, "range")) cfg.arena.range = number_at(*v, "arena.range");
        if (const json* v = find_key(*arena, "v_max")) cfg.arena.v_max = number_at(*v, "arena.v_max");
        if (const json* v = find_key(*arena, "dt")) cfg.arena.dt = number_at(*v, "arena.dt");
    }
    const json* duration = find_key(doc, "duration_s");
    if (!duration) throw ConfigError("duration_s is required");
    cfg.duration_s = number_at(*duration, "duration_s");
    const json* seed = find_key(doc, "seed");
    if (!seed) throw ConfigError("seed is required");
    if (!seed->is_number_integer() || (seed->is_number_integer() && !seed->is_number_unsigned() &&
                                       seed->get<std::int64_t>() < 0)) {
        throw ConfigError("seed must be a non-negative integer");
    }
    cfg.seed = seed->get<std::uint64_t>();
    if (const json* v = find_key(doc, "contact_refresh_s")) {
        cfg.contact_refresh_s = number_at(*v, "contact_refresh_s");
    }
    if (const json* v = find_key(doc, "buffer_capacity")) {
        if (!v->is_number_integer() ||
            (!v->is_number_unsigned() && v->get<std::int64_t>() <= 0) ||
            (v->is_number_unsigned() && v->get<std::uint64_t>() == 0)) {
            throw ConfigError("buffer_capacity must be a positive integer");
        }
        cfg.buffer_capacity = v->get<std::size_t>();
    }
    const json* nodes = find_key(doc, "nodes");
    if (!nodes || !nodes->is_array()) throw ConfigError("nodes must be an array");
    for (std::size_t i = 0; i < nodes->size(); ++i) {
        const json& nj = (*nodes)[i];
        std::string ctx = "nodes[" + std::to_string(i) + "]";
        if (!nj.is_object()) throw ConfigError(ctx + " must be an object");
        NodeSpec spec;
        const json* id = find_key(nj, "id");
        if (!id) throw ConfigError(ctx + ".id is required");
        spec.id = string_at(*id, ctx + ".id");
        if (const json* pj = find_key(nj, "personality")) {
            if (pj->is_string()) {
                std::filesystem::path path = base_dir / pj->get<std::string>();
                std::ifstream in(path);
                if (!in) throw IoError("cannot read personality file " + path.string());
                json pdoc;
                try {
                    pdoc = json::parse(in);
                } catch (const json::parse_error& e) {
                    throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
                }
                spec.personality = personality_from_json(pdoc);
            } else if (pj->is_object()) {
                spec.personality = personality_from_json(*pj);
            } else {
                throw ConfigError(ctx + ".personality must be an object or a file path");
            }
            if (spec.personality.node != spec.id) {
                throw ConfigError(ctx + ".personality is for node '" + spec.personality.node +
                                  "', expected '" + spec.id + "'");
            }
        } else {
            spec.personality.node = spec.id;
        }
        if (const json* prof = find_key(nj, "profile")) {
            spec.profile = profile_at(*prof, ctx + ".profile");
        }
        if (const json* interest = find_key(nj, "interest")) {
            spec.interest = profile_at(*interest, ctx + ".interest");
        }
        if (const json* pos = find_key(nj, "pos")) {
            if (!pos->is_array() || pos->size() != 2) {
                throw ConfigError(ctx + ".pos must be [x, y]");
            }
            spec.pos = Vec2{number_at((*pos)[0], ctx + ".pos[0]"), number_at((*pos)[1], ctx + ".pos[1]")};
        }
        cfg.nodes.push_back(std::move(spec));
    }
    if (const json* bundles = find_key(doc, "bundles")) {
        if (!bundles->is_array()) throw ConfigError("bundles must be an array");
        for (std::size_t i = 0; i < bundles->size(); ++i) {
            cfg.bundles.push_back(bundle_at((*bundles)[i], "bundles[" + std::to_string(i) + "]"));
        }
    }
    validate(cfg);
    return cfg;
}

SimConfig load_sim_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config file " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
    }
    return load_sim_config(doc, path.parent_path());
}

void validate(const SimConfig& cfg) {
    const Arena& a = cfg.arena;
    if (!(a.width > 0.0) || !(a.height > 0.0)) throw ConfigError("arena dimensions must be positive");
    if (!(a.range > 0.0)) throw ConfigError("arena.range must be positive");
    if (!(a.range < std::min(a.width, a.height) / 2.0)) {
        throw ConfigError("arena.range must be smaller than half the shorter arena side");
    }
    if (!(a.v_max > 0.0)) throw ConfigError("arena.v_max must be positive");
    if (!(a.dt > 0.0)) throw ConfigError("arena.dt must be positive");
    if (!(cfg.duration_s > 0.0)) throw ConfigError("duration_s must be positive");
    if (!(cfg.contact_refresh_s > 0.0)) throw ConfigError("contact_refresh_s must be positive");
    if (cfg.buffer_capacity == 0) throw ConfigError("buffer_capacity must be positive");
    if (cfg.nodes.empty()) throw ConfigError("at least one node is required");

    std::set<NodeId> roster;
    for (const auto& n : cfg.nodes) {
        check_identifier(n.id, "node id");
        if (!roster.insert(n.id).second) throw ConfigError("duplicate node id '" + n.id + "'");
    }
    for (const auto& n : cfg.nodes) {
        if (n.personality.node != n.id) {
            throw ConfigError("personality for node '" + n.id + "' carries node id '" +
                              n.personality.node + "'");
        }
        for (const auto& [peer, pp] : n.personality.pairs) {
            (void)pp;
            if (!roster.count(peer)) {
                throw ConfigError("node '" + n.id + "' personality references unknown peer '" +
                                  peer + "'");
            }
        }
        if (!n.profile.weights.empty()) {
            check_profile_normalized(n.profile, "node '" + n.id + "' profile");
        }
        if (n.interest) check_profile_normalized(*n.interest, "node '" + n.id + "' interest");
        if (n.pos) {
            if (n.pos->x < 0.0 || n.pos->x > a.width || n.pos->y < 0.0 || n.pos->y > a.height) {
                throw ConfigError("node '" + n.id + "' pos lies outside the arena");
            }
        }
    }
    std::set<std::string> bundle_ids;
    for (const auto& b : cfg.bundles) {
        check_identifier(b.id, "bundle id");
        if (!bundle_ids.insert(b.id).second) throw ConfigError("duplicate bundle id '" + b.id + "'");
        if (!roster.count(b.src)) {
            throw ConfigError("bundle '" + b.id + "' src '" + b.src + "' is not a configured node");
        }
        check_profile_normalized(b.target_profile, "bundle '" + b.id + "' target_profile");
        if (b.target_profile.weights.empty()) {
            throw ConfigError("bundle '" + b.id + "' target_profile must not be empty");
        }
        if (!(b.ttl_s > 0.0)) throw ConfigError("bundle '" + b.id + "' ttl_s must be positive");
        if (b.hop_limit < 1) throw ConfigError("bundle '" + b.id + "' hop_limit must be >= 1");
        if (b.created_s < 0.0) throw ConfigError("bundle '" + b.id + "' created_s must be >= 0");
        double sigma = sigma_of(b.mode);
        if (sigma < 0.0 || sigma > 1.0) {
            throw ConfigError("bundle '" + b.id + "' sigma must lie in [0, 1]");
        }
        if (const auto* tg = std::get_if<TargetedGradient>(&b.mode)) {
            if (tg->epsilon < 0.0) {
                throw ConfigError("bundle '" + b.id + "' epsilon must be >= 0");
            }
        }
    }
    if (!cfg.bundles.empty()) {
        for (const auto& n : cfg.nodes) {
            if (n.profile.weights.empty()) {
                throw ConfigError("node '" + n.id +
                                  "' needs a behavioral profile when bundles are configured");
            }
        }
    }
}

RunResult run_scenario(const SimConfig& cfg) {
    validate(cfg);
    World world;
    world.arena = cfg.arena;
    for (const auto& n : cfg.nodes) {
        world.personalities.emplace(n.id, n.personality);
        world.rngs.emplace(n.id, Rng::for_node(cfg.seed, n.id));
    }
    for (const auto& n : cfg.nodes) {
        NodeState st;
        if (n.pos) {
            st.pos = *n.pos;
        } else {
            Rng& rng = world.rngs.at(n.id);
            st.pos.x = rng.uniform(0.0, cfg.arena.width);
            st.pos.y = rng.uniform(0.0, cfg.arena.height);
        }
        world.states.emplace(n.id, st);
    }

    ExchangeEngine engine(cfg);
    RunResult result;
    std::string& positions = result.logs.positions_csv;
    std::string& encounters = result.logs.encounters_csv;
    positions = "tick,node,x,y,heading,state\n";
    encounters = "type,node_a,node_b,t_s\n";
    std::vector<EncounterEvent> all_events;
    std::map<NodePair, double> last_exchange;
    std::map<NodePair, std::size_t> enc_counts;
    std::size_t starts = 0;

    const double dt = cfg.arena.dt;
    const long long ticks = tick_count(cfg.duration_s, dt);
    for (long long k = 0; k < ticks; ++k) {
        double t = static_cast<double>(k) * dt;
        std::map<NodeId, Vec2> before;
        for (const auto& [id, st] : world.states) before.emplace(id, st.pos);

        auto events = step_world(world, t);

        for (const auto& [id, st] : world.states) {
            const Vec2& p = before.at(id);
            positions += std::to_string(k) + "," + id + "," + format_double(p.x) + "," +
                         format_double(p.y) + "," + format_double(st.heading) + "," +
                         state_name(st.behavior) + "\n";
        }

        std::set<NodePair> due;
        for (const auto& e : events) {
            encounters += std::string(e.type == EventType::start ? "start" : "end") + "," + e.a +
                          "," + e.b + "," + format_double(e.t_s) + "\n";
            all_events.push_back(e);
            NodePair p = make_pair_key(e.a, e.b);
            last_exchange.erase(p);
            if (e.type == EventType::start) {
                due.insert(p);
                ++enc_counts[p];
                ++starts;
            }
        }
        for (const auto& p : world.in_contact) {
            auto it = last_exchange.find(p);
            if (it != last_exchange.end() && t - it->second + 1e-9 >= cfg.contact_refresh_s) {
                due.insert(p);
            }
        }

        engine.advance(t);
        for (const auto& p : due) {
            engine.exchange(p.first, p.second, t);
            last_exchange[p] = t;
        }
    }
    engine.finalize(cfg.duration_s);

    result.logs.messages_csv = engine.messages();
    result.logs.generated = events_to_trace(all_events, cfg.duration_s);
    result.logs.deliveries = engine.take_deliveries();
    result.metrics = engine.take_metrics();
    result.metrics.encounters = std::move(enc_counts);
    result.metrics.encounters_total = starts;
    return result;
}

RouteResult route_encounters(const std::vector<EncounterEvent>& events, const SimConfig& cfg) {
    validate(cfg);
    const double dt = cfg.arena.dt;
    const double refresh = cfg.contact_refresh_s;

    std::map<NodePair, double> open;
    std::vector<std::pair<double, NodePair>> moments;
    std::map<NodePair, std::size_t> enc_counts;
    std::size_t starts = 0;

    auto emit_moments = [&](const NodePair& p, double ts, double te) {
        double t = ts;
        while (t + 1e-9 < te) {
            moments.emplace_back(t, p);
            double next = grid_ceil(t + refresh, dt);
            if (next <= t) break;
            t = next;
        }
    };

    for (const auto& e : events) {
        if (e.a == e.b) throw SelfEncounter("event pairs a node with itself: " + e.a);
        NodePair p = make_pair_key(e.a, e.b);
        if (e.type == EventType::start) {
            if (open.count(p)) {
                throw InvalidInterval("start event for pair already in contact: " + p.first + "," +
                                      p.second);
            }
            open.emplace(p, e.t_s);
            ++enc_counts[p];
            ++starts;
        } else {
            auto it = open.find(p);
            if (it == open.end()) {
                throw InvalidInterval("end event without matching start: " + p.first + "," +
                                      p.second);
            }
            if (e.t_s <= it->second) {
                throw InvalidInterval("end event not after its start: " + p.first + "," + p.second);
            }
            emit_moments(p, it->second, e.t_s);
            open.erase(it);
        }
    }
    for (const auto& [p, ts] : open) emit_moments(p, ts, cfg.duration_s);
    std::sort(moments.begin(), moments.end());

    ExchangeEngine engine(cfg);
    for (const auto& [t, p] : moments) {
        engine.advance(t);
        engine.exchange(p.first, p.second, t);
    }
    long long ticks = tick_count(cfg.duration_s, dt);
    if (ticks > 0) engine.advance(static_cast<double>(ticks - 1) * dt);
    engine.finalize(cfg.duration_s);

    RouteResult r;
    r.messages_csv = engine.messages();
    r.deliveries = engine.take_deliveries();
    r.metrics = engine.take_metrics();
    r.metrics.encounters = std::move(enc_counts);
    r.metrics.encounters_total = starts;
    return r;
}

std::string encounter_events_csv(const std::vector<EncounterEvent>& events) {
    std::string out = "type,node_a,node_b,t_s\n";
    for (const auto& e : events) {
        out += std::string(e.type == EventType::start ? "start" : "end") + "," + e.a + "," + e.b +
               "," + format_double(e.t_s) + "\n";
    }
    return out;
}

std::vector<EncounterEvent> parse_encounter_events_csv(std::istream& input) {
    std::string line;
    if (!std::getline(input, line) || chomp(line) != "type,node_a,node_b,t_s") {
        throw MalformedRow("expected header 'type,node_a,node_b,t_s'");
    }
    std::vector<EncounterEvent> events;
    std::size_t row = 1;
    while (std::getline(input, line)) {
        ++row;
        std::string_view sv = chomp(line);
        if (sv.empty()) continue;
        auto fields = split_fields(sv);
        std::string ctx = "events row " + std::to_string(row);
        if (fields.size() != 4) throw MalformedRow(ctx + ": expected 4 fields");
        EncounterEvent e;
        if (fields[0] == "start") {
            e.type = EventType::start;
        } else if (fields[0] == "end") {
            e.type = EventType::end;
        } else {
            throw MalformedRow(ctx + ": type must be 'start' or 'end'");
        }
        e.a = std::string(fields[1]);
        e.b = std::string(fields[2]);
        if (e.a.empty() || e.b.empty()) throw MalformedRow(ctx + ": empty node id");
        if (e.a == e.b) throw SelfEncounter(ctx + ": node paired with itself");
        if (e.b < e.a) std::swap(e.a, e.b);
        e.t_s = parse_double_field(fields[3], ctx);
        if (e.t_s < 0.0) throw MalformedRow(ctx + ": negative timestamp");
        events.push_back(std::move(e));
    }
    return events;
}

std::vector<MessageLogRow> parse_message_events_csv(std::istream& input) {
    std::string line;
    if (!std::getline(input, line) || chomp(line) != "event,bundle_id,from,to,t_s,similarity") {
        throw MalformedRow("expected header 'event,bundle_id,from,to,t_s,similarity'");
    }
    std::vector<MessageLogRow> rows;
    std::size_t n = 1;
    while (std::getline(input, line)) {
        ++n;
        std::string_view sv = chomp(line);
        if (sv.empty()) continue;
        auto fields = split_fields(sv);
        std::string ctx = "messages row " + std::to_string(n);
        if (fields.size() != 6) throw MalformedRow(ctx + ": expected 6 fields");
        MessageLogRow r;
        if (fields[0] == "create") {
            r.event = MessageEvent::create;
        } else if (fields[0] == "forward") {
            r.event = MessageEvent::forward;
        } else if (fields[0] == "deliver") {
            r.event = MessageEvent::deliver;
        } else if (fields[0] == "expire") {
            r.event = MessageEvent::expire;
        } else if (fields[0] == "evict") {
            r.event = MessageEvent::evict;
        } else {
            throw MalformedRow(ctx + ": unknown event '" + std::string(fields[0]) + "'");
        }
        r.bundle_id = std::string(fields[1]);
        if (r.bundle_id.empty()) throw MalformedRow(ctx + ": empty bundle id");
        r.from = std::string(fields[2]);
        r.to = std::string(fields[3]);
        r.t_s = parse_double_field(fields[4], ctx);
        if (!fields[5].empty()) r.similarity = parse_double_field(fields[5], ctx);
        rows.push_back(std::move(r));
    }
    return rows;
}

Metrics metrics_from_logs(const std::vector<EncounterEvent>& encounters,
                          const std::vector<MessageLogRow>& messages, const SimConfig& cfg) {
    Metrics m;
    for (const auto& e : encounters) {
        if (e.type != EventType::start) continue;
        ++m.encounters[make_pair_key(e.a, e.b)];
        ++m.encounters_total;
    }
    std::map<std::string, double> created_s;
    for (const auto& b : cfg.bundles) {
        created_s.emplace(b.id, b.created_s);
        m.qualifying += qualifying_nodes(cfg, b).size();
    }
    std::vector<double> latencies;
    for (const auto& r : messages) {
        switch (r.event) {
            case MessageEvent::create:
                ++m.created;
                break;
            case MessageEvent::forward:
                ++m.forwards;
                break;
            case MessageEvent::deliver: {
                ++m.delivered;
                auto it = created_s.find(r.bundle_id);
                if (it == created_s.end()) {
                    throw ConfigError("message log references bundle '" + r.bundle_id +
                                      "' absent from the config");
                }
                latencies.push_back(r.t_s - it->second);
                break;
            }
            case MessageEvent::expire:
                ++m.expired;
                break;
            case MessageEvent::evict:
                ++m.buffer_evictions;
                break;
        }
    }
    m.latency = latency_stats(std::move(latencies));
    m.delivery_ratio = m.qualifying == 0
                           ? 1.0
                           : static_cast<double>(m.delivered) / static_cast<double>(m.qualifying);
    return m;
}

PairComponents source_components_from(const SimConfig& cfg) {
    PairComponents out;
    for (const auto& n : cfg.nodes) {
        for (const auto& [peer, pp] : n.personality.pairs) {
            if (pp.components.empty()) continue;
            NodePair key = make_pair_key(n.id, peer);
            // First writer wins; with both directions present that is the
            // lexicographically smaller node's entry.
            out.emplace(key, pp.components);
        }
    }
    return out;
}

EncounterTrace events_to_trace(const std::vector<EncounterEvent>& events, double horizon_s) {
    std::map<NodePair, double> open;
    std::vector<EncounterRecord> records;
    auto close = [&](const NodePair& p, double ts, double te) {
        EncounterRecord r;
        r.a = p.first;
        r.b = p.second;
        r.start_s = static_cast<std::int64_t>(std::llround(ts));
        r.end_s = std::max(static_cast<std::int64_t>(std::llround(te)), r.start_s + 1);
        records.push_back(std::move(r));
    };
    for (const auto& e : events) {
        if (e.a == e.b) throw SelfEncounter("event pairs a node with itself: " + e.a);
        NodePair p = make_pair_key(e.a, e.b);
        if (e.type == EventType::start) {
            if (open.count(p)) {
                throw InvalidInterval("start event for pair already in contact: " + p.first + "," +
                                      p.second);
            }
            open.emplace(p, e.t_s);
        } else {
            auto it = open.find(p);
            if (it == open.end()) {
                throw InvalidInterval("end event without matching start: " + p.first + "," +
                                      p.second);
            }
            close(p, it->second, e.t_s);
            open.erase(it);
        }
    }
    for (const auto& [p, ts] : open) close(p, ts, horizon_s);
    auto horizon = static_cast<std::int64_t>(std::llround(horizon_s));
    for (const auto& r : records) horizon = std::max(horizon, r.end_s);
    return make_trace(std::move(records), horizon);
}

FidelityReport evaluate_fidelity(const EncounterTrace& generated, const PairComponents& source,
                                 const SpectrumConfig& cfg) {
    FidelityReport rep;
    auto present_list = pairs_with_records(generated);
    std::set<NodePair> present(present_list.begin(), present_list.end());

    bool any_present = false;
    for (const auto& [pair, comps] : source) {
        PairFidelity pf;
        pf.pair = pair;
        pf.source = comps;
        pf.present = present.count(pair) != 0;
        if (!comps.empty()) {
            ++rep.evaluable;
            if (pf.present) any_present = true;
        }
        if (!comps.empty() && pf.present) {
            auto series =
                bin_pair_series(generated, pair.first, pair.second, cfg.bin_width_s, BinMode::indicator);
            if (series.values.size() >= 2) {
                auto spec = dft(series);
                auto peaks = detect_peaks(spec, cfg.peaks);
                pf.recovered = to_periods(peaks, spec.n, spec.bin_width_s);
                for (const auto& p : peaks.peaks) pf.recovered_k.push_back(p.k);
                bool all = true;
                double n = static_cast<double>(series.values.size());
                for (const auto& c : comps) {
                    if (!(c.period_s > 0.0)) {
                        all = false;
                        break;
                    }
                    double k_src = n * static_cast<double>(cfg.bin_width_s) / c.period_s;
                    bool found = false;
                    for (const auto& p : peaks.peaks) {
                        if (std::abs(static_cast<double>(p.k) - k_src) <= 1.0 + 1e-9) {
                            found = true;
                            break;
                        }
                    }
                    if (!found) {
                        all = false;
                        break;
                    }
                }
                pf.matched = all;
            }
        }
        if (pf.matched) ++rep.matched;
        rep.pairs.push_back(std::move(pf));
    }
    if (rep.evaluable > 0 && !any_present) {
        throw NoOverlap("generated trace contains none of the source pairs");
    }
    if (rep.evaluable > 0) {
        rep.match_ratio = static_cast<double>(rep.matched) / static_cast<double>(rep.evaluable);
    }
    return rep;
}

nlohmann::json metrics_to_json(const Metrics& m) {
    json enc = json::object();
    for (const auto& [p, count] : m.encounters) enc[p.first + "|" + p.second] = count;
    return json{{"delivery_ratio", m.delivery_ratio},
                {"latency_s",
                 {{"min", m.latency.min_s}, {"median", m.latency.median_s}, {"max", m.latency.max_s}}},
                {"forwards", m.forwards},
                {"encounters", std::move(enc)},
                {"encounters_total", m.encounters_total},
                {"buffer_evictions", m.buffer_evictions},
                {"delivered", m.delivered},
                {"qualifying", m.qualifying},
                {"created", m.created},
                {"expired", m.expired}};
}

nlohmann::json fidelity_to_json(const FidelityReport& r) {
    json pairs = json::array();
    for (const auto& pf : r.pairs) {
        json src = json::array();
        for (const auto& c : pf.source) {
            src.push_back({{"period_s", c.period_s}, {"magnitude", c.magnitude}, {"phase", c.phase}});
        }
        json rec = json::array();
        for (const auto& c : pf.recovered) {
            rec.push_back({{"period_s", c.period_s}, {"magnitude", c.magnitude}, {"phase", c.phase}});
        }
        pairs.push_back({{"pair", {pf.pair.first, pf.pair.second}},
                         {"source", std::move(src)},
                         {"recovered", std::move(rec)},
                         {"recovered_k", pf.recovered_k},
                         {"present", pf.present},
                         {"matched", pf.matched}});
    }
    json out{{"pairs", std::move(pairs)},
             {"evaluable", r.evaluable},
             {"matched", r.matched}};
    if (r.match_ratio) {
        out["match_ratio"] = *r.match_ratio;
    } else {
        out["match_ratio"] = nullptr;
    }
    return out;
}

}  // namespace encsim
