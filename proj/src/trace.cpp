#include "encsim/trace.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace encsim {

namespace {

std::int64_t parse_time_field(const std::string& field, const std::string& line) {
    std::int64_t value = 0;
    const char* begin = field.data();
    const char* end = begin + field.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end) {
        throw MalformedRow("non-numeric time field '" + field + "' in row: " + line);
    }
    if (value < 0) {
        throw MalformedRow("negative time field '" + field + "' in row: " + line);
    }
    return value;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

std::string read_line(std::istream& in, bool& ok) {
    std::string line;
    ok = static_cast<bool>(std::getline(in, line));
    if (ok && !line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

// Half-open interval overlap length.
std::int64_t overlap(std::int64_t a0, std::int64_t a1, std::int64_t b0, std::int64_t b1) {
    return std::min(a1, b1) - std::max(a0, b0);
}

}  // namespace

EncounterTrace make_trace(std::vector<EncounterRecord> records,
                          std::optional<std::int64_t> horizon_s) {
    EncounterTrace trace;
    std::map<NodePair, std::vector<std::pair<std::int64_t, std::int64_t>>> by_pair;
    for (auto& r : records) {
        if (r.a == r.b) throw SelfEncounter("self encounter for node " + r.a);
        if (r.start_s < 0) {
            throw InvalidInterval("negative encounter start " + std::to_string(r.start_s));
        }
        if (r.end_s <= r.start_s) {
            throw InvalidInterval("encounter end " + std::to_string(r.end_s) +
                                  " <= start " + std::to_string(r.start_s));
        }
        by_pair[make_pair_key(r.a, r.b)].push_back({r.start_s, r.end_s});
    }
    std::int64_t max_end = 0;
    for (auto& [pair, intervals] : by_pair) {
        std::sort(intervals.begin(), intervals.end());
        std::int64_t cur_start = intervals.front().first;
        std::int64_t cur_end = intervals.front().second;
        auto flush = [&]() {
            trace.records.push_back({pair.first, pair.second, cur_start, cur_end});
            max_end = std::max(max_end, cur_end);
        };
        for (std::size_t i = 1; i < intervals.size(); ++i) {
            auto [s, e] = intervals[i];
            if (s <= cur_end) {
                cur_end = std::max(cur_end, e);
            } else {
                flush();
                cur_start = s;
                cur_end = e;
            }
        }
        flush();
        trace.nodes.insert(pair.first);
        trace.nodes.insert(pair.second);
    }
    std::sort(trace.records.begin(), trace.records.end(), [](const auto& x, const auto& y) {
        return std::tie(x.start_s, x.a, x.b, x.end_s) < std::tie(y.start_s, y.a, y.b, y.end_s);
    });
    trace.horizon_s = horizon_s.value_or(max_end);
    if (trace.horizon_s < max_end) trace.horizon_s = max_end;
    return trace;
}

EncounterTrace parse_encounter_csv(std::istream& input) {
    bool ok = false;
    std::string header = read_line(input, ok);
    if (!ok || header != "node_a,node_b,start_s,end_s") {
        throw MalformedRow("expected header 'node_a,node_b,start_s,end_s', got '" + header + "'");
    }
    std::vector<EncounterRecord> records;
    while (true) {
        std::string line = read_line(input, ok);
        if (!ok) break;
        if (line.empty()) continue;
        auto fields = split_fields(line);
        if (fields.size() != 4) {
            throw MalformedRow("expected 4 fields, got " + std::to_string(fields.size()) +
                               " in row: " + line);
        }
        if (fields[0].empty() || fields[1].empty()) {
            throw MalformedRow("empty node id in row: " + line);
        }
        EncounterRecord r{fields[0], fields[1], parse_time_field(fields[2], line),
                          parse_time_field(fields[3], line)};
        if (r.a == r.b) throw SelfEncounter("self encounter in row: " + line);
        if (r.end_s <= r.start_s) throw InvalidInterval("end <= start in row: " + line);
        records.push_back(std::move(r));
    }
    return make_trace(std::move(records));
}

void write_encounter_csv(const EncounterTrace& trace, std::ostream& out) {
    out << "node_a,node_b,start_s,end_s\n";
    for (const auto& r : trace.records) {
        out << r.a << ',' << r.b << ',' << r.start_s << ',' << r.end_s << '\n';
    }
}

std::vector<VisitRecord> parse_visit_csv(std::istream& input) {
    bool ok = false;
    std::string header = read_line(input, ok);
    if (!ok || header != "node,location,start_s,end_s") {
        throw MalformedRow("expected header 'node,location,start_s,end_s', got '" + header + "'");
    }
    std::vector<VisitRecord> visits;
    while (true) {
        std::string line = read_line(input, ok);
        if (!ok) break;
        if (line.empty()) continue;
        auto fields = split_fields(line);
        if (fields.size() != 4) {
            throw MalformedRow("expected 4 fields, got " + std::to_string(fields.size()) +
                               " in row: " + line);
        }
        if (fields[0].empty()) throw MalformedRow("empty node id in row: " + line);
        if (fields[1].empty()) throw MalformedRow("empty location in row: " + line);
        VisitRecord v{fields[0], fields[1], parse_time_field(fields[2], line),
                      parse_time_field(fields[3], line)};
        if (v.end_s <= v.start_s) throw InvalidInterval("end <= start in row: " + line);
        visits.push_back(std::move(v));
    }
    return visits;
}

EncounterTrace derive_encounters_from_visits(std::span<const VisitRecord> visits,
                                             std::int64_t min_overlap_s) {
    std::map<std::string, std::vector<const VisitRecord*>> by_location;
    for (const auto& v : visits) by_location[v.location].push_back(&v);

    std::vector<EncounterRecord> records;
    for (auto& [loc, vs] : by_location) {
        for (std::size_t i = 0; i < vs.size(); ++i) {
            for (std::size_t j = i + 1; j < vs.size(); ++j) {
                const auto& x = *vs[i];
                const auto& y = *vs[j];
                if (x.node == y.node) continue;
                std::int64_t len = overlap(x.start_s, x.end_s, y.start_s, y.end_s);
                if (len <= 0 || len < min_overlap_s) continue;
                records.push_back({x.node, y.node, std::max(x.start_s, y.start_s),
                                   std::min(x.end_s, y.end_s)});
            }
        }
    }
    return make_trace(std::move(records));
}

namespace {

std::size_t bin_count(std::int64_t horizon_s, std::int64_t bin_width_s) {
    std::int64_t n = (horizon_s + bin_width_s - 1) / bin_width_s;
    return static_cast<std::size_t>(std::max<std::int64_t>(n, 1));
}

void accumulate_record(BinnedSeries& series, const EncounterRecord& r, std::int64_t horizon_s) {
    const std::int64_t w = series.bin_width_s;
    std::int64_t first = r.start_s / w;
    std::int64_t last = (std::min(r.end_s, horizon_s) - 1) / w;
    last = std::min<std::int64_t>(last, static_cast<std::int64_t>(series.values.size()) - 1);
    switch (series.mode) {
        case BinMode::indicator:
            for (std::int64_t b = first; b <= last; ++b) series.values[b] = 1.0;
            break;
        case BinMode::count:
            if (first < static_cast<std::int64_t>(series.values.size()) && r.start_s < horizon_s)
                series.values[first] += 1.0;
            break;
        case BinMode::duration:
            for (std::int64_t b = first; b <= last; ++b) {
                std::int64_t len = std::min({r.end_s, (b + 1) * w, horizon_s}) -
                                   std::max(r.start_s, b * w);
                if (len > 0) series.values[b] += static_cast<double>(len);
            }
            break;
    }
}

}  // namespace

BinnedSeries bin_pair_series(const EncounterTrace& trace, const NodeId& a, const NodeId& b,
                             std::int64_t bin_width_s, BinMode mode) {
    if (a == b) throw SelfEncounter("pair series for identical nodes " + a);
    if (!trace.nodes.count(a)) throw UnknownNode("node " + a + " not in trace");
    if (!trace.nodes.count(b)) throw UnknownNode("node " + b + " not in trace");
    BinnedSeries series{std::vector<double>(bin_count(trace.horizon_s, bin_width_s), 0.0),
                        bin_width_s, mode};
    auto key = make_pair_key(a, b);
    for (const auto& r : trace.records) {
        if (r.a == key.first && r.b == key.second) {
            accumulate_record(series, r, trace.horizon_s);
        }
    }
    return series;
}

BinnedSeries bin_node_series(const EncounterTrace& trace, const NodeId& node,
                             std::int64_t bin_width_s, BinMode mode) {
    if (!trace.nodes.count(node)) throw UnknownNode("node " + node + " not in trace");
    BinnedSeries series{std::vector<double>(bin_count(trace.horizon_s, bin_width_s), 0.0),
                        bin_width_s, mode};
    std::set<NodeId> peers;
    for (const auto& r : trace.records) {
        if (r.a == node) peers.insert(r.b);
        if (r.b == node) peers.insert(r.a);
    }
    for (const auto& peer : peers) {
        BinnedSeries pair = bin_pair_series(trace, node, peer, bin_width_s, mode);
        for (std::size_t i = 0; i < series.values.size(); ++i) {
            series.values[i] += pair.values[i];
        }
    }
    return series;
}

std::vector<NodePair> pairs_with_records(const EncounterTrace& trace) {
    std::set<NodePair> seen;
    for (const auto& r : trace.records) seen.insert({r.a, r.b});
    return {seen.begin(), seen.end()};
}

}  // namespace encsim
