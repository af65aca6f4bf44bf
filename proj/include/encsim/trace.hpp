#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "encsim/errors.hpp"

namespace encsim {

using NodeId = std::string;

// Unordered node pair stored canonically (lexicographically smaller id first).
using NodePair = std::pair<NodeId, NodeId>;

inline NodePair make_pair_key(NodeId a, NodeId b) {
    if (b < a) std::swap(a, b);
    return {std::move(a), std::move(b)};
}

// One contact interval [start_s, end_s) between two distinct nodes.
struct EncounterRecord {
    NodeId a;
    NodeId b;
    std::int64_t start_s = 0;
    std::int64_t end_s = 0;
};

// Canonical trace: records sorted by (start, pair), same-pair overlapping or
// adjacent intervals merged, every record inside [0, horizon_s].
struct EncounterTrace {
    std::vector<EncounterRecord> records;
    std::int64_t horizon_s = 0;
    std::set<NodeId> nodes;
};

struct VisitRecord {
    NodeId node;
    std::string location;
    std::int64_t start_s = 0;
    std::int64_t end_s = 0;
};

enum class BinMode { indicator, count, duration };

struct BinnedSeries {
    std::vector<double> values;
    std::int64_t bin_width_s = 0;
    BinMode mode = BinMode::indicator;
};

// Canonicalizes raw records into a valid trace: orders each pair, merges
// same-pair overlapping/adjacent intervals, sorts, collects nodes.
// horizon_s defaults to the max record end (0 for an empty record set).
EncounterTrace make_trace(std::vector<EncounterRecord> records,
                          std::optional<std::int64_t> horizon_s = std::nullopt);

// CSV schema: node_a,node_b,start_s,end_s (LF line endings, no quoting).
EncounterTrace parse_encounter_csv(std::istream& input);
void write_encounter_csv(const EncounterTrace& trace, std::ostream& out);

// CSV schema: node,location,start_s,end_s.
std::vector<VisitRecord> parse_visit_csv(std::istream& input);

// Emits one record per pairwise visit intersection (same location, distinct
// nodes) of length >= min_overlap_s; same-pair results are merged.
EncounterTrace derive_encounters_from_visits(std::span<const VisitRecord> visits,
                                             std::int64_t min_overlap_s);

BinnedSeries bin_pair_series(const EncounterTrace& trace, const NodeId& a, const NodeId& b,
                             std::int64_t bin_width_s, BinMode mode);

// Node-level aggregate: sum of the node's pair series. In indicator mode the
// aggregate counts simultaneously active pairs per bin, so values may exceed 1.
BinnedSeries bin_node_series(const EncounterTrace& trace, const NodeId& node,
                             std::int64_t bin_width_s, BinMode mode);

// Canonical pairs that have at least one record.
std::vector<NodePair> pairs_with_records(const EncounterTrace& trace);

}  // namespace encsim
