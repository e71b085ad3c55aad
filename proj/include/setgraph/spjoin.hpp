#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "setgraph/graph.hpp"
#include "setgraph/spg.hpp"

namespace setgraph {

// Query-level join result: the union of the per-node member sets with the
// concatenated feature matrix. Column block j of row x holds the features of
// x relative to query node j, or zeros when x is not in that node's set;
// the presence mask distinguishes the two.
struct JoinedQuery {
  Query query;
  std::vector<NodeId> union_members;  // strictly ascending
  std::vector<float> features;        // |S_Q| x (arity * k), row-major
  std::vector<std::uint8_t> presence; // |S_Q| x arity, 0/1
  std::uint32_t arity = 0;
  std::uint32_t feature_dim = 0;      // k

  std::uint32_t rows() const { return static_cast<std::uint32_t>(union_members.size()); }
  std::span<const float> feature_row(std::uint32_t r) const {
    return {features.data() + static_cast<std::size_t>(r) * arity * feature_dim,
            static_cast<std::size_t>(arity) * feature_dim};
  }
};

// Sorted multiway merge over the query nodes' row segments;
// O(sum of row lengths + arity * |union|) per query.
JoinedQuery join(const SpG& spg, const Query& q);

// Same, counting elementary merge operations (for cost assertions).
JoinedQuery join_counted(const SpG& spg, const Query& q, std::uint64_t* ops);

// Join cost proxy: sum of the query nodes' row lengths.
std::uint64_t join_cost(const SpG& spg, const Query& q);

// Longest-processing-time assignment of queries to `groups` bins:
// sort by cost descending, place each in the currently lightest bin.
// Guarantees max bin load <= total/groups + max single cost.
std::vector<std::vector<std::uint32_t>> balance_groups(std::span<const std::uint64_t> costs,
                                                       std::uint32_t groups);

// Joins a batch with `threads` workers over balanced groups. Output order
// matches input order and is bit-identical for any thread count.
std::vector<JoinedQuery> join_batch(const SpG& spg, std::span<const Query> queries, int threads);

// Text table of a joined query (member id, presence bits, feature blocks).
void dump_table(const JoinedQuery& jq, std::ostream& out);

}  // namespace setgraph
