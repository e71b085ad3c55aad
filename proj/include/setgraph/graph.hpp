#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "setgraph/types.hpp"

namespace setgraph {

// Immutable undirected simple graph in compressed adjacency form.
// Neighbor rows are strictly ascending; the adjacency is symmetric.
// Safe to share read-only across threads once constructed.
class Graph {
 public:
  Graph() = default;

  // Symmetrizes, drops self-loops, collapses duplicates. All ids must be < n.
  static Graph from_edges(NodeId n, std::vector<std::pair<NodeId, NodeId>> edges);

  NodeId num_nodes() const { return n_; }
  std::uint64_t num_arcs() const { return adj_targets_.size(); }
  std::uint64_t num_edges() const { return adj_targets_.size() / 2; }

  std::span<const NodeId> neighbors(NodeId u) const;
  NodeId degree(NodeId u) const;
  bool has_edge(NodeId u, NodeId v) const;

  // New graph with the given undirected edges removed; every pair must exist.
  Graph mask_edges(std::span<const std::pair<NodeId, NodeId>> hidden) const;

  // Undirected edge list, each pair with first < second, ascending.
  std::vector<std::pair<NodeId, NodeId>> edge_list() const;

  const std::vector<std::uint64_t>& offsets() const { return adj_offsets_; }
  const std::vector<NodeId>& targets() const { return adj_targets_; }

  // Optional per-node attributes; rows must equal num_nodes().
  void attach_attributes(AttrMatrix attrs);
  const AttrMatrix* attributes() const { return attrs_.empty() ? nullptr : &attrs_; }
  std::uint32_t attr_dim() const { return attrs_.empty() ? 0 : attrs_.cols; }

 private:
  void check_node(NodeId u) const;

  NodeId n_ = 0;
  std::vector<std::uint64_t> adj_offsets_{0};
  std::vector<NodeId> adj_targets_;
  AttrMatrix attrs_;
};

// An ordered tuple of distinct node ids, arity >= 2.
struct Query {
  std::vector<NodeId> nodes;
};

struct LabeledQuery {
  Query query;
  int label = 0;  // 0 or 1
};

// Throws ValidationError unless q has arity >= 2, distinct ids, all < n.
void validate_query(const Graph& g, const Query& q);

// Edge-list text: "u v" per line, '#' comments, optional "n=<count>" header.
// dedup=false turns duplicate undirected edges into an error instead of
// collapsing them silently. Self-loops are always dropped.
Graph load_edge_list(std::istream& in, bool dedup = true);
void save_edge_list(const Graph& g, std::ostream& out);

// Attribute table: one whitespace-separated row of reals per node, row index
// = node id. standardize applies per-column (x - mean) / std.
AttrMatrix load_attributes(std::istream& in, NodeId n, bool standardize = false);

// Query file: header "arity=<k>", then k ids per line plus an optional
// trailing 0/1 label column (uniform across the file).
struct QueryFile {
  std::uint32_t arity = 0;
  bool labeled = false;
  std::vector<Query> queries;
  std::vector<int> labels;  // empty unless labeled
};

QueryFile load_queries(std::istream& in);
void save_queries(const QueryFile& qf, std::ostream& out);

}  // namespace setgraph
