#include "setgraph/synthetic.hpp"

#include <cmath>
#include <vector>

#include "setgraph/error.hpp"
#include "setgraph/rng.hpp"

namespace setgraph {

Graph ring_lattice(std::uint32_t n, std::uint32_t half_width) {
  if (n < 3) throw ValidationError("ring_lattice: need at least 3 nodes");
  if (half_width < 1 || 2 * half_width >= n)
    throw ValidationError("ring_lattice: half_width out of range");
  std::vector<std::pair<NodeId, NodeId>> edges;
  edges.reserve(static_cast<std::size_t>(n) * half_width);
  for (std::uint32_t u = 0; u < n; ++u)
    for (std::uint32_t d = 1; d <= half_width; ++d)
      edges.emplace_back(u, (u + d) % n);
  return Graph::from_edges(n, std::move(edges));
}

Graph stochastic_block_model(std::uint32_t n, std::uint32_t blocks, double p_in, double p_out,
                             std::uint64_t seed) {
  if (blocks < 1 || n < blocks) throw ValidationError("sbm: bad block count");
  if (p_in < 0 || p_in > 1 || p_out < 0 || p_out > 1)
    throw ValidationError("sbm: probabilities must be in [0, 1]");
  Rng rng = Rng::stream(seed, 0x53424Dull);
  std::uint32_t per_block = n / blocks;
  auto block_of = [&](NodeId u) { return std::min(u / per_block, blocks - 1); };

  std::vector<std::pair<NodeId, NodeId>> edges;
  // geometric skipping over a run of columns with uniform edge probability
  auto sample_run = [&](NodeId u, NodeId lo, NodeId hi, double p) {
    if (p <= 0.0 || lo >= hi) return;
    if (p >= 1.0) {
      for (NodeId v = lo; v < hi; ++v) edges.emplace_back(u, v);
      return;
    }
    std::uint64_t pos = lo;
    const double log_q = std::log1p(-p);
    while (pos < hi) {
      double r = rng.next_unit();
      auto skip = static_cast<std::uint64_t>(std::floor(std::log1p(-r) / log_q));
      pos += skip;
      if (pos >= hi) break;
      edges.emplace_back(u, static_cast<NodeId>(pos));
      ++pos;
    }
  };

  // for row u the upper-triangle columns split into two uniform runs:
  // the tail of u's own block, then everything past it
  for (NodeId u = 0; u + 1 < n; ++u) {
    std::uint32_t b = block_of(u);
    NodeId block_end = (b + 1 == blocks) ? n : (b + 1) * per_block;
    sample_run(u, u + 1, block_end, p_in);
    sample_run(u, block_end, n, p_out);
  }
  return Graph::from_edges(n, std::move(edges));
}

Graph preferential_attachment(std::uint32_t n, std::uint32_t edges_per_node, std::uint64_t seed) {
  if (edges_per_node < 1) throw ValidationError("preferential_attachment: need >= 1 edge per node");
  if (n < edges_per_node + 2) throw ValidationError("preferential_attachment: graph too small");
  Rng rng = Rng::stream(seed, 0x5041ull);

  std::vector<std::pair<NodeId, NodeId>> edges;
  std::vector<NodeId> endpoints;  // degree-proportional sampling pool
  // start from a small clique
  for (NodeId u = 0; u <= edges_per_node; ++u)
    for (NodeId v = u + 1; v <= edges_per_node; ++v) {
      edges.emplace_back(u, v);
      endpoints.push_back(u);
      endpoints.push_back(v);
    }
  std::vector<NodeId> picked;
  for (NodeId u = edges_per_node + 1; u < n; ++u) {
    picked.clear();
    int guard = 0;
    while (picked.size() < edges_per_node && guard < 1000) {
      NodeId v = endpoints[rng.next_below(static_cast<std::uint32_t>(endpoints.size()))];
      ++guard;
      bool dup = false;
      for (NodeId w : picked) dup |= (w == v);
      if (dup || v == u) continue;
      picked.push_back(v);
    }
    for (NodeId v : picked) {
      edges.emplace_back(u, v);
      endpoints.push_back(u);
      endpoints.push_back(v);
    }
  }
  return Graph::from_edges(n, std::move(edges));
}

}  // namespace setgraph
