#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "setgraph/graph.hpp"
#include "setgraph/types.hpp"

namespace setgraph {

// A seed's sampled neighbor set with per-node structural features.
// members are strictly ascending and always contain the seed; features has
// one row per member, in member order.
struct NodeSetSample {
  NodeId seed = 0;
  std::vector<NodeId> members;
  FeatureMatrix features;
};

struct WalkConfig {
  std::uint32_t num_walks = 100;  // M
  std::uint32_t num_steps = 3;    // m
  std::uint64_t rng_seed = 0;
};

struct PprConfig {
  double alpha = 0.15;
  double epsilon = 1e-4;
  std::uint32_t top_k = 50;
};

enum class SamplerKind { walk, ppr };
enum class EncoderKind { lp, spd, ppr };

struct SamplerConfig {
  SamplerKind sampler = SamplerKind::walk;
  EncoderKind encoder = EncoderKind::lp;
  WalkConfig walk;
  PprConfig ppr;
  std::uint32_t d_max = 0;  // 0 means "use walk.num_steps"
  std::uint64_t rng_seed = 0;
};

// M uniform random walks of m steps from u. Features are landing counts:
// row x, column i = number of walks whose step-i position is x (i in [0, m],
// so the feature dimension is m+1). A walker at a degree-0 node stays put.
NodeSetSample sample_walks(const Graph& g, NodeId u, const WalkConfig& cfg);

// Entrywise counts / num_walks, as doubles. Each column then sums to 1.
std::vector<double> normalize_lp(const FeatureMatrix& counts, std::uint32_t num_walks);

// Sparse nonnegative score vector, sorted by node id. The seed's entry is
// always present (possibly 0 when epsilon is too coarse to push even once).
struct SparseScores {
  std::vector<NodeId> nodes;
  std::vector<double> scores;
};

// Residual push-flow approximation of personalized PageRank. At return every
// residual satisfies r(v) < epsilon * degree(v); residual mass at degree-0
// nodes is absorbed into the estimate directly. If residual_out is non-null
// it receives the final residual support (for invariant checks).
SparseScores ppr_push(const Graph& g, NodeId u, double alpha, double epsilon,
                      SparseScores* residual_out = nullptr);

// seed plus the top-K nodes by score, ties broken by ascending node id.
// Feature dimension 1: the node's score.
NodeSetSample topk_ppr(NodeId seed, const SparseScores& scores, std::uint32_t k);

// BFS distances from u over the given members, truncated at d_max;
// d_max + 1 is the unreachable/far sentinel. Feature dimension 1.
FeatureMatrix spd_encode(const Graph& g, NodeId u, std::span<const NodeId> members,
                         std::uint32_t d_max);

// Per-seed sampling for all nodes, distributed over `threads` workers.
// Each seed uses its own RNG stream derived from (rng_seed, seed id), so the
// result is identical for any thread count.
std::vector<NodeSetSample> sample_all(const Graph& g, const SamplerConfig& cfg, int threads);

// Scale that maps stored feature values into model input space:
// lp -> num_walks, spd -> d_max + 1, ppr -> 1.
double feature_divisor(const SamplerConfig& cfg);

std::uint32_t effective_d_max(const SamplerConfig& cfg);

}  // namespace setgraph
