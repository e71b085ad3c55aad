#pragma once

#include <cstdint>

#include "setgraph/graph.hpp"

namespace setgraph {

// Ring of n nodes, each connected to its half_width nearest neighbors on
// either side (degree 2 * half_width).
Graph ring_lattice(std::uint32_t n, std::uint32_t half_width);

// Stochastic block model with equal-size blocks; edge probability p_in
// within a block, p_out across blocks.
Graph stochastic_block_model(std::uint32_t n, std::uint32_t blocks, double p_in, double p_out,
                             std::uint64_t seed);

// Preferential attachment: each new node attaches edges_per_node edges to
// existing nodes chosen proportionally to degree.
Graph preferential_attachment(std::uint32_t n, std::uint32_t edges_per_node, std::uint64_t seed);

}  // namespace setgraph
