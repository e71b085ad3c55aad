#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "setgraph/sampling.hpp"
#include "setgraph/types.hpp"

namespace setgraph {

// Consolidated sparse store of all per-seed samples: row offsets (indptr),
// sorted member ids (indices), per-entry pointers into a deduplicated
// feature bank. Built once, then frozen and shared read-only.
class SpG {
 public:
  struct RowView {
    std::span<const NodeId> members;
    std::span<const std::uint32_t> feature_ptr;
  };

  struct Stats {
    std::uint64_t total_entries = 0;   // indptr[n]
    std::uint32_t unique_features = 0; // bank rows
    std::uint64_t bytes_structure = 0; // indptr + indices
    std::uint64_t bytes_features = 0;  // feature pointers + bank
    double dedup_ratio = 0.0;          // total_entries / unique_features
  };

  // samples[u] is the sample for seed u; feature dimension must be uniform.
  // Identical feature rows (bitwise) share one bank row.
  static SpG build(std::span<const NodeSetSample> samples);

  NodeId num_nodes() const { return n_; }
  std::uint32_t feature_dim() const { return k_; }
  std::uint32_t unique_rows() const { return c_; }
  std::uint64_t total_entries() const { return indptr_.back(); }

  RowView row(NodeId u) const;
  std::span<const float> feature_row(std::uint32_t ptr) const;

  Stats stats() const;

  // Binary snapshot (little-endian): header then indptr, indices, sfptr,
  // bank. load() re-validates every structural invariant.
  void save(std::ostream& out) const;
  static SpG load(std::istream& in);

  // Checks all invariants, including that each seed appears in its own row.
  void validate() const;

  const std::vector<std::uint32_t>& indptr() const { return indptr_; }
  const std::vector<NodeId>& indices() const { return indices_; }
  const std::vector<std::uint32_t>& sfptr() const { return sfptr_; }
  const std::vector<float>& bank() const { return bank_; }

 private:
  NodeId n_ = 0;
  std::uint32_t k_ = 0;
  std::uint32_t c_ = 0;
  std::vector<std::uint32_t> indptr_{0};
  std::vector<NodeId> indices_;
  std::vector<std::uint32_t> sfptr_;
  std::vector<float> bank_;  // c_ rows of k_ floats
};

}  // namespace setgraph
