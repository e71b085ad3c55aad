#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "setgraph/model.hpp"
#include "setgraph/sampling.hpp"

namespace setgraph {

// Experiment-level knobs. Loaded from a flat key = value file with cosmetic
// [sections]; every key can be overridden by a CLI flag of the same name.
struct ExperimentConfig {
  // dataset
  std::string graph;       // edge-list path; empty when synthetic is set
  std::string attrs;       // optional attribute table path
  bool standardize_attrs = false;
  std::string synthetic;   // "", "ring", "sbm", "pa"
  std::uint32_t nodes = 0;
  std::uint32_t blocks = 4;
  double p_in = 0.05;
  double p_out = 0.005;
  std::uint32_t half_width = 1;
  std::uint32_t edges_per_node = 4;

  // sampler / structure encoder
  std::string sampler = "walk";  // walk | ppr
  std::string encoder = "lp";    // lp | spd | ppr
  std::uint32_t M = 100;
  std::uint32_t m = 3;
  std::uint32_t K = 50;
  double alpha = 0.15;
  double epsilon = 1e-4;
  std::uint32_t d_max = 0;  // 0 -> m

  // model / training
  std::string aggr = "mean";  // mean | attention
  std::uint32_t hidden = 96;
  std::uint32_t batch_size = 128;
  double lr = 1e-3;
  std::uint32_t k_neg = 10;
  std::uint32_t epochs = 50;
  std::uint32_t patience = 5;
  double dropout = 0.1;

  // split / evaluation
  double train_frac = 0.05;
  double valid_frac = 0.01;
  double test_frac = 0.01;
  std::uint32_t eval_negatives = 100;
  std::uint32_t hits_p = 50;
  std::string metrics = "auc,mrr,hits";

  // run
  int threads = 1;
  std::uint64_t seed = 1;
  std::uint32_t repeats = 1;
  std::uint32_t bench_queries = 10000;

  SamplerConfig sampler_config() const;
  TrainConfig train_config() const;
  AggrKind aggr_kind() const;

  // every key on one "key = value" line; reloadable as a config file
  void dump(std::ostream& out) const;
  std::uint64_t hash() const;
};

ExperimentConfig load_config(std::istream& in);
ExperimentConfig load_config_file(const std::string& path);

// Applies "key=value" overrides on top of a parsed config.
void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value);

}  // namespace setgraph
