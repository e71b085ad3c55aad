#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "setgraph/config.hpp"
#include "setgraph/graph.hpp"
#include "setgraph/metrics.hpp"
#include "setgraph/model.hpp"

namespace setgraph {

// Inductive split: positive edges are sampled uniformly per split, masked
// from the graph used for sampling and feature construction, and paired with
// k_neg generated negatives (valid/test negatives are fixed here, training
// negatives are regenerated per batch inside train()).
struct SplitResult {
  Graph masked;
  std::vector<LabeledQuery> train;  // positives only
  std::vector<LabeledQuery> valid;  // positives + fixed negatives
  std::vector<LabeledQuery> test;   // positives + fixed negatives
};

SplitResult split_inductive(const Graph& g, double train_frac, double valid_frac,
                            double test_frac, std::uint32_t k_neg, std::uint64_t seed);

// Builds the configured graph (file or synthetic) with optional attributes.
Graph acquire_graph(const ExperimentConfig& cfg);

struct ExperimentResult {
  // metric name -> (value, number of evaluation queries)
  std::map<std::string, std::pair<double, std::uint64_t>> metrics;
  std::vector<EpochRecord> history;
  SpG::Stats spg_stats;
  double duplication_rate = -1.0;  // walk sampler only
};

// sample_all -> build SpG -> train -> evaluate. Writes spg.bin, model.ckpt,
// history.txt, metrics.txt and manifest.txt under out_dir (if non-empty).
ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir);

// Mean/std aggregation over cfg.repeats runs with seeds seed, seed+1, ...
std::vector<ExperimentResult> run_repeats(const ExperimentConfig& cfg,
                                          const std::string& out_dir);

struct BenchRow {
  int threads = 0;
  double queries_per_second = 0.0;
  double speedup = 1.0;
  bool identical_to_t1 = true;
};

// Thread sweep of join_batch over random queries; powers of two up to
// cfg.threads. Results are checked bit-identical against the T=1 run.
std::vector<BenchRow> bench_join(const ExperimentConfig& cfg, std::ostream& out);

// Thread sweep of sample_all on the configured graph (soft report: sampling
// wall time per thread count, outputs checked identical to the T=1 run).
std::vector<BenchRow> bench_sample(const ExperimentConfig& cfg, std::ostream& out);

struct SpaceReport {
  std::uint32_t n = 0;
  std::uint64_t walk_slots = 0;      // m*M + 1 per seed (walk sampler)
  std::uint64_t set_size_total = 0;  // sum |S_u|
  std::uint32_t set_size_min = 0, set_size_max = 0;
  double set_size_mean = 0.0;
  double duplication_rate = -1.0;
  SpG::Stats stats;
};

// Per-seed set-size distribution, walk-node duplication rate and SpG space
// accounting for the configured dataset.
SpaceReport report_space(const ExperimentConfig& cfg, std::ostream& out);

// Deterministic formatting used by all emitted reports.
std::string format_metric_line(const std::string& name, double value, std::uint64_t n_queries);

void write_metrics_report(const ExperimentResult& res, std::ostream& out);

}  // namespace setgraph
