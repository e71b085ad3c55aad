// Command-line front end: dataset generation, offline sampling, join
// benchmarking, space reporting, training and evaluation.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "setgraph/config.hpp"
#include "setgraph/error.hpp"
#include "setgraph/harness.hpp"
#include "setgraph/metrics.hpp"
#include "setgraph/model.hpp"
#include "setgraph/spg.hpp"
#include "setgraph/spjoin.hpp"
#include "setgraph/synthetic.hpp"

namespace sg = setgraph;

namespace {

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> overrides;  // key=value
  std::string out_dir;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "config file (key = value lines)");
  cmd->add_option("--set", opts.overrides, "override a config key, e.g. --set M=200");
  cmd->add_option("--out-dir", opts.out_dir, "output directory");
}

sg::ExperimentConfig resolve_config(const CLI::App* cmd, const CommonOpts& opts) {
  sg::ExperimentConfig cfg;
  if (!opts.config_path.empty()) cfg = sg::load_config_file(opts.config_path);
  for (const auto& kv : opts.overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw sg::ValidationError("override must look like key=value: '" + kv + "'");
    sg::apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  // direct flags mirror config keys and win over the file
  for (const auto* opt : cmd->get_options()) {
    std::string name = opt->get_name();
    if (name.rfind("--", 0) == 0) name = name.substr(2);
    if (name == "config" || name == "set" || name == "out-dir" || name == "out" ||
        name == "spg" || name == "checkpoint" || name == "queries")
      continue;
    if (opt->count() == 0) continue;
    sg::apply_override(cfg, name, opt->results().back());
  }
  return cfg;
}

void add_config_flags(CLI::App* cmd) {
  for (const char* key :
       {"graph", "attrs", "synthetic", "sampler", "encoder", "aggr", "metrics"})
    cmd->add_option(std::string("--") + key)->expected(1);
  for (const char* key :
       {"nodes", "blocks", "half_width", "edges_per_node", "M", "m", "K", "d_max", "hidden",
        "batch_size", "k_neg", "epochs", "patience", "eval_negatives", "hits_p", "threads",
        "seed", "repeats", "bench_queries", "standardize_attrs"})
    cmd->add_option(std::string("--") + key)->expected(1);
  for (const char* key : {"p_in", "p_out", "alpha", "epsilon", "lr", "dropout", "train_frac",
                          "valid_frac", "test_frac"})
    cmd->add_option(std::string("--") + key)->expected(1);
}

int cmd_gen(const sg::ExperimentConfig& cfg, const std::string& out_path) {
  sg::Graph g = sg::acquire_graph(cfg);
  std::ofstream out(out_path);
  if (!out) throw sg::ValidationError("cannot open output file '" + out_path + "'");
  sg::save_edge_list(g, out);
  std::cout << "wrote " << out_path << " (n=" << g.num_nodes() << ", edges=" << g.num_edges()
            << ")\n";
  return 0;
}

int cmd_sample(const sg::ExperimentConfig& cfg, const std::string& out_dir) {
  sg::Graph g = sg::acquire_graph(cfg);
  auto sc = cfg.sampler_config();
  if (cfg.threads > 1) sg::bench_sample(cfg, std::cout);  // soft scaling report
  auto samples = sg::sample_all(g, sc, cfg.threads);
  sg::SpG spg = sg::SpG::build(samples);
  auto stats = spg.stats();
  std::cout << "record=spg total_entries=" << stats.total_entries
            << " unique_features=" << stats.unique_features
            << " bytes_structure=" << stats.bytes_structure
            << " bytes_features=" << stats.bytes_features << " dedup_ratio=" << stats.dedup_ratio
            << "\n";
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream out(out_dir + "/spg.bin", std::ios::binary);
    spg.save(out);
    std::cout << "wrote " << out_dir << "/spg.bin\n";
  }
  return 0;
}

int cmd_train(const sg::ExperimentConfig& cfg, const std::string& out_dir) {
  auto runs = sg::run_repeats(cfg, out_dir);
  if (runs.size() == 1) {
    sg::write_metrics_report(runs[0], std::cout);
  } else {
    for (const auto& [name, first] : runs[0].metrics) {
      double mean = 0;
      for (const auto& r : runs) mean += r.metrics.at(name).first;
      mean /= runs.size();
      double var = 0;
      for (const auto& r : runs) {
        double d = r.metrics.at(name).first - mean;
        var += d * d;
      }
      std::cout << name << " = " << mean << " +- " << std::sqrt(var / runs.size()) << " over "
                << runs.size() << " repeats\n";
    }
  }
  return 0;
}

int cmd_eval(const sg::ExperimentConfig& cfg, const std::string& spg_path,
             const std::string& ckpt_path, const std::string& queries_path) {
  std::ifstream spg_in(spg_path, std::ios::binary);
  if (!spg_in) throw sg::ValidationError("cannot open spg snapshot '" + spg_path + "'");
  sg::SpG spg = sg::SpG::load(spg_in);

  std::ifstream ckpt_in(ckpt_path, std::ios::binary);
  if (!ckpt_in) throw sg::ValidationError("cannot open checkpoint '" + ckpt_path + "'");
  auto ckpt = sg::load_checkpoint(ckpt_in);

  std::ifstream q_in(queries_path);
  if (!q_in) throw sg::ValidationError("cannot open query file '" + queries_path + "'");
  auto qf = sg::load_queries(q_in);
  if (!qf.labeled) throw sg::ValidationError("eval needs a labeled query file");

  const sg::AttrMatrix* attrs = nullptr;
  sg::Graph g;
  if (!cfg.attrs.empty() || !cfg.graph.empty() || !cfg.synthetic.empty()) {
    g = sg::acquire_graph(cfg);
    attrs = g.attributes();
  }

  auto scores = sg::score_queries(spg, qf.queries, ckpt.params, attrs, ckpt.feature_divisor,
                                  cfg.threads);
  std::cout << sg::format_metric_line("eval_auc", sg::auc(scores, qf.labels), qf.queries.size())
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"set-based subgraph representation learning"};
  app.require_subcommand(1);

  CommonOpts gen_opts, sample_opts, bench_opts, space_opts, train_opts, eval_opts;
  std::string gen_out = "graph.txt";
  std::string spg_path, ckpt_path, queries_path;

  auto* gen = app.add_subcommand("gen", "generate a synthetic edge list");
  add_common(gen, gen_opts);
  add_config_flags(gen);
  gen->add_option("--out", gen_out, "output edge-list path");

  auto* sample = app.add_subcommand("sample", "offline sampling into an SpG snapshot");
  add_common(sample, sample_opts);
  add_config_flags(sample);

  auto* bench = app.add_subcommand("join-bench", "join throughput across thread counts");
  add_common(bench, bench_opts);
  add_config_flags(bench);

  auto* space = app.add_subcommand("space-report", "set sizes, duplication and space accounting");
  add_common(space, space_opts);
  add_config_flags(space);

  auto* train = app.add_subcommand("train", "run the end-to-end experiment");
  add_common(train, train_opts);
  add_config_flags(train);

  auto* eval = app.add_subcommand("eval", "score a labeled query file with a trained model");
  add_common(eval, eval_opts);
  add_config_flags(eval);
  eval->add_option("--spg", spg_path, "SpG snapshot")->required();
  eval->add_option("--checkpoint", ckpt_path, "model checkpoint")->required();
  eval->add_option("--queries", queries_path, "labeled query file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen(resolve_config(gen, gen_opts), gen_out);
    if (sample->parsed()) return cmd_sample(resolve_config(sample, sample_opts), sample_opts.out_dir);
    if (bench->parsed()) {
      sg::bench_join(resolve_config(bench, bench_opts), std::cout);
      return 0;
    }
    if (space->parsed()) {
      sg::report_space(resolve_config(space, space_opts), std::cout);
      return 0;
    }
    if (train->parsed()) return cmd_train(resolve_config(train, train_opts), train_opts.out_dir);
    if (eval->parsed())
      return cmd_eval(resolve_config(eval, eval_opts), spg_path, ckpt_path, queries_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
