#include "setgraph/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "setgraph/error.hpp"
#include "setgraph/rng.hpp"
#include "setgraph/spjoin.hpp"
#include "setgraph/synthetic.hpp"

namespace setgraph {

namespace {

constexpr std::uint64_t kSplitSalt = 0x53504C49ull << 16;
constexpr std::uint64_t kEvalNegSalt = 0x4556414Cull << 16;
constexpr std::uint64_t kBenchSalt = 0x42454E43ull << 16;
constexpr const char* kVersion = "0.1.0";

std::string fmt_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

std::string format_metric_line(const std::string& name, double value, std::uint64_t n_queries) {
  return "metric=" + name + " value=" + fmt_value(value) +
         " n_queries=" + std::to_string(n_queries);
}

SplitResult split_inductive(const Graph& g, double train_frac, double valid_frac,
                            double test_frac, std::uint32_t k_neg, std::uint64_t seed) {
  if (train_frac < 0 || valid_frac < 0 || test_frac < 0 ||
      train_frac + valid_frac + test_frac > 1.0)
    throw ValidationError("split fractions must be nonnegative and sum to at most 1");

  auto edges = g.edge_list();
  const auto total = static_cast<double>(edges.size());
  auto count_for = [&](double frac) {
    return static_cast<std::size_t>(std::llround(frac * total));
  };
  std::size_t n_train = count_for(train_frac);
  std::size_t n_valid = count_for(valid_frac);
  std::size_t n_test = count_for(test_frac);
  if ((train_frac > 0 && n_train == 0) || (valid_frac > 0 && n_valid == 0) ||
      (test_frac > 0 && n_test == 0) || n_train + n_valid + n_test > edges.size())
    throw ValidationError("graph too small for the requested split fractions");
  if (n_train == 0) throw ValidationError("split produced no training positives");

  Rng rng = Rng::stream(seed, kSplitSalt);
  for (std::size_t i = edges.size(); i > 1; --i)
    std::swap(edges[i - 1], edges[rng.next_below(static_cast<std::uint32_t>(i))]);

  std::vector<std::pair<NodeId, NodeId>> hidden(edges.begin(),
                                                edges.begin() + n_train + n_valid + n_test);
  SplitResult out;
  out.masked = g.mask_edges(hidden);

  auto to_query = [](std::pair<NodeId, NodeId> e) {
    Query q;
    q.nodes = {e.first, e.second};
    return q;
  };
  std::vector<Query> train_pos, valid_pos, test_pos;
  for (std::size_t i = 0; i < n_train; ++i) train_pos.push_back(to_query(edges[i]));
  for (std::size_t i = n_train; i < n_train + n_valid; ++i) valid_pos.push_back(to_query(edges[i]));
  for (std::size_t i = n_train + n_valid; i < n_train + n_valid + n_test; ++i)
    test_pos.push_back(to_query(edges[i]));

  for (auto& q : train_pos) out.train.push_back({std::move(q), 1});

  // fixed negatives for valid/test; sampled against the full graph so they
  // can never collide with a true edge
  auto fill = [&](std::vector<Query>& pos, std::vector<LabeledQuery>& dst) {
    if (pos.empty()) return;
    auto negs = negative_sample(g, pos, k_neg, rng, nullptr);
    for (auto& q : pos) dst.push_back({std::move(q), 1});
    for (auto& q : negs) dst.push_back({std::move(q), 0});
  };
  fill(valid_pos, out.valid);
  fill(test_pos, out.test);
  return out;
}

Graph acquire_graph(const ExperimentConfig& cfg) {
  Graph g;
  if (!cfg.synthetic.empty()) {
    if (cfg.nodes == 0) throw ValidationError("synthetic graph needs nodes > 0");
    if (cfg.synthetic == "ring")
      g = ring_lattice(cfg.nodes, cfg.half_width);
    else if (cfg.synthetic == "sbm")
      g = stochastic_block_model(cfg.nodes, cfg.blocks, cfg.p_in, cfg.p_out, cfg.seed);
    else if (cfg.synthetic == "pa")
      g = preferential_attachment(cfg.nodes, cfg.edges_per_node, cfg.seed);
    else
      throw ValidationError("unknown synthetic kind '" + cfg.synthetic + "'");
  } else {
    if (cfg.graph.empty()) throw ValidationError("config needs either graph or synthetic");
    std::ifstream in(cfg.graph);
    if (!in) throw ValidationError("cannot open graph file '" + cfg.graph + "'");
    g = load_edge_list(in);
  }
  if (!cfg.attrs.empty()) {
    std::ifstream in(cfg.attrs);
    if (!in) throw ValidationError("cannot open attribute file '" + cfg.attrs + "'");
    g.attach_attributes(load_attributes(in, g.num_nodes(), cfg.standardize_attrs));
  }
  return g;
}

namespace {

double walk_duplication_rate(const std::vector<NodeSetSample>& samples,
                             const SamplerConfig& sc) {
  std::uint64_t slots =
      static_cast<std::uint64_t>(sc.walk.num_steps) * sc.walk.num_walks + 1;
  std::uint64_t total = 0;
  for (const auto& s : samples) total += s.members.size();
  return 1.0 - static_cast<double>(total) /
                   (static_cast<double>(samples.size()) * static_cast<double>(slots));
}

void write_manifest(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  out << "# run manifest; loadable as a config file\n";
  out << "# version " << kVersion << "\n";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(cfg.hash()));
  out << "# config_hash " << buf << "\n";
  cfg.dump(out);
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir) {
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

  Graph g = acquire_graph(cfg);
  auto split = split_inductive(g, cfg.train_frac, cfg.valid_frac, cfg.test_frac, cfg.k_neg,
                               cfg.seed);

  SamplerConfig sc = cfg.sampler_config();
  auto samples = sample_all(split.masked, sc, cfg.threads);
  SpG spg = SpG::build(samples);

  ExperimentResult res;
  res.spg_stats = spg.stats();
  if (sc.sampler == SamplerKind::walk) res.duplication_rate = walk_duplication_rate(samples, sc);
  samples.clear();
  samples.shrink_to_fit();

  double divisor = feature_divisor(sc);
  auto tr = train(split.masked, spg, split.train, split.valid, cfg.train_config(),
                  cfg.aggr_kind(), cfg.hidden, divisor, cfg.threads);
  res.history = tr.history;

  const AttrMatrix* attrs = split.masked.attributes();

  // test metrics
  bool want_auc = cfg.metrics.find("auc") != std::string::npos;
  bool want_mrr = cfg.metrics.find("mrr") != std::string::npos;
  bool want_hits = cfg.metrics.find("hits") != std::string::npos;

  if (!split.test.empty() && want_auc) {
    std::vector<Query> qs;
    std::vector<int> ys;
    for (const auto& lq : split.test) {
      qs.push_back(lq.query);
      ys.push_back(lq.label);
    }
    bool has_pos = std::find(ys.begin(), ys.end(), 1) != ys.end();
    bool has_neg = std::find(ys.begin(), ys.end(), 0) != ys.end();
    if (has_pos && has_neg) {
      auto scores = score_queries(spg, qs, tr.params, attrs, divisor, cfg.threads);
      res.metrics["test_auc"] = {auc(scores, ys), qs.size()};
    }
  }

  if (!split.test.empty() && (want_mrr || want_hits) && cfg.eval_negatives > 0) {
    std::vector<Query> pos;
    for (const auto& lq : split.test)
      if (lq.label == 1) pos.push_back(lq.query);
    if (!pos.empty()) {
      Rng rng = Rng::stream(cfg.seed, kEvalNegSalt);
      auto negs = negative_sample(g, pos, cfg.eval_negatives, rng, nullptr);
      std::vector<Query> all;
      all.reserve(pos.size() + negs.size());
      all.insert(all.end(), pos.begin(), pos.end());
      all.insert(all.end(), negs.begin(), negs.end());
      auto scores = score_queries(spg, all, tr.params, attrs, divisor, cfg.threads);
      std::vector<RankedQueryScores> ranked(pos.size());
      for (std::size_t i = 0; i < pos.size(); ++i) {
        ranked[i].pos_score = scores[i];
        ranked[i].neg_scores.reserve(cfg.eval_negatives);
        for (std::uint32_t j = 0; j < cfg.eval_negatives; ++j)
          ranked[i].neg_scores.push_back(scores[pos.size() + i * cfg.eval_negatives + j]);
      }
      if (want_mrr) res.metrics["test_mrr"] = {mrr(ranked), ranked.size()};
      if (want_hits)
        res.metrics["test_hits@" + std::to_string(cfg.hits_p)] = {hits_at(ranked, cfg.hits_p),
                                                                  ranked.size()};
    }
  }

  if (!out_dir.empty()) {
    {
      std::ofstream out(out_dir + "/spg.bin", std::ios::binary);
      spg.save(out);
    }
    {
      std::ofstream out(out_dir + "/model.ckpt", std::ios::binary);
      save_checkpoint(tr.params, divisor, out);
    }
    {
      std::ofstream out(out_dir + "/history.txt");
      for (const auto& rec : tr.history)
        out << "epoch=" << rec.epoch << " loss=" << fmt_value(rec.train_loss)
            << " val_auc=" << fmt_value(rec.val_metric) << " wall_s=" << fmt_value(rec.wall_seconds)
            << "\n";
    }
    {
      std::ofstream out(out_dir + "/metrics.txt");
      write_metrics_report(res, out);
    }
    write_manifest(cfg, out_dir + "/manifest.txt");
  }
  return res;
}

void write_metrics_report(const ExperimentResult& res, std::ostream& out) {
  for (const auto& [name, value] : res.metrics)
    out << format_metric_line(name, value.first, value.second) << "\n";
}

std::vector<ExperimentResult> run_repeats(const ExperimentConfig& cfg,
                                          const std::string& out_dir) {
  std::vector<ExperimentResult> runs;
  for (std::uint32_t r = 0; r < std::max<std::uint32_t>(1, cfg.repeats); ++r) {
    ExperimentConfig run_cfg = cfg;
    run_cfg.seed = cfg.seed + r;
    std::string dir = out_dir;
    if (!out_dir.empty() && cfg.repeats > 1) dir = out_dir + "/run_" + std::to_string(r);
    runs.push_back(run_experiment(run_cfg, dir));
  }
  if (cfg.repeats > 1 && !out_dir.empty()) {
    std::ofstream out(out_dir + "/metrics.txt");
    for (const auto& [name, first_val] : runs[0].metrics) {
      double mean = 0.0;
      for (const auto& run : runs) mean += run.metrics.at(name).first;
      mean /= runs.size();
      double var = 0.0;
      for (const auto& run : runs) {
        double d = run.metrics.at(name).first - mean;
        var += d * d;
      }
      double sd = std::sqrt(var / runs.size());
      out << format_metric_line(name + "_mean", mean, first_val.second) << "\n";
      out << format_metric_line(name + "_std", sd, first_val.second) << "\n";
    }
  }
  return runs;
}

std::vector<BenchRow> bench_join(const ExperimentConfig& cfg, std::ostream& out) {
  Graph g = acquire_graph(cfg);
  SamplerConfig sc = cfg.sampler_config();
  auto samples = sample_all(g, sc, cfg.threads);
  SpG spg = SpG::build(samples);
  samples.clear();
  samples.shrink_to_fit();

  Rng rng = Rng::stream(cfg.seed, kBenchSalt);
  std::vector<Query> queries(cfg.bench_queries);
  for (auto& q : queries) {
    NodeId a = rng.next_below(g.num_nodes());
    NodeId b = a;
    while (b == a) b = rng.next_below(g.num_nodes());
    q.nodes = {a, b};
  }

  std::vector<int> sweep;
  for (int t = 1; t <= cfg.threads; t *= 2) sweep.push_back(t);

  std::vector<BenchRow> rows;
  std::vector<JoinedQuery> reference;
  double base_qps = 0.0;
  for (int t : sweep) {
    constexpr int kReps = 3;
    double best = 1e300;
    std::vector<JoinedQuery> result;
    for (int rep = 0; rep < kReps; ++rep) {
      auto t0 = std::chrono::steady_clock::now();
      result = join_batch(spg, queries, t);
      double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      best = std::min(best, secs);
    }
    BenchRow row;
    row.threads = t;
    row.queries_per_second = static_cast<double>(queries.size()) / best;
    if (t == 1) {
      base_qps = row.queries_per_second;
      reference = std::move(result);
      row.speedup = 1.0;
    } else {
      row.speedup = row.queries_per_second / base_qps;
      row.identical_to_t1 = result.size() == reference.size();
      for (std::size_t i = 0; row.identical_to_t1 && i < result.size(); ++i)
        row.identical_to_t1 = result[i].union_members == reference[i].union_members &&
                              result[i].features == reference[i].features &&
                              result[i].presence == reference[i].presence;
    }
    out << "threads=" << row.threads << " queries_per_s=" << fmt_value(row.queries_per_second)
        << " speedup=" << fmt_value(row.speedup)
        << " identical=" << (row.identical_to_t1 ? 1 : 0) << "\n";
    rows.push_back(row);
  }
  return rows;
}

std::vector<BenchRow> bench_sample(const ExperimentConfig& cfg, std::ostream& out) {
  Graph g = acquire_graph(cfg);
  SamplerConfig sc = cfg.sampler_config();

  std::vector<int> sweep;
  for (int t = 1; t <= cfg.threads; t *= 2) sweep.push_back(t);

  std::vector<BenchRow> rows;
  std::vector<NodeSetSample> reference;
  double base_qps = 0.0;
  for (int t : sweep) {
    auto t0 = std::chrono::steady_clock::now();
    auto samples = sample_all(g, sc, t);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    BenchRow row;
    row.threads = t;
    row.queries_per_second = static_cast<double>(g.num_nodes()) / secs;
    if (t == 1) {
      base_qps = row.queries_per_second;
      reference = std::move(samples);
    } else {
      row.speedup = row.queries_per_second / base_qps;
      row.identical_to_t1 = samples.size() == reference.size();
      for (std::size_t u = 0; row.identical_to_t1 && u < samples.size(); ++u)
        row.identical_to_t1 = samples[u].members == reference[u].members &&
                              samples[u].features.values == reference[u].features.values;
    }
    out << "threads=" << row.threads << " seeds_per_s=" << fmt_value(row.queries_per_second)
        << " speedup=" << fmt_value(row.speedup)
        << " identical=" << (row.identical_to_t1 ? 1 : 0) << "\n";
    rows.push_back(row);
  }
  return rows;
}

SpaceReport report_space(const ExperimentConfig& cfg, std::ostream& out) {
  Graph g = acquire_graph(cfg);
  SamplerConfig sc = cfg.sampler_config();
  auto samples = sample_all(g, sc, cfg.threads);

  SpaceReport rep;
  rep.n = g.num_nodes();
  rep.set_size_min = samples.empty() ? 0 : static_cast<std::uint32_t>(samples[0].members.size());
  for (const auto& s : samples) {
    auto sz = static_cast<std::uint32_t>(s.members.size());
    rep.set_size_total += sz;
    rep.set_size_min = std::min(rep.set_size_min, sz);
    rep.set_size_max = std::max(rep.set_size_max, sz);
  }
  rep.set_size_mean =
      samples.empty() ? 0.0 : static_cast<double>(rep.set_size_total) / samples.size();
  if (sc.sampler == SamplerKind::walk) {
    rep.walk_slots = static_cast<std::uint64_t>(sc.walk.num_steps) * sc.walk.num_walks + 1;
    rep.duplication_rate = walk_duplication_rate(samples, sc);
  }
  SpG spg = SpG::build(samples);
  rep.stats = spg.stats();

  out << "record=set_sizes n=" << rep.n << " total=" << rep.set_size_total
      << " min=" << rep.set_size_min << " max=" << rep.set_size_max
      << " mean=" << fmt_value(rep.set_size_mean) << "\n";
  if (rep.duplication_rate >= 0.0)
    out << "record=duplication walk_slots=" << rep.walk_slots
        << " rate=" << fmt_value(rep.duplication_rate) << "\n";
  out << "record=spg total_entries=" << rep.stats.total_entries
      << " unique_features=" << rep.stats.unique_features
      << " bytes_structure=" << rep.stats.bytes_structure
      << " bytes_features=" << rep.stats.bytes_features
      << " dedup_ratio=" << fmt_value(rep.stats.dedup_ratio) << "\n";
  return rep;
}

}  // namespace setgraph
