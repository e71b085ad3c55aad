#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "setgraph/config.hpp"
#include "setgraph/error.hpp"
#include "setgraph/harness.hpp"
#include "setgraph/synthetic.hpp"

using namespace setgraph;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("setgraph_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("synthetic generators") {
  Graph ring = ring_lattice(10, 2);
  CHECK(ring.num_edges() == 20);
  for (NodeId u = 0; u < 10; ++u) CHECK(ring.degree(u) == 4);

  Graph sbm = stochastic_block_model(400, 4, 0.1, 0.01, 7);
  CHECK(sbm.num_nodes() == 400);
  // expected edges: 4*C(100,2)*0.1 + cross*0.01 ~ 1980 + 600
  CHECK(sbm.num_edges() > 1800);
  CHECK(sbm.num_edges() < 3400);
  Graph sbm2 = stochastic_block_model(400, 4, 0.1, 0.01, 7);
  CHECK(sbm.targets() == sbm2.targets());  // deterministic by seed

  Graph pa = preferential_attachment(500, 3, 9);
  CHECK(pa.num_nodes() == 500);
  CHECK(pa.num_edges() >= 3 * (500 - 4));

  CHECK_THROWS_AS(ring_lattice(2, 1), ValidationError);
  CHECK_THROWS_AS(stochastic_block_model(10, 0, 0.1, 0.1, 1), ValidationError);
}

TEST_CASE("split arithmetic is exact") {
  Graph g = ring_lattice(10000, 1);  // exactly 10000 edges
  auto split = split_inductive(g, 0.05, 0.01, 0.01, 2, 42);

  std::size_t train_pos = split.train.size();
  std::size_t valid_pos = 0, test_pos = 0;
  for (const auto& lq : split.valid) valid_pos += lq.label;
  for (const auto& lq : split.test) test_pos += lq.label;
  CHECK(train_pos == 500);
  CHECK(valid_pos == 100);
  CHECK(test_pos == 100);
  CHECK(split.valid.size() == 100 * 3);  // pos + 2 negatives each
  CHECK(g.num_arcs() - split.masked.num_arcs() == 2 * 700);
}

TEST_CASE("split positives are disjoint and absent from the masked graph") {
  Graph g = oracle::random_graph(200, 0.08, 3);
  auto split = split_inductive(g, 0.1, 0.05, 0.05, 1, 9);

  std::set<std::pair<NodeId, NodeId>> seen;
  auto canon = [](const Query& q) {
    return std::make_pair(std::min(q.nodes[0], q.nodes[1]), std::max(q.nodes[0], q.nodes[1]));
  };
  auto check_set = [&](const std::vector<LabeledQuery>& set) {
    for (const auto& lq : set) {
      if (lq.label != 1) continue;
      auto e = canon(lq.query);
      CHECK(seen.insert(e).second);                       // pairwise disjoint
      CHECK(!split.masked.has_edge(e.first, e.second));   // membership scan
      CHECK(g.has_edge(e.first, e.second));
      CHECK(!split.masked.has_edge(e.second, e.first));
    }
  };
  check_set(split.train);
  check_set(split.valid);
  check_set(split.test);

  // negatives never collide with true edges
  for (const auto& lq : split.test)
    if (lq.label == 0) CHECK(!g.has_edge(lq.query.nodes[0], lq.query.nodes[1]));
}

TEST_CASE("split validation") {
  Graph g = ring_lattice(10, 1);
  CHECK_THROWS_AS(split_inductive(g, 0.5, 0.4, 0.3, 1, 1), ValidationError);
  CHECK_THROWS_AS(split_inductive(g, 0.001, 0.0, 0.0, 1, 1), ValidationError);

  auto all = split_inductive(g, 1.0, 0.0, 0.0, 1, 1);
  CHECK(all.masked.num_arcs() == 0);
  CHECK(all.train.size() == 10);
  CHECK(all.valid.empty());
}

TEST_CASE("config parsing, overrides and dump round trip") {
  std::istringstream in(
      "# comment\n"
      "[sampler]\n"
      "sampler = walk\n"
      "M = 250\n"
      "m = 4\n"
      "[run]\n"
      "seed = 9\n");
  ExperimentConfig cfg = load_config(in);
  CHECK(cfg.M == 250);
  CHECK(cfg.m == 4);
  CHECK(cfg.seed == 9);

  apply_override(cfg, "M", "300");
  CHECK(cfg.M == 300);
  CHECK_THROWS_AS(apply_override(cfg, "not_a_key", "1"), ValidationError);
  CHECK_THROWS_AS(apply_override(cfg, "M", "abc"), ValidationError);

  std::ostringstream dumped;
  cfg.dump(dumped);
  std::istringstream back(dumped.str());
  ExperimentConfig cfg2 = load_config(back);
  CHECK(cfg2.M == cfg.M);
  CHECK(cfg2.hash() == cfg.hash());

  std::istringstream bad("M 300\n");
  CHECK_THROWS_AS(load_config(bad), ParseError);
}

TEST_CASE("smoke experiment on a degenerate graph") {
  ExperimentConfig cfg;
  cfg.synthetic = "ring";
  cfg.nodes = 4;
  cfg.half_width = 1;
  cfg.train_frac = 0.25;
  cfg.valid_frac = 0.25;
  cfg.test_frac = 0.25;
  cfg.M = 10;
  cfg.m = 2;
  cfg.hidden = 4;
  cfg.epochs = 1;
  cfg.batch_size = 4;
  cfg.k_neg = 2;
  cfg.eval_negatives = 3;
  cfg.seed = 5;

  auto dir = temp_dir("smoke");
  auto res = run_experiment(cfg, dir.string());
  CHECK(res.metrics.count("test_auc") == 1);
  CHECK(res.metrics.count("test_mrr") == 1);
  CHECK(res.metrics.count("test_hits@50") == 1);
  CHECK(res.history.size() == 1);
  CHECK(res.duplication_rate >= 0.0);
  CHECK(std::filesystem::exists(dir / "spg.bin"));
  CHECK(std::filesystem::exists(dir / "model.ckpt"));
  CHECK(std::filesystem::exists(dir / "history.txt"));
  CHECK(std::filesystem::exists(dir / "metrics.txt"));
  CHECK(std::filesystem::exists(dir / "manifest.txt"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("equal config and seed reproduce the metrics report byte for byte") {
  ExperimentConfig cfg;
  cfg.synthetic = "sbm";
  cfg.nodes = 300;
  cfg.blocks = 3;
  cfg.p_in = 0.1;
  cfg.p_out = 0.01;
  cfg.train_frac = 0.1;
  cfg.valid_frac = 0.05;
  cfg.test_frac = 0.05;
  cfg.M = 20;
  cfg.m = 2;
  cfg.hidden = 8;
  cfg.epochs = 2;
  cfg.k_neg = 2;
  cfg.eval_negatives = 5;
  cfg.threads = 1;
  cfg.seed = 11;

  auto dir1 = temp_dir("det1");
  auto dir2 = temp_dir("det2");
  run_experiment(cfg, dir1.string());
  run_experiment(cfg, dir2.string());
  CHECK(slurp((dir1 / "metrics.txt").string()) == slurp((dir2 / "metrics.txt").string()));

  // a manifest is a loadable config that reproduces the same report
  ExperimentConfig from_manifest = load_config_file((dir1 / "manifest.txt").string());
  auto dir3 = temp_dir("det3");
  run_experiment(from_manifest, dir3.string());
  CHECK(slurp((dir1 / "metrics.txt").string()) == slurp((dir3 / "metrics.txt").string()));

  std::filesystem::remove_all(dir1);
  std::filesystem::remove_all(dir2);
  std::filesystem::remove_all(dir3);
}

TEST_CASE("experiment with node attributes wired through the config") {
  auto dir = temp_dir("attrs");
  std::filesystem::create_directories(dir);
  {
    Graph g = ring_lattice(40, 2);
    std::ofstream out(dir / "graph.txt");
    save_edge_list(g, out);
    std::ofstream attrs(dir / "attrs.txt");
    for (int i = 0; i < 40; ++i) attrs << (i * 0.5) << " " << (i % 7) << "\n";
  }
  ExperimentConfig cfg;
  cfg.graph = (dir / "graph.txt").string();
  cfg.attrs = (dir / "attrs.txt").string();
  cfg.standardize_attrs = true;
  cfg.train_frac = 0.2;
  cfg.valid_frac = 0.1;
  cfg.test_frac = 0.1;
  cfg.M = 10;
  cfg.m = 2;
  cfg.hidden = 6;
  cfg.epochs = 2;
  cfg.k_neg = 2;
  cfg.eval_negatives = 3;
  cfg.seed = 8;
  auto res = run_experiment(cfg, (dir / "out").string());
  CHECK(res.metrics.count("test_auc") == 1);
  std::filesystem::remove_all(dir);
}

TEST_CASE("space report on a ring lattice") {
  ExperimentConfig cfg;
  cfg.synthetic = "ring";
  cfg.nodes = 1000;
  cfg.half_width = 1;
  cfg.M = 200;
  cfg.m = 4;
  cfg.threads = 2;

  std::ostringstream out;
  auto rep = report_space(cfg, out);
  CHECK(rep.n == 1000);
  CHECK(rep.set_size_max <= 9);
  CHECK(rep.duplication_rate >= 0.98);
  CHECK(rep.walk_slots == 801);
  CHECK(rep.stats.total_entries == rep.set_size_total);
  CHECK(out.str().find("record=duplication") != std::string::npos);
}

TEST_CASE("sample bench smoke") {
  ExperimentConfig cfg;
  cfg.synthetic = "pa";
  cfg.nodes = 1500;
  cfg.edges_per_node = 3;
  cfg.M = 20;
  cfg.m = 3;
  cfg.threads = 2;

  std::ostringstream out;
  auto rows = bench_sample(cfg, out);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].speedup == 1.0);
  CHECK(rows[1].identical_to_t1);  // sampling output must not depend on T
  CHECK(out.str().find("seeds_per_s") != std::string::npos);
}

TEST_CASE("join bench smoke") {
  ExperimentConfig cfg;
  cfg.synthetic = "pa";
  cfg.nodes = 2000;
  cfg.edges_per_node = 3;
  cfg.M = 10;
  cfg.m = 2;
  cfg.threads = 4;
  cfg.bench_queries = 500;

  std::ostringstream out;
  auto rows = bench_join(cfg, out);
  REQUIRE(rows.size() == 3);  // 1, 2, 4
  CHECK(rows[0].threads == 1);
  CHECK(rows[0].speedup == 1.0);
  for (const auto& row : rows) CHECK(row.identical_to_t1);
}

TEST_CASE("repeats aggregate mean and std") {
  ExperimentConfig cfg;
  cfg.synthetic = "ring";
  cfg.nodes = 60;
  cfg.half_width = 2;
  cfg.train_frac = 0.2;
  cfg.valid_frac = 0.1;
  cfg.test_frac = 0.1;
  cfg.M = 10;
  cfg.m = 2;
  cfg.hidden = 4;
  cfg.epochs = 1;
  cfg.k_neg = 1;
  cfg.eval_negatives = 2;
  cfg.repeats = 2;
  cfg.seed = 3;

  auto dir = temp_dir("repeats");
  auto runs = run_repeats(cfg, dir.string());
  CHECK(runs.size() == 2);
  std::string agg = slurp((dir / "metrics.txt").string());
  CHECK(agg.find("test_auc_mean") != std::string::npos);
  CHECK(agg.find("test_auc_std") != std::string::npos);
  std::filesystem::remove_all(dir);
}
