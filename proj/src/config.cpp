#include "setgraph/config.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

#include "setgraph/error.hpp"

namespace setgraph {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(const std::string& key, std::string_view v) {
  T out{};
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
    throw ValidationError("config: bad value '" + std::string(v) + "' for key '" + key + "'");
  return out;
}

bool parse_bool(const std::string& key, std::string_view v) {
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw ValidationError("config: bad boolean '" + std::string(v) + "' for key '" + key + "'");
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  std::string_view v = trim(value);
  if (key == "graph") cfg.graph = v;
  else if (key == "attrs") cfg.attrs = v;
  else if (key == "standardize_attrs") cfg.standardize_attrs = parse_bool(key, v);
  else if (key == "synthetic") cfg.synthetic = v;
  else if (key == "nodes") cfg.nodes = parse_number<std::uint32_t>(key, v);
  else if (key == "blocks") cfg.blocks = parse_number<std::uint32_t>(key, v);
  else if (key == "p_in") cfg.p_in = parse_number<double>(key, v);
  else if (key == "p_out") cfg.p_out = parse_number<double>(key, v);
  else if (key == "half_width") cfg.half_width = parse_number<std::uint32_t>(key, v);
  else if (key == "edges_per_node") cfg.edges_per_node = parse_number<std::uint32_t>(key, v);
  else if (key == "sampler") cfg.sampler = v;
  else if (key == "encoder") cfg.encoder = v;
  else if (key == "M") cfg.M = parse_number<std::uint32_t>(key, v);
  else if (key == "m") cfg.m = parse_number<std::uint32_t>(key, v);
  else if (key == "K") cfg.K = parse_number<std::uint32_t>(key, v);
  else if (key == "alpha") cfg.alpha = parse_number<double>(key, v);
  else if (key == "epsilon") cfg.epsilon = parse_number<double>(key, v);
  else if (key == "d_max") cfg.d_max = parse_number<std::uint32_t>(key, v);
  else if (key == "aggr") cfg.aggr = v;
  else if (key == "hidden") cfg.hidden = parse_number<std::uint32_t>(key, v);
  else if (key == "batch_size") cfg.batch_size = parse_number<std::uint32_t>(key, v);
  else if (key == "lr") cfg.lr = parse_number<double>(key, v);
  else if (key == "k_neg") cfg.k_neg = parse_number<std::uint32_t>(key, v);
  else if (key == "epochs") cfg.epochs = parse_number<std::uint32_t>(key, v);
  else if (key == "patience") cfg.patience = parse_number<std::uint32_t>(key, v);
  else if (key == "dropout") cfg.dropout = parse_number<double>(key, v);
  else if (key == "train_frac") cfg.train_frac = parse_number<double>(key, v);
  else if (key == "valid_frac") cfg.valid_frac = parse_number<double>(key, v);
  else if (key == "test_frac") cfg.test_frac = parse_number<double>(key, v);
  else if (key == "eval_negatives") cfg.eval_negatives = parse_number<std::uint32_t>(key, v);
  else if (key == "hits_p") cfg.hits_p = parse_number<std::uint32_t>(key, v);
  else if (key == "metrics") cfg.metrics = v;
  else if (key == "threads") cfg.threads = parse_number<int>(key, v);
  else if (key == "seed" || key == "rng_seed") cfg.seed = parse_number<std::uint64_t>(key, v);
  else if (key == "repeats") cfg.repeats = parse_number<std::uint32_t>(key, v);
  else if (key == "bench_queries") cfg.bench_queries = parse_number<std::uint32_t>(key, v);
  else throw ValidationError("config: unknown key '" + key + "'");
}

ExperimentConfig load_config(std::istream& in) {
  ExperimentConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view s = trim(line);
    if (s.empty() || s.front() == '#' || s.front() == ';') continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ParseError("unterminated section header", lineno);
      continue;  // sections are cosmetic
    }
    auto eq = s.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected key = value", lineno);
    std::string key(trim(s.substr(0, eq)));
    std::string value(trim(s.substr(eq + 1)));
    try {
      apply_override(cfg, key, value);
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file '" + path + "'");
  return load_config(in);
}

SamplerConfig ExperimentConfig::sampler_config() const {
  SamplerConfig sc;
  if (sampler == "walk") sc.sampler = SamplerKind::walk;
  else if (sampler == "ppr") sc.sampler = SamplerKind::ppr;
  else throw ValidationError("config: sampler must be walk or ppr");
  if (encoder == "lp") sc.encoder = EncoderKind::lp;
  else if (encoder == "spd") sc.encoder = EncoderKind::spd;
  else if (encoder == "ppr") sc.encoder = EncoderKind::ppr;
  else throw ValidationError("config: encoder must be lp, spd or ppr");
  sc.walk.num_walks = M;
  sc.walk.num_steps = m;
  sc.walk.rng_seed = seed;
  sc.ppr.alpha = alpha;
  sc.ppr.epsilon = epsilon;
  sc.ppr.top_k = K;
  sc.d_max = d_max;
  sc.rng_seed = seed;
  return sc;
}

TrainConfig ExperimentConfig::train_config() const {
  TrainConfig tc;
  tc.batch_size = batch_size;
  tc.learning_rate = lr;
  tc.neg_per_pos = k_neg;
  tc.epochs = epochs;
  tc.patience = patience;
  tc.dropout = dropout;
  tc.rng_seed = seed;
  return tc;
}

AggrKind ExperimentConfig::aggr_kind() const {
  if (aggr == "mean") return AggrKind::mean;
  if (aggr == "attention") return AggrKind::attention;
  throw ValidationError("config: aggr must be mean or attention");
}

void ExperimentConfig::dump(std::ostream& out) const {
  out << "[dataset]\n";
  out << "graph = " << graph << "\n";
  out << "attrs = " << attrs << "\n";
  out << "standardize_attrs = " << (standardize_attrs ? 1 : 0) << "\n";
  out << "synthetic = " << synthetic << "\n";
  out << "nodes = " << nodes << "\n";
  out << "blocks = " << blocks << "\n";
  out << "p_in = " << fmt_double(p_in) << "\n";
  out << "p_out = " << fmt_double(p_out) << "\n";
  out << "half_width = " << half_width << "\n";
  out << "edges_per_node = " << edges_per_node << "\n";
  out << "[sampler]\n";
  out << "sampler = " << sampler << "\n";
  out << "encoder = " << encoder << "\n";
  out << "M = " << M << "\n";
  out << "m = " << m << "\n";
  out << "K = " << K << "\n";
  out << "alpha = " << fmt_double(alpha) << "\n";
  out << "epsilon = " << fmt_double(epsilon) << "\n";
  out << "d_max = " << d_max << "\n";
  out << "[model]\n";
  out << "aggr = " << aggr << "\n";
  out << "hidden = " << hidden << "\n";
  out << "batch_size = " << batch_size << "\n";
  out << "lr = " << fmt_double(lr) << "\n";
  out << "k_neg = " << k_neg << "\n";
  out << "epochs = " << epochs << "\n";
  out << "patience = " << patience << "\n";
  out << "dropout = " << fmt_double(dropout) << "\n";
  out << "[split]\n";
  out << "train_frac = " << fmt_double(train_frac) << "\n";
  out << "valid_frac = " << fmt_double(valid_frac) << "\n";
  out << "test_frac = " << fmt_double(test_frac) << "\n";
  out << "eval_negatives = " << eval_negatives << "\n";
  out << "hits_p = " << hits_p << "\n";
  out << "metrics = " << metrics << "\n";
  out << "[run]\n";
  out << "threads = " << threads << "\n";
  out << "seed = " << seed << "\n";
  out << "repeats = " << repeats << "\n";
  out << "bench_queries = " << bench_queries << "\n";
}

std::uint64_t ExperimentConfig::hash() const {
  std::ostringstream ss;
  dump(ss);
  std::string text = ss.str();
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

}  // namespace setgraph
