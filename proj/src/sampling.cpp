#include "setgraph/sampling.hpp"

#include <algorithm>
#include <atomic>
#include <deque>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

#include "setgraph/error.hpp"
#include "setgraph/rng.hpp"

namespace setgraph {

namespace {

// stream-id salts so different consumers of the same master seed never share
// a stream
constexpr std::uint64_t kWalkSalt = 0x57414C4Bull << 24;

std::uint32_t member_index(std::span<const NodeId> members, NodeId x) {
  auto it = std::lower_bound(members.begin(), members.end(), x);
  return static_cast<std::uint32_t>(it - members.begin());
}

}  // namespace

NodeSetSample sample_walks(const Graph& g, NodeId u, const WalkConfig& cfg) {
  if (cfg.num_walks < 1 || cfg.num_steps < 1)
    throw ValidationError("walk sampler needs num_walks >= 1 and num_steps >= 1");
  g.neighbors(u);  // range check

  const std::uint32_t m1 = cfg.num_steps + 1;
  Rng rng = Rng::stream(cfg.rng_seed, kWalkSalt + u);

  std::vector<NodeId> trace(static_cast<std::size_t>(cfg.num_walks) * m1);
  for (std::uint32_t w = 0; w < cfg.num_walks; ++w) {
    NodeId cur = u;
    NodeId* row = trace.data() + static_cast<std::size_t>(w) * m1;
    row[0] = cur;
    for (std::uint32_t s = 1; s < m1; ++s) {
      auto nbrs = g.neighbors(cur);
      if (!nbrs.empty()) cur = nbrs[rng.next_below(static_cast<std::uint32_t>(nbrs.size()))];
      row[s] = cur;  // degree-0: stall in place
    }
  }

  NodeSetSample out;
  out.seed = u;
  out.members = trace;
  std::sort(out.members.begin(), out.members.end());
  out.members.erase(std::unique(out.members.begin(), out.members.end()), out.members.end());

  out.features = FeatureMatrix::zeros(static_cast<std::uint32_t>(out.members.size()), m1);
  for (std::uint32_t w = 0; w < cfg.num_walks; ++w) {
    const NodeId* row = trace.data() + static_cast<std::size_t>(w) * m1;
    for (std::uint32_t s = 0; s < m1; ++s)
      out.features.at(member_index(out.members, row[s]), s) += 1.0f;
  }
  return out;
}

std::vector<double> normalize_lp(const FeatureMatrix& counts, std::uint32_t num_walks) {
  if (num_walks == 0) throw ValidationError("normalize_lp: num_walks must be positive");
  std::vector<double> out(counts.values.size());
  for (std::size_t i = 0; i < counts.values.size(); ++i) {
    float c = counts.values[i];
    if (c < 0.0f || c > static_cast<float>(num_walks))
      throw ValidationError("normalize_lp: count outside [0, num_walks]");
    out[i] = static_cast<double>(c) / num_walks;
  }
  return out;
}

namespace {

// dense scratch reused across seeds; touched entries are reset after each call
struct PprScratch {
  std::vector<double> est, res;
  std::vector<std::uint8_t> inq;
  std::vector<NodeId> touched;

  void ensure(NodeId n) {
    if (est.size() < n) {
      est.assign(n, 0.0);
      res.assign(n, 0.0);
      inq.assign(n, 0);
    }
  }
  void touch(NodeId v) { touched.push_back(v); }
  void reset() {
    for (NodeId v : touched) {
      est[v] = 0.0;
      res[v] = 0.0;
      inq[v] = 0;
    }
    touched.clear();
  }
};

SparseScores ppr_push_ws(const Graph& g, NodeId u, double alpha, double epsilon,
                         PprScratch& ws, SparseScores* residual_out) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ValidationError("ppr: alpha must be in (0, 1]");
  if (!(epsilon > 0.0)) throw ValidationError("ppr: epsilon must be positive");
  g.neighbors(u);  // range check

  ws.ensure(g.num_nodes());
  ws.res[u] = 1.0;
  ws.touch(u);

  auto violates = [&](NodeId v) {
    NodeId deg = g.degree(v);
    return deg == 0 ? ws.res[v] > 0.0 : ws.res[v] >= epsilon * deg;
  };

  std::deque<NodeId> queue;
  if (violates(u)) {
    queue.push_back(u);
    ws.inq[u] = 1;
  }

  // every push retires at least alpha * epsilon residual mass, so this cap is
  // only reachable through a bug
  const std::uint64_t cap =
      std::min<std::uint64_t>(1ull << 40, static_cast<std::uint64_t>(8.0 / (alpha * epsilon)) + 64);
  std::uint64_t pushes = 0;

  while (!queue.empty()) {
    NodeId v = queue.front();
    queue.pop_front();
    ws.inq[v] = 0;
    if (!violates(v)) continue;  // stale entry
    if (++pushes > cap) throw InternalError("ppr push exceeded its iteration cap");

    double r = ws.res[v];
    auto nbrs = g.neighbors(v);
    if (nbrs.empty()) {
      // nowhere to walk: the remaining mass settles here
      ws.est[v] += r;
      ws.res[v] = 0.0;
      continue;
    }
    ws.est[v] += alpha * r;
    ws.res[v] = 0.0;
    double share = (1.0 - alpha) * r / static_cast<double>(nbrs.size());
    for (NodeId w : nbrs) {
      if (ws.res[w] == 0.0 && ws.est[w] == 0.0 && !ws.inq[w]) ws.touch(w);
      ws.res[w] += share;
      if (!ws.inq[w] && violates(w)) {
        queue.push_back(w);
        ws.inq[w] = 1;
      }
    }
  }

  std::sort(ws.touched.begin(), ws.touched.end());
  ws.touched.erase(std::unique(ws.touched.begin(), ws.touched.end()), ws.touched.end());

  SparseScores out;
  out.nodes.reserve(ws.touched.size());
  if (residual_out) {
    residual_out->nodes.clear();
    residual_out->scores.clear();
  }
  bool seed_seen = false;
  for (NodeId v : ws.touched) {
    if (ws.est[v] > 0.0 || v == u) {
      out.nodes.push_back(v);
      out.scores.push_back(ws.est[v]);
      if (v == u) seed_seen = true;
    }
    if (residual_out && ws.res[v] != 0.0) {
      residual_out->nodes.push_back(v);
      residual_out->scores.push_back(ws.res[v]);
    }
  }
  if (!seed_seen) {
    auto it = std::lower_bound(out.nodes.begin(), out.nodes.end(), u);
    out.scores.insert(out.scores.begin() + (it - out.nodes.begin()), 0.0);
    out.nodes.insert(it, u);
  }
  ws.reset();
  return out;
}

}  // namespace

SparseScores ppr_push(const Graph& g, NodeId u, double alpha, double epsilon,
                      SparseScores* residual_out) {
  PprScratch ws;
  return ppr_push_ws(g, u, alpha, epsilon, ws, residual_out);
}

NodeSetSample topk_ppr(NodeId seed, const SparseScores& scores, std::uint32_t k) {
  if (k == 0) throw ValidationError("topk_ppr: k must be >= 1");
  if (scores.nodes.empty()) throw ValidationError("topk_ppr: empty score vector");

  std::vector<std::uint32_t> order(scores.nodes.size());
  for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
  auto better = [&](std::uint32_t a, std::uint32_t b) {
    if (scores.scores[a] != scores.scores[b]) return scores.scores[a] > scores.scores[b];
    return scores.nodes[a] < scores.nodes[b];
  };
  std::uint32_t take = std::min<std::uint32_t>(k, static_cast<std::uint32_t>(order.size()));
  std::nth_element(order.begin(), order.begin() + take, order.end(), better);
  order.resize(take);

  NodeSetSample out;
  out.seed = seed;
  out.members.reserve(take + 1);
  for (std::uint32_t i : order) out.members.push_back(scores.nodes[i]);
  if (std::find(out.members.begin(), out.members.end(), seed) == out.members.end())
    out.members.push_back(seed);
  std::sort(out.members.begin(), out.members.end());

  out.features = FeatureMatrix::zeros(static_cast<std::uint32_t>(out.members.size()), 1);
  for (std::uint32_t i = 0; i < out.members.size(); ++i) {
    auto it = std::lower_bound(scores.nodes.begin(), scores.nodes.end(), out.members[i]);
    out.features.at(i, 0) =
        (it != scores.nodes.end() && *it == out.members[i])
            ? static_cast<float>(scores.scores[it - scores.nodes.begin()])
            : 0.0f;
  }
  return out;
}

namespace {

struct BfsScratch {
  std::vector<std::int32_t> dist;
  std::vector<NodeId> frontier, next, visited;
};

FeatureMatrix spd_encode_ws(const Graph& g, NodeId u, std::span<const NodeId> members,
                            std::uint32_t d_max, BfsScratch& ws) {
  g.neighbors(u);  // range check
  for (NodeId x : members)
    if (x >= g.num_nodes()) throw ValidationError("spd member out of range");

  if (ws.dist.size() < g.num_nodes()) ws.dist.assign(g.num_nodes(), -1);
  ws.dist[u] = 0;
  ws.visited.clear();
  ws.visited.push_back(u);
  ws.frontier.clear();
  ws.frontier.push_back(u);
  for (std::uint32_t d = 0; d < d_max && !ws.frontier.empty(); ++d) {
    ws.next.clear();
    for (NodeId v : ws.frontier) {
      for (NodeId w : g.neighbors(v)) {
        if (ws.dist[w] < 0) {
          ws.dist[w] = static_cast<std::int32_t>(d) + 1;
          ws.next.push_back(w);
          ws.visited.push_back(w);
        }
      }
    }
    ws.frontier.swap(ws.next);
  }

  FeatureMatrix out = FeatureMatrix::zeros(static_cast<std::uint32_t>(members.size()), 1);
  for (std::uint32_t i = 0; i < members.size(); ++i) {
    std::int32_t d = ws.dist[members[i]];
    out.at(i, 0) = d < 0 ? static_cast<float>(d_max + 1) : static_cast<float>(d);
  }
  for (NodeId v : ws.visited) ws.dist[v] = -1;
  return out;
}

}  // namespace

FeatureMatrix spd_encode(const Graph& g, NodeId u, std::span<const NodeId> members,
                         std::uint32_t d_max) {
  BfsScratch ws;
  return spd_encode_ws(g, u, members, d_max, ws);
}

std::uint32_t effective_d_max(const SamplerConfig& cfg) {
  return cfg.d_max > 0 ? cfg.d_max : cfg.walk.num_steps;
}

double feature_divisor(const SamplerConfig& cfg) {
  switch (cfg.encoder) {
    case EncoderKind::lp:
      return static_cast<double>(cfg.walk.num_walks);
    case EncoderKind::spd:
      return static_cast<double>(effective_d_max(cfg)) + 1.0;
    case EncoderKind::ppr:
      return 1.0;
  }
  return 1.0;
}

std::vector<NodeSetSample> sample_all(const Graph& g, const SamplerConfig& cfg, int threads) {
  if (cfg.sampler == SamplerKind::walk && cfg.encoder == EncoderKind::ppr)
    throw ValidationError("ppr features require the ppr sampler");
  if (cfg.sampler == SamplerKind::ppr && cfg.encoder == EncoderKind::lp)
    throw ValidationError("lp features require the walk sampler");
  if (threads < 1) threads = 1;

  const NodeId n = g.num_nodes();
  const std::uint32_t d_max = effective_d_max(cfg);
  std::vector<NodeSetSample> out(n);

  std::atomic<NodeId> cursor{0};
  std::mutex err_mutex;
  NodeId err_seed = n;
  std::string err_msg;

  auto worker = [&]() {
    PprScratch ppr_ws;
    BfsScratch bfs_ws;
    constexpr NodeId kBlock = 64;
    for (;;) {
      NodeId begin = cursor.fetch_add(kBlock);
      if (begin >= n) break;
      NodeId end = std::min<NodeId>(begin + kBlock, n);
      for (NodeId u = begin; u < end; ++u) {
        try {
          NodeSetSample s;
          if (cfg.sampler == SamplerKind::walk) {
            WalkConfig wc = cfg.walk;
            wc.rng_seed = cfg.rng_seed;
            s = sample_walks(g, u, wc);
          } else {
            SparseScores scores =
                ppr_push_ws(g, u, cfg.ppr.alpha, cfg.ppr.epsilon, ppr_ws, nullptr);
            s = topk_ppr(u, scores, cfg.ppr.top_k);
          }
          if (cfg.encoder == EncoderKind::spd)
            s.features = spd_encode_ws(g, u, s.members, d_max, bfs_ws);
          out[u] = std::move(s);
        } catch (const std::exception& e) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (u < err_seed) {
            err_seed = u;
            err_msg = e.what();
          }
          return;
        }
      }
    }
  };

  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (err_seed < n)
    throw ValidationError("sampling seed " + std::to_string(err_seed) + ": " + err_msg);
  return out;
}

}  // namespace setgraph
