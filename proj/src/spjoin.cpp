#include "setgraph/spjoin.hpp"

#include <algorithm>
#include <cstring>
#include <limits>
#include <mutex>
#include <numeric>
#include <ostream>
#include <queue>
#include <string>
#include <thread>

#include "setgraph/error.hpp"

namespace setgraph {

JoinedQuery join_counted(const SpG& spg, const Query& q, std::uint64_t* ops) {
  if (q.nodes.size() < 2) throw ValidationError("join: query arity must be >= 2");
  const std::uint32_t arity = static_cast<std::uint32_t>(q.nodes.size());
  const std::uint32_t k = spg.feature_dim();

  std::vector<SpG::RowView> rows;
  rows.reserve(arity);
  std::uint64_t total = 0;
  for (NodeId u : q.nodes) {
    rows.push_back(spg.row(u));  // validates u
    total += rows.back().members.size();
  }

  JoinedQuery out;
  out.query = q;
  out.arity = arity;
  out.feature_dim = k;
  out.union_members.reserve(total);
  out.features.reserve(total * k);
  out.presence.reserve(total * arity);

  std::vector<std::uint32_t> pos(arity, 0);
  std::uint64_t counter = 0;
  for (;;) {
    NodeId cur = std::numeric_limits<NodeId>::max();
    bool any = false;
    for (std::uint32_t j = 0; j < arity; ++j) {
      ++counter;
      if (pos[j] < rows[j].members.size()) {
        any = true;
        cur = std::min(cur, rows[j].members[pos[j]]);
      }
    }
    if (!any) break;

    out.union_members.push_back(cur);
    std::size_t fbase = out.features.size();
    out.features.resize(fbase + static_cast<std::size_t>(arity) * k, 0.0f);
    for (std::uint32_t j = 0; j < arity; ++j) {
      bool present = pos[j] < rows[j].members.size() && rows[j].members[pos[j]] == cur;
      out.presence.push_back(present ? 1 : 0);
      if (present) {
        auto bank_row = spg.feature_row(rows[j].feature_ptr[pos[j]]);
        std::memcpy(out.features.data() + fbase + static_cast<std::size_t>(j) * k,
                    bank_row.data(), static_cast<std::size_t>(k) * sizeof(float));
        ++pos[j];
        ++counter;
      }
    }
  }
  if (ops) *ops = counter;
  return out;
}

JoinedQuery join(const SpG& spg, const Query& q) { return join_counted(spg, q, nullptr); }

std::uint64_t join_cost(const SpG& spg, const Query& q) {
  std::uint64_t total = 0;
  for (NodeId u : q.nodes) total += spg.row(u).members.size();
  return total;
}

std::vector<std::vector<std::uint32_t>> balance_groups(std::span<const std::uint64_t> costs,
                                                       std::uint32_t groups) {
  if (groups < 1) throw ValidationError("balance_groups: need at least one group");
  std::vector<std::uint32_t> order(costs.size());
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return costs[a] > costs[b]; });

  using Bin = std::pair<std::uint64_t, std::uint32_t>;  // (load, group id)
  std::priority_queue<Bin, std::vector<Bin>, std::greater<Bin>> heap;
  for (std::uint32_t g = 0; g < groups; ++g) heap.emplace(0, g);

  std::vector<std::vector<std::uint32_t>> out(groups);
  for (std::uint32_t idx : order) {
    auto [load, g] = heap.top();
    heap.pop();
    out[g].push_back(idx);
    heap.emplace(load + costs[idx], g);
  }
  return out;
}

std::vector<JoinedQuery> join_batch(const SpG& spg, std::span<const Query> queries, int threads) {
  if (threads < 1) threads = 1;
  std::vector<JoinedQuery> out(queries.size());
  if (queries.empty()) return out;

  std::vector<std::uint64_t> costs(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    try {
      costs[i] = join_cost(spg, queries[i]);
    } catch (const std::exception& e) {
      throw ValidationError("join_batch: query " + std::to_string(i) + ": " + e.what());
    }
  }

  auto groups = balance_groups(costs, static_cast<std::uint32_t>(threads));

  std::mutex err_mutex;
  std::size_t err_index = queries.size();
  std::string err_msg;

  auto run_group = [&](const std::vector<std::uint32_t>& group) {
    for (std::uint32_t idx : group) {
      try {
        out[idx] = join(spg, queries[idx]);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (idx < err_index) {
          err_index = idx;
          err_msg = e.what();
        }
        return;
      }
    }
  };

  if (threads == 1) {
    run_group(groups[0]);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(groups.size());
    for (const auto& g : groups) pool.emplace_back(run_group, std::cref(g));
    for (auto& t : pool) t.join();
  }
  if (err_index < queries.size())
    throw ValidationError("join_batch: query " + std::to_string(err_index) + ": " + err_msg);
  return out;
}

void dump_table(const JoinedQuery& jq, std::ostream& out) {
  out << "query:";
  for (NodeId u : jq.query.nodes) out << " " << u;
  out << "\nmembers: " << jq.rows() << "\n";
  for (std::uint32_t r = 0; r < jq.rows(); ++r) {
    out << jq.union_members[r] << " |";
    for (std::uint32_t j = 0; j < jq.arity; ++j)
      out << " " << int(jq.presence[static_cast<std::size_t>(r) * jq.arity + j]);
    out << " |";
    auto row = jq.feature_row(r);
    for (std::uint32_t j = 0; j < jq.arity; ++j) {
      for (std::uint32_t c = 0; c < jq.feature_dim; ++c)
        out << " " << row[static_cast<std::size_t>(j) * jq.feature_dim + c];
      if (j + 1 < jq.arity) out << " ;";
    }
    out << "\n";
  }
}

}  // namespace setgraph
