#include "setgraph/graph.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>
#include <unordered_set>

#include "setgraph/error.hpp"

namespace setgraph {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Splits on whitespace; returns false if a token is not an integer.
bool split_ints(std::string_view line, std::vector<long long>& out) {
  out.clear();
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    long long v = 0;
    auto res = std::from_chars(line.data() + i, line.data() + j, v);
    if (res.ec != std::errc{} || res.ptr != line.data() + j) return false;
    out.push_back(v);
    i = j;
  }
  return true;
}

}  // namespace

Graph Graph::from_edges(NodeId n, std::vector<std::pair<NodeId, NodeId>> edges) {
  std::vector<std::pair<NodeId, NodeId>> arcs;
  arcs.reserve(edges.size() * 2);
  for (auto [u, v] : edges) {
    if (u >= n || v >= n)
      throw ValidationError("edge endpoint " + std::to_string(std::max(u, v)) +
                            " out of range for n=" + std::to_string(n));
    if (u == v) continue;  // self-loops dropped
    arcs.emplace_back(u, v);
    arcs.emplace_back(v, u);
  }
  std::sort(arcs.begin(), arcs.end());
  arcs.erase(std::unique(arcs.begin(), arcs.end()), arcs.end());

  Graph g;
  g.n_ = n;
  g.adj_offsets_.assign(static_cast<std::size_t>(n) + 1, 0);
  g.adj_targets_.resize(arcs.size());
  for (std::size_t i = 0; i < arcs.size(); ++i) {
    g.adj_offsets_[arcs[i].first + 1]++;
    g.adj_targets_[i] = arcs[i].second;
  }
  for (NodeId u = 0; u < n; ++u) g.adj_offsets_[u + 1] += g.adj_offsets_[u];
  return g;
}

void Graph::check_node(NodeId u) const {
  if (u >= n_)
    throw ValidationError("node id " + std::to_string(u) + " out of range for n=" +
                          std::to_string(n_));
}

std::span<const NodeId> Graph::neighbors(NodeId u) const {
  check_node(u);
  return {adj_targets_.data() + adj_offsets_[u],
          static_cast<std::size_t>(adj_offsets_[u + 1] - adj_offsets_[u])};
}

NodeId Graph::degree(NodeId u) const {
  check_node(u);
  return static_cast<NodeId>(adj_offsets_[u + 1] - adj_offsets_[u]);
}

bool Graph::has_edge(NodeId u, NodeId v) const {
  auto row = neighbors(u);
  check_node(v);
  return std::binary_search(row.begin(), row.end(), v);
}

Graph Graph::mask_edges(std::span<const std::pair<NodeId, NodeId>> hidden) const {
  // mark arcs to drop in both directions
  std::vector<char> drop(adj_targets_.size(), 0);
  auto mark = [&](NodeId a, NodeId b) {
    auto row = neighbors(a);
    auto it = std::lower_bound(row.begin(), row.end(), b);
    if (it == row.end() || *it != b)
      throw ValidationError("masked pair (" + std::to_string(a) + "," + std::to_string(b) +
                            ") is not an edge");
    std::size_t idx = adj_offsets_[a] + static_cast<std::size_t>(it - row.begin());
    if (drop[idx])
      throw ValidationError("masked pair (" + std::to_string(a) + "," + std::to_string(b) +
                            ") listed twice");
    drop[idx] = 1;
  };
  for (auto [u, v] : hidden) {
    if (u == v) throw ValidationError("masked pair is a self-loop");
    mark(u, v);
    mark(v, u);
  }

  Graph g;
  g.n_ = n_;
  g.adj_offsets_.assign(static_cast<std::size_t>(n_) + 1, 0);
  g.adj_targets_.reserve(adj_targets_.size() - 2 * hidden.size());
  for (NodeId u = 0; u < n_; ++u) {
    for (std::uint64_t i = adj_offsets_[u]; i < adj_offsets_[u + 1]; ++i)
      if (!drop[i]) g.adj_targets_.push_back(adj_targets_[i]);
    g.adj_offsets_[u + 1] = g.adj_targets_.size();
  }
  g.attrs_ = attrs_;
  return g;
}

std::vector<std::pair<NodeId, NodeId>> Graph::edge_list() const {
  std::vector<std::pair<NodeId, NodeId>> edges;
  edges.reserve(num_edges());
  for (NodeId u = 0; u < n_; ++u)
    for (std::uint64_t i = adj_offsets_[u]; i < adj_offsets_[u + 1]; ++i)
      if (u < adj_targets_[i]) edges.emplace_back(u, adj_targets_[i]);
  return edges;
}

void Graph::attach_attributes(AttrMatrix attrs) {
  if (attrs.rows != n_)
    throw ValidationError("attribute rows (" + std::to_string(attrs.rows) +
                          ") do not match node count (" + std::to_string(n_) + ")");
  attrs_ = std::move(attrs);
}

void validate_query(const Graph& g, const Query& q) {
  if (q.nodes.size() < 2) throw ValidationError("query arity must be >= 2");
  for (std::size_t i = 0; i < q.nodes.size(); ++i) {
    if (q.nodes[i] >= g.num_nodes())
      throw ValidationError("query node " + std::to_string(q.nodes[i]) + " out of range");
    for (std::size_t j = i + 1; j < q.nodes.size(); ++j)
      if (q.nodes[i] == q.nodes[j])
        throw ValidationError("duplicate node " + std::to_string(q.nodes[i]) + " in query");
  }
}

Graph load_edge_list(std::istream& in, bool dedup) {
  std::vector<std::pair<NodeId, NodeId>> edges;
  std::vector<long long> ints;
  long long max_id = -1;
  long long declared_n = -1;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view s = trim(line);
    if (s.empty() || s.front() == '#') continue;
    if (s.rfind("n=", 0) == 0) {
      long long v = 0;
      auto res = std::from_chars(s.data() + 2, s.data() + s.size(), v);
      if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || v < 0)
        throw ParseError("bad node-count header '" + std::string(s) + "'", lineno);
      declared_n = v;
      continue;
    }
    if (!split_ints(s, ints) || ints.size() != 2)
      throw ParseError("expected two integer node ids, got '" + std::string(s) + "'", lineno);
    if (ints[0] < 0 || ints[1] < 0)
      throw ValidationError("negative node id at line " + std::to_string(lineno));
    // ids are dense 32-bit; n must stay below 2^32
    if (ints[0] >= 0xFFFFFFFFll || ints[1] >= 0xFFFFFFFFll)
      throw ValidationError("node id exceeds 32-bit range at line " + std::to_string(lineno));
    max_id = std::max({max_id, ints[0], ints[1]});
    if (ints[0] == ints[1]) continue;  // self-loop
    edges.emplace_back(static_cast<NodeId>(ints[0]), static_cast<NodeId>(ints[1]));
  }

  long long n = max_id + 1;
  if (declared_n >= 0) {
    if (declared_n < n)
      throw ValidationError("declared n=" + std::to_string(declared_n) +
                            " smaller than max id " + std::to_string(max_id));
    if (declared_n > 0xFFFFFFFFll)
      throw ValidationError("declared n exceeds 32-bit range");
    n = declared_n;
  }

  if (!dedup) {
    auto canon = edges;
    for (auto& e : canon)
      if (e.first > e.second) std::swap(e.first, e.second);
    std::sort(canon.begin(), canon.end());
    auto it = std::adjacent_find(canon.begin(), canon.end());
    if (it != canon.end())
      throw ValidationError("duplicate edge (" + std::to_string(it->first) + "," +
                            std::to_string(it->second) + ") with dedup disabled");
  }
  return Graph::from_edges(static_cast<NodeId>(n), std::move(edges));
}

void save_edge_list(const Graph& g, std::ostream& out) {
  out << "n=" << g.num_nodes() << "\n";
  for (auto [u, v] : g.edge_list()) out << u << " " << v << "\n";
}

AttrMatrix load_attributes(std::istream& in, NodeId n, bool standardize) {
  AttrMatrix m;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view s = trim(line);
    if (s.empty() || s.front() == '#') continue;
    std::vector<double> row;
    std::size_t i = 0;
    while (i < s.size()) {
      while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
      if (i >= s.size()) break;
      std::size_t j = i;
      while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
      double v = 0;
      auto res = std::from_chars(s.data() + i, s.data() + j, v);
      if (res.ec != std::errc{} || res.ptr != s.data() + j)
        throw ParseError("bad attribute value '" + std::string(s.substr(i, j - i)) + "'", lineno);
      row.push_back(v);
      i = j;
    }
    if (m.rows == 0) {
      m.cols = static_cast<std::uint32_t>(row.size());
      if (m.cols == 0) throw ParseError("empty attribute row", lineno);
    } else if (row.size() != m.cols) {
      throw ParseError("attribute row has " + std::to_string(row.size()) + " values, expected " +
                           std::to_string(m.cols),
                       lineno);
    }
    m.values.insert(m.values.end(), row.begin(), row.end());
    ++m.rows;
  }
  if (m.rows != n)
    throw ValidationError("attribute table has " + std::to_string(m.rows) + " rows, expected " +
                          std::to_string(n));

  if (standardize && m.rows > 0) {
    for (std::uint32_t c = 0; c < m.cols; ++c) {
      double mean = 0;
      for (std::uint32_t r = 0; r < m.rows; ++r) mean += m.values[std::size_t(r) * m.cols + c];
      mean /= m.rows;
      double var = 0;
      for (std::uint32_t r = 0; r < m.rows; ++r) {
        double d = m.values[std::size_t(r) * m.cols + c] - mean;
        var += d * d;
      }
      double sd = std::sqrt(var / m.rows);
      for (std::uint32_t r = 0; r < m.rows; ++r) {
        double& x = m.values[std::size_t(r) * m.cols + c];
        x = sd > 0 ? (x - mean) / sd : 0.0;
      }
    }
  }
  return m;
}

QueryFile load_queries(std::istream& in) {
  QueryFile qf;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  bool first_row = true;
  std::vector<long long> ints;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view s = trim(line);
    if (s.empty() || s.front() == '#') continue;
    if (!have_header) {
      if (s.rfind("arity=", 0) != 0)
        throw ParseError("query file must start with an 'arity=<k>' header", lineno);
      long long v = 0;
      auto res = std::from_chars(s.data() + 6, s.data() + s.size(), v);
      if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || v < 2)
        throw ParseError("bad arity header '" + std::string(s) + "'", lineno);
      qf.arity = static_cast<std::uint32_t>(v);
      have_header = true;
      continue;
    }
    if (!split_ints(s, ints))
      throw ParseError("expected integers, got '" + std::string(s) + "'", lineno);
    if (first_row) {
      if (ints.size() == qf.arity + 1)
        qf.labeled = true;
      else if (ints.size() != qf.arity)
        throw ParseError("expected " + std::to_string(qf.arity) + " ids per line", lineno);
      first_row = false;
    }
    std::size_t expected = qf.arity + (qf.labeled ? 1 : 0);
    if (ints.size() != expected)
      throw ParseError("expected " + std::to_string(expected) + " columns", lineno);
    Query q;
    q.nodes.reserve(qf.arity);
    for (std::uint32_t i = 0; i < qf.arity; ++i) {
      if (ints[i] < 0) throw ValidationError("negative node id at line " + std::to_string(lineno));
      q.nodes.push_back(static_cast<NodeId>(ints[i]));
    }
    if (qf.labeled) {
      long long y = ints[qf.arity];
      if (y != 0 && y != 1)
        throw ValidationError("label must be 0 or 1 at line " + std::to_string(lineno));
      qf.labels.push_back(static_cast<int>(y));
    }
    qf.queries.push_back(std::move(q));
  }
  if (!have_header) throw ValidationError("empty query file");
  return qf;
}

void save_queries(const QueryFile& qf, std::ostream& out) {
  out << "arity=" << qf.arity << "\n";
  for (std::size_t i = 0; i < qf.queries.size(); ++i) {
    const auto& q = qf.queries[i];
    for (std::size_t j = 0; j < q.nodes.size(); ++j) out << (j ? " " : "") << q.nodes[j];
    if (qf.labeled) out << " " << qf.labels[i];
    out << "\n";
  }
}

}  // namespace setgraph
