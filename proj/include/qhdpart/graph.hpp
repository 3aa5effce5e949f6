#pragma once

// Weighted undirected graphs in CSR form, edge-list ingestion, partitions
// and modularity evaluation.
//
// Self-loop convention: a self-loop {i,i} of edge weight w contributes
// A_ii = 2w to the adjacency matrix, hence 2w to d_i and w to m. This is the
// convention under which merging two adjacent nodes into one super-node
// preserves modularity exactly.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace qhdpart {

using NodeId = std::uint32_t;
using GroupId = std::uint32_t;

struct Neighbor {
  NodeId node;
  double weight;
};

class Graph {
 public:
  Graph() = default;

  std::size_t node_count() const { return degrees_.size(); }
  /// Number of distinct undirected edges, self-loops included.
  std::size_t edge_count() const { return edge_count_; }

  /// Neighbors of `u` sorted by id; never contains `u` itself.
  std::span<const Neighbor> neighbors(NodeId u) const {
    return {adjacency_.data() + offsets_[u], adjacency_.data() + offsets_[u + 1]};
  }
  std::size_t neighbor_count(NodeId u) const { return offsets_[u + 1] - offsets_[u]; }

  /// Edge weight of the self-loop on `u` (0 when absent).
  double self_loop(NodeId u) const { return self_loops_[u]; }
  double degree(NodeId u) const { return degrees_[u]; }
  std::span<const double> degrees() const { return degrees_; }
  /// m = (1/2) sum_ij A_ij.
  double total_weight() const { return total_weight_; }
  double max_degree() const {
    return degrees_.empty() ? 0.0 : *std::max_element(degrees_.begin(), degrees_.end());
  }
  /// Largest weight over non-loop edges.
  double max_edge_weight() const { return max_edge_weight_; }
  bool has_self_loops() const {
    return std::any_of(self_loops_.begin(), self_loops_.end(), [](double w) { return w != 0.0; });
  }

  /// Matrix entry A_uv (A_uu is twice the loop weight).
  double adjacency(NodeId u, NodeId v) const {
    if (u == v) return 2.0 * self_loops_[u];
    auto row = neighbors(u);
    auto it = std::lower_bound(row.begin(), row.end(), v,
                               [](const Neighbor& a, NodeId id) { return a.node < id; });
    return (it != row.end() && it->node == v) ? it->weight : 0.0;
  }
  bool has_edge(NodeId u, NodeId v) const {
    if (u == v) return self_loops_[u] != 0.0;
    auto row = neighbors(u);
    auto it = std::lower_bound(row.begin(), row.end(), v,
                               [](const Neighbor& a, NodeId id) { return a.node < id; });
    return it != row.end() && it->node == v;
  }

  /// Original label of node `u`; falls back to the decimal id.
  std::string label(NodeId u) const {
    return labels_.empty() ? std::to_string(u) : labels_[u];
  }
  const std::vector<std::string>& labels() const { return labels_; }
  void set_labels(std::vector<std::string> labels) {
    if (!labels.empty() && labels.size() != node_count())
      throw std::invalid_argument("label count does not match node count");
    labels_ = std::move(labels);
  }

 private:
  friend class GraphBuilder;

  std::vector<std::size_t> offsets_{0};
  std::vector<Neighbor> adjacency_;
  std::vector<double> self_loops_;
  std::vector<double> degrees_;
  std::vector<std::string> labels_;
  double total_weight_ = 0.0;
  double max_edge_weight_ = 0.0;
  std::size_t edge_count_ = 0;
};

/// Accumulates undirected edges; duplicates are summed on build().
class GraphBuilder {
 public:
  explicit GraphBuilder(std::size_t node_count = 0) : node_count_(node_count) {}

  void reserve(std::size_t edges) { edges_.reserve(edges); }

  void add_edge(NodeId u, NodeId v, double weight = 1.0) {
    if (!(weight >= 0.0) || !std::isfinite(weight))
      throw std::invalid_argument("edge weight must be finite and nonnegative");
    if (u > v) std::swap(u, v);
    edges_.push_back({u, v, weight});
    node_count_ = std::max<std::size_t>(node_count_, std::size_t{v} + 1);
  }

  std::size_t node_count() const { return node_count_; }

  Graph build() {
    std::sort(edges_.begin(), edges_.end(), [](const RawEdge& a, const RawEdge& b) {
      return a.u != b.u ? a.u < b.u : a.v < b.v;
    });
    std::vector<RawEdge> merged;
    merged.reserve(edges_.size());
    for (const auto& e : edges_) {
      if (!merged.empty() && merged.back().u == e.u && merged.back().v == e.v)
        merged.back().w += e.w;
      else
        merged.push_back(e);
    }
    edges_.clear();

    Graph g;
    const std::size_t n = node_count_;
    g.self_loops_.assign(n, 0.0);
    g.degrees_.assign(n, 0.0);
    g.offsets_.assign(n + 1, 0);
    g.edge_count_ = merged.size();
    for (const auto& e : merged) {
      if (e.u == e.v) continue;
      ++g.offsets_[e.u + 1];
      ++g.offsets_[e.v + 1];
    }
    for (std::size_t i = 0; i < n; ++i) g.offsets_[i + 1] += g.offsets_[i];
    g.adjacency_.resize(g.offsets_[n]);
    std::vector<std::size_t> cursor(g.offsets_.begin(), g.offsets_.end() - 1);
    // merged is sorted by (u, v), so both insertion passes keep rows sorted:
    // row v receives smaller ids u in increasing order before any larger ids.
    for (const auto& e : merged) {
      if (e.u == e.v) {
        g.self_loops_[e.u] += e.w;
        continue;
      }
      g.adjacency_[cursor[e.v]++] = {e.u, e.w};
      g.max_edge_weight_ = std::max(g.max_edge_weight_, e.w);
    }
    for (const auto& e : merged) {
      if (e.u == e.v) continue;
      g.adjacency_[cursor[e.u]++] = {e.v, e.w};
    }
    double two_m = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double d = 0.0;
      for (const auto& nb : g.neighbors(static_cast<NodeId>(i))) d += nb.weight;
      d += 2.0 * g.self_loops_[i];
      g.degrees_[i] = d;
      two_m += d;
    }
    g.total_weight_ = 0.5 * two_m;
    return g;
  }

 private:
  struct RawEdge {
    NodeId u, v;
    double w;
  };
  std::size_t node_count_;
  std::vector<RawEdge> edges_;
};

// ---------------------------------------------------------------------------
// Edge-list ingestion

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct EdgeListOptions {
  /// Input lists arcs; u->v and v->u collapse to one edge with the larger weight.
  bool directed_hint = false;
  /// Leading non-comment lines to ignore (CSV headers).
  std::size_t header_lines = 0;
};

namespace detail {

inline bool is_unsigned_integer(std::string_view s) {
  return !s.empty() && s.size() <= 19 &&
         std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  auto is_sep = [](char c) { return c == ' ' || c == '\t' || c == ',' || c == ';' || c == '\r'; };
  while (i < line.size()) {
    while (i < line.size() && is_sep(line[i])) ++i;
    std::size_t j = i;
    while (j < line.size() && !is_sep(line[j])) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace detail

/// Reads whitespace- (or comma-) separated `u v [w]` lines. Lines starting
/// with '#' or '%' are comments. If every id is a nonnegative integer, nodes
/// are numbered by ascending id value; otherwise ids are interned in order of
/// first appearance. Original labels are kept on the graph.
inline Graph load_edge_list(std::istream& in, const EdgeListOptions& options = {}) {
  struct Row {
    std::string u, v;
    double w;
    std::size_t line;
  };
  std::vector<Row> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t headers_left = options.header_lines;
  bool all_numeric = true;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv(line);
    auto first = sv.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) continue;
    sv.remove_prefix(first);
    if (sv.front() == '#' || sv.front() == '%') continue;
    if (headers_left > 0) {
      --headers_left;
      continue;
    }
    auto fields = detail::split_fields(sv);
    if (fields.size() < 2 || fields.size() > 3)
      throw ParseError(line_no, "expected 'u v [w]', got " + std::to_string(fields.size()) + " fields");
    double w = 1.0;
    if (fields.size() == 3) {
      std::string tok(fields[2]);
      std::size_t used = 0;
      try {
        w = std::stod(tok, &used);
      } catch (const std::exception&) {
        throw ParseError(line_no, "malformed weight '" + tok + "'");
      }
      if (used != tok.size() || !std::isfinite(w))
        throw ParseError(line_no, "malformed weight '" + tok + "'");
      if (w < 0.0) throw ParseError(line_no, "negative weight " + tok);
    }
    all_numeric = all_numeric && detail::is_unsigned_integer(fields[0]) &&
                  detail::is_unsigned_integer(fields[1]);
    rows.push_back({std::string(fields[0]), std::string(fields[1]), w, line_no});
  }
  if (rows.empty()) throw ParseError(line_no, "edge list is empty");

  std::unordered_map<std::string, NodeId> ids;
  std::vector<std::string> labels;
  if (all_numeric) {
    std::vector<std::uint64_t> values;
    values.reserve(rows.size() * 2);
    for (const auto& r : rows) {
      values.push_back(std::stoull(r.u));
      values.push_back(std::stoull(r.v));
    }
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    labels.reserve(values.size());
    for (auto v : values) labels.push_back(std::to_string(v));
    for (std::size_t i = 0; i < labels.size(); ++i) ids.emplace(labels[i], static_cast<NodeId>(i));
    for (auto& r : rows) {
      r.u = std::to_string(std::stoull(r.u));
      r.v = std::to_string(std::stoull(r.v));
    }
  } else {
    for (const auto& r : rows) {
      for (const auto* s : {&r.u, &r.v}) {
        if (ids.emplace(*s, static_cast<NodeId>(labels.size())).second) labels.push_back(*s);
      }
    }
  }

  GraphBuilder builder(labels.size());
  if (!options.directed_hint) {
    builder.reserve(rows.size());
    for (const auto& r : rows) builder.add_edge(ids.at(r.u), ids.at(r.v), r.w);
  } else {
    // Sum duplicate arcs per direction, then keep the heavier direction.
    std::unordered_map<std::uint64_t, double> arcs;
    std::vector<std::uint64_t> order;
    for (const auto& r : rows) {
      std::uint64_t key = (std::uint64_t{ids.at(r.u)} << 32) | ids.at(r.v);
      auto [it, fresh] = arcs.emplace(key, 0.0);
      if (fresh) order.push_back(key);
      it->second += r.w;
    }
    for (auto key : order) {
      auto u = static_cast<NodeId>(key >> 32);
      auto v = static_cast<NodeId>(key & 0xffffffffu);
      std::uint64_t rev = (std::uint64_t{v} << 32) | u;
      auto rit = arcs.find(rev);
      double w = arcs.at(key);
      if (rit != arcs.end() && u != v) {
        if (u > v) continue;  // handled from the smaller endpoint
        w = std::max(w, rit->second);
      }
      builder.add_edge(u, v, w);
    }
  }
  Graph g = builder.build();
  g.set_labels(std::move(labels));
  return g;
}

inline Graph load_edge_list(std::string_view text, const EdgeListOptions& options = {}) {
  std::istringstream in{std::string(text)};
  return load_edge_list(in, options);
}

/// Opens `path`; files ending in ".csv" default to one header line.
inline Graph load_edge_list_file(const std::string& path, EdgeListOptions options = {},
                                 bool auto_csv_header = true) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open edge list '" + path + "'");
  if (auto_csv_header && path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0 &&
      options.header_lines == 0)
    options.header_lines = 1;
  return load_edge_list(in, options);
}

// ---------------------------------------------------------------------------
// Partitions

class Partition {
 public:
  Partition() = default;

  /// All nodes in group 0.
  Partition(std::size_t node_count, GroupId k) : assignment_(node_count, 0), sizes_(k, 0), k_(k) {
    if (k == 0) throw std::invalid_argument("group count must be positive");
    sizes_[0] = node_count;
  }

  Partition(std::vector<GroupId> assignment, GroupId k) : assignment_(std::move(assignment)), sizes_(k, 0), k_(k) {
    if (k == 0) throw std::invalid_argument("group count must be positive");
    for (std::size_t i = 0; i < assignment_.size(); ++i) {
      if (assignment_[i] >= k)
        throw std::out_of_range("node " + std::to_string(i) + " has group " +
                                std::to_string(assignment_[i]) + " outside [0," + std::to_string(k) + ")");
      ++sizes_[assignment_[i]];
    }
  }

  std::size_t size() const { return assignment_.size(); }
  GroupId k() const { return k_; }
  GroupId operator[](NodeId u) const { return assignment_[u]; }
  GroupId group_of(NodeId u) const { return assignment_.at(u); }
  std::span<const GroupId> assignment() const { return assignment_; }
  std::span<const std::size_t> group_sizes() const { return sizes_; }
  std::size_t nonempty_groups() const {
    return static_cast<std::size_t>(std::count_if(sizes_.begin(), sizes_.end(), [](auto s) { return s > 0; }));
  }

  void move(NodeId u, GroupId target) {
    if (u >= assignment_.size()) throw std::out_of_range("node id out of range");
    if (target >= k_) throw std::out_of_range("group id out of range");
    --sizes_[assignment_[u]];
    ++sizes_[target];
    assignment_[u] = target;
  }

  friend bool operator==(const Partition& a, const Partition& b) {
    return a.k_ == b.k_ && a.assignment_ == b.assignment_;
  }

 private:
  std::vector<GroupId> assignment_;
  std::vector<std::size_t> sizes_;
  GroupId k_ = 1;
};

// ---------------------------------------------------------------------------
// Modularity

namespace detail {

inline void require_weight(const Graph& g) {
  if (!(g.total_weight() > 0.0)) throw std::invalid_argument("graph has zero total edge weight");
}

inline void require_match(const Graph& g, const Partition& p) {
  if (p.size() != g.node_count())
    throw std::invalid_argument("partition covers " + std::to_string(p.size()) + " nodes, graph has " +
                                std::to_string(g.node_count()));
}

}  // namespace detail

/// Q = 1/(2m) sum_ij (A_ij - d_i d_j / 2m) delta(c_i, c_j), over ordered pairs
/// including the diagonal.
inline double modularity(const Graph& g, const Partition& p) {
  detail::require_weight(g);
  detail::require_match(g, p);
  std::vector<double> internal(p.k(), 0.0);
  std::vector<double> volume(p.k(), 0.0);
  double two_m = 0.0;
  for (NodeId i = 0; i < g.node_count(); ++i) {
    const GroupId c = p[i];
    double row = 0.0;
    for (const auto& nb : g.neighbors(i))
      if (p[nb.node] == c) row += nb.weight;
    row += 2.0 * g.self_loop(i);
    internal[c] += row;
    volume[c] += g.degree(i);
    two_m += g.degree(i);
  }
  double q = 0.0;
  for (GroupId c = 0; c < p.k(); ++c) q += internal[c] - volume[c] * (volume[c] / two_m);
  return q / two_m;
}

/// Implicit B_ij = A_ij - d_i d_j / 2m over the sparse adjacency.
class ModularityMatrixView {
 public:
  static constexpr std::size_t default_dense_threshold = 2000;

  explicit ModularityMatrixView(const Graph& g, std::size_t dense_threshold = default_dense_threshold)
      : g_(&g), two_m_(2.0 * g.total_weight()), dense_threshold_(dense_threshold) {
    detail::require_weight(g);
  }

  std::size_t size() const { return g_->node_count(); }
  double two_m() const { return two_m_; }

  double operator()(NodeId i, NodeId j) const {
    return g_->adjacency(i, j) - g_->degree(i) * g_->degree(j) / two_m_;
  }

  /// Dense row i, O(n).
  void row(NodeId i, std::span<double> out) const {
    const double di = g_->degree(i);
    for (NodeId j = 0; j < size(); ++j) out[j] = -(di * g_->degree(j) / two_m_);
    for (const auto& nb : g_->neighbors(i)) out[nb.node] += nb.weight;
    out[i] += 2.0 * g_->self_loop(i);
  }

  /// y = B x using the sparse-plus-rank-one structure.
  std::vector<double> multiply(std::span<const double> x) const {
    if (x.size() != size()) throw std::invalid_argument("vector length mismatch");
    double dx = 0.0;
    for (NodeId j = 0; j < size(); ++j) dx += g_->degree(j) * x[j];
    std::vector<double> y(size());
    for (NodeId i = 0; i < size(); ++i) {
      double acc = 2.0 * g_->self_loop(i) * x[i];
      for (const auto& nb : g_->neighbors(i)) acc += nb.weight * x[nb.node];
      y[i] = acc - g_->degree(i) * dx / two_m_;
    }
    return y;
  }

  /// Row-major n x n matrix; refuses above the dense threshold.
  std::vector<double> materialize() const {
    const std::size_t n = size();
    if (n > dense_threshold_)
      throw std::length_error("refusing to materialize dense modularity matrix for n=" + std::to_string(n) +
                              " (threshold " + std::to_string(dense_threshold_) + ")");
    std::vector<double> dense(n * n);
    for (NodeId i = 0; i < n; ++i) row(i, std::span<double>(dense.data() + std::size_t{i} * n, n));
    return dense;
  }

 private:
  const Graph* g_;
  double two_m_;
  std::size_t dense_threshold_;
};

/// Partition plus per-group bookkeeping (internal weight sum_{i,j in c} A_ij and
/// degree volume) so that move gains cost O(deg(u)).
class ModularityTracker {
 public:
  ModularityTracker(const Graph& g, Partition p)
      : g_(&g), p_(std::move(p)), internal_(p_.k(), 0.0), volume_(p_.k(), 0.0),
        two_m_(2.0 * g.total_weight()) {
    detail::require_weight(g);
    detail::require_match(g, p_);
    for (NodeId i = 0; i < g.node_count(); ++i) {
      const GroupId c = p_[i];
      double row = 2.0 * g.self_loop(i);
      for (const auto& nb : g.neighbors(i))
        if (p_[nb.node] == c) row += nb.weight;
      internal_[c] += row;
      volume_[c] += g.degree(i);
    }
  }

  const Partition& partition() const { return p_; }
  Partition release() && { return std::move(p_); }
  const Graph& graph() const { return *g_; }
  double volume(GroupId c) const { return volume_[c]; }
  double two_m() const { return two_m_; }

  double modularity() const {
    double q = 0.0;
    for (GroupId c = 0; c < p_.k(); ++c) q += internal_[c] - volume_[c] * (volume_[c] / two_m_);
    return q / two_m_;
  }

  /// Q(after moving u to target) - Q(before).
  double gain(NodeId u, GroupId target) {
    if (u >= p_.size()) throw std::out_of_range("node id out of range");
    if (target >= p_.k()) throw std::out_of_range("group id out of range");
    const GroupId from = p_[u];
    if (from == target) return 0.0;
    double to_from = 0.0, to_target = 0.0;
    for (const auto& nb : g_->neighbors(u)) {
      const GroupId c = p_[nb.node];
      if (c == from) to_from += nb.weight;
      else if (c == target) to_target += nb.weight;
    }
    return gain_from_links(u, from, target, to_from, to_target);
  }

  /// Same as gain() given precomputed link weights to the source and target groups.
  double gain_from_links(NodeId u, GroupId from, GroupId target, double to_from, double to_target) const {
    if (from == target) return 0.0;
    const double d = g_->degree(u);
    const double delta = 2.0 * (to_target - to_from) - 2.0 * d * (volume_[target] - volume_[from] + d) / two_m_;
    return delta / two_m_;
  }

  void move(NodeId u, GroupId target) {
    const GroupId from = p_[u];
    if (from == target) return;
    double to_from = 0.0, to_target = 0.0;
    for (const auto& nb : g_->neighbors(u)) {
      const GroupId c = p_[nb.node];
      if (c == from) to_from += nb.weight;
      else if (c == target) to_target += nb.weight;
    }
    const double loop = 2.0 * g_->self_loop(u);
    internal_[from] -= 2.0 * to_from + loop;
    internal_[target] += 2.0 * to_target + loop;
    volume_[from] -= g_->degree(u);
    volume_[target] += g_->degree(u);
    p_.move(u, target);
  }

 private:
  const Graph* g_;
  Partition p_;
  std::vector<double> internal_;
  std::vector<double> volume_;
  double two_m_;
};

/// Convenience form; O(n + m) because it rebuilds the group bookkeeping.
inline double modularity_gain(const Graph& g, const Partition& p, NodeId u, GroupId target) {
  if (u >= p.size()) throw std::out_of_range("node id out of range");
  if (target >= p.k()) throw std::out_of_range("group id out of range");
  if (p[u] == target) return 0.0;
  ModularityTracker t(g, p);
  return t.gain(u, target);
}

/// 2m / (n (n - 1)), for simple graphs.
inline double edge_density(const Graph& g) {
  const double n = static_cast<double>(g.node_count());
  if (n < 2) return 0.0;
  return 2.0 * static_cast<double>(g.edge_count()) / (n * (n - 1.0));
}

}  // namespace qhdpart
