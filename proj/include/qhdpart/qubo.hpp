#pragma once

// QUBO assembly for modularity partitioning over one-hot variables
// x[i*k + c] = 1 iff node i sits in group c.
//
// Energy convention: E(x) = x^T Q x + b^T x + offset with Q symmetric. Only
// the upper triangle is stored; an off-diagonal entry Q_ij therefore
// contributes 2 Q_ij x_i x_j.
//
// Objective (minimised):
//   -w1 * Q_M + lambda_a * sum_i (1 - sum_c x_ic)^2
//             + lambda_s * sum_c (sum_i x_ic - n/k)^2
//             - w3 * sum_{edges uv} A_uv sum_c 2 x_uc x_vc      (optional)
// with Q_M = 1/(2m) sum_ij B_ij sum_c x_ic x_jc, which equals modularity on
// one-hot vectors.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qhdpart/graph.hpp"

namespace qhdpart {

using BitVector = std::vector<std::uint8_t>;

/// Thrown when a request exceeds a documented size cap.
class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// Variable index = i * k + c.
inline std::size_t idx(std::size_t i, std::size_t c, std::size_t k) {
  if (c >= k) throw std::out_of_range("group " + std::to_string(c) + " out of range for k=" + std::to_string(k));
  return i * k + c;
}

struct VariableLayout {
  std::size_t nodes = 0;
  std::size_t groups = 0;

  std::size_t size() const { return nodes * groups; }

  std::size_t index(std::size_t i, std::size_t c) const {
    if (i >= nodes) throw std::out_of_range("node " + std::to_string(i) + " out of range");
    return idx(i, c, groups);
  }

  /// Inverse of index(): (node, group).
  std::pair<std::size_t, std::size_t> locate(std::size_t v) const {
    if (groups == 0 || v >= size()) throw std::out_of_range("variable index out of range");
    return {v / groups, v % groups};
  }

  friend bool operator==(const VariableLayout&, const VariableLayout&) = default;
};

struct QuboTerm {
  std::uint32_t row;
  std::uint32_t col;
  double value;  ///< symmetric entry Q_row,col, row <= col

  friend bool operator==(const QuboTerm&, const QuboTerm&) = default;
};

class QuboProblem {
 public:
  struct Coupling {
    std::uint32_t col;
    double value;
  };

  QuboProblem() = default;

  /// Terms may arrive in any order and triangle; (j,i) is folded onto (i,j)
  /// and duplicates are summed.
  QuboProblem(std::size_t dim, std::vector<QuboTerm> terms, std::vector<double> linear, double offset,
              VariableLayout layout = {})
      : dim_(dim), layout_(layout), linear_(std::move(linear)), offset_(offset) {
    if (linear_.empty()) linear_.assign(dim_, 0.0);
    if (linear_.size() != dim_) throw std::invalid_argument("linear term length must equal dim");
    if (layout_.size() != 0 && layout_.size() != dim_) throw std::invalid_argument("layout size must equal dim");
    if (!std::isfinite(offset_)) throw std::invalid_argument("offset must be finite");
    for (double b : linear_)
      if (!std::isfinite(b)) throw std::invalid_argument("linear terms must be finite");
    for (auto& t : terms) {
      if (t.row > t.col) std::swap(t.row, t.col);
      if (t.col >= dim_) throw std::out_of_range("quadratic term index out of range");
      if (!std::isfinite(t.value)) throw std::invalid_argument("quadratic terms must be finite");
    }
    if (!std::is_sorted(terms.begin(), terms.end(), term_less))
      std::sort(terms.begin(), terms.end(), term_less);
    terms_.reserve(terms.size());
    for (const auto& t : terms) {
      if (!terms_.empty() && terms_.back().row == t.row && terms_.back().col == t.col)
        terms_.back().value += t.value;
      else
        terms_.push_back(t);
    }
    build_rows();
  }

  std::size_t dim() const { return dim_; }
  const VariableLayout& layout() const { return layout_; }
  std::span<const QuboTerm> quadratic() const { return terms_; }
  std::span<const double> linear() const { return linear_; }
  double offset() const { return offset_; }
  double diagonal(std::size_t i) const { return diagonal_[i]; }
  /// Off-diagonal entries of row i (both triangles), sorted by column.
  std::span<const Coupling> couplings(std::size_t i) const {
    return {couplings_.data() + row_offsets_[i], couplings_.data() + row_offsets_[i + 1]};
  }
  std::size_t coupling_count() const { return couplings_.size(); }

  double energy(std::span<const std::uint8_t> x) const {
    if (x.size() != dim_)
      throw std::invalid_argument("vector has length " + std::to_string(x.size()) + ", expected " +
                                  std::to_string(dim_));
    for (std::size_t i = 0; i < x.size(); ++i)
      if (x[i] > 1) throw std::invalid_argument("entry " + std::to_string(i) + " is not binary");
    return energy_unchecked(x);
  }

  double energy_unchecked(std::span<const std::uint8_t> x) const {
    double e = offset_;
    for (std::size_t i = 0; i < dim_; ++i)
      if (x[i]) e += linear_[i];
    for (const auto& t : terms_)
      if (x[t.row] && x[t.col]) e += (t.row == t.col) ? t.value : 2.0 * t.value;
    return e;
  }

  /// Q_ii + b_i + 2 sum_{j != i} Q_ij x_j: the energy cost of setting bit i
  /// from 0 to 1 with the other bits held.
  double local_field(std::span<const std::uint8_t> x, std::size_t i) const {
    double h = 0.0;
    for (const auto& c : couplings(i))
      if (x[c.col]) h += c.value;
    return diagonal_[i] + linear_[i] + 2.0 * h;
  }

  /// E(x with bit i flipped) - E(x).
  double flip_delta(std::span<const std::uint8_t> x, std::size_t i) const {
    const double h = local_field(x, i);
    return x[i] ? -h : h;
  }

  friend bool operator==(const QuboProblem& a, const QuboProblem& b) {
    return a.dim_ == b.dim_ && a.layout_ == b.layout_ && a.terms_ == b.terms_ && a.linear_ == b.linear_ &&
           a.offset_ == b.offset_;
  }

 private:
  static bool term_less(const QuboTerm& a, const QuboTerm& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  }

  void build_rows() {
    diagonal_.assign(dim_, 0.0);
    row_offsets_.assign(dim_ + 1, 0);
    for (const auto& t : terms_) {
      if (t.row == t.col) continue;
      ++row_offsets_[t.row + 1];
      ++row_offsets_[t.col + 1];
    }
    for (std::size_t i = 0; i < dim_; ++i) row_offsets_[i + 1] += row_offsets_[i];
    couplings_.resize(row_offsets_[dim_]);
    std::vector<std::size_t> cursor(row_offsets_.begin(), row_offsets_.end() - 1);
    // Lower-triangle entries of row c come from terms with row < c, which
    // arrive in increasing row order, before the row's own upper entries.
    for (const auto& t : terms_) {
      if (t.row == t.col) {
        diagonal_[t.row] = t.value;
        continue;
      }
      couplings_[cursor[t.col]++] = {t.row, t.value};
    }
    for (const auto& t : terms_)
      if (t.row != t.col) couplings_[cursor[t.row]++] = {t.col, t.value};
  }

  std::size_t dim_ = 0;
  VariableLayout layout_;
  std::vector<QuboTerm> terms_;
  std::vector<double> linear_;
  double offset_ = 0.0;
  std::vector<double> diagonal_;
  std::vector<std::size_t> row_offsets_{0};
  std::vector<Coupling> couplings_;
};

struct PenaltyWeights {
  double w1 = 1.0;        ///< modularity weight
  double lambda_a = 1.0;  ///< one-hot assignment penalty
  double lambda_s = 0.0;  ///< group-size balance penalty
  double w3 = 0.0;        ///< optional intra-group edge bonus

  /// w1 = 1, lambda_a = 2 max_i d_i / 2m + 1, lambda_s = 0.5 / n.
  static PenaltyWeights defaults(const Graph& g) {
    detail::require_weight(g);
    PenaltyWeights w;
    w.w1 = 1.0;
    w.lambda_a = 2.0 * g.max_degree() / (2.0 * g.total_weight()) + 1.0;
    w.lambda_s = 0.5 / static_cast<double>(g.node_count());
    w.w3 = 0.0;
    return w;
  }

  void validate() const {
    for (double v : {w1, lambda_a, lambda_s, w3})
      if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("penalty weights must be finite and >= 0");
  }
};

struct QuboBuildOptions {
  std::size_t variable_cap = 20000;
  std::size_t dense_threshold = ModularityMatrixView::default_dense_threshold;
};

inline QuboProblem build_qubo(const Graph& g, std::size_t k, const PenaltyWeights& weights,
                              const QuboBuildOptions& options = {}) {
  if (k < 2) throw std::invalid_argument("k must be at least 2, got " + std::to_string(k));
  detail::require_weight(g);
  weights.validate();
  const std::size_t n = g.node_count();
  const std::size_t dim = n * k;
  if (dim > options.variable_cap)
    throw CapacityError("n*k = " + std::to_string(dim) + " exceeds the variable cap of " +
                        std::to_string(options.variable_cap));
  if (dim > std::numeric_limits<std::uint32_t>::max()) throw CapacityError("variable index overflow");

  const ModularityMatrixView modularity_matrix(g, std::max(options.dense_threshold, n));
  const double two_m = modularity_matrix.two_m();
  const double target = static_cast<double>(n) / static_cast<double>(k);
  const VariableLayout layout{n, k};

  std::vector<QuboTerm> terms;
  terms.reserve(k * n * (n + 1) / 2 + n * k * (k - 1) / 2);
  std::vector<double> row(n);
  std::vector<double> bonus(n, 0.0);
  for (NodeId i = 0; i < n; ++i) {
    modularity_matrix.row(i, row);
    if (weights.w3 != 0.0)
      for (const auto& nb : g.neighbors(i)) bonus[nb.node] = -weights.w3 * nb.weight;
    for (std::size_t c = 0; c < k; ++c) {
      const auto vi = static_cast<std::uint32_t>(layout.index(i, c));
      // Same node, other groups: one-hot penalty cross terms.
      terms.push_back({vi, vi, -weights.w1 * row[i] / two_m});
      for (std::size_t c2 = c + 1; c2 < k; ++c2)
        terms.push_back({vi, static_cast<std::uint32_t>(layout.index(i, c2)), weights.lambda_a});
      // Same group, later nodes: modularity, balance and optional edge bonus.
      for (NodeId j = i + 1; j < n; ++j) {
        const double v = -weights.w1 * row[j] / two_m + weights.lambda_s + bonus[j];
        if (v != 0.0) terms.push_back({vi, static_cast<std::uint32_t>(layout.index(j, c)), v});
      }
    }
    if (weights.w3 != 0.0)
      for (const auto& nb : g.neighbors(i)) bonus[nb.node] = 0.0;
  }
  std::vector<double> linear(dim, -weights.lambda_a + weights.lambda_s * (1.0 - 2.0 * target));
  const double offset = weights.lambda_a * static_cast<double>(n) + weights.lambda_s * static_cast<double>(k) * target * target;
  return QuboProblem(dim, std::move(terms), std::move(linear), offset, layout);
}

/// Penalised objective of a valid partition (the assignment penalty is zero),
/// evaluated in O(n + m) without building the QUBO.
inline double partition_objective(const Graph& g, const Partition& p, const PenaltyWeights& weights) {
  const double q = modularity(g, p);
  const double target = static_cast<double>(g.node_count()) / static_cast<double>(p.k());
  double balance = 0.0;
  for (auto s : p.group_sizes()) balance += (static_cast<double>(s) - target) * (static_cast<double>(s) - target);
  double intra = 0.0;
  if (weights.w3 != 0.0)
    for (NodeId i = 0; i < g.node_count(); ++i)
      for (const auto& nb : g.neighbors(i))
        if (p[nb.node] == p[i]) intra += nb.weight;  // each edge seen twice
  return -weights.w1 * q + weights.lambda_s * balance - weights.w3 * intra;
}

class OneHotViolation : public std::runtime_error {
 public:
  OneHotViolation(std::size_t node, std::size_t hot)
      : std::runtime_error("node " + std::to_string(node) + " has " + std::to_string(hot) +
                           " active groups (expected exactly 1)"),
        node_(node) {}
  std::size_t node() const { return node_; }

 private:
  std::size_t node_;
};

struct DecodeResult {
  Partition partition;
  std::vector<NodeId> repaired;  ///< nodes whose group came from the repair rule
};

/// Maps a one-hot vector back to groups. With repair, nodes with zero or
/// several active groups are placed, in id order, into the candidate group
/// (all groups for zero-hot, the active ones for multi-hot) that maximises
/// the modularity gain of inserting the node given the nodes placed so far;
/// ties go to the lowest group id.
inline DecodeResult decode_assignment(const Graph& g, const QuboProblem& q, std::span<const std::uint8_t> x,
                                      bool repair) {
  const auto& layout = q.layout();
  if (x.size() != q.dim()) throw std::invalid_argument("solution length does not match QUBO dimension");
  if (layout.size() != q.dim() || layout.nodes != g.node_count())
    throw std::invalid_argument("QUBO layout does not match the graph");
  const std::size_t n = layout.nodes;
  const std::size_t k = layout.groups;
  constexpr GroupId unplaced = std::numeric_limits<GroupId>::max();

  std::vector<GroupId> groups(n, unplaced);
  std::vector<NodeId> pending;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t hot = 0;
    GroupId chosen = 0;
    for (std::size_t c = 0; c < k; ++c)
      if (x[i * k + c]) {
        if (hot == 0) chosen = static_cast<GroupId>(c);
        ++hot;
      }
    if (hot == 1) {
      groups[i] = chosen;
    } else {
      if (!repair) throw OneHotViolation(i, hot);
      pending.push_back(static_cast<NodeId>(i));
    }
  }
  if (!pending.empty()) {
    detail::require_weight(g);
    const double two_m = 2.0 * g.total_weight();
    std::vector<double> volume(k, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      if (groups[i] != unplaced) volume[groups[i]] += g.degree(static_cast<NodeId>(i));
    std::vector<double> links(k);
    for (NodeId u : pending) {
      std::fill(links.begin(), links.end(), 0.0);
      for (const auto& nb : g.neighbors(u))
        if (groups[nb.node] != unplaced) links[groups[nb.node]] += nb.weight;
      const bool zero_hot =
          std::none_of(x.begin() + static_cast<std::ptrdiff_t>(u * k), x.begin() + static_cast<std::ptrdiff_t>((u + 1) * k),
                       [](std::uint8_t b) { return b != 0; });
      GroupId best = unplaced;
      double best_gain = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        if (!zero_hot && !x[u * k + c]) continue;
        // Insertion gain up to terms that do not depend on c.
        const double gain = 2.0 * links[c] - 2.0 * g.degree(u) * volume[c] / two_m;
        if (gain > best_gain) {
          best_gain = gain;
          best = static_cast<GroupId>(c);
        }
      }
      groups[u] = best;
      volume[best] += g.degree(u);
    }
  }
  return {Partition(std::move(groups), static_cast<GroupId>(k)), std::move(pending)};
}

/// One-hot encoding of a partition.
inline BitVector encode_assignment(const Partition& p) {
  BitVector x(p.size() * p.k(), 0);
  for (std::size_t i = 0; i < p.size(); ++i) x[i * p.k() + p[static_cast<NodeId>(i)]] = 1;
  return x;
}

}  // namespace qhdpart
