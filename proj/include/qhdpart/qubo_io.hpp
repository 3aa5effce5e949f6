#pragma once

// QUBO serialisation.
//
// COO text format:
//
//   c qhdpart qubo v1
//   c layout <n> <k>            (omitted when the problem has no layout)
//   c offset <value>
//   c linear separate|folded
//   p qubo <dim> <nnz>
//   <i> <j> <value>             nnz lines, i <= j
//   b <i> <value>               separate mode only, one per nonzero b_i
//
// Coefficient lines use the upper-triangular convention common to QUBO
// tools: E(x) = sum_{i<=j} v_ij x_i x_j + ..., so an off-diagonal line holds
// 2 Q_ij. Scaling by two is exact, and values are printed with 17
// significant digits, so the separate mode round-trips bit-exactly. In
// folded mode each diagonal line carries Q_ii + b_i and no `b` lines are
// written; energies then agree up to one rounding per variable.
//
// JSON: {"format":"qhdpart-qubo","dim":..,"layout":{"nodes":..,"groups":..},
//        "offset":..,"linear":[..],"quadratic":[[i,j,Q_ij],..]} with symmetric
//        Q_ij (not doubled).

#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "qhdpart/qubo.hpp"

namespace qhdpart {

enum class LinearEncoding { separate, folded };

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline void write_qubo_coo(std::ostream& out, const QuboProblem& q,
                           LinearEncoding encoding = LinearEncoding::separate) {
  const bool folded = encoding == LinearEncoding::folded;
  // Folding may introduce diagonal entries that have no quadratic term.
  std::map<std::uint32_t, double> extra_diagonal;
  std::size_t nnz = q.quadratic().size();
  if (folded) {
    std::vector<char> has_diag(q.dim(), 0);
    for (const auto& t : q.quadratic())
      if (t.row == t.col) has_diag[t.row] = 1;
    for (std::size_t i = 0; i < q.dim(); ++i)
      if (!has_diag[i] && q.linear()[i] != 0.0) extra_diagonal[static_cast<std::uint32_t>(i)] = q.linear()[i];
    nnz += extra_diagonal.size();
  }
  out << "c qhdpart qubo v1\n";
  if (q.layout().size() != 0) out << "c layout " << q.layout().nodes << ' ' << q.layout().groups << '\n';
  out << "c offset " << detail::format_double(q.offset()) << '\n';
  out << "c linear " << (folded ? "folded" : "separate") << '\n';
  out << "p qubo " << q.dim() << ' ' << nnz << '\n';
  auto extra = extra_diagonal.begin();
  auto flush_extra_until = [&](std::uint32_t row) {
    for (; extra != extra_diagonal.end() && extra->first < row; ++extra)
      out << extra->first << ' ' << extra->first << ' ' << detail::format_double(extra->second) << '\n';
  };
  for (const auto& t : q.quadratic()) {
    if (folded) flush_extra_until(t.row == t.col ? t.row : t.row + 1);
    double v = t.row == t.col ? t.value : 2.0 * t.value;
    if (folded && t.row == t.col) v += q.linear()[t.row];
    out << t.row << ' ' << t.col << ' ' << detail::format_double(v) << '\n';
  }
  if (folded) flush_extra_until(std::numeric_limits<std::uint32_t>::max());
  if (!folded)
    for (std::size_t i = 0; i < q.dim(); ++i)
      if (q.linear()[i] != 0.0) out << "b " << i << ' ' << detail::format_double(q.linear()[i]) << '\n';
}

inline QuboProblem read_qubo_coo(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t dim = 0, nnz = 0;
  bool have_header = false;
  VariableLayout layout;
  double offset = 0.0;
  std::vector<QuboTerm> terms;
  std::vector<double> linear;
  std::vector<std::pair<std::size_t, double>> pending_linear;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string head;
    if (!(ls >> head)) continue;
    if (head == "c") {
      std::string key;
      ls >> key;
      if (key == "layout") {
        if (!(ls >> layout.nodes >> layout.groups)) throw ParseError(line_no, "malformed layout comment");
      } else if (key == "offset") {
        std::string tok;
        if (!(ls >> tok)) throw ParseError(line_no, "malformed offset comment");
        offset = std::stod(tok);
      }
      continue;
    }
    if (head == "p") {
      std::string kind;
      if (!(ls >> kind >> dim >> nnz) || kind != "qubo") throw ParseError(line_no, "expected 'p qubo <dim> <nnz>'");
      have_header = true;
      linear.assign(dim, 0.0);
      terms.reserve(nnz);
      continue;
    }
    if (!have_header) throw ParseError(line_no, "data before 'p qubo' header");
    if (head == "b") {
      std::size_t i;
      std::string tok;
      if (!(ls >> i >> tok) || i >= dim) throw ParseError(line_no, "malformed linear line");
      linear[i] += std::stod(tok);
      continue;
    }
    std::size_t i, j;
    std::string tok;
    try {
      i = std::stoull(head);
    } catch (const std::exception&) {
      throw ParseError(line_no, "unexpected token '" + head + "'");
    }
    if (!(ls >> j >> tok) || i >= dim || j >= dim) throw ParseError(line_no, "malformed coefficient line");
    double v = std::stod(tok);
    if (i > j) std::swap(i, j);
    terms.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), i == j ? v : v / 2.0});
  }
  if (!have_header) throw ParseError(line_no, "missing 'p qubo' header");
  if (terms.size() != nnz)
    throw ParseError(line_no, "header announced " + std::to_string(nnz) + " entries, found " + std::to_string(terms.size()));
  if (layout.size() != dim) layout = {};
  return QuboProblem(dim, std::move(terms), std::move(linear), offset, layout);
}

inline nlohmann::json qubo_to_json(const QuboProblem& q) {
  nlohmann::json quadratic = nlohmann::json::array();
  for (const auto& t : q.quadratic()) quadratic.push_back({t.row, t.col, t.value});
  nlohmann::json j;
  j["format"] = "qhdpart-qubo";
  j["dim"] = q.dim();
  j["layout"] = {{"nodes", q.layout().nodes}, {"groups", q.layout().groups}};
  j["offset"] = q.offset();
  j["linear"] = std::vector<double>(q.linear().begin(), q.linear().end());
  j["quadratic"] = std::move(quadratic);
  return j;
}

inline QuboProblem qubo_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "qhdpart-qubo") throw std::invalid_argument("not a qhdpart-qubo document");
  const auto dim = j.at("dim").get<std::size_t>();
  VariableLayout layout{j.at("layout").at("nodes").get<std::size_t>(), j.at("layout").at("groups").get<std::size_t>()};
  std::vector<QuboTerm> terms;
  for (const auto& t : j.at("quadratic"))
    terms.push_back({t.at(0).get<std::uint32_t>(), t.at(1).get<std::uint32_t>(), t.at(2).get<double>()});
  return QuboProblem(dim, std::move(terms), j.at("linear").get<std::vector<double>>(), j.at("offset").get<double>(),
                     layout.size() == dim ? layout : VariableLayout{});
}

inline nlohmann::json weights_to_json(const PenaltyWeights& w) {
  return {{"w1", w.w1}, {"lambda_a", w.lambda_a}, {"lambda_s", w.lambda_s}, {"w3", w.w3}};
}

}  // namespace qhdpart
