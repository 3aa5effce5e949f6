#pragma once

// Multilevel partitioning: heavy-edge coarsening, a QUBO/QHD solve on the
// coarsest graph, then projection and greedy modularity refinement back down
// to the input graph.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qhdpart/graph.hpp"
#include "qhdpart/qhd.hpp"
#include "qhdpart/qubo.hpp"
#include "qhdpart/random.hpp"

namespace qhdpart {

struct MatchWeightParams {
  double alpha = 0.5;  ///< neighbourhood overlap
  double beta = 0.5;   ///< normalised edge weight

  void validate() const {
    if (!(alpha >= 0.0) || !(beta >= 0.0) || !(alpha + beta > 0.0))
      throw std::invalid_argument("match weights need alpha, beta >= 0 and alpha + beta > 0");
  }
};

/// alpha * |N(u) & N(v)| / |N(u) | N(v)| + beta * A_uv / max_weight, where the
/// neighbourhoods exclude u, v themselves (and so self-loops). An empty union
/// scores 0 overlap.
inline double match_weight(const Graph& g, NodeId u, NodeId v, const MatchWeightParams& params, double max_weight) {
  if (u == v || !g.has_edge(u, v)) throw std::invalid_argument("match_weight needs an edge between distinct nodes");
  auto a = g.neighbors(u);
  auto b = g.neighbors(v);
  std::size_t common = 0, total = 0;
  std::size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    if (i < a.size() && a[i].node == v) { ++i; continue; }
    if (j < b.size() && b[j].node == u) { ++j; continue; }
    if (j == b.size() || (i < a.size() && a[i].node < b[j].node)) {
      ++i;
    } else if (i == a.size() || b[j].node < a[i].node) {
      ++j;
    } else {
      ++common;
      ++i;
      ++j;
    }
    ++total;
  }
  const double overlap = total == 0 ? 0.0 : static_cast<double>(common) / static_cast<double>(total);
  const double heavy = max_weight > 0.0 ? g.adjacency(u, v) / max_weight : 0.0;
  return params.alpha * overlap + params.beta * heavy;
}

inline double match_weight(const Graph& g, NodeId u, NodeId v, const MatchWeightParams& params = {}) {
  return match_weight(g, u, v, params, g.max_edge_weight());
}

struct CoarseningLevel {
  Graph graph;
  /// Fine node -> super-node.
  std::vector<NodeId> mapping;
};

/// One round of greedy maximal matching by descending match weight (ties by
/// lower endpoint, then higher endpoint). Matched pairs merge; the pair's
/// edge becomes a self-loop and parallel edges are summed. Super-nodes are
/// numbered by their smallest fine node.
inline CoarseningLevel coarsen(const Graph& g, const MatchWeightParams& params = {}) {
  params.validate();
  const std::size_t n = g.node_count();
  struct Candidate {
    double score;
    NodeId u, v;
  };
  std::vector<Candidate> candidates;
  const double max_weight = g.max_edge_weight();
  for (NodeId u = 0; u < n; ++u)
    for (const auto& nb : g.neighbors(u))
      if (nb.node > u) candidates.push_back({match_weight(g, u, nb.node, params, max_weight), u, nb.node});
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.u != b.u) return a.u < b.u;
    return a.v < b.v;
  });
  constexpr NodeId none = std::numeric_limits<NodeId>::max();
  std::vector<NodeId> mate(n, none);
  for (const auto& c : candidates) {
    if (mate[c.u] != none || mate[c.v] != none) continue;
    mate[c.u] = c.v;
    mate[c.v] = c.u;
  }
  CoarseningLevel level;
  level.mapping.assign(n, none);
  NodeId next = 0;
  for (NodeId u = 0; u < n; ++u) {
    if (level.mapping[u] != none) continue;
    level.mapping[u] = next;
    if (mate[u] != none) level.mapping[mate[u]] = next;
    ++next;
  }
  GraphBuilder builder(next);
  builder.reserve(g.edge_count());
  for (NodeId u = 0; u < n; ++u) {
    if (g.self_loop(u) != 0.0) builder.add_edge(level.mapping[u], level.mapping[u], g.self_loop(u));
    for (const auto& nb : g.neighbors(u))
      if (nb.node > u) builder.add_edge(level.mapping[u], level.mapping[nb.node], nb.weight);
  }
  level.graph = builder.build();
  return level;
}

inline Partition project(const Partition& coarse, const CoarseningLevel& level) {
  if (coarse.size() != level.graph.node_count())
    throw std::invalid_argument("coarse partition size does not match the coarse graph");
  std::vector<GroupId> fine(level.mapping.size());
  for (std::size_t i = 0; i < fine.size(); ++i) {
    if (level.mapping[i] >= coarse.size()) throw std::invalid_argument("mapping points outside the coarse graph");
    fine[i] = coarse[level.mapping[i]];
  }
  return Partition(std::move(fine), coarse.k());
}

struct RefineResult {
  Partition partition;
  std::size_t sweeps = 0;
  std::size_t moves = 0;
  double initial_modularity = 0.0;
  double final_modularity = 0.0;
};

/// Sweeps nodes in id order, moving each to the group (among its neighbours'
/// groups) with the largest positive modularity gain, lowest group id on
/// ties. Stops after a sweep without moves or after `sweep_cap` sweeps.
/// Never returns a partition with lower modularity than the input.
inline RefineResult refine(const Graph& g, Partition p, std::size_t sweep_cap = 20) {
  if (sweep_cap == 0) throw std::invalid_argument("sweep cap must be at least 1");
  RefineResult result;
  result.initial_modularity = modularity(g, p);
  ModularityTracker tracker(g, p);
  const GroupId k = tracker.partition().k();
  std::vector<double> links(k, 0.0);
  std::vector<char> seen(k, 0);
  std::vector<GroupId> touched;
  constexpr double min_gain = 1e-15;
  for (std::size_t sweep = 0; sweep < sweep_cap; ++sweep) {
    std::size_t moved = 0;
    for (NodeId u = 0; u < g.node_count(); ++u) {
      const GroupId from = tracker.partition()[u];
      touched.clear();
      for (const auto& nb : g.neighbors(u)) {
        const GroupId c = tracker.partition()[nb.node];
        if (!seen[c]) {
          seen[c] = 1;
          touched.push_back(c);
        }
        links[c] += nb.weight;
      }
      std::sort(touched.begin(), touched.end());
      GroupId best = from;
      double best_gain = min_gain;
      for (GroupId c : touched) {
        if (c == from) continue;
        const double gain = tracker.gain_from_links(u, from, c, links[from], links[c]);
        if (gain > best_gain) {
          best_gain = gain;
          best = c;
        }
      }
      for (GroupId c : touched) {
        links[c] = 0.0;
        seen[c] = 0;
      }
      if (best != from) {
        tracker.move(u, best);
        ++moved;
      }
    }
    ++result.sweeps;
    result.moves += moved;
    if (moved == 0) break;
  }
  // Reported values are recomputed from scratch; incremental drift must not
  // make a sweep look like a loss.
  result.partition = std::move(tracker).release();
  result.final_modularity = modularity(g, result.partition);
  if (result.final_modularity < result.initial_modularity) {
    result.partition = std::move(p);
    result.final_modularity = result.initial_modularity;
  }
  return result;
}

/// Uniformly random valid partition.
inline Partition random_partition(std::size_t n, GroupId k, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<GroupId> a(n);
  for (auto& g : a) g = static_cast<GroupId>(rng.below(k));
  return Partition(std::move(a), k);
}

struct PipelineConfig {
  GroupId k = 2;
  std::size_t theta = 512;
  MatchWeightParams match;
  std::size_t sweep_cap = 20;
  /// Distinct low-energy base solutions that are each decoded and refined;
  /// the one with the highest refined modularity continues.
  std::size_t base_candidates = 8;
  SolverParams solver;
  /// Defaults are derived from the coarsest graph when unset.
  std::optional<PenaltyWeights> weights;
  QuboBuildOptions qubo;

  void validate() const {
    if (k < 2) throw std::invalid_argument("k must be at least 2");
    if (theta < k) throw std::invalid_argument("theta must be >= k");
    if (sweep_cap == 0) throw std::invalid_argument("sweep cap must be at least 1");
    if (base_candidates == 0) throw std::invalid_argument("base_candidates must be at least 1");
    match.validate();
    solver.validate();
    if (weights) weights->validate();
  }
};

struct LevelInfo {
  std::size_t nodes = 0;
  std::size_t edges = 0;
  double total_weight = 0.0;
};

struct ModularityPoint {
  std::string stage;
  std::size_t level = 0;
  double modularity = 0.0;
};

struct PipelineReport {
  std::vector<LevelInfo> levels;  ///< levels[0] is the input graph
  std::vector<ModularityPoint> modularity_trace;
  std::size_t base_nodes = 0;
  std::size_t base_dim = 0;
  std::string base_backend;
  double base_energy = 0.0;
  std::size_t repaired_nodes = 0;
  std::size_t candidates = 0;
  std::size_t chosen_candidate = 0;
  bool fallback = false;
  std::string fallback_reason;
  PenaltyWeights weights;
  SolverStats solver;
  std::size_t refine_sweeps = 0;
  std::size_t refine_moves = 0;
  double coarsen_seconds = 0.0;
  double base_solve_seconds = 0.0;
  double refine_seconds = 0.0;
  double total_seconds = 0.0;
};

/// Timing fields all end in "_seconds" so deterministic comparisons can drop them.
inline nlohmann::json to_json(const PipelineReport& r) {
  nlohmann::json levels = nlohmann::json::array();
  for (const auto& l : r.levels) levels.push_back({{"nodes", l.nodes}, {"edges", l.edges}, {"total_weight", l.total_weight}});
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& p : r.modularity_trace) trace.push_back({{"stage", p.stage}, {"level", p.level}, {"modularity", p.modularity}});
  return {
      {"levels", levels},
      {"coarsening_levels", r.levels.empty() ? 0 : r.levels.size() - 1},
      {"modularity_trace", trace},
      {"base",
       {{"nodes", r.base_nodes},
        {"dim", r.base_dim},
        {"backend", r.base_backend},
        {"energy", r.base_energy},
        {"repaired_nodes", r.repaired_nodes},
        {"candidates", r.candidates},
        {"chosen_candidate", r.chosen_candidate},
        {"fallback", r.fallback},
        {"fallback_reason", r.fallback_reason},
        {"weights", {{"w1", r.weights.w1}, {"lambda_a", r.weights.lambda_a}, {"lambda_s", r.weights.lambda_s}, {"w3", r.weights.w3}}},
        {"solver",
         {{"steps", r.solver.steps},
          {"batch", r.solver.batch},
          {"samples", r.solver.samples},
          {"max_norm_error", r.solver.max_norm_error},
          {"best_energy_trace", r.solver.best_energy_trace},
          {"wall_seconds", r.solver.wall_seconds}}}}},
      {"refine", {{"sweeps", r.refine_sweeps}, {"moves", r.refine_moves}}},
      {"timings",
       {{"coarsen_seconds", r.coarsen_seconds},
        {"base_solve_seconds", r.base_solve_seconds},
        {"refine_seconds", r.refine_seconds},
        {"total_seconds", r.total_seconds}}},
  };
}

struct PipelineResult {
  Partition partition;
  double modularity = 0.0;
  PipelineReport report;
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace detail

/// Coarsens until |V| <= theta (or no edge is matchable), solves the
/// coarsest graph through the QUBO and the QHD solver with one-hot repair,
/// then projects and refines level by level. A failed base solve falls back
/// to a seeded random partition, which is then refined like any other.
inline PipelineResult partition_graph(const Graph& g, const PipelineConfig& cfg) {
  cfg.validate();
  detail::require_weight(g);
  const auto start = detail::Clock::now();
  PipelineResult out;
  auto& report = out.report;

  std::vector<CoarseningLevel> hierarchy;
  report.levels.push_back({g.node_count(), g.edge_count(), g.total_weight()});
  {
    const auto t = detail::Clock::now();
    const Graph* current = &g;
    while (current->node_count() > cfg.theta) {
      CoarseningLevel next = coarsen(*current, cfg.match);
      if (next.graph.node_count() >= current->node_count()) break;
      hierarchy.push_back(std::move(next));
      current = &hierarchy.back().graph;
      report.levels.push_back({current->node_count(), current->edge_count(), current->total_weight()});
    }
    report.coarsen_seconds = detail::seconds_since(t);
  }
  const Graph& base = hierarchy.empty() ? g : hierarchy.back().graph;
  const std::size_t base_level = hierarchy.size();
  report.base_nodes = base.node_count();

  std::vector<Partition> starts;
  std::vector<std::size_t> repaired;
  {
    const auto t = detail::Clock::now();
    report.weights = cfg.weights.value_or(PenaltyWeights::defaults(base));
    try {
      QuboProblem q = build_qubo(base, cfg.k, report.weights, cfg.qubo);
      report.base_dim = q.dim();
      SolverParams params = cfg.solver;
      params.keep_candidates = cfg.base_candidates;
      QuboSolution sol = solve_qubo(q, params);
      report.base_backend = to_string(sol.stats.backend);
      report.base_energy = sol.energy;
      report.solver = sol.stats;
      if (sol.candidates.empty()) sol.candidates.push_back({sol.bits, sol.energy});
      for (const auto& c : sol.candidates) {
        DecodeResult decoded = decode_assignment(base, q, c.bits, true);
        repaired.push_back(decoded.repaired.size());
        starts.push_back(std::move(decoded.partition));
      }
    } catch (const std::exception& e) {
      report.fallback = true;
      report.fallback_reason = e.what();
      starts.assign(1, random_partition(base.node_count(), cfg.k, derive_seed(cfg.solver.seed, 0xfa11)));
      repaired.assign(1, 0);
    }
    report.candidates = starts.size();
    report.base_solve_seconds = detail::seconds_since(t);
  }

  const auto refine_start = detail::Clock::now();
  Partition current;
  {
    std::optional<RefineResult> best;
    double start_q = 0.0;
    for (std::size_t c = 0; c < starts.size(); ++c) {
      const double q0 = modularity(base, starts[c]);
      RefineResult r = refine(base, std::move(starts[c]), cfg.sweep_cap);
      if (!best || r.final_modularity > best->final_modularity) {
        best = std::move(r);
        start_q = q0;
        report.chosen_candidate = c;
      }
    }
    report.repaired_nodes = repaired[report.chosen_candidate];
    report.modularity_trace.push_back({report.fallback ? "base_fallback" : "base_solve", base_level, start_q});
    report.refine_sweeps += best->sweeps;
    report.refine_moves += best->moves;
    report.modularity_trace.push_back({"refine", base_level, best->final_modularity});
    current = std::move(best->partition);
  }
  for (std::size_t level = hierarchy.size(); level-- > 0;) {
    const Graph& fine = level == 0 ? g : hierarchy[level - 1].graph;
    current = project(current, hierarchy[level]);
    report.modularity_trace.push_back({"project", level, modularity(fine, current)});
    RefineResult r = refine(fine, std::move(current), cfg.sweep_cap);
    report.refine_sweeps += r.sweeps;
    report.refine_moves += r.moves;
    report.modularity_trace.push_back({"refine", level, r.final_modularity});
    current = std::move(r.partition);
  }
  report.refine_seconds = detail::seconds_since(refine_start);
  out.modularity = modularity(g, current);
  out.partition = std::move(current);
  report.total_seconds = detail::seconds_since(start);
  return out;
}

}  // namespace qhdpart
