#pragma once

// Deterministic graph and QUBO generators for tests and benchmarks.

#include <vector>

#include "qhdpart/graph.hpp"
#include "qhdpart/qubo.hpp"
#include "qhdpart/random.hpp"

namespace qhdpart::gen {

inline Graph path(std::size_t n) {
  GraphBuilder b(n);
  for (NodeId i = 0; i + 1 < n; ++i) b.add_edge(i, i + 1);
  return b.build();
}

inline Graph cycle(std::size_t n) {
  GraphBuilder b(n);
  for (NodeId i = 0; i < n; ++i) b.add_edge(i, static_cast<NodeId>((i + 1) % n));
  return b.build();
}

inline Graph complete(std::size_t n) {
  GraphBuilder b(n);
  for (NodeId i = 0; i < n; ++i)
    for (NodeId j = i + 1; j < n; ++j) b.add_edge(i, j);
  return b.build();
}

/// Center 0 joined to leaves 1..leaves.
inline Graph star(std::size_t leaves) {
  GraphBuilder b(leaves + 1);
  for (NodeId i = 1; i <= leaves; ++i) b.add_edge(0, i);
  return b.build();
}

/// `count` disjoint cliques of `size` nodes; clique c holds nodes [c*size, (c+1)*size).
inline Graph disjoint_cliques(std::size_t count, std::size_t size) {
  GraphBuilder b(count * size);
  for (std::size_t c = 0; c < count; ++c)
    for (std::size_t i = 0; i < size; ++i)
      for (std::size_t j = i + 1; j < size; ++j)
        b.add_edge(static_cast<NodeId>(c * size + i), static_cast<NodeId>(c * size + j));
  return b.build();
}

struct RandomGraphOptions {
  bool weighted = false;       ///< weights uniform in [0.5, 2)
  double self_loop_prob = 0.0;  ///< per-node chance of a self-loop
};

/// G(n, p); an edge 0-1 is added if the draw produced none.
inline Graph erdos_renyi(std::size_t n, double p, std::uint64_t seed, const RandomGraphOptions& options = {}) {
  Rng rng(seed);
  GraphBuilder b(n);
  bool any = false;
  for (NodeId i = 0; i < n; ++i) {
    for (NodeId j = i + 1; j < n; ++j)
      if (rng.bernoulli(p)) {
        b.add_edge(i, j, options.weighted ? rng.uniform(0.5, 2.0) : 1.0);
        any = true;
      }
    if (options.self_loop_prob > 0.0 && rng.bernoulli(options.self_loop_prob)) {
      b.add_edge(i, i, options.weighted ? rng.uniform(0.5, 2.0) : 1.0);
      any = true;
    }
  }
  if (!any && n >= 2) b.add_edge(0, 1);
  return b.build();
}

struct PlantedGraph {
  Graph graph;
  Partition truth;
};

/// Nodes split round-robin into `groups`; pairs inside a group connect with
/// probability p_in, across groups with p_out.
inline PlantedGraph planted_partition(std::size_t n, GroupId groups, double p_in, double p_out, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<GroupId> truth(n);
  for (std::size_t i = 0; i < n; ++i) truth[i] = static_cast<GroupId>(i % groups);
  GraphBuilder b(n);
  for (NodeId i = 0; i < n; ++i)
    for (NodeId j = i + 1; j < n; ++j)
      if (rng.bernoulli(truth[i] == truth[j] ? p_in : p_out)) b.add_edge(i, j);
  if (n >= 2) b.add_edge(0, static_cast<NodeId>(groups < n ? groups : 1));
  return {b.build(), Partition(std::move(truth), groups)};
}

/// Symmetric QUBO with each off-diagonal pair present with probability
/// `density`; values uniform in [-1, 1], linear terms likewise.
inline QuboProblem random_qubo(std::size_t dim, double density, std::uint64_t seed, bool separable = false) {
  Rng rng(seed);
  std::vector<QuboTerm> terms;
  std::vector<double> linear(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    terms.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i), rng.uniform(-1.0, 1.0)});
    linear[i] = rng.uniform(-1.0, 1.0);
    if (separable) continue;
    for (std::size_t j = i + 1; j < dim; ++j)
      if (rng.bernoulli(density))
        terms.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), rng.uniform(-1.0, 1.0)});
  }
  return QuboProblem(dim, std::move(terms), std::move(linear), 0.0);
}

}  // namespace qhdpart::gen
