#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "qhdpart/generators.hpp"
#include "qhdpart/graph.hpp"
#include "qhdpart/random.hpp"
#include "test_support.hpp"

using namespace qhdpart;
using qhdpart::testing::DenseGraph;

namespace {

Partition random_assignment(std::size_t n, GroupId k, Rng& rng) {
  std::vector<GroupId> a(n);
  for (auto& g : a) g = static_cast<GroupId>(rng.below(k));
  return Partition(std::move(a), k);
}

}  // namespace

TEST(EdgeList, PathGraph) {
  Graph g = load_edge_list("0 1\n1 2\n");
  EXPECT_EQ(g.node_count(), 3u);
  EXPECT_DOUBLE_EQ(g.total_weight(), 2.0);
  EXPECT_EQ(std::vector<double>(g.degrees().begin(), g.degrees().end()), (std::vector<double>{1, 2, 1}));
}

TEST(EdgeList, DuplicatesAreSummed) {
  Graph g = load_edge_list("0 1 2.0\n0 1 1.0\n");
  EXPECT_EQ(g.edge_count(), 1u);
  EXPECT_DOUBLE_EQ(g.adjacency(0, 1), 3.0);
  EXPECT_DOUBLE_EQ(g.total_weight(), 3.0);
}

TEST(EdgeList, CommentsSeparatorsAndLabels) {
  Graph g = load_edge_list("# header\n% other\n\nalice,bob\nbob;carol 0.5\r\n");
  ASSERT_EQ(g.node_count(), 3u);
  EXPECT_EQ(g.label(0), "alice");
  EXPECT_EQ(g.label(2), "carol");
  EXPECT_DOUBLE_EQ(g.adjacency(1, 2), 0.5);
}

TEST(EdgeList, IntegerIdsAreOrderedNumerically) {
  Graph g = load_edge_list("10 2\n2 007\n");
  ASSERT_EQ(g.node_count(), 3u);
  EXPECT_EQ(g.label(0), "2");
  EXPECT_EQ(g.label(1), "7");
  EXPECT_EQ(g.label(2), "10");
  EXPECT_TRUE(g.has_edge(0, 2));
}

TEST(EdgeList, Errors) {
  try {
    load_edge_list("0 1\n0 1 2 3\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(load_edge_list("0 1 -1\n"), ParseError);
  EXPECT_THROW(load_edge_list("0 1 abc\n"), ParseError);
  EXPECT_THROW(load_edge_list("# only a comment\n"), ParseError);
  EXPECT_THROW(load_edge_list(""), ParseError);
  EXPECT_THROW(load_edge_list_file("/nonexistent/graph.txt"), std::runtime_error);
}

TEST(EdgeList, DirectedHintKeepsHeavierArc) {
  EdgeListOptions o;
  o.directed_hint = true;
  Graph g = load_edge_list("0 1 1\n1 0 2\n1 2\n", o);
  EXPECT_DOUBLE_EQ(g.adjacency(0, 1), 2.0);
  EXPECT_DOUBLE_EQ(g.adjacency(1, 2), 1.0);
  EXPECT_DOUBLE_EQ(g.total_weight(), 3.0);
}

TEST(EdgeList, SelfLoopConvention) {
  Graph g = load_edge_list("0 0 1.5\n0 1\n");
  EXPECT_DOUBLE_EQ(g.adjacency(0, 0), 3.0);
  EXPECT_DOUBLE_EQ(g.degree(0), 4.0);
  EXPECT_DOUBLE_EQ(g.total_weight(), 2.5);
}

TEST(GraphInvariants, SymmetryRowSumsAndTotal) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    gen::RandomGraphOptions opt{true, 0.2};
    Graph g = gen::erdos_renyi(30, 0.2, seed, opt);
    double sum_d = 0.0;
    for (NodeId i = 0; i < g.node_count(); ++i) {
      double row = 0.0;
      for (NodeId j = 0; j < g.node_count(); ++j) {
        EXPECT_EQ(g.adjacency(i, j), g.adjacency(j, i));
        EXPECT_GE(g.adjacency(i, j), 0.0);
        row += g.adjacency(i, j);
      }
      EXPECT_NEAR(row, g.degree(i), 1e-12 * (1.0 + row));
      sum_d += g.degree(i);
    }
    EXPECT_NEAR(sum_d, 2.0 * g.total_weight(), 1e-12 * sum_d);
  }
}

TEST(Modularity, SingleGroupIsExactlyZero) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const std::size_t n = 2 + rng.below(99);
    gen::RandomGraphOptions opt{seed % 2 == 1, seed % 3 == 0 ? 0.1 : 0.0};
    Graph g = gen::erdos_renyi(n, rng.uniform(0.02, 0.5), seed, opt);
    EXPECT_EQ(modularity(g, Partition(n, 3)), 0.0) << "seed " << seed;
  }
}

TEST(Modularity, K4TwoPairs) {
  Graph g = gen::complete(4);
  EXPECT_NEAR(modularity(g, Partition({0, 0, 1, 1}, 2)), -1.0 / 6.0, 1e-12);
}

TEST(Modularity, MatchesDenseOracle) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    gen::RandomGraphOptions opt{true, 0.15};
    Graph g = gen::erdos_renyi(25, 0.25, seed, opt);
    DenseGraph d(g);
    Rng rng(seed + 1000);
    Partition p = random_assignment(g.node_count(), 4, rng);
    EXPECT_NEAR(modularity(g, p), d.modularity(p.assignment()), 1e-12);
  }
}

TEST(Modularity, KarateBestKnownFourGroups) {
  Graph g = load_edge_list_file(qhdpart::testing::data_path("karate.txt"));
  ASSERT_EQ(g.node_count(), 34u);
  ASSERT_EQ(g.edge_count(), 78u);
  Partition p(qhdpart::testing::karate_best_four(), 4);
  const double q = modularity(g, p);
  EXPECT_NEAR(q, DenseGraph(g).modularity(p.assignment()), 1e-12);
  EXPECT_NEAR(q, 0.4198, 5e-5);
}

TEST(Modularity, RelabelInvariance) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Graph g = gen::erdos_renyi(40, 0.15, seed);
    Rng rng(seed);
    Partition p = random_assignment(40, 5, rng);
    std::vector<GroupId> perm{3, 0, 4, 1, 2};
    std::vector<GroupId> relabeled(40);
    for (NodeId i = 0; i < 40; ++i) relabeled[i] = perm[p[i]];
    // Different group order changes summation order, so allow one ulp-scale slack.
    EXPECT_NEAR(modularity(g, p), modularity(g, Partition(relabeled, 5)), 1e-15);
  }
}

TEST(Modularity, AllSingletonsFormula) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    gen::RandomGraphOptions opt{true, 0.3};
    Graph g = gen::erdos_renyi(20, 0.3, seed, opt);
    const std::size_t n = g.node_count();
    std::vector<GroupId> a(n);
    std::iota(a.begin(), a.end(), 0u);
    const double two_m = 2.0 * g.total_weight();
    double expected = 0.0;
    for (NodeId i = 0; i < n; ++i) expected += g.adjacency(i, i) - g.degree(i) * g.degree(i) / two_m;
    expected /= two_m;
    EXPECT_NEAR(modularity(g, Partition(a, static_cast<GroupId>(n))), expected, 1e-14);
  }
}

TEST(Modularity, ScaleInvariance) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    gen::RandomGraphOptions opt{true, 0.1};
    Graph g = gen::erdos_renyi(30, 0.2, seed, opt);
    GraphBuilder b(g.node_count());
    for (NodeId u = 0; u < g.node_count(); ++u) {
      for (const auto& nb : g.neighbors(u))
        if (nb.node > u) b.add_edge(u, nb.node, 7.25 * nb.weight);
      if (g.self_loop(u) > 0) b.add_edge(u, u, 7.25 * g.self_loop(u));
    }
    Graph scaled = b.build();
    Rng rng(seed);
    Partition p = random_assignment(g.node_count(), 3, rng);
    const double q = modularity(g, p);
    EXPECT_NEAR(modularity(scaled, p), q, 1e-10 * std::max(1.0, std::abs(q)));
  }
}

TEST(Modularity, ZeroWeightRejected) {
  GraphBuilder b(3);
  Graph g = b.build();
  EXPECT_THROW(modularity(g, Partition(3, 2)), std::invalid_argument);
  EXPECT_THROW(modularity(gen::path(3), Partition(2, 2)), std::invalid_argument);
}

TEST(ModularityGain, IdentityMoveIsZero) {
  Graph g = gen::complete(4);
  Partition p({0, 0, 1, 1}, 2);
  EXPECT_EQ(modularity_gain(g, p, 1, 0), 0.0);
}

TEST(ModularityGain, PathMerge) {
  Graph g = gen::path(3);
  Partition p({0, 1, 1}, 2);
  const double expected = modularity(g, Partition({1, 1, 1}, 2)) - modularity(g, p);
  EXPECT_NEAR(modularity_gain(g, p, 0, 1), expected, 1e-15);
}

TEST(ModularityGain, K4Swap) {
  Graph g = gen::complete(4);
  Partition p({0, 0, 1, 1}, 2);
  const double expected = modularity(g, Partition({0, 1, 1, 1}, 2)) - modularity(g, p);
  EXPECT_NEAR(modularity_gain(g, p, 1, 1), expected, 1e-12);
}

TEST(ModularityGain, MatchesFullRecompute) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    Rng rng(seed);
    const std::size_t n = 3 + rng.below(48);
    gen::RandomGraphOptions opt{seed % 2 == 0, 0.1};
    Graph g = gen::erdos_renyi(n, rng.uniform(0.05, 0.4), seed, opt);
    Partition p = random_assignment(n, 4, rng);
    ModularityTracker t(g, p);
    for (int trial = 0; trial < 30; ++trial) {
      const auto u = static_cast<NodeId>(rng.below(n));
      const auto c = static_cast<GroupId>(rng.below(4));
      Partition after = p;
      after.move(u, c);
      const double expected = modularity(g, after) - modularity(g, p);
      EXPECT_NEAR(t.gain(u, c), expected, 1e-10);
      EXPECT_NEAR(modularity_gain(g, p, u, c), expected, 1e-10);
      t.move(u, c);
      p = after;
      EXPECT_NEAR(t.modularity(), modularity(g, p), 1e-12);
    }
  }
}

TEST(ModularityMatrix, EntriesAndRowSums) {
  gen::RandomGraphOptions opt{true, 0.2};
  Graph g = gen::erdos_renyi(40, 0.2, 3, opt);
  ModularityMatrixView b(g);
  DenseGraph d(g);
  auto dense = b.materialize();
  const std::size_t n = g.node_count();
  for (NodeId i = 0; i < n; ++i) {
    double row = 0.0;
    for (NodeId j = 0; j < n; ++j) {
      const double expected = d.a[i * n + j] - d.deg[i] * d.deg[j] / d.two_m;
      EXPECT_NEAR(b(i, j), expected, 1e-12 * std::max(1.0, std::abs(expected)));
      EXPECT_EQ(dense[i * n + j], b(i, j));
      row += b(i, j);
    }
    EXPECT_NEAR(row, 0.0, 1e-12);
  }
  std::vector<double> x(n);
  Rng rng(1);
  for (auto& v : x) v = rng.uniform(-1, 1);
  auto y = b.multiply(x);
  for (NodeId i = 0; i < n; ++i) {
    double expected = 0.0;
    for (NodeId j = 0; j < n; ++j) expected += dense[i * n + j] * x[j];
    EXPECT_NEAR(y[i], expected, 1e-12);
  }
}

TEST(ModularityMatrix, DenseThreshold) {
  Graph g = gen::path(50);
  EXPECT_THROW(ModularityMatrixView(g, 10).materialize(), std::length_error);
  EXPECT_NO_THROW(ModularityMatrixView(g, 50).materialize());
}

TEST(PartitionType, Invariants) {
  Partition p({0, 2, 2, 1}, 3);
  EXPECT_EQ(std::accumulate(p.group_sizes().begin(), p.group_sizes().end(), std::size_t{0}), 4u);
  p.move(0, 2);
  EXPECT_EQ(p.group_sizes()[2], 3u);
  EXPECT_EQ(p.nonempty_groups(), 2u);
  EXPECT_THROW(Partition({0, 3}, 3), std::out_of_range);
  EXPECT_THROW(p.move(0, 3), std::out_of_range);
}

TEST(Density, SimpleGraph) {
  EXPECT_DOUBLE_EQ(edge_density(gen::complete(5)), 1.0);
  EXPECT_DOUBLE_EQ(edge_density(gen::path(3)), 2.0 / 3.0);
}
