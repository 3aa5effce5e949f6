// Partition the karate club graph into four groups and print the result.
//
//   partition_karate [edge-list] [k]

#include <cstdio>
#include <string>

#include "qhdpart/qhdpart.hpp"

int main(int argc, char** argv) {
  const std::string path = argc > 1 ? argv[1] : QHDPART_SAMPLE_DATA "/karate.txt";
  qhdpart::PipelineConfig cfg;
  cfg.k = argc > 2 ? static_cast<qhdpart::GroupId>(std::stoul(argv[2])) : 4;
  cfg.solver.seed = 1;

  const qhdpart::Graph g = qhdpart::load_edge_list_file(path);
  const auto result = qhdpart::partition_graph(g, cfg);

  std::printf("n=%zu m=%zu k=%u Q=%.4f\n", g.node_count(), g.edge_count(), static_cast<unsigned>(cfg.k),
              result.modularity);
  for (qhdpart::GroupId c = 0; c < cfg.k; ++c) {
    std::printf("group %u:", static_cast<unsigned>(c));
    for (qhdpart::NodeId u = 0; u < g.node_count(); ++u)
      if (result.partition[u] == c) std::printf(" %s", g.label(u).c_str());
    std::printf("\n");
  }
}
