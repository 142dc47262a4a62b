#include "mlc/fixtures.hpp"

#include <filesystem>
#include <fstream>

#include "mlc/io.hpp"

namespace mlc {

namespace {

BeliefPatch block_patch(const ObservationBlock& b, double resolution) {
  BeliefPatch p(kFixtureShape);
  for (int y = b.y0; y < b.y0 + b.side; ++y) {
    for (int x = b.x0; x < b.x0 + b.side; ++x) {
      p.push_back(kFixtureShape.index(x, y), MetaCell{resolution, kFixtureTime, b.fire});
    }
  }
  return p;
}

}  // namespace

Registry six_agent_registry() {
  Registry reg;
  for (AgentId id = 1; id <= 6; ++id) {
    AgentState a;
    a.id = id;
    const ObservationBlock& b = kFixtureBlocks[id - 1];
    a.position = {b.x0 + b.side / 2.0, b.y0 + b.side / 2.0, 0.0};
    a.observation = block_patch(b, 1.0);
    a.total_belief = BeliefGrid(kFixtureShape);
    a.level1_head = id <= 3 ? 3 : 5;
    reg.add(std::move(a));
  }
  reg.at(3).token = ClusterToken{1, 3, 6, {1, 2, 3}};
  reg.at(5).token = ClusterToken{1, 5, 6, {4, 5, 6}};
  reg.at(6).token = ClusterToken{2, 6, kNoAgent, {3, 5}};
  return reg;
}

BeliefGrid expected_agent1_update(double c) {
  BeliefGrid g(kFixtureShape);
  for (std::size_t k = 0; k < kFixtureBlocks.size(); ++k) {
    double r = 1.0;
    for (int d = 0; d < kFixtureDepth[k]; ++d) r /= c;
    const ObservationBlock& b = kFixtureBlocks[k];
    for (int y = b.y0; y < b.y0 + b.side; ++y) {
      for (int x = b.x0; x < b.x0 + b.side; ++x) g.at(x, y) = MetaCell{r, kFixtureTime, b.fire};
    }
  }
  return g;
}

void write_golden_fixtures(const std::string& dir) {
  std::filesystem::create_directories(dir);
  const Registry reg = six_agent_registry();
  {
    std::ofstream out(dir + "/topology.csv");
    if (!out) throw IoError("cannot write " + dir + "/topology.csv");
    write_topology_header(out);
    write_topology(out, 0, tree_edges(reg));
  }
  BeliefGrid all(kFixtureShape);
  for (const auto& [id, a] : reg) aggregate_into(all, a.observation, AggregationPolicy::age(), kFixtureTime);
  save_grid_binary(dir + "/observations.bin", all);
  for (int c : {2, 3}) {
    save_grid_binary(dir + "/expected_cd" + std::to_string(c) + ".bin", expected_agent1_update(c));
  }
}

}  // namespace mlc
