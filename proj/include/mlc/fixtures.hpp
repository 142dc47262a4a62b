#pragma once

// The six-agent worked example: two level-1 clusters {1,2,3} (head 3) and
// {4,5,6} (head 5) joined by a level-2 cluster {3,5} headed by agent 6.

#include <array>
#include <string>

#include "mlc/belief_grid.hpp"
#include "mlc/cluster_protocol.hpp"

namespace mlc {

struct ObservationBlock {
  int x0, y0;   // lower-left cell
  int side;     // square side in cells
  double fire;  // uniform fire value, exactly representable
};

inline constexpr GridShape kFixtureShape{20, 16, 1.0};
inline constexpr double kFixtureTime = 1.0;
/// Observation footprint of agent k+1; separated so no averaging window spans two blocks.
inline constexpr std::array<ObservationBlock, 6> kFixtureBlocks{{
    {2, 2, 3, 1.0}, {8, 2, 3, 0.5}, {14, 2, 3, 0.25}, {2, 10, 3, 0.75}, {8, 10, 3, 0.0}, {14, 10, 3, 1.0}}};
/// Compression hops from agent 1 to agent k+1 along the tree.
inline constexpr std::array<int, 6> kFixtureDepth{0, 1, 1, 2, 2, 2};

/// Registry with the fixture's links and observations (O_i stamped at kFixtureTime).
Registry six_agent_registry();

/// The update agent 1 ends up with: its own observation, the other agents of
/// its level-1 cluster once compressed and the far cluster twice compressed.
BeliefGrid expected_agent1_update(double data_compression);

/// Writes topology.csv, observations.bin and expected_cd<c>.bin for c in {2, 3}.
void write_golden_fixtures(const std::string& dir);

}  // namespace mlc
