#pragma once

// Independent reference computations shared by the unit and acceptance tests.

#include "mlc/belief_grid.hpp"

namespace mlc::testing {

// Hand expansion of agent 1's update on the six-agent tree: its own block at
// full resolution, its cluster mates' blocks compressed once and the other
// cluster's blocks compressed twice. Each block is a uniform 3x3 square.
inline BeliefGrid hand_expansion(double c) {
  struct Block {
    int x0, y0;
    double fire;
    int hops;
  };
  const Block blocks[] = {{2, 2, 1.0, 0},   {8, 2, 0.5, 1},   {14, 2, 0.25, 1},
                          {2, 10, 0.75, 2}, {8, 10, 0.0, 2}, {14, 10, 1.0, 2}};
  BeliefGrid g(20, 16, 1.0);
  for (const Block& b : blocks) {
    const double r = b.hops == 0 ? 1.0 : b.hops == 1 ? 1.0 / c : (1.0 / c) / c;
    for (int y = b.y0; y < b.y0 + 3; ++y) {
      for (int x = b.x0; x < b.x0 + 3; ++x) g.at(x, y) = MetaCell{r, 1.0, b.fire};
    }
  }
  return g;
}

// Ignition probability of a cell with one burning neighbour at unit distance.
inline double single_neighbour_ignition(double spontaneous, double spread) {
  return 1.0 - (1.0 - spontaneous) * (1.0 - spread);
}

}  // namespace mlc::testing
