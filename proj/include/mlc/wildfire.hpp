#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "mlc/belief_grid.hpp"

namespace mlc {

using Rng = std::mt19937_64;

struct FireParams {
  double burning_rate = 0.02;       // k_b, fuel burnt per update
  double spreading_factor = 0.02;   // k_s
  double spontaneous_p = 1e-7;      // p_s per cell and update
  double update_period = 5.0;       // s
  int neighborhood_radius = 2;      // Chebyshev radius in cells
  // Length unit of the squared distance in the spreading term. Equal to the
  // cell size measures distance in cells; 1.0 measures it in meters.
  double spread_distance_unit = 25.0;

  void validate() const;
};

/// Ground-truth fire state: burning flags and fuel per cell.
class FireGrid {
 public:
  FireGrid() = default;
  FireGrid(const GridShape& shape, const FireParams& params);

  const GridShape& shape() const { return shape_; }
  const FireParams& params() const { return params_; }

  bool burning(int x, int y) const { return burning_[shape_.index(x, y)] != 0; }
  bool extinct(int x, int y) const { return extinct_[shape_.index(x, y)] != 0; }
  double fuel(int x, int y) const { return fuel_[shape_.index(x, y)]; }
  std::span<const std::uint8_t> burning_flags() const { return burning_; }
  std::span<const double> fuel_levels() const { return fuel_; }

  void set_burning(int x, int y, bool on);
  void set_fuel(int x, int y, double f);

  std::size_t burning_count() const;
  double total_fuel() const;

  /// Probability that a non-burning cell ignites in the next update, given the
  /// current burning set. Zero for extinct or fuel-less cells.
  double ignition_probability(int x, int y) const;

  /// One fire update: ignition draws against the pre-update burning set, then
  /// fuel burn-down and extinction, then the new ignitions take effect. Exactly
  /// one uniform draw is consumed per ignitable cell, in row-major order.
  void step(Rng& rng);

  /// Sets exactly one uniformly chosen cell burning; returns its coordinates.
  std::pair<int, int> ignite_random(Rng& rng);

  /// Full-resolution fire indicator for the given cells; out-of-range cells are dropped.
  std::vector<std::pair<std::uint32_t, double>> observe(std::span<const std::pair<int, int>> cells) const;
  /// Same for a clipped rectangle, in row-major order.
  std::vector<std::pair<std::uint32_t, double>> observe(const CellRect& rect) const;

 private:
  GridShape shape_;
  FireParams params_;
  std::vector<std::uint8_t> burning_;
  std::vector<std::uint8_t> extinct_;
  std::vector<double> fuel_;
  std::vector<double> spread_keep_;  // scratch: product of (1 - q) per cell
};

}  // namespace mlc
