#include "mlc/wildfire.hpp"

#include <algorithm>
#include <numeric>

namespace mlc {

namespace {
constexpr double kFuelEpsilon = 1e-9;
}

void FireParams::validate() const {
  if (!(burning_rate > 0.0 && burning_rate <= 1.0)) throw ConfigError("fire burning_rate must be in (0,1]");
  if (!(spreading_factor >= 0.0)) throw ConfigError("fire spreading_factor must be >= 0");
  if (!(spontaneous_p >= 0.0 && spontaneous_p <= 1.0)) throw ConfigError("fire spontaneous_p must be in [0,1]");
  if (!(update_period > 0.0)) throw ConfigError("fire update_period must be positive");
  if (neighborhood_radius < 0) throw ConfigError("fire neighborhood_radius must be >= 0");
  if (!(spread_distance_unit > 0.0)) throw ConfigError("fire spread_distance_unit must be positive");
}

FireGrid::FireGrid(const GridShape& shape, const FireParams& params)
    : shape_(shape),
      params_(params),
      burning_(shape.size(), 0),
      extinct_(shape.size(), 0),
      fuel_(shape.size(), 1.0),
      spread_keep_(shape.size(), 1.0) {
  params_.validate();
}

void FireGrid::set_burning(int x, int y, bool on) {
  const auto i = shape_.index(x, y);
  burning_[i] = on ? 1 : 0;
  if (on) extinct_[i] = 0;
}

void FireGrid::set_fuel(int x, int y, double f) { fuel_[shape_.index(x, y)] = std::clamp(f, 0.0, 1.0); }

std::size_t FireGrid::burning_count() const {
  return static_cast<std::size_t>(std::count(burning_.begin(), burning_.end(), std::uint8_t{1}));
}

double FireGrid::total_fuel() const { return std::accumulate(fuel_.begin(), fuel_.end(), 0.0); }

double FireGrid::ignition_probability(int x, int y) const {
  const auto i = shape_.index(x, y);
  if (burning_[i] || extinct_[i] || fuel_[i] <= 0.0) return 0.0;
  const int r = params_.neighborhood_radius;
  const double scale = shape_.cell_size / params_.spread_distance_unit;
  double keep = 1.0;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      if ((dx == 0 && dy == 0) || !shape_.contains(x + dx, y + dy)) continue;
      if (!burning_[shape_.index(x + dx, y + dy)]) continue;
      const double d2 = (dx * dx + dy * dy) * scale * scale;
      keep *= 1.0 - std::clamp(params_.spreading_factor / d2, 0.0, 1.0);
    }
  }
  return 1.0 - (1.0 - params_.spontaneous_p) * keep;
}

void FireGrid::step(Rng& rng) {
  const int r = params_.neighborhood_radius;
  const double scale = shape_.cell_size / params_.spread_distance_unit;

  // Scatter each burning cell's spreading term into its neighbourhood.
  std::fill(spread_keep_.begin(), spread_keep_.end(), 1.0);
  for (int y = 0; y < shape_.height; ++y) {
    for (int x = 0; x < shape_.width; ++x) {
      if (!burning_[shape_.index(x, y)]) continue;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          if ((dx == 0 && dy == 0) || !shape_.contains(x + dx, y + dy)) continue;
          const double d2 = (dx * dx + dy * dy) * scale * scale;
          spread_keep_[shape_.index(x + dx, y + dy)] *=
              1.0 - std::clamp(params_.spreading_factor / d2, 0.0, 1.0);
        }
      }
    }
  }

  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<std::uint32_t> ignited;
  for (std::size_t i = 0; i < burning_.size(); ++i) {
    if (burning_[i] || extinct_[i] || fuel_[i] <= 0.0) continue;
    const double p = 1.0 - (1.0 - params_.spontaneous_p) * spread_keep_[i];
    if (uniform(rng) < p) ignited.push_back(static_cast<std::uint32_t>(i));
  }

  for (std::size_t i = 0; i < burning_.size(); ++i) {
    if (!burning_[i]) continue;
    fuel_[i] -= params_.burning_rate;
    if (fuel_[i] < kFuelEpsilon) {
      fuel_[i] = 0.0;
      burning_[i] = 0;
      extinct_[i] = 1;
    }
  }
  for (auto i : ignited) burning_[i] = 1;
}

std::pair<int, int> FireGrid::ignite_random(Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, shape_.size() - 1);
  const std::size_t i = pick(rng);
  const int x = static_cast<int>(i % static_cast<std::size_t>(shape_.width));
  const int y = static_cast<int>(i / static_cast<std::size_t>(shape_.width));
  set_burning(x, y, true);
  return {x, y};
}

std::vector<std::pair<std::uint32_t, double>> FireGrid::observe(
    std::span<const std::pair<int, int>> cells) const {
  std::vector<std::pair<std::uint32_t, double>> out;
  out.reserve(cells.size());
  for (const auto& [x, y] : cells) {
    if (!shape_.contains(x, y)) continue;
    const auto i = shape_.index(x, y);
    out.emplace_back(i, burning_[i] ? 1.0 : 0.0);
  }
  return out;
}

std::vector<std::pair<std::uint32_t, double>> FireGrid::observe(const CellRect& rect) const {
  std::vector<std::pair<std::uint32_t, double>> out;
  if (rect.empty()) return out;
  out.reserve(static_cast<std::size_t>((rect.x1 - rect.x0 + 1) * (rect.y1 - rect.y0 + 1)));
  for (int y = std::max(0, rect.y0); y <= std::min(shape_.height - 1, rect.y1); ++y) {
    for (int x = std::max(0, rect.x0); x <= std::min(shape_.width - 1, rect.x1); ++x) {
      const auto i = shape_.index(x, y);
      out.emplace_back(i, burning_[i] ? 1.0 : 0.0);
    }
  }
  return out;
}

}  // namespace mlc
