#include "mlc/belief_grid.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

namespace mlc {

namespace {

bool bits_equal(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

double score(const MetaCell& c, double weight, double now) {
  return c.resolution + weight / (c.age(now) + 1.0);
}

void check_factor(double factor) {
  if (!(factor >= 1.0)) throw std::invalid_argument("compression factor must be >= 1");
}

// Window [lo, lo + side - 1] around `c`, clipped to [0, limit).
std::pair<int, int> window(int c, int side, int limit) {
  const int lo = c - side / 2;
  return {std::max(0, lo), std::min(limit - 1, lo + side - 1)};
}

}  // namespace

bool MetaCell::identical(const MetaCell& other) const {
  return bits_equal(resolution, other.resolution) && bits_equal(obs_time, other.obs_time) &&
         bits_equal(fire, other.fire);
}

void AggregationPolicy::validate() const {
  if (kind == AggregationKind::MetaScore && !(score_weight > 0.0)) {
    throw ConfigError("meta-score aggregation needs a positive score weight");
  }
}

bool first_wins(const MetaCell& a, const MetaCell& b, const AggregationPolicy& policy, double now) {
  switch (policy.kind) {
    case AggregationKind::AgePriority:
      // A larger observation time is a smaller age.
      if (a.obs_time != b.obs_time) return a.obs_time > b.obs_time;
      return a.resolution >= b.resolution;
    case AggregationKind::ResolutionPriority:
      if (a.resolution != b.resolution) return a.resolution > b.resolution;
      return a.obs_time >= b.obs_time;
    case AggregationKind::MetaScore:
      return score(a, policy.score_weight, now) >= score(b, policy.score_weight, now);
  }
  return true;
}

MetaCell aggregate_cell(const MetaCell& a, const MetaCell& b, const AggregationPolicy& policy,
                        double now) {
  return first_wins(a, b, policy, now) ? a : b;
}

CellRect clip_square(const GridShape& shape, int cx, int cy, int radius) {
  CellRect r{std::max(0, cx - radius), std::max(0, cy - radius), std::min(shape.width - 1, cx + radius),
             std::min(shape.height - 1, cy + radius)};
  return r;
}

int footprint_side(double resolution) {
  if (!(resolution > 0.0)) return 1;
  return std::max(1, static_cast<int>(std::lround(std::sqrt(1.0 / resolution))));
}

// --- BeliefGrid ------------------------------------------------------------

BeliefGrid::BeliefGrid(int width, int height, double cell_size)
    : BeliefGrid(GridShape{width, height, cell_size}) {}

BeliefGrid::BeliefGrid(const GridShape& shape) : shape_(shape) {
  if (shape.width <= 0 || shape.height <= 0 || !(shape.cell_size > 0.0)) {
    throw ConfigError("belief grid needs positive dimensions");
  }
  cells_.assign(shape.size(), kUnobserved);
}

std::size_t BeliefGrid::observed_count() const {
  return static_cast<std::size_t>(std::count_if(cells_.begin(), cells_.end(),
                                                [](const MetaCell& c) { return c.observed(); }));
}

void BeliefGrid::clear() { std::fill(cells_.begin(), cells_.end(), kUnobserved); }

bool BeliefGrid::identical(const BeliefGrid& other) const {
  if (!(shape_ == other.shape_)) return false;
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    if (!cells_[i].identical(other.cells_[i])) return false;
  }
  return true;
}

static void require_same_shape(const GridShape& a, const GridShape& b) {
  if (!(a == b)) throw ConfigError("belief grids have different dimensions");
}

BeliefGrid aggregate(const BeliefGrid& a, const BeliefGrid& b, const AggregationPolicy& policy,
                     double now) {
  BeliefGrid out = a;
  aggregate_into(out, b, policy, now);
  return out;
}

void aggregate_into(BeliefGrid& dst, const BeliefGrid& src, const AggregationPolicy& policy,
                    double now) {
  require_same_shape(dst.shape(), src.shape());
  auto d = dst.cells();
  auto s = src.cells();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!first_wins(d[i], s[i], policy, now)) d[i] = s[i];
  }
}

BeliefGrid compress(const BeliefGrid& b, double factor) {
  check_factor(factor);
  BeliefGrid out = b;
  if (factor == 1.0) return out;
  for (int y = 0; y < b.height(); ++y) {
    for (int x = 0; x < b.width(); ++x) {
      const MetaCell& c = b.at(x, y);
      if (!c.observed()) continue;
      MetaCell& o = out.at(x, y);
      o.resolution = c.resolution / factor;
      const int side = footprint_side(o.resolution);
      if (side == 1) continue;
      const auto [x0, x1] = window(x, side, b.width());
      const auto [y0, y1] = window(y, side, b.height());
      double sum = 0.0;
      int n = 0;
      for (int yy = y0; yy <= y1; ++yy) {
        for (int xx = x0; xx <= x1; ++xx) {
          const MetaCell& w = b.at(xx, yy);
          if (!w.observed()) continue;
          sum += w.fire;
          ++n;
        }
      }
      o.fire = sum / n;
    }
  }
  return out;
}

BeliefGrid subtract(const BeliefGrid& b_j, const BeliefGrid& b_i, const AggregationPolicy& policy,
                    double now) {
  require_same_shape(b_j.shape(), b_i.shape());
  BeliefGrid out = b_j;
  auto o = out.cells();
  auto i_cells = b_i.cells();
  for (std::size_t k = 0; k < o.size(); ++k) {
    if (first_wins(i_cells[k], o[k], policy, now)) o[k] = kUnobserved;
  }
  return out;
}

double data_amount(const BeliefGrid& b) {
  double sum = 0.0;
  for (const MetaCell& c : b.cells()) sum += c.resolution;
  return sum;
}

// --- BeliefPatch -----------------------------------------------------------

void BeliefPatch::push_back(std::uint32_t index, const MetaCell& cell) {
  if (!entries_.empty() && entries_.back().first >= index) {
    throw std::logic_error("belief patch indices must be strictly increasing");
  }
  entries_.emplace_back(index, cell);
}

const MetaCell* BeliefPatch::find(std::uint32_t index) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), index,
                             [](const Entry& e, std::uint32_t i) { return e.first < i; });
  if (it == entries_.end() || it->first != index) return nullptr;
  return &it->second;
}

BeliefGrid BeliefPatch::to_grid() const {
  BeliefGrid g(shape_);
  for (const auto& [i, c] : entries_) g[i] = c;
  return g;
}

BeliefPatch BeliefPatch::from_grid(const BeliefGrid& grid) {
  BeliefPatch p(grid.shape());
  auto cells = grid.cells();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i].observed()) p.entries_.emplace_back(static_cast<std::uint32_t>(i), cells[i]);
  }
  return p;
}

bool operator==(const BeliefPatch& a, const BeliefPatch& b) {
  if (!(a.shape_ == b.shape_) || a.entries_.size() != b.entries_.size()) return false;
  for (std::size_t k = 0; k < a.entries_.size(); ++k) {
    if (a.entries_[k].first != b.entries_[k].first) return false;
    if (!a.entries_[k].second.identical(b.entries_[k].second)) return false;
  }
  return true;
}

BeliefPatch aggregate(const BeliefPatch& a, const BeliefPatch& b, const AggregationPolicy& policy,
                      double now) {
  require_same_shape(a.shape(), b.shape());
  BeliefPatch out(a.shape());
  auto ea = a.entries();
  auto eb = b.entries();
  std::size_t i = 0, j = 0;
  while (i < ea.size() || j < eb.size()) {
    if (j == eb.size() || (i < ea.size() && ea[i].first < eb[j].first)) {
      // Against an unobserved partner the observed cell wins under every policy.
      out.push_back(ea[i].first, ea[i].second);
      ++i;
    } else if (i == ea.size() || eb[j].first < ea[i].first) {
      out.push_back(eb[j].first, eb[j].second);
      ++j;
    } else {
      out.push_back(ea[i].first, aggregate_cell(ea[i].second, eb[j].second, policy, now));
      ++i;
      ++j;
    }
  }
  return out;
}

void aggregate_into(BeliefGrid& dst, const BeliefPatch& src, const AggregationPolicy& policy,
                    double now) {
  require_same_shape(dst.shape(), src.shape());
  for (const auto& [i, c] : src.entries()) {
    if (!first_wins(dst[i], c, policy, now)) dst[i] = c;
  }
}

BeliefPatch compress(const BeliefPatch& b, double factor) {
  check_factor(factor);
  if (factor == 1.0) return b;
  const GridShape& shape = b.shape();
  auto entries = b.entries();
  BeliefPatch out(shape);
  for (const auto& [index, c] : entries) {
    MetaCell o = c;
    o.resolution = c.resolution / factor;
    const int side = footprint_side(o.resolution);
    if (side > 1) {
      const int x = static_cast<int>(index % static_cast<std::uint32_t>(shape.width));
      const int y = static_cast<int>(index / static_cast<std::uint32_t>(shape.width));
      const auto [x0, x1] = window(x, side, shape.width);
      const auto [y0, y1] = window(y, side, shape.height);
      double sum = 0.0;
      int n = 0;
      for (int yy = y0; yy <= y1; ++yy) {
        const std::uint32_t lo = shape.index(x0, yy);
        const std::uint32_t hi = shape.index(x1, yy);
        auto it = std::lower_bound(entries.begin(), entries.end(), lo,
                                   [](const BeliefPatch::Entry& e, std::uint32_t v) { return e.first < v; });
        for (; it != entries.end() && it->first <= hi; ++it) {
          sum += it->second.fire;
          ++n;
        }
      }
      o.fire = sum / n;
    }
    out.push_back(index, o);
  }
  return out;
}

BeliefPatch subtract(const BeliefPatch& b_j, const BeliefGrid& b_i, const AggregationPolicy& policy,
                     double now) {
  require_same_shape(b_j.shape(), b_i.shape());
  BeliefPatch out(b_j.shape());
  for (const auto& [i, c] : b_j.entries()) {
    if (!first_wins(b_i[i], c, policy, now)) out.push_back(i, c);
  }
  return out;
}

BeliefPatch subtract(const BeliefPatch& b_j, const BeliefPatch& b_i, const AggregationPolicy& policy,
                     double now) {
  require_same_shape(b_j.shape(), b_i.shape());
  BeliefPatch out(b_j.shape());
  auto ei = b_i.entries();
  std::size_t k = 0;
  for (const auto& [i, c] : b_j.entries()) {
    while (k < ei.size() && ei[k].first < i) ++k;
    const MetaCell& known = (k < ei.size() && ei[k].first == i) ? ei[k].second : kUnobserved;
    if (!first_wins(known, c, policy, now)) out.push_back(i, c);
  }
  return out;
}

double data_amount(const BeliefPatch& b) {
  double sum = 0.0;
  for (const auto& [i, c] : b.entries()) sum += c.resolution;
  return sum;
}

}  // namespace mlc
