#pragma once

// Meta-belief grids: per-cell (resolution, observation time, fire amount)
// together with the aggregation, compression and subtraction algebra used to
// share beliefs along the cluster tree.

#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "mlc/types.hpp"

namespace mlc {

/// Observation time of a cell that has never been observed. Its age is +inf.
inline constexpr double kNever = -std::numeric_limits<double>::infinity();

struct MetaCell {
  double resolution = 0.0;
  double obs_time = kNever;
  double fire = 0.0;

  bool observed() const { return obs_time != kNever; }
  double age(double now) const { return now - obs_time; }

  /// Bitwise equality (distinguishes -0.0 from 0.0, NaN payloads).
  bool identical(const MetaCell& other) const;
};

inline constexpr MetaCell kUnobserved{};

enum class AggregationKind { AgePriority, ResolutionPriority, MetaScore };

struct AggregationPolicy {
  AggregationKind kind = AggregationKind::AgePriority;
  double score_weight = 1.0;  // w in s(b) = r + w / (age + 1)

  static AggregationPolicy age() { return {AggregationKind::AgePriority, 1.0}; }
  static AggregationPolicy resolution() { return {AggregationKind::ResolutionPriority, 1.0}; }
  static AggregationPolicy meta_score(double w) { return {AggregationKind::MetaScore, w}; }

  void validate() const;
};

/// True when aggregate_cell(a, b) selects `a`.
bool first_wins(const MetaCell& a, const MetaCell& b, const AggregationPolicy& policy, double now);

MetaCell aggregate_cell(const MetaCell& a, const MetaCell& b, const AggregationPolicy& policy,
                        double now);

struct GridShape {
  int width = 0;
  int height = 0;
  double cell_size = 1.0;

  std::size_t size() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
  std::uint32_t index(int x, int y) const { return static_cast<std::uint32_t>(y * width + x); }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
  friend bool operator==(const GridShape&, const GridShape&) = default;
};

/// Inclusive cell rectangle, already clipped to a grid.
struct CellRect {
  int x0 = 0, y0 = 0, x1 = -1, y1 = -1;
  bool empty() const { return x1 < x0 || y1 < y0; }
  bool contains(int x, int y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
};

/// Square of side 2*radius+1 cells centred on (cx, cy), clipped to the grid.
CellRect clip_square(const GridShape& shape, int cx, int cy, int radius);

/// Dense meta-belief over the whole environment grid.
class BeliefGrid {
 public:
  BeliefGrid() = default;
  BeliefGrid(int width, int height, double cell_size);
  explicit BeliefGrid(const GridShape& shape);

  int width() const { return shape_.width; }
  int height() const { return shape_.height; }
  double cell_size() const { return shape_.cell_size; }
  const GridShape& shape() const { return shape_; }

  const MetaCell& at(int x, int y) const { return cells_[shape_.index(x, y)]; }
  MetaCell& at(int x, int y) { return cells_[shape_.index(x, y)]; }
  const MetaCell& operator[](std::size_t i) const { return cells_[i]; }
  MetaCell& operator[](std::size_t i) { return cells_[i]; }

  std::span<const MetaCell> cells() const { return cells_; }
  std::span<MetaCell> cells() { return cells_; }

  bool same_shape(const BeliefGrid& other) const { return shape_ == other.shape_; }
  std::size_t observed_count() const;
  void clear();

  /// Bitwise equality of shape and every cell.
  bool identical(const BeliefGrid& other) const;
  friend bool operator==(const BeliefGrid& a, const BeliefGrid& b) { return a.identical(b); }

 private:
  GridShape shape_;
  std::vector<MetaCell> cells_;
};

BeliefGrid aggregate(const BeliefGrid& a, const BeliefGrid& b, const AggregationPolicy& policy,
                     double now);
/// In-place dst = aggregate(dst, src).
void aggregate_into(BeliefGrid& dst, const BeliefGrid& src, const AggregationPolicy& policy,
                    double now);
BeliefGrid compress(const BeliefGrid& b, double factor);
BeliefGrid subtract(const BeliefGrid& b_j, const BeliefGrid& b_i, const AggregationPolicy& policy,
                    double now);
double data_amount(const BeliefGrid& b);

/// Side length in cells of the averaging window for a cell at `resolution`.
int footprint_side(double resolution);

/// Sparse belief: only observed cells, sorted by row-major index. Observations
/// and everything derived from them along the tree are stored this way; the
/// algebra agrees cell-for-cell with the dense one.
class BeliefPatch {
 public:
  using Entry = std::pair<std::uint32_t, MetaCell>;

  BeliefPatch() = default;
  explicit BeliefPatch(const GridShape& shape) : shape_(shape) {}

  const GridShape& shape() const { return shape_; }
  std::span<const Entry> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  /// Appends an entry; indices must be strictly increasing and the cell observed.
  void push_back(std::uint32_t index, const MetaCell& cell);
  const MetaCell* find(std::uint32_t index) const;

  BeliefGrid to_grid() const;
  static BeliefPatch from_grid(const BeliefGrid& grid);

  friend bool operator==(const BeliefPatch& a, const BeliefPatch& b);

 private:
  GridShape shape_;
  std::vector<Entry> entries_;
};

BeliefPatch aggregate(const BeliefPatch& a, const BeliefPatch& b, const AggregationPolicy& policy,
                      double now);
void aggregate_into(BeliefGrid& dst, const BeliefPatch& src, const AggregationPolicy& policy,
                    double now);
BeliefPatch compress(const BeliefPatch& b, double factor);
/// Removes from `b_j` every cell for which `b_i` would win the aggregation.
BeliefPatch subtract(const BeliefPatch& b_j, const BeliefGrid& b_i, const AggregationPolicy& policy,
                     double now);
BeliefPatch subtract(const BeliefPatch& b_j, const BeliefPatch& b_i, const AggregationPolicy& policy,
                     double now);
double data_amount(const BeliefPatch& b);

}  // namespace mlc
