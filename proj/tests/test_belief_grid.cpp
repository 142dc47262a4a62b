#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "doctest.h"
#include "generators.hpp"
#include "mlc/belief_grid.hpp"

using namespace mlc;

namespace {

constexpr double kNow = 10.0;

MetaCell aged(double r, double age, double fire = 0.0) { return MetaCell{r, kNow - age, fire}; }

bool same_cell(const MetaCell& a, const MetaCell& b) { return a.identical(b); }

}  // namespace

TEST_CASE("aggregate_cell follows each policy's comparison chain") {
  const auto age = AggregationPolicy::age();
  SUBCASE("younger wins under age priority") {
    const MetaCell a = aged(0.5, 3, 0.2), b = aged(1.0, 5, 0.9);
    CHECK(same_cell(aggregate_cell(a, b, age, kNow), a));
  }
  SUBCASE("equal age falls back to resolution") {
    const MetaCell a = aged(0.5, 3), b = aged(1.0, 3);
    CHECK(same_cell(aggregate_cell(a, b, age, kNow), b));
  }
  SUBCASE("full tie returns the first argument") {
    const MetaCell a = aged(0.5, 3, 0.1), b = aged(0.5, 3, 0.7);
    for (auto p : {age, AggregationPolicy::resolution(), AggregationPolicy::meta_score(1.0)}) {
      CHECK(same_cell(aggregate_cell(a, b, p, kNow), a));
    }
  }
  SUBCASE("unobserved loses to any observation") {
    const MetaCell b = aged(0.01, 9, 0.3);
    for (auto p : {age, AggregationPolicy::resolution(), AggregationPolicy::meta_score(2.0)}) {
      CHECK(same_cell(aggregate_cell(kUnobserved, b, p, kNow), b));
      CHECK(same_cell(aggregate_cell(b, kUnobserved, p, kNow), b));
    }
  }
  SUBCASE("resolution priority prefers resolution, then age") {
    const auto res = AggregationPolicy::resolution();
    CHECK(same_cell(aggregate_cell(aged(0.5, 0), aged(1.0, 7), res, kNow), aged(1.0, 7)));
    CHECK(same_cell(aggregate_cell(aged(0.5, 4), aged(0.5, 1), res, kNow), aged(0.5, 1)));
  }
  SUBCASE("meta score, s = r + w/(a+1)") {
    const auto ms = AggregationPolicy::meta_score(1.0);
    // 1.0 + 1/1 = 2.0 against 0.5 + 1/1 = 1.5
    CHECK(same_cell(aggregate_cell(aged(1.0, 0), aged(0.5, 0), ms, kNow), aged(1.0, 0)));
    // 0.25 + 1/(0+1) = 1.25 beats 1.0 + 1/(9+1) = 1.1
    CHECK(same_cell(aggregate_cell(aged(1.0, 9), aged(0.25, 0), ms, kNow), aged(0.25, 0)));
  }
}

TEST_CASE("meta-score policy needs a positive weight") {
  CHECK_THROWS_AS(AggregationPolicy::meta_score(0.0).validate(), ConfigError);
  CHECK_NOTHROW(AggregationPolicy::meta_score(0.1).validate());
}

TEST_CASE("aggregate identity, dimension mismatch") {
  testing::GridGen gen(1);
  const BeliefGrid b = gen.grid();
  const BeliefGrid empty(8, 8, 1.0);
  CHECK(aggregate(b, empty, AggregationPolicy::age(), kNow) == b);
  CHECK(aggregate(empty, b, AggregationPolicy::age(), kNow) == b);
  CHECK_THROWS_AS(aggregate(b, BeliefGrid(4, 8, 1.0), AggregationPolicy::age(), kNow), ConfigError);
  CHECK_THROWS_AS(subtract(b, BeliefGrid(8, 4, 1.0), AggregationPolicy::age(), kNow), ConfigError);
}

TEST_CASE("compress examples") {
  testing::GridGen gen(2);
  const BeliefGrid b = gen.grid();
  CHECK(compress(b, 1.0) == b);
  CHECK_THROWS_AS(compress(b, 0.5), std::invalid_argument);

  BeliefGrid one(4, 4, 1.0);
  one.at(1, 1) = MetaCell{1.0, 2.0, 1.0};
  const BeliefGrid c4 = compress(one, 4.0);
  CHECK(c4.at(1, 1).resolution == 0.25);
  CHECK(footprint_side(0.25) == 2);
  CHECK(footprint_side(1.0) == 1);
  CHECK(footprint_side(0.5) == 1);     // round(sqrt 2)
  CHECK(footprint_side(1.0 / 9) == 3);
  CHECK(footprint_side(1.0 / 16) == 4);
}

TEST_CASE("compress averages fire over the observed part of the footprint") {
  // 3x3 grid, c = 4 gives a side-2 window [c-1, c] in each axis.
  BeliefGrid g(3, 3, 1.0);
  g.at(0, 0) = MetaCell{1.0, 1.0, 1.0};
  g.at(1, 0) = MetaCell{1.0, 1.0, 0.0};
  g.at(0, 1) = MetaCell{1.0, 1.0, 0.5};
  g.at(1, 1) = MetaCell{1.0, 1.0, 0.25};
  g.at(2, 2) = MetaCell{1.0, 3.0, 1.0};
  const BeliefGrid c = compress(g, 4.0);
  // window of (1,1): x,y in [0,1] -> (1 + 0 + 0.5 + 0.25) / 4
  CHECK(c.at(1, 1).fire == 0.4375);
  // window of (0,0) clips to the single cell itself
  CHECK(c.at(0, 0).fire == 1.0);
  // window of (2,2): x,y in [1,2]; observed cells (1,1)=0.25 and (2,2)=1
  CHECK(c.at(2, 2).fire == 0.625);
  CHECK(c.at(2, 2).obs_time == 3.0);
  CHECK_FALSE(c.at(2, 0).observed());
  CHECK(c.at(2, 0).resolution == 0.0);
}

TEST_CASE("subtract examples") {
  testing::GridGen gen(3);
  const BeliefGrid b = gen.grid();
  const BeliefGrid empty(8, 8, 1.0);
  const auto p = AggregationPolicy::age();
  CHECK(subtract(b, b, p, kNow) == empty);
  CHECK(subtract(b, empty, p, kNow) == b);
}

TEST_CASE("data_amount") {
  BeliefGrid g(5, 5, 1.0);
  CHECK(data_amount(g) == 0.0);
  g.at(0, 0) = MetaCell{1.0, 0.0, 0.0};
  g.at(3, 2) = MetaCell{1.0, 0.0, 1.0};
  g.at(4, 4) = MetaCell{1.0, 1.0, 0.5};
  CHECK(data_amount(g) == 3.0);
  CHECK(data_amount(compress(g, 2.0)) == 1.5);
}

TEST_CASE("property: algebra laws over random grids") {
  testing::GridGen gen(42);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto policy = gen.policy();
    const BeliefGrid a = gen.grid();
    const BeliefGrid b = gen.grid();
    const double c = gen.factor();
    const BeliefGrid ac = compress(a, c);

    REQUIRE(aggregate(a, ac, policy, kNow) == a);
    REQUIRE(aggregate(a, a, policy, kNow) == a);
    REQUIRE(aggregate(b, subtract(a, b, policy, kNow), policy, kNow) == aggregate(b, a, policy, kNow));
    REQUIRE(data_amount(subtract(a, b, policy, kNow)) <= data_amount(a));
    REQUIRE(data_amount(ac) == doctest::Approx(data_amount(a) / c).epsilon(1e-9));
    for (std::size_t i = 0; i < a.cells().size(); ++i) {
      REQUIRE(ac[i].obs_time == a[i].obs_time);
      const MetaCell m = aggregate_cell(a[i], b[i], policy, kNow);
      REQUIRE((same_cell(m, a[i]) || same_cell(m, b[i])));
    }
  }
}

TEST_CASE("property: commutativity away from ties") {
  testing::GridGen gen(7);
  const auto policy = AggregationPolicy::age();
  for (int trial = 0; trial < 300; ++trial) {
    const BeliefGrid a = gen.grid();
    const BeliefGrid b = gen.grid();
    const BeliefGrid ab = aggregate(a, b, policy, kNow);
    const BeliefGrid ba = aggregate(b, a, policy, kNow);
    for (std::size_t i = 0; i < a.cells().size(); ++i) {
      const bool tie = a[i].obs_time == b[i].obs_time && a[i].resolution == b[i].resolution;
      if (!tie) REQUIRE(same_cell(ab[i], ba[i]));
    }
  }
}

TEST_CASE("property: associativity on 2x2 grids with distinct keys") {
  // Every cell across the three grids gets a distinct (time, resolution) key.
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<double> times{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
    std::shuffle(times.begin(), times.end(), rng);
    BeliefGrid g[3] = {BeliefGrid(2, 2, 1.0), BeliefGrid(2, 2, 1.0), BeliefGrid(2, 2, 1.0)};
    int k = 0;
    for (auto& grid : g) {
      for (MetaCell& c : grid.cells()) {
        c = MetaCell{(k % 4 + 1) / 4.0, times[k], (k % 3) / 2.0};
        ++k;
      }
    }
    for (auto policy : {AggregationPolicy::age(), AggregationPolicy::resolution()}) {
      const BeliefGrid left = aggregate(aggregate(g[0], g[1], policy, kNow), g[2], policy, kNow);
      const BeliefGrid right = aggregate(g[0], aggregate(g[1], g[2], policy, kNow), policy, kNow);
      REQUIRE(left == right);
    }
  }
}

TEST_CASE("property: sparse patches agree with dense grids") {
  testing::GridGen gen(99);
  for (int trial = 0; trial < 500; ++trial) {
    const auto policy = gen.policy();
    gen.observed_p = 0.2 + 0.6 * (trial % 4) / 3.0;
    const BeliefGrid a = gen.grid(9, 7);
    const BeliefGrid b = gen.grid(9, 7);
    const double c = gen.factor();
    const BeliefPatch pa = BeliefPatch::from_grid(a);
    const BeliefPatch pb = BeliefPatch::from_grid(b);

    REQUIRE(pa.to_grid() == a);
    REQUIRE(aggregate(pa, pb, policy, kNow).to_grid() == aggregate(a, b, policy, kNow));
    REQUIRE(compress(pa, c).to_grid() == compress(a, c));
    REQUIRE(subtract(pa, b, policy, kNow).to_grid() == BeliefPatch::from_grid(subtract(a, b, policy, kNow)).to_grid());
    REQUIRE(subtract(pa, pb, policy, kNow) == subtract(pa, b, policy, kNow));
    REQUIRE(data_amount(pa) == doctest::Approx(data_amount(a)).epsilon(1e-12));
    BeliefGrid into = b;
    aggregate_into(into, pa, policy, kNow);
    REQUIRE(into == aggregate(b, a, policy, kNow));
  }
}

TEST_CASE("patch indices must increase") {
  BeliefPatch p(GridShape{4, 4, 1.0});
  p.push_back(3, MetaCell{1.0, 0.0, 0.0});
  CHECK_THROWS_AS(p.push_back(3, MetaCell{1.0, 0.0, 0.0}), std::logic_error);
  CHECK(p.find(3) != nullptr);
  CHECK(p.find(2) == nullptr);
}

TEST_CASE("clip_square stays inside the grid") {
  const GridShape s{10, 6, 1.0};
  const CellRect r = clip_square(s, 0, 5, 2);
  CHECK(r.x0 == 0);
  CHECK(r.x1 == 2);
  CHECK(r.y0 == 3);
  CHECK(r.y1 == 5);
  CHECK((r.x1 - r.x0 + 1) * (r.y1 - r.y0 + 1) == 9);
}
