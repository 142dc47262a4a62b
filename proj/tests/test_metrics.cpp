#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "mlc/belief_propagation.hpp"
#include "mlc/fixtures.hpp"
#include "mlc/metrics.hpp"

using namespace mlc;

namespace {

Registry loose_agents(int n) {
  Registry reg;
  for (int i = 1; i <= n; ++i) {
    AgentState a;
    a.id = static_cast<AgentId>(i);
    a.position = {10.0 * i, 0, 0};
    reg.add(std::move(a));
  }
  return reg;
}

void link(Registry& reg, AgentId head, std::vector<AgentId> members) {
  reg.at(head).token = ClusterToken{1, head, kNoAgent, members};
  for (AgentId m : members) reg.at(m).level1_head = head;
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

TEST_CASE("main cluster ratio") {
  CHECK(std::isnan(main_cluster_ratio(Registry{})));
  Registry reg = loose_agents(5);
  CHECK(main_cluster_ratio(reg) == doctest::Approx(0.2));
  link(reg, 1, {1, 2, 3});
  link(reg, 4, {4, 5});
  CHECK(main_cluster_ratio(reg) == doctest::Approx(0.6));
  CHECK(main_cluster_ratio(six_agent_registry()) == 1.0);
}

TEST_CASE("miss ratio") {
  const GridShape shape{10, 10, 25.0};
  FireGrid fire(shape, FireParams{});
  const std::vector<CellRect> none;
  CHECK(std::isnan(miss_ratio(fire, none)));
  for (int x : {1, 2, 7, 8}) fire.set_burning(x, 1, true);
  CHECK(miss_ratio(fire, none) == 1.0);
  const std::vector<CellRect> one{clip_square(shape, 1, 1, 0)};
  CHECK(miss_ratio(fire, one) == doctest::Approx(0.75));
  // Overlapping views do not double count.
  const std::vector<CellRect> all{clip_square(shape, 1, 1, 1), clip_square(shape, 2, 1, 1), {6, 0, 9, 3}};
  CHECK(miss_ratio(fire, all) == 0.0);
}

TEST_CASE("link stats on the six-agent tree") {
  const Registry reg = six_agent_registry();
  const auto counts = link_counts(reg);
  CHECK(counts.at(1) == 1);
  CHECK(counts.at(3) == 3);  // members 1, 2 and the higher head 6
  CHECK(counts.at(5) == 2);  // member 4 and agent 6, which is both member and higher head
  CHECK(counts.at(6) == 2);
  const LinkStats s = link_stats(reg);
  CHECK(s.avg_links == doctest::Approx(10.0 / 6.0));
  CHECK(s.max_links == 3.0);
  // Block centres: agent k at (x0 + 1.5, y0 + 1.5).
  const double d13 = 12.0, d23 = 6.0, d45 = 6.0, d56 = 6.0, d36 = 8.0;
  CHECK(s.avg_dist == doctest::Approx((d13 + d23 + d45 + d56 + d36) / 5.0));
  CHECK(s.max_dist == doctest::Approx(12.0));
  CHECK(link_stats(loose_agents(3)).avg_links == 0.0);
}

TEST_CASE("data rate") {
  const std::map<AgentId, double> none;
  const std::vector<AgentId> ids{1, 2, 3};
  CHECK(data_rate(none, ids, 2.5) == std::pair<double, double>{0.0, 0.0});
  const std::map<AgentId, double> some{{1, 10.0}, {2, 5.0}, {9, 100.0}};
  const auto [avg, max] = data_rate(some, ids, 2.5);
  CHECK(avg == doctest::Approx(2.0));
  CHECK(max == doctest::Approx(4.0));
}

TEST_CASE("direct exchange data rate has the complete-graph closed form") {
  for (int n : {2, 5, 9}) {
    Registry reg = loose_agents(n);
    for (auto& [id, a] : reg) {
      a.total_belief = BeliefGrid(kFixtureShape);
      a.observation = BeliefPatch(kFixtureShape);
      for (std::uint32_t c = 0; c < 7; ++c) a.observation.push_back(c + 10 * id, MetaCell{1.0, 1.0, 0.0});
    }
    DataMeter meter;
    direct_exchange(reg, 1.0, meter, AggregationPolicy::age());
    const auto ids = reg.ids();
    const auto [avg, max] = data_rate(meter.agent_totals(), ids, 1.0);
    CHECK(avg == doctest::Approx(2.0 * (n - 1) * 7));
    CHECK(max == doctest::Approx(avg));
  }
}

TEST_CASE("normalized miss") {
  CHECK(normalized_miss(0.4, 0.4) == 1.0);
  CHECK(normalized_miss(0.8, 0.4) == 2.0);
  CHECK(std::isnan(normalized_miss(0.3, 0.0)));
  CHECK(std::isnan(normalized_miss(0.3, kNaN)));
}

TEST_CASE("summaries skip fire-free rows for the miss ratio") {
  std::vector<TraceRecord> trace(4);
  for (int i = 0; i < 4; ++i) {
    trace[i].t = 2.5 * (i + 1);
    trace[i].n_agents = i + 1;
    trace[i].main_cluster_ratio = 1.0;
    trace[i].avg_data_rate = i;
    trace[i].max_data_rate = 2 * i;
    trace[i].max_links = i;
  }
  trace[0].miss_ratio = kNaN;
  trace[1].miss_ratio = 0.5;
  trace[2].miss_ratio = kNaN;
  trace[3].miss_ratio = 1.0;
  const MissionSummary s = summarize(trace);
  CHECK(s.records == 4);
  CHECK(s.fire_records == 2);
  CHECK(s.mission_miss_ratio == doctest::Approx(0.75));
  CHECK(s.mean_agents == doctest::Approx(2.5));
  CHECK(s.mean_data_rate == doctest::Approx(1.5));
  CHECK(s.max_data_rate == 6.0);
  CHECK(s.max_links == 3.0);
  CHECK(std::isnan(summarize(std::vector<TraceRecord>(2, TraceRecord{0, 0, 1, 0, 0, 0, 0, 0, 0, kNaN}))
                       .mission_miss_ratio));
}

TEST_CASE("csv formatting") {
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(2.0) == "2");
  CHECK(format_number(kNaN) == "nan");
  CHECK(std::stod(format_number(1.0 / 3.0)) == 1.0 / 3.0);
  CHECK(trace_header() ==
        "t,n_agents,main_cluster_ratio,avg_links,max_links,avg_link_dist,max_link_dist,avg_data_rate,"
        "max_data_rate,miss_ratio");
  TraceRecord r{2.5, 3, 1, 1.5, 2, 10, 20, 0.25, 0.5, kNaN};
  CHECK(to_csv_row(r) == "2.5,3,1,1.5,2,10,20,0.25,0.5,nan");
}
