#include <cmath>
#include <sstream>

#include "doctest.h"
#include "mlc/io.hpp"
#include "mlc/sim_engine.hpp"

using namespace mlc;

namespace {

ScenarioConfig small(std::uint64_t seed) {
  ScenarioConfig c;
  c.seed = seed;
  c.sim_time = 200.0;
  c.env_width = c.env_height = 1000.0;
  c.grid = GridShape{40, 40, 25.0};
  c.max_agents = 8;
  c.battery = 120.0;
  c.spawn_duration = 150.0;
  return c;
}

std::string trace_text(const std::vector<TraceRecord>& trace) {
  std::ostringstream out;
  write_trace_csv(out, trace);
  return out.str();
}

}  // namespace

TEST_CASE("simulation is deterministic per seed") {
  const RunResult a = run_scenario(small(3));
  const RunResult b = run_scenario(small(3));
  const RunResult c = run_scenario(small(4));
  CHECK(trace_text(a.trace) == trace_text(b.trace));
  CHECK(trace_text(a.trace) != trace_text(c.trace));
  CHECK(a.counts.spawns == b.counts.spawns);
}

TEST_CASE("metric rows on the logging period") {
  const ScenarioConfig cfg = small(1);
  const RunResult r = run_scenario(cfg);
  REQUIRE(r.trace.size() == 80);
  for (std::size_t i = 0; i < r.trace.size(); ++i) CHECK(r.trace[i].t == doctest::Approx(2.5 * (i + 1)));
  CHECK(r.counts.metric_rows == 80);
  CHECK(r.counts.maintenance_rounds == 40);
  CHECK(r.counts.fire_updates == 40);
  CHECK(r.summary.records == 80);
}

TEST_CASE("spawning and landing") {
  ScenarioConfig cfg = small(9);
  cfg.sim_time = 300.0;
  Simulation sim(cfg);
  std::int64_t max_seen = 0;
  while (!sim.finished()) {
    sim.step();
    max_seen = std::max<std::int64_t>(max_seen, static_cast<std::int64_t>(sim.registry().size()));
    for (const auto& [id, a] : sim.registry()) {
      CHECK(a.battery_remaining > 0.0);
      CHECK(sim.config().bounds().contains(a.position, 1e-9));
    }
  }
  const EventCounts& n = sim.counts();
  // Spawn intervals are drawn from [5, 15] s and the first spawn is on the first tick.
  CHECK(n.spawns >= 150 / 15);
  CHECK(n.spawns <= 150 / 5 + 1);
  CHECK(max_seen <= cfg.max_agents);
  // Every agent is back on the ground once its battery is spent.
  CHECK(sim.registry().size() == 0);
  CHECK(n.landings == n.spawns);
}

TEST_CASE("agents come back to the base station before their battery runs out") {
  ScenarioConfig cfg = small(2);
  cfg.battery = 60.0;
  cfg.spawn_duration = 5.0;
  cfg.sim_time = 80.0;
  Simulation sim(cfg);
  double landed_at = -1.0;
  const Vec3 base = sim.config().bounds().center();
  Vec3 last{};
  while (!sim.finished()) {
    if (sim.registry().size() == 1) last = sim.registry().begin()->second.position;
    sim.step();
    if (landed_at < 0 && sim.registry().size() == 0 && sim.counts().spawns == 1) landed_at = sim.now();
  }
  CHECK(landed_at > 0.0);
  CHECK(landed_at <= 60.5);
  CHECK(distance(last, base) < 1e-9);
}

TEST_CASE("no-communication mode forms no clusters and sends nothing") {
  ScenarioConfig cfg = small(5);
  cfg.communication = CommMode::None;
  Simulation sim(cfg);
  sim.run();
  CHECK(sim.counts().polls == 0);
  CHECK(sim.counts().maintenance_rounds == 0);
  for (const TraceRecord& r : sim.trace()) {
    CHECK(r.avg_data_rate == 0.0);
    CHECK(r.avg_links == 0.0);
    if (r.n_agents > 0) CHECK(r.main_cluster_ratio == doctest::Approx(1.0 / r.n_agents));
  }
}

TEST_CASE("fire evolves from its own stream") {
  ScenarioConfig a = small(6);
  ScenarioConfig b = a;
  b.communication = CommMode::None;
  b.motion.mode = MotionMode::ExploreOnly;
  b.protocol.max_cluster_size = 3;
  Simulation sa(a), sb(b);
  sa.run();
  sb.run();
  CHECK(sa.initial_fire() == sb.initial_fire());
  for (int y = 0; y < 40; ++y) {
    for (int x = 0; x < 40; ++x) {
      CHECK(sa.fire().burning(x, y) == sb.fire().burning(x, y));
      CHECK(sa.fire().fuel(x, y) == sb.fire().fuel(x, y));
    }
  }
}

TEST_CASE("clustering rules hold at every maintenance boundary") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    ScenarioConfig cfg = small(seed);
    cfg.protocol.max_cluster_size = 3;
    Simulation sim(cfg);
    int checked = 0;
    sim.on_maintenance = [&](const Simulation& s) {
      ++checked;
      CHECK(check_rules(s.registry(), s.config().protocol).empty());
    };
    CHECK_NOTHROW(sim.run());
    CHECK(checked == 40);
    CHECK(sim.violations().empty());
  }
}

TEST_CASE("strict mode aborts on a broken tree; permissive mode records it") {
  // Before every tick, an agent outside any cluster claims to be its own level-1 head.
  auto run_corrupted = [](Simulation& sim) {
    while (!sim.finished()) {
      for (auto& [id, a] : sim.registry()) {
        if (!a.token && a.level1_head == kNoAgent) {
          a.level1_head = id;
          break;
        }
      }
      sim.step();
    }
  };
  ScenarioConfig cfg = small(1);
  Simulation strict_sim(cfg);
  CHECK_THROWS_AS(run_corrupted(strict_sim), InvariantViolation);

  cfg.strict = false;
  Simulation loose(cfg);
  CHECK_NOTHROW(run_corrupted(loose));
  CHECK_FALSE(loose.violations().empty());
}

TEST_CASE("direct baseline shares observations without clusters") {
  const RunResult r = run_direct_baseline(small(7));
  CHECK(r.config.communication == CommMode::Direct);
  CHECK(r.final_topology.empty());
  CHECK(r.counts.polls == 0);
  CHECK(r.summary.mean_data_rate > 0.0);
  for (const TraceRecord& t : r.trace) CHECK(t.avg_links == 0.0);
}

TEST_CASE("random streams are separated by purpose") {
  Rng a = make_stream(5, Stream::Fire), b = make_stream(5, Stream::Motion), c = make_stream(5, Stream::Fire);
  const auto x = a();
  CHECK(x != b());
  CHECK(x == c());
  CHECK(make_stream(6, Stream::Fire)() != x);
}
