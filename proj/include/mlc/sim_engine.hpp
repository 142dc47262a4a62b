#pragma once

// Tick-driven simulation: spawning, battery, motion, clustering, belief
// exchange, fire and metric logging on a fixed schedule.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mlc/belief_propagation.hpp"
#include "mlc/cluster_protocol.hpp"
#include "mlc/metrics.hpp"
#include "mlc/scenario.hpp"
#include "mlc/wildfire.hpp"

namespace mlc {

/// Independent random streams so toggling one subsystem leaves the others unchanged.
enum class Stream : std::uint64_t { Fire = 1, Spawn = 2, Motion = 3, Protocol = 4 };
Rng make_stream(std::uint64_t seed, Stream s);

struct EventCounts {
  std::int64_t spawns = 0;
  std::int64_t landings = 0;
  std::int64_t polls = 0;
  std::int64_t measurements = 0;
  std::int64_t disseminations = 0;
  std::int64_t maintenance_rounds = 0;
  std::int64_t fire_updates = 0;
  std::int64_t metric_rows = 0;
};

class Simulation {
 public:
  explicit Simulation(ScenarioConfig config);

  /// Advances the clock by one tick and runs every event due at the new time.
  void step();
  /// Steps until the clock reaches sim_time.
  void run();
  bool finished() const { return tick_ >= end_tick_; }

  double now() const { return static_cast<double>(tick_) * config_.dt; }
  std::int64_t tick() const { return tick_; }
  const ScenarioConfig& config() const { return config_; }

  const Registry& registry() const { return registry_; }
  Registry& registry() { return registry_; }
  const FireGrid& fire() const { return fire_; }
  FireGrid& fire() { return fire_; }
  const BeliefPropagator& propagator() const { return propagator_; }
  const BeliefGrid& world_belief() const { return world_; }
  const std::vector<TraceRecord>& trace() const { return trace_; }
  const EventCounts& counts() const { return counts_; }
  std::pair<int, int> initial_fire() const { return initial_fire_; }

  /// Rule violations found at maintenance boundaries (permissive mode only;
  /// strict mode throws InvariantViolation instead).
  const std::vector<std::string>& violations() const { return violations_; }
  std::int64_t rule_checks() const { return rule_checks_; }

  /// Called after every maintenance round and its rule check.
  std::function<void(const Simulation&)> on_maintenance;

  CellRect fov_of(const Vec3& position) const;

 private:
  void spawn_agents();
  void drain_batteries();
  void move_agents();
  void observe();
  void disseminate();
  void maintain();
  void log_metrics();
  bool due(std::int64_t period_ticks) const { return tick_ % period_ticks == 0; }

  ScenarioConfig config_;
  EnvBounds env_;
  std::int64_t tick_ = 0;
  std::int64_t end_tick_ = 0;
  std::int64_t poll_ticks_, maintenance_ticks_, observe_ticks_, disseminate_ticks_, fire_ticks_, metrics_ticks_;

  Rng fire_rng_, spawn_rng_, motion_rng_, protocol_rng_;
  Registry registry_;
  FireGrid fire_;
  BeliefPropagator propagator_;
  BeliefGrid world_;
  DataMeter meter_;
  AgentId next_id_ = 1;
  double next_spawn_ = 0.0;
  std::pair<int, int> initial_fire_{0, 0};

  std::vector<TraceRecord> trace_;
  EventCounts counts_;
  std::vector<std::string> violations_;
  std::int64_t rule_checks_ = 0;
};

struct RunResult {
  ScenarioConfig config;
  std::vector<TraceRecord> trace;
  MissionSummary summary;
  std::vector<TreeEdge> final_topology;
  std::vector<std::string> violations;
  EventCounts counts;
};

RunResult run_scenario(const ScenarioConfig& config);
/// Same lifecycle, motion and fire stream, with every agent sharing its full
/// observation with every other agent and no clustering.
RunResult run_direct_baseline(ScenarioConfig config);

}  // namespace mlc
