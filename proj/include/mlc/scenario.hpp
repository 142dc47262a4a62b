#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "mlc/belief_propagation.hpp"
#include "mlc/cluster_protocol.hpp"
#include "mlc/motion.hpp"
#include "mlc/wildfire.hpp"

namespace mlc {

enum class CommMode { Mlc, Direct, None };

CommMode parse_comm_mode(const std::string& s);
AggregationKind parse_aggregation(const std::string& s);
std::string to_string(AggregationKind k);
std::string to_string(CommMode m);

struct ScenarioConfig {
  double sim_time = 2000.0;  // s
  double dt = 0.5;           // s
  std::uint64_t seed = 0;
  double env_width = 5000.0;   // m
  double env_height = 5000.0;  // m
  int max_agents = 50;
  double battery = 500.0;             // s
  double spawn_interval_min = 5.0;    // s
  double spawn_interval_max = 15.0;   // s
  double spawn_duration = 1500.0;     // s
  GridShape grid{200, 200, 25.0};
  int fov_radius = 5;  // cells around the agent's cell
  double metrics_period = 2.5;  // s
  CommMode communication = CommMode::Mlc;
  // Skips observation and belief exchange entirely; for clustering-only runs.
  bool belief_sharing = true;
  bool strict = true;

  FireParams fire;
  ProtocolConfig protocol;
  PropagationConfig propagation;
  MotionConfig motion;

  void validate() const;
  EnvBounds bounds() const { return {env_width, env_height}; }
  /// Number of ticks per `period`; throws ConfigError unless it is a whole number.
  std::int64_t ticks(double period, const char* what) const;
};

/// Parses a JSON scenario. Keys mirror the field names (snake_case, nested
/// objects for fire, protocol, propagation, motion and grid); unknown keys
/// are rejected. Missing keys keep their defaults.
ScenarioConfig parse_scenario(std::string_view json_text);
ScenarioConfig load_scenario(const std::string& path);
std::string scenario_to_json(const ScenarioConfig& cfg);

}  // namespace mlc
