#include "mlc/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "mlc/io.hpp"

namespace mlc {

using nlohmann::json;

namespace {

// Reads the keys of one JSON object, rejecting any not consumed.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }
  ~ObjectReader() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError("unknown key '" + (path_.empty() ? k : path_ + "." + k) + "'");
    }
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("bad value for '" + qualified(key) + "': " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }
  std::string qualified(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  std::string where() const { return path_.empty() ? "scenario" : "'" + path_ + "'"; }
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

bool whole(double v) { return std::abs(v - std::round(v)) < 1e-9; }

}  // namespace

AggregationKind parse_aggregation(const std::string& s) {
  if (s == "age") return AggregationKind::AgePriority;
  if (s == "resolution") return AggregationKind::ResolutionPriority;
  if (s == "meta_score") return AggregationKind::MetaScore;
  throw ConfigError("unknown aggregation '" + s + "' (expected age, resolution or meta_score)");
}

std::string to_string(AggregationKind k) {
  switch (k) {
    case AggregationKind::AgePriority: return "age";
    case AggregationKind::ResolutionPriority: return "resolution";
    case AggregationKind::MetaScore: return "meta_score";
  }
  return "?";
}

CommMode parse_comm_mode(const std::string& s) {
  if (s == "mlc") return CommMode::Mlc;
  if (s == "direct") return CommMode::Direct;
  if (s == "none") return CommMode::None;
  throw ConfigError("unknown communication mode '" + s + "' (expected mlc, direct or none)");
}

std::string to_string(CommMode m) {
  switch (m) {
    case CommMode::Mlc: return "mlc";
    case CommMode::Direct: return "direct";
    case CommMode::None: return "none";
  }
  return "?";
}

std::int64_t ScenarioConfig::ticks(double period, const char* what) const {
  const double n = period / dt;
  if (!(n >= 1.0) || !whole(n)) {
    throw ConfigError(std::string(what) + " must be a positive multiple of dt");
  }
  return static_cast<std::int64_t>(std::llround(n));
}

void ScenarioConfig::validate() const {
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (!(sim_time >= 0.0)) throw ConfigError("sim_time must be >= 0");
  if (!(env_width > 0.0 && env_height > 0.0)) throw ConfigError("environment size must be positive");
  if (max_agents < 0) throw ConfigError("max_agents must be >= 0");
  if (!(battery > 0.0)) throw ConfigError("battery must be positive");
  if (!(spawn_interval_min > 0.0 && spawn_interval_max >= spawn_interval_min)) {
    throw ConfigError("spawn interval must satisfy 0 < min <= max");
  }
  if (!(spawn_duration >= 0.0)) throw ConfigError("spawn_duration must be >= 0");
  if (grid.width <= 0 || grid.height <= 0 || !(grid.cell_size > 0.0)) throw ConfigError("grid must be non-empty");
  if (std::abs(grid.width * grid.cell_size - env_width) > 1e-6 ||
      std::abs(grid.height * grid.cell_size - env_height) > 1e-6) {
    throw ConfigError("grid size times cell size must equal the environment size");
  }
  if (fov_radius < 0) throw ConfigError("fov_radius must be >= 0");
  fire.validate();
  protocol.validate();
  propagation.validate();
  motion.validate();
  ticks(metrics_period, "metrics_period");
  ticks(fire.update_period, "fire.update_period");
  ticks(protocol.poll_period, "protocol.poll_period");
  ticks(protocol.maintenance_period, "protocol.maintenance_period");
  ticks(protocol.join_period, "protocol.join_period");
  ticks(protocol.create_period, "protocol.create_period");
  ticks(propagation.observation_period, "propagation.observation_period");
  ticks(propagation.dissemination_period, "propagation.dissemination_period");
}

ScenarioConfig parse_scenario(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed scenario JSON: ") + e.what());
  }
  ScenarioConfig c;
  {
    ObjectReader r(j, "");
    r.get("sim_time", c.sim_time);
    r.get("dt", c.dt);
    r.get("seed", c.seed);
    r.get("env_width", c.env_width);
    r.get("env_height", c.env_height);
    r.get("max_agents", c.max_agents);
    r.get("battery", c.battery);
    r.get("spawn_interval_min", c.spawn_interval_min);
    r.get("spawn_interval_max", c.spawn_interval_max);
    r.get("spawn_duration", c.spawn_duration);
    r.get("fov_radius", c.fov_radius);
    r.get("metrics_period", c.metrics_period);
    r.get("belief_sharing", c.belief_sharing);
    r.get("strict", c.strict);
    std::string comm = to_string(c.communication);
    r.get("communication", comm);
    c.communication = parse_comm_mode(comm);

    if (const json* g = r.child("grid")) {
      ObjectReader gr(*g, "grid");
      gr.get("width", c.grid.width);
      gr.get("height", c.grid.height);
      gr.get("cell_size", c.grid.cell_size);
    }
    if (const json* f = r.child("fire")) {
      ObjectReader fr(*f, "fire");
      fr.get("burning_rate", c.fire.burning_rate);
      fr.get("spreading_factor", c.fire.spreading_factor);
      fr.get("spontaneous_p", c.fire.spontaneous_p);
      fr.get("update_period", c.fire.update_period);
      fr.get("neighborhood_radius", c.fire.neighborhood_radius);
      fr.get("spread_distance_unit", c.fire.spread_distance_unit);
    }
    if (const json* p = r.child("protocol")) {
      ObjectReader pr(*p, "protocol");
      pr.get("max_cluster_size", c.protocol.max_cluster_size);
      pr.get("maintenance_period", c.protocol.maintenance_period);
      pr.get("max_escalation", c.protocol.max_escalation);
      pr.get("assimilation_threshold", c.protocol.assimilation_threshold);
      pr.get("level1_threshold", c.protocol.level1_threshold);
      pr.get("join_period", c.protocol.join_period);
      pr.get("create_period", c.protocol.create_period);
      pr.get("poll_period", c.protocol.poll_period);
      // JSON has no infinity; null means unlimited.
      if (const json* d = pr.child("discovery_range")) {
        if (d->is_null()) {
          c.protocol.discovery_range = std::numeric_limits<double>::infinity();
        } else if (d->is_number()) {
          c.protocol.discovery_range = d->get<double>();
        } else {
          throw ConfigError("protocol.discovery_range must be a number or null");
        }
      }
    }
    if (const json* p = r.child("propagation")) {
      ObjectReader pr(*p, "propagation");
      pr.get("data_compression", c.propagation.data_compression);
      pr.get("time_compression", c.propagation.time_compression);
      pr.get("observation_period", c.propagation.observation_period);
      pr.get("dissemination_period", c.propagation.dissemination_period);
      pr.get("link_caches", c.propagation.link_caches);
      pr.get("base_station_push", c.propagation.base_station_push);
      std::string agg = to_string(c.propagation.policy.kind);
      pr.get("aggregation", agg);
      c.propagation.policy.kind = parse_aggregation(agg);
      pr.get("score_weight", c.propagation.policy.score_weight);
    }
    if (const json* m = r.child("motion")) {
      ObjectReader mr(*m, "motion");
      mr.get("speed", c.motion.speed);
      mr.get("repel_gain", c.motion.repel_gain);
      mr.get("age_gain", c.motion.age_gain);
      mr.get("fire_gain", c.motion.fire_gain);
      mr.get("force_stride", c.motion.force_stride);
      std::string mode = to_string(c.motion.mode);
      mr.get("mode", mode);
      c.motion.mode = parse_motion_mode(mode);
    }
  }
  c.validate();
  return c;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

std::string scenario_to_json(const ScenarioConfig& c) {
  json j;
  j["sim_time"] = c.sim_time;
  j["dt"] = c.dt;
  j["seed"] = c.seed;
  j["env_width"] = c.env_width;
  j["env_height"] = c.env_height;
  j["max_agents"] = c.max_agents;
  j["battery"] = c.battery;
  j["spawn_interval_min"] = c.spawn_interval_min;
  j["spawn_interval_max"] = c.spawn_interval_max;
  j["spawn_duration"] = c.spawn_duration;
  j["fov_radius"] = c.fov_radius;
  j["metrics_period"] = c.metrics_period;
  j["communication"] = to_string(c.communication);
  j["belief_sharing"] = c.belief_sharing;
  j["strict"] = c.strict;
  j["grid"] = {{"width", c.grid.width}, {"height", c.grid.height}, {"cell_size", c.grid.cell_size}};
  j["fire"] = {{"burning_rate", c.fire.burning_rate},
               {"spreading_factor", c.fire.spreading_factor},
               {"spontaneous_p", c.fire.spontaneous_p},
               {"update_period", c.fire.update_period},
               {"neighborhood_radius", c.fire.neighborhood_radius},
               {"spread_distance_unit", c.fire.spread_distance_unit}};
  j["protocol"] = {{"max_cluster_size", c.protocol.max_cluster_size},
                   {"maintenance_period", c.protocol.maintenance_period},
                   {"max_escalation", c.protocol.max_escalation},
                   {"assimilation_threshold", c.protocol.assimilation_threshold},
                   {"level1_threshold", c.protocol.level1_threshold},
                   {"join_period", c.protocol.join_period},
                   {"create_period", c.protocol.create_period},
                   {"poll_period", c.protocol.poll_period}};
  if (std::isfinite(c.protocol.discovery_range)) {
    j["protocol"]["discovery_range"] = c.protocol.discovery_range;
  } else {
    j["protocol"]["discovery_range"] = nullptr;
  }
  j["propagation"] = {{"data_compression", c.propagation.data_compression},
                      {"time_compression", c.propagation.time_compression},
                      {"observation_period", c.propagation.observation_period},
                      {"dissemination_period", c.propagation.dissemination_period},
                      {"link_caches", c.propagation.link_caches},
                      {"base_station_push", c.propagation.base_station_push},
                      {"aggregation", to_string(c.propagation.policy.kind)},
                      {"score_weight", c.propagation.policy.score_weight}};
  j["motion"] = {{"speed", c.motion.speed},
                 {"repel_gain", c.motion.repel_gain},
                 {"age_gain", c.motion.age_gain},
                 {"fire_gain", c.motion.fire_gain},
                 {"force_stride", c.motion.force_stride},
                 {"mode", to_string(c.motion.mode)}};
  return j.dump(2);
}

}  // namespace mlc
