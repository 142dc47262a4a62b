#pragma once

// Belief sharing over the cluster tree: measurement, lower/aggregated beliefs,
// time-gated downstream updates, per-link subtraction caches and the base
// station.

#include <map>
#include <utility>

#include "mlc/belief_grid.hpp"
#include "mlc/cluster_protocol.hpp"
#include "mlc/wildfire.hpp"

namespace mlc {

struct PropagationConfig {
  double data_compression = 2.0;      // c_d
  double time_compression = 2.0;      // c_t
  double observation_period = 1.0;    // t_O, s
  double dissemination_period = 1.0;  // t_Λ, s
  AggregationPolicy policy;
  bool link_caches = true;        // subtract what a link already delivered
  bool base_station_push = true;  // bosses push λ/c_d to the base station

  void validate() const;
  /// Period with which a level-`level` entity sends upstream (level 0: idle agents).
  double upstream_period(int level) const;
  /// Minimum spacing of higher-level updates consumed by a level-`level` head.
  double gate_period(int level) const;
};

/// Data units sent plus received per agent, and per directed link.
class DataMeter {
 public:
  void charge(AgentId sender, AgentId receiver, double amount);
  double agent_total(AgentId id) const;
  double link_total(AgentId sender, AgentId receiver) const;
  const std::map<AgentId, double>& agent_totals() const { return per_agent_; }
  double total() const;
  void reset();

 private:
  std::map<AgentId, double> per_agent_;
  std::map<std::pair<AgentId, AgentId>, double> per_link_;
};

/// Full-resolution observation of the cells in `fov`, stamped with `now`.
BeliefPatch observe_fov(const FireGrid& fire, const CellRect& fov, double now);
/// O_i rebuilt from the field of view, then B_i ← Φ(B_i, O_i).
void measure(AgentState& agent, const FireGrid& fire, const CellRect& fov, double now,
             const AggregationPolicy& policy);

/// λ(id, level) evaluated recursively from the registry: the members' lower
/// beliefs, each compressed once, aggregated. Level 0 is the observation.
BeliefPatch lower_belief(const Registry& reg, AgentId id, int level, double data_compression,
                         const AggregationPolicy& policy, double now);

/// Every agent merges every other agent's observation at full resolution and
/// every observation is charged once per receiving peer.
void direct_exchange(Registry& reg, double now, DataMeter& meter, const AggregationPolicy& policy);

class BeliefPropagator {
 public:
  BeliefPropagator() = default;
  BeliefPropagator(const GridShape& shape, const PropagationConfig& config);

  const PropagationConfig& config() const { return config_; }

  /// One dissemination round at `now`: lower beliefs bottom-up, upstream
  /// sends, gated aggregated beliefs top-down, then level-1 downstream
  /// delivery into the members' total beliefs.
  void disseminate(Registry& reg, double now, DataMeter& meter);

  /// λ and Λ of a head as computed in the last round.
  const BeliefPatch* lower(AgentId head) const;
  const BeliefPatch* aggregated(AgentId head) const;
  /// Full payload delivered to `member` by its level-1 head in the last round.
  const BeliefPatch* delivered(AgentId member) const;
  /// Number of higher-level updates consumed by the current token of `head`.
  int gate_openings(AgentId head) const;

  /// Drops caches of links that no longer exist in the tree.
  void prune(const Registry& reg);
  std::size_t cache_count() const { return caches_.size(); }

  const BeliefGrid& base() const { return base_; }
  void land(const AgentState& agent, double now);
  void spawn(AgentState& agent) const;

 private:
  double send(AgentId from, AgentId to, const BeliefPatch& payload, double now, DataMeter& meter);
  void absorb(AgentId from, AgentId to, const BeliefPatch& payload, double now);
  BeliefGrid& cache(AgentId from, AgentId to);

  GridShape shape_;
  PropagationConfig config_;
  BeliefGrid base_;
  std::map<std::pair<AgentId, AgentId>, BeliefGrid> caches_;
  std::map<AgentId, BeliefPatch> lower_;
  std::map<AgentId, BeliefPatch> aggregated_;
  std::map<AgentId, BeliefPatch> delivered_;
  std::map<AgentId, int> gate_openings_;
};

}  // namespace mlc
