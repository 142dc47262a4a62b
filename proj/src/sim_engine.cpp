#include "mlc/sim_engine.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mlc {

namespace {
constexpr double kTimeEps = 1e-9;
}

Rng make_stream(std::uint64_t seed, Stream s) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(s)};
  return Rng(seq);
}

Simulation::Simulation(ScenarioConfig config) : config_(std::move(config)) {
  config_.validate();
  env_ = config_.bounds();
  end_tick_ = static_cast<std::int64_t>(std::floor(config_.sim_time / config_.dt + kTimeEps));
  poll_ticks_ = config_.ticks(config_.protocol.poll_period, "protocol.poll_period");
  maintenance_ticks_ = config_.ticks(config_.protocol.maintenance_period, "protocol.maintenance_period");
  observe_ticks_ = config_.ticks(config_.propagation.observation_period, "propagation.observation_period");
  disseminate_ticks_ = config_.ticks(config_.propagation.dissemination_period, "propagation.dissemination_period");
  fire_ticks_ = config_.ticks(config_.fire.update_period, "fire.update_period");
  metrics_ticks_ = config_.ticks(config_.metrics_period, "metrics_period");

  fire_rng_ = make_stream(config_.seed, Stream::Fire);
  spawn_rng_ = make_stream(config_.seed, Stream::Spawn);
  motion_rng_ = make_stream(config_.seed, Stream::Motion);
  protocol_rng_ = make_stream(config_.seed, Stream::Protocol);

  fire_ = FireGrid(config_.grid, config_.fire);
  initial_fire_ = fire_.ignite_random(fire_rng_);
  propagator_ = BeliefPropagator(config_.grid, config_.propagation);
  world_ = BeliefGrid(config_.grid);
  next_spawn_ = config_.dt;
}

CellRect Simulation::fov_of(const Vec3& p) const {
  const GridShape& g = config_.grid;
  const int cx = std::clamp(static_cast<int>(std::floor(p.x / g.cell_size)), 0, g.width - 1);
  const int cy = std::clamp(static_cast<int>(std::floor(p.y / g.cell_size)), 0, g.height - 1);
  return clip_square(g, cx, cy, config_.fov_radius);
}

void Simulation::step() {
  ++tick_;
  spawn_agents();
  drain_batteries();
  move_agents();
  if (config_.communication == CommMode::Mlc && due(poll_ticks_)) {
    poll_clustering(registry_, config_.protocol, now());
    ++counts_.polls;
  }
  if (due(observe_ticks_)) observe();
  if (due(disseminate_ticks_)) disseminate();
  if (config_.communication == CommMode::Mlc && due(maintenance_ticks_)) maintain();
  if (due(fire_ticks_)) {
    fire_.step(fire_rng_);
    ++counts_.fire_updates;
  }
  if (due(metrics_ticks_)) log_metrics();
}

void Simulation::run() {
  while (!finished()) step();
}

void Simulation::spawn_agents() {
  const double t = now();
  if (t + kTimeEps < next_spawn_ || t >= config_.spawn_duration) return;
  std::uniform_real_distribution<double> interval(config_.spawn_interval_min, config_.spawn_interval_max);
  next_spawn_ = t + interval(spawn_rng_);
  if (static_cast<int>(registry_.size()) >= config_.max_agents) return;

  AgentState a;
  a.id = next_id_++;
  a.position = env_.center();
  a.battery_remaining = config_.battery;
  a.observation = BeliefPatch(config_.grid);
  if (config_.belief_sharing) {
    if (config_.communication == CommMode::None) {
      a.total_belief = BeliefGrid(config_.grid);
    } else {
      propagator_.spawn(a);
    }
  }
  a.target = random_target(env_, motion_rng_);
  a.fov = fov_of(a.position);
  start_join_phase(a, config_.protocol, t);
  registry_.add(std::move(a));
  ++counts_.spawns;
}

void Simulation::drain_batteries() {
  const double t = now();
  const Vec3 base = env_.center();
  std::vector<AgentId> landing;
  for (auto& [id, a] : registry_) {
    a.battery_remaining = std::max(0.0, a.battery_remaining - config_.dt);
    if (a.returning && distance(a.position, base) < kTimeEps) {
      landing.push_back(id);
    } else if (!a.returning && must_return(a.battery_remaining, a.position, base, config_.motion.speed, config_.dt)) {
      a.returning = true;
    }
    if (a.battery_remaining <= 0.0 && !std::count(landing.begin(), landing.end(), id)) landing.push_back(id);
  }
  for (AgentId id : landing) {
    if (config_.belief_sharing && config_.communication != CommMode::None) propagator_.land(registry_.at(id), t);
    handle_despawn(registry_, id, config_.protocol, t);
    ++counts_.landings;
  }
}

void Simulation::move_agents() {
  const double t = now();
  const double dt = config_.dt;
  const MotionConfig& m = config_.motion;
  const Vec3 base = env_.center();
  const double unobserved_age = std::min(t, config_.sim_time);

  std::vector<Vec3> positions;
  positions.reserve(registry_.size());
  for (const auto& [id, a] : registry_) positions.push_back(a.position);

  std::vector<Vec3> next;
  next.reserve(registry_.size());
  std::size_t k = 0;
  std::vector<Vec3> others;
  for (auto& [id, a] : registry_) {
    const std::size_t self = k++;
    if (a.returning) {
      const Vec3 d = base - a.position;
      const double n = d.norm();
      if (n <= m.speed * dt) {
        a.velocity = n > 0 ? d * (1.0 / dt) : Vec3{};
        next.push_back(base);
      } else {
        a.velocity = d * (m.speed / n);
        next.push_back(a.position + a.velocity * dt);
      }
      continue;
    }
    if (m.mode == MotionMode::RandomTargets) {
      a.velocity = step_random_targets(a.target, a.position, env_, motion_rng_, m.speed, dt);
    } else {
      others.clear();
      for (std::size_t j = 0; j < positions.size(); ++j) {
        if (j != self) others.push_back(positions[j]);
      }
      Vec3 f = force_repel(a.position, others, env_, m.repel_gain);
      if (m.mode == MotionMode::ExploreOnly) {
        f += force_belief(a.position, world_, t, unobserved_age, m.age_gain, 0.0, m.force_stride);
      } else if (a.total_belief.shape().size() > 0) {
        f += force_belief(a.position, a.total_belief, t, unobserved_age, m.age_gain, m.fire_gain, m.force_stride);
      }
      a.velocity = step_velocity(f, a.velocity, m.speed);
    }
    next.push_back(env_.clamp(a.position + a.velocity * dt));
  }
  k = 0;
  for (auto& [id, a] : registry_) {
    a.position = next[k++];
    a.fov = fov_of(a.position);
  }
}

void Simulation::observe() {
  const double t = now();
  const auto& policy = config_.propagation.policy;
  for (auto& [id, a] : registry_) {
    BeliefPatch o = observe_fov(fire_, a.fov, t);
    aggregate_into(world_, o, policy, t);
    if (config_.belief_sharing) {
      aggregate_into(a.total_belief, o, policy, t);
      a.observation = std::move(o);
    }
  }
  if (config_.belief_sharing && config_.communication == CommMode::Direct) {
    direct_exchange(registry_, t, meter_, policy);
  }
  ++counts_.measurements;
}

void Simulation::disseminate() {
  if (config_.communication != CommMode::Mlc || !config_.belief_sharing) return;
  propagator_.disseminate(registry_, now(), meter_);
  propagator_.prune(registry_);
  ++counts_.disseminations;
}

void Simulation::maintain() {
  maintenance_round(registry_, config_.protocol, now());
  ++counts_.maintenance_rounds;
  ++rule_checks_;
  const auto found = check_rules(registry_, config_.protocol);
  if (!found.empty()) {
    std::ostringstream os;
    os << "t=" << now() << ": " << found.size() << " violation(s); first: " << to_string(found.front());
    if (config_.strict) throw InvariantViolation(os.str());
    violations_.push_back(os.str());
  }
  if (on_maintenance) on_maintenance(*this);
}

void Simulation::log_metrics() {
  TraceRecord r;
  r.t = now();
  r.n_agents = static_cast<int>(registry_.size());
  r.main_cluster_ratio = main_cluster_ratio(registry_);
  const LinkStats ls = link_stats(registry_);
  r.avg_links = ls.avg_links;
  r.max_links = ls.max_links;
  r.avg_link_dist = ls.avg_dist;
  r.max_link_dist = ls.max_dist;
  const auto ids = registry_.ids();
  const auto [avg, max] = data_rate(meter_.agent_totals(), ids, config_.metrics_period);
  r.avg_data_rate = avg;
  r.max_data_rate = max;
  std::vector<CellRect> fovs;
  fovs.reserve(registry_.size());
  for (const auto& [id, a] : registry_) fovs.push_back(a.fov);
  r.miss_ratio = miss_ratio(fire_, fovs);
  meter_.reset();
  trace_.push_back(r);
  ++counts_.metric_rows;
}

RunResult run_scenario(const ScenarioConfig& config) {
  Simulation sim(config);
  sim.run();
  RunResult out;
  out.config = sim.config();
  out.trace = sim.trace();
  out.summary = summarize(out.trace);
  out.final_topology = tree_edges(sim.registry());
  out.violations = sim.violations();
  out.counts = sim.counts();
  return out;
}

RunResult run_direct_baseline(ScenarioConfig config) {
  config.communication = CommMode::Direct;
  return run_scenario(config);
}

}  // namespace mlc
