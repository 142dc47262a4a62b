// Acceptance runner: one PASS/FAIL line per criterion at desk scale.
// Usage: mlc_acceptance [criterion ...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "generators.hpp"
#include "mlc/belief_propagation.hpp"
#include "mlc/fixtures.hpp"
#include "mlc/io.hpp"
#include "mlc/sim_engine.hpp"
#include "mlc/wildfire.hpp"
#include "oracles.hpp"

using namespace mlc;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------------------
// Desk-scale scenarios and a run cache shared between criteria.

constexpr int kDeskAgents = 20;
constexpr double kDeskTime = 600.0;

ScenarioConfig desk(std::uint64_t seed, MotionMode motion) {
  ScenarioConfig c;
  c.seed = seed;
  c.max_agents = kDeskAgents;
  c.sim_time = kDeskTime;
  c.spawn_duration = kDeskTime;
  c.motion.mode = motion;
  c.strict = false;
  return c;
}

ScenarioConfig with_compression(ScenarioConfig c, double cd, double ct) {
  c.propagation.data_compression = cd;
  c.propagation.time_compression = ct;
  return c;
}

std::map<std::string, MissionSummary> g_summaries;

const MissionSummary& summary_of(const ScenarioConfig& cfg, bool baseline = false) {
  const std::string key = (baseline ? "B" : "S") + scenario_to_json(cfg);
  auto it = g_summaries.find(key);
  if (it == g_summaries.end()) {
    const RunResult r = baseline ? run_direct_baseline(cfg) : run_scenario(cfg);
    it = g_summaries.emplace(key, r.summary).first;
  }
  return it->second;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? NAN : s / static_cast<double>(v.size());
}

double stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

constexpr std::uint64_t kPairedSeeds = 10;

// Normalized miss ratio of `cfg` against the paired direct baseline, per seed.
std::vector<double> normalized_misses(const std::function<ScenarioConfig(std::uint64_t)>& make) {
  std::vector<double> out;
  for (std::uint64_t seed = 1; seed <= kPairedSeeds; ++seed) {
    const ScenarioConfig cfg = make(seed);
    const double base = summary_of(desk(seed, MotionMode::FireTracking), true).mission_miss_ratio;
    out.push_back(normalized_miss(summary_of(cfg).mission_miss_ratio, base));
  }
  return out;
}

double mean_rate(double cd, double ct) {
  std::vector<double> v;
  for (std::uint64_t seed = 1; seed <= kPairedSeeds; ++seed) {
    v.push_back(summary_of(with_compression(desk(seed, MotionMode::FireTracking), cd, ct)).mean_data_rate);
  }
  return mean(v);
}

// ---------------------------------------------------------------------------

Outcome golden_expansion() {
  std::string detail;
  bool ok = true;
  for (double cd : {2.0, 3.0}) {
    Registry reg = six_agent_registry();
    PropagationConfig p;
    p.data_compression = cd;
    BeliefPropagator prop(kFixtureShape, p);
    DataMeter meter;
    prop.disseminate(reg, kFixtureTime, meter);
    const BeliefPatch* update = prop.delivered(1);
    const bool same = update && aggregate(reg.at(1).observation, *update, AggregationPolicy::age(), kFixtureTime)
                                        .to_grid() == testing::hand_expansion(cd);
    ok = ok && same;
    detail += fmt("c_d=%g %s; ", cd, same ? "bit-exact" : "MISMATCH");
  }
  return {ok, detail + "agent 1 update vs hand expansion"};
}

Outcome algebra_properties() {
  constexpr int kTrials = 10000;
  testing::GridGen gen(20240601);
  int fail_cancel = 0, fail_idem = 0, fail_sub = 0, fail_amount = 0;
  constexpr double kNow = 10.0;
  for (int t = 0; t < kTrials; ++t) {
    const auto policy = gen.policy();
    const BeliefGrid a = gen.grid(8, 8);
    const BeliefGrid b = gen.grid(8, 8);
    const double c = gen.factor();
    const BeliefGrid ac = compress(a, c);
    if (!(aggregate(a, ac, policy, kNow) == a)) ++fail_cancel;
    if (!(aggregate(a, a, policy, kNow) == a)) ++fail_idem;
    if (!(aggregate(b, subtract(a, b, policy, kNow), policy, kNow) == aggregate(b, a, policy, kNow))) ++fail_sub;
    const double want = data_amount(a) / c;
    if (std::abs(data_amount(ac) - want) > 1e-9 * std::max(1.0, want)) ++fail_amount;
  }
  const int total = fail_cancel + fail_idem + fail_sub + fail_amount;
  return {total == 0, fmt("%d grids per property; failures: cancellation %d, idempotence %d, subtraction %d, "
                          "data amount %d",
                          kTrials, fail_cancel, fail_idem, fail_sub, fail_amount)};
}

Outcome clustering_rules() {
  std::size_t runs = 0, boundaries = 0, violations = 0, bound_breaks = 0;
  double worst_links = 0.0;
  for (MotionMode m : {MotionMode::RandomTargets, MotionMode::ExploreOnly, MotionMode::FireTracking}) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const ScenarioConfig cfg = desk(seed, m);
      // Permissive mode: the engine runs check_rules after every maintenance
      // round and records each failing boundary.
      Simulation sim(cfg);
      sim.run();
      ++runs;
      boundaries += static_cast<std::size_t>(sim.rule_checks());
      violations += sim.violations().size();
      const double bound = cfg.protocol.max_cluster_size + 2;
      for (const TraceRecord& r : sim.trace()) {
        worst_links = std::max(worst_links, r.max_links);
        if (r.max_links > bound) ++bound_breaks;
      }
      g_summaries.emplace("S" + scenario_to_json(cfg), summarize(sim.trace()));
    }
  }
  return {violations == 0 && bound_breaks == 0,
          fmt("%zu runs, %zu maintenance boundaries checked, %zu with violations; max links %g (bound %d), %zu rows over",
              runs, boundaries, violations, worst_links, ScenarioConfig{}.protocol.max_cluster_size + 2,
              bound_breaks)};
}

Outcome formation_stability() {
  std::map<int, std::vector<double>> ratios;
  for (int k : {3, 4, 8}) {
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
      ScenarioConfig cfg = desk(seed, MotionMode::RandomTargets);
      cfg.belief_sharing = false;
      cfg.protocol.max_cluster_size = k;
      ratios[k].push_back(summary_of(cfg).mean_main_cluster_ratio);
    }
  }
  const double m3 = mean(ratios[3]), m4 = mean(ratios[4]), m8 = mean(ratios[8]);
  const bool big = m4 >= 0.90 && m8 >= 0.90;
  const bool small = m3 <= 0.70;
  return {big && small, fmt("mean main cluster ratio K=4 %.3f, K=8 %.3f (>= 0.90: %s); K=3 %.3f +- %.3f "
                            "(<= 0.70: %s)",
                            m4, m8, big ? "yes" : "no", m3, stddev(ratios[3]), small ? "yes" : "no")};
}

Outcome data_rate_compression() {
  std::vector<double> direct;
  for (std::uint64_t seed = 1; seed <= kPairedSeeds; ++seed) {
    direct.push_back(summary_of(desk(seed, MotionMode::FireTracking), true).mean_data_rate);
  }
  const double ratio = mean_rate(2, 2) / mean(direct);
  const double cd1 = mean_rate(1, 2), cd2 = mean_rate(2, 2), cd4 = mean_rate(4, 2);
  const double ct1 = mean_rate(2, 1), ct2 = cd2, ct4 = mean_rate(2, 4);
  const bool mono_cd = cd1 >= cd2 && cd2 >= cd4;
  const bool mono_ct = ct1 >= ct2 && ct2 >= ct4;
  return {ratio <= 0.30 && mono_cd && mono_ct,
          fmt("rate ratio vs direct %.4f (<= 0.30); c_d 1/2/4: %.1f/%.1f/%.1f %s; c_t 1/2/4: %.1f/%.1f/%.1f %s", ratio,
              cd1, cd2, cd4, mono_cd ? "non-increasing" : "NOT monotone", ct1, ct2, ct4,
              mono_ct ? "non-increasing" : "NOT monotone")};
}

Outcome tracking_robustness() {
  auto mlc_at = [](double cd, double ct) {
    return [=](std::uint64_t seed) { return with_compression(desk(seed, MotionMode::FireTracking), cd, ct); };
  };
  const double d1 = mean(normalized_misses(mlc_at(1, 1)));
  const double d4 = mean(normalized_misses(mlc_at(4, 1)));
  const double t1 = mean(normalized_misses(mlc_at(2, 1)));
  const double t4 = mean(normalized_misses(mlc_at(2, 4)));
  const bool data_ok = std::abs(d4 - d1) <= 0.15;
  const bool time_ok = t4 >= t1;
  return {data_ok && time_ok, fmt("c_t=1: m(c_d=4) %.3f vs m(c_d=1) %.3f, |diff| %.3f (<= 0.15); c_d=2: m(c_t=4) "
                                  "%.3f vs m(c_t=1) %.3f (>=: %s)",
                                  d4, d1, std::abs(d4 - d1), t4, t1, time_ok ? "yes" : "no")};
}

Outcome no_communication_ordering() {
  const double with = mean(normalized_misses(
      [](std::uint64_t seed) { return with_compression(desk(seed, MotionMode::FireTracking), 2, 2); }));
  const double without = mean(normalized_misses([](std::uint64_t seed) {
    ScenarioConfig c = desk(seed, MotionMode::FireTracking);
    c.communication = CommMode::None;
    return c;
  }));
  return {with <= without, fmt("mean normalized miss: MLC c_d=c_t=2 %.3f, no communication %.3f", with, without)};
}

Outcome fire_oracle() {
  FireParams p;
  p.spontaneous_p = 0.01;
  p.spreading_factor = 0.05;
  const double expected = testing::single_neighbour_ignition(p.spontaneous_p, p.spreading_factor);
  constexpr int kTrials = 100000;
  Rng rng(99);
  int hits = 0;
  for (int t = 0; t < kTrials; ++t) {
    FireGrid g(GridShape{2, 1, 25.0}, p);
    g.set_burning(0, 0, true);
    g.step(rng);
    hits += g.burning(1, 0) ? 1 : 0;
  }
  const double sigma = std::sqrt(kTrials * expected * (1 - expected));
  const double z = (hits - kTrials * expected) / sigma;

  FireParams quiet;
  quiet.spontaneous_p = 0.0;
  quiet.spreading_factor = 0.0;
  quiet.burning_rate = 0.02;
  FireGrid lone(GridShape{1, 1, 25.0}, quiet);
  lone.set_burning(0, 0, true);
  int out_at = 0;
  for (int u = 1; u <= 100 && out_at == 0; ++u) {
    lone.step(rng);
    if (!lone.burning(0, 0)) out_at = u;
  }
  return {std::abs(z) <= 3.0 && out_at == 50,
          fmt("ignition %d/%d vs p=%.5f (z=%.2f, |z|<=3); isolated cell out at update %d (want 50)", hits, kTrials,
              expected, z, out_at)};
}

Outcome determinism() {
  constexpr int kSeeds = 4;
  auto trace_of = [](std::uint64_t seed) {
    std::ostringstream out;
    write_trace_csv(out, run_scenario(desk(seed, MotionMode::RandomTargets)).trace);
    return out.str();
  };
  std::vector<std::string> first(kSeeds), second(kSeeds), threaded(kSeeds);
  for (int i = 0; i < kSeeds; ++i) first[i] = trace_of(i + 1);
  for (int i = 0; i < kSeeds; ++i) second[i] = trace_of(i + 1);
  std::vector<std::thread> pool;
  for (int i = 0; i < kSeeds; ++i) pool.emplace_back([&, i] { threaded[i] = trace_of(i + 1); });
  for (auto& t : pool) t.join();
  int same_runs = 0, same_threads = 0;
  for (int i = 0; i < kSeeds; ++i) {
    same_runs += first[i] == second[i];
    same_threads += first[i] == threaded[i];
  }
  const bool distinct = first[0] != first[1];
  return {same_runs == kSeeds && same_threads == kSeeds && distinct,
          fmt("%d/%d traces identical across runs, %d/%d across 1 vs 4 threads; different seeds differ: %s", same_runs,
              kSeeds, same_threads, kSeeds, distinct ? "yes" : "no")};
}

Outcome gate_frequency() {
  Registry reg = six_agent_registry();
  PropagationConfig p;
  p.time_compression = 2.0;
  BeliefPropagator prop(kFixtureShape, p);
  DataMeter meter;
  constexpr int kRounds = 100;
  for (int k = 1; k <= kRounds; ++k) prop.disseminate(reg, k * p.dissemination_period, meter);
  const int want = kRounds / 4;
  bool ok = true;
  std::string detail;
  for (AgentId head : {AgentId{3}, AgentId{5}}) {
    const int got = prop.gate_openings(head);
    ok = ok && std::abs(got - want) <= 1;
    detail += fmt("head %u consumed %d; ", head, got);
  }
  return {ok, detail + fmt("expected %d +- 1 over %d periods", want, kRounds)};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "golden expansion", 1, golden_expansion},
    {2, "belief algebra properties", 10, algebra_properties},
    {3, "clustering rules invariant", 120, clustering_rules},
    {4, "formation stability", 300, formation_stability},
    {5, "data-rate compression", 600, data_rate_compression},
    {6, "tracking robustness to compression", 900, tracking_robustness},
    {7, "no-communication ordering", 600, no_communication_ordering},
    {8, "fire-model oracle", 5, fire_oracle},
    {9, "determinism", 60, determinism},
    {10, "gate frequency", 1, gate_frequency},
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (const Criterion& c : kCriteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("%s criterion %2d %-36s %s [%.1f s, budget %g s%s]\n", pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs, c.budget_s, in_time ? "" : ", OVER");
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
