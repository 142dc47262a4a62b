#include "cli.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "mlc/fixtures.hpp"
#include "mlc/io.hpp"
#include "mlc/sim_engine.hpp"

namespace mlc::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config_path;
  std::string seed;
  std::string seeds;
  std::string out = ".";
  std::string max_cluster_size;
  std::string cd;
  std::string ct;
  std::string motion;
  std::string comm;
  std::optional<double> duration;
  std::optional<int> agents;
  bool strict = false;
  bool paired = false;
  bool fire_csv = false;
  int topology_every = 0;
  int threads = 0;
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T single(const std::vector<T>& values, const char* flag) {
  if (values.size() != 1) throw ConfigError(std::string(flag) + " takes a single value for this subcommand");
  return values.front();
}

ScenarioConfig base_config(const Options& o) {
  ScenarioConfig cfg = o.config_path.empty() ? ScenarioConfig{} : load_scenario(o.config_path);
  if (o.duration) {
    cfg.sim_time = *o.duration;
    cfg.spawn_duration = std::min(cfg.spawn_duration, *o.duration);
  }
  if (o.agents) cfg.max_agents = *o.agents;
  if (!o.comm.empty()) cfg.communication = parse_comm_mode(o.comm);
  return cfg;
}

std::vector<unsigned long long> seeds_of(const Options& o) {
  if (!o.seeds.empty()) return parse_seed_list(o.seeds);
  if (!o.seed.empty()) return parse_seed_list(o.seed);
  return {0};
}

std::vector<int> ints_of(const std::string& s, int fallback) {
  if (s.empty()) return {fallback};
  std::vector<int> out;
  for (double v : parse_number_list(s)) {
    if (v != std::floor(v)) throw ConfigError("expected an integer, got " + std::to_string(v));
    out.push_back(static_cast<int>(v));
  }
  return out;
}

std::vector<double> doubles_of(const std::string& s, double fallback) {
  return s.empty() ? std::vector<double>{fallback} : parse_number_list(s);
}

std::vector<MotionMode> motions_of(const std::string& s, MotionMode fallback) {
  if (s.empty()) return {fallback};
  std::vector<MotionMode> out;
  for (const auto& m : split(s, ',')) out.push_back(parse_motion_mode(m));
  return out;
}

std::string tagged(const std::string& stem, bool baseline, unsigned long long seed, const char* ext) {
  return stem + (baseline ? "_baseline_" : "_") + std::to_string(seed) + ext;
}

struct BaselineRef {
  double miss;
  double rate;
};

std::optional<BaselineRef> find_baseline(const fs::path& dir, unsigned long long seed) {
  const fs::path p = dir / tagged("summary", true, seed, ".json");
  if (!fs::exists(p)) return std::nullopt;
  auto j = nlohmann::json::parse(read_text_file(p.string()));
  auto num = [&](const char* k) { return j[k].is_number() ? j[k].get<double>() : NAN; };
  return BaselineRef{num("mission_miss_ratio"), num("mean_data_rate")};
}

void run_one(const ScenarioConfig& cfg, const fs::path& dir, bool baseline, const Options& o) {
  fs::create_directories(dir);
  Simulation sim(cfg);
  std::ofstream topo((dir / tagged("topology", baseline, cfg.seed, ".csv")).string());
  if (!topo) throw IoError("cannot write topology CSV in " + dir.string());
  write_topology_header(topo);
  while (!sim.finished()) {
    sim.step();
    if (o.topology_every > 0 && sim.tick() % o.topology_every == 0) {
      write_topology(topo, sim.tick(), tree_edges(sim.registry()));
    }
  }
  if (o.topology_every <= 0 || sim.tick() % o.topology_every != 0) {
    write_topology(topo, sim.tick(), tree_edges(sim.registry()));
  }
  save_trace_csv((dir / tagged("trace", baseline, cfg.seed, ".csv")).string(), sim.trace());
  if (o.fire_csv) {
    std::ofstream fire((dir / tagged("fire", baseline, cfg.seed, ".csv")).string());
    write_fire_header(fire);
    write_fire(fire, sim.tick(), sim.fire());
  }
  const MissionSummary s = summarize(sim.trace());
  std::optional<double> bm, br;
  if (!baseline) {
    if (auto ref = find_baseline(dir, cfg.seed)) {
      bm = ref->miss;
      br = ref->rate;
    }
  }
  write_text_file((dir / tagged("summary", baseline, cfg.seed, ".json")).string(),
                  summary_json(cfg, s, sim.violations().size(), bm, br, baseline));
  std::cout << (baseline ? "baseline" : "run") << " seed " << cfg.seed << ": miss " << format_number(s.mission_miss_ratio)
            << ", cluster ratio " << format_number(s.mean_main_cluster_ratio) << ", data rate "
            << format_number(s.mean_data_rate) << "\n";
}

int cmd_run(const Options& o, bool baseline) {
  ScenarioConfig cfg = base_config(o);
  cfg.protocol.max_cluster_size = single(ints_of(o.max_cluster_size, cfg.protocol.max_cluster_size), "--max-cluster-size");
  cfg.propagation.data_compression = single(doubles_of(o.cd, cfg.propagation.data_compression), "--cd");
  cfg.propagation.time_compression = single(doubles_of(o.ct, cfg.propagation.time_compression), "--ct");
  cfg.motion.mode = single(motions_of(o.motion, cfg.motion.mode), "--motion");
  if (o.strict) cfg.strict = true;
  if (baseline) cfg.communication = CommMode::Direct;
  for (auto seed : seeds_of(o)) {
    cfg.seed = seed;
    cfg.validate();
    run_one(cfg, o.out, baseline, o);
  }
  return kOk;
}

struct Combo {
  int max_cluster_size;
  double cd;
  double ct;
  MotionMode motion;
};

struct RunOutcome {
  Combo combo;
  unsigned long long seed = 0;
  std::optional<MissionSummary> summary;
  std::optional<MissionSummary> baseline;
  std::string error;
};

int thread_count(const Options& o) {
  if (o.threads > 0) return o.threads;
  if (const char* env = std::getenv("MLC_SIM_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

template <typename Job>
void parallel_for(std::size_t n, int threads, Job job) {
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) job(i);
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < std::min<int>(threads, static_cast<int>(n)); ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
  std::vector<double> f;
  for (double x : v) {
    if (!std::isnan(x)) f.push_back(x);
  }
  if (f.empty()) return {NAN, NAN};
  double m = 0.0;
  for (double x : f) m += x;
  m /= static_cast<double>(f.size());
  double var = 0.0;
  for (double x : f) var += (x - m) * (x - m);
  return {m, f.size() > 1 ? std::sqrt(var / static_cast<double>(f.size() - 1)) : 0.0};
}

int cmd_batch(const Options& o) {
  const ScenarioConfig base = base_config(o);
  const auto seeds = seeds_of(o);
  std::vector<Combo> combos;
  for (int k : ints_of(o.max_cluster_size, base.protocol.max_cluster_size)) {
    for (double cd : doubles_of(o.cd, base.propagation.data_compression)) {
      for (double ct : doubles_of(o.ct, base.propagation.time_compression)) {
        for (MotionMode m : motions_of(o.motion, base.motion.mode)) combos.push_back({k, cd, ct, m});
      }
    }
  }
  auto config_for = [&](const Combo& c, unsigned long long seed) {
    ScenarioConfig cfg = base;
    cfg.seed = seed;
    cfg.strict = o.strict;
    cfg.protocol.max_cluster_size = c.max_cluster_size;
    cfg.propagation.data_compression = c.cd;
    cfg.propagation.time_compression = c.ct;
    cfg.motion.mode = c.motion;
    cfg.validate();
    return cfg;
  };
  for (const Combo& c : combos) config_for(c, seeds.front());

  // Baselines only depend on seed and motion.
  std::map<std::pair<unsigned long long, MotionMode>, std::optional<MissionSummary>> baselines;
  if (o.paired) {
    for (auto s : seeds) {
      for (const Combo& c : combos) baselines[{s, c.motion}];
    }
  }
  std::vector<std::pair<unsigned long long, MotionMode>> baseline_keys;
  for (const auto& [k, v] : baselines) baseline_keys.push_back(k);

  const int threads = thread_count(o);
  std::vector<std::optional<MissionSummary>> baseline_results(baseline_keys.size());
  parallel_for(baseline_keys.size(), threads, [&](std::size_t i) {
    Combo c{base.protocol.max_cluster_size, base.propagation.data_compression, base.propagation.time_compression,
            baseline_keys[i].second};
    try {
      baseline_results[i] = run_direct_baseline(config_for(c, baseline_keys[i].first)).summary;
    } catch (const std::exception&) {
    }
  });
  for (std::size_t i = 0; i < baseline_keys.size(); ++i) baselines[baseline_keys[i]] = baseline_results[i];

  std::vector<RunOutcome> outcomes;
  for (const Combo& c : combos) {
    for (auto s : seeds) outcomes.push_back({c, s, std::nullopt, std::nullopt, {}});
  }
  parallel_for(outcomes.size(), threads, [&](std::size_t i) {
    RunOutcome& r = outcomes[i];
    try {
      r.summary = run_scenario(config_for(r.combo, r.seed)).summary;
    } catch (const std::exception& e) {
      r.error = e.what();
    }
    if (o.paired) r.baseline = baselines[{r.seed, r.combo.motion}];
  });

  fs::create_directories(o.out);
  std::ofstream runs((fs::path(o.out) / "runs.csv").string());
  std::ofstream agg((fs::path(o.out) / "aggregate.csv").string());
  if (!runs || !agg) throw IoError("cannot write batch results in " + o.out);

  const char* metric_names[] = {"main_cluster_ratio", "links", "link_dist", "data_rate", "miss_ratio",
                                "normalized_miss", "data_rate_ratio"};
  auto metrics_of = [](const RunOutcome& r) -> std::array<double, 7> {
    if (!r.summary) return {NAN, NAN, NAN, NAN, NAN, NAN, NAN};
    const MissionSummary& s = *r.summary;
    double nm = NAN, rr = NAN;
    if (r.baseline) {
      nm = normalized_miss(s.mission_miss_ratio, r.baseline->mission_miss_ratio);
      rr = r.baseline->mean_data_rate > 0 ? s.mean_data_rate / r.baseline->mean_data_rate : NAN;
    }
    return {s.mean_main_cluster_ratio, s.mean_links, s.mean_link_dist, s.mean_data_rate, s.mission_miss_ratio, nm, rr};
  };

  runs << "max_cluster_size,data_compression,time_compression,motion,seed";
  for (const char* n : metric_names) runs << ',' << n;
  runs << ",error\n";
  for (const RunOutcome& r : outcomes) {
    runs << r.combo.max_cluster_size << ',' << format_number(r.combo.cd) << ',' << format_number(r.combo.ct) << ','
         << to_string(r.combo.motion) << ',' << r.seed;
    for (double v : metrics_of(r)) runs << ',' << format_number(v);
    runs << ',' << '"' << r.error << '"' << '\n';
  }

  agg << "max_cluster_size,data_compression,time_compression,motion,runs,failures";
  for (const char* n : metric_names) agg << ",mean_" << n << ",std_" << n;
  agg << '\n';
  int failures_total = 0;
  for (std::size_t c = 0; c < combos.size(); ++c) {
    std::array<std::vector<double>, 7> cols;
    int failures = 0;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      const RunOutcome& r = outcomes[c * seeds.size() + s];
      if (!r.error.empty()) ++failures;
      const auto m = metrics_of(r);
      for (std::size_t k = 0; k < m.size(); ++k) cols[k].push_back(m[k]);
    }
    failures_total += failures;
    const Combo& cb = combos[c];
    agg << cb.max_cluster_size << ',' << format_number(cb.cd) << ',' << format_number(cb.ct) << ','
        << to_string(cb.motion) << ',' << seeds.size() << ',' << failures;
    for (const auto& col : cols) {
      const auto [m, sd] = mean_std(col);
      agg << ',' << format_number(m) << ',' << format_number(sd);
    }
    agg << '\n';
  }
  std::cout << "batch: " << outcomes.size() << " runs, " << failures_total << " failed, " << combos.size()
            << " rows -> " << (fs::path(o.out) / "aggregate.csv").string() << "\n";
  return kOk;
}

int cmd_fixtures(const Options& o) {
  write_golden_fixtures(o.out);
  std::cout << "fixtures written to " << o.out << "\n";
  return kOk;
}

}  // namespace

std::vector<unsigned long long> parse_seed_list(const std::string& s) {
  std::vector<unsigned long long> out;
  for (const auto& part : split(s, ',')) {
    const auto dots = part.find("..");
    try {
      if (dots == std::string::npos) {
        out.push_back(std::stoull(part));
      } else {
        const auto lo = std::stoull(part.substr(0, dots));
        const auto hi = std::stoull(part.substr(dots + 2));
        if (hi < lo) throw ConfigError("empty seed range '" + part + "'");
        for (auto v = lo; v <= hi; ++v) out.push_back(v);
      }
    } catch (const std::logic_error&) {
      throw ConfigError("bad seed list '" + s + "'");
    }
  }
  if (out.empty()) throw ConfigError("empty seed list");
  return out;
}

std::vector<double> parse_number_list(const std::string& s) {
  std::vector<double> out;
  for (const auto& part : split(s, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(part, &used);
    } catch (const std::logic_error&) {
      used = 0;
    }
    if (used != part.size() || used == 0) throw ConfigError("bad number '" + part + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("empty value list");
  return out;
}

int run(int argc, const char* const* argv) {
  CLI::App app{"Multi-level clustering wildfire monitoring simulator"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub, bool lists) {
    sub->add_option("--config", o.config_path, "Scenario JSON file")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "Seed");
    sub->add_option("--seeds", o.seeds, "Seed range N..M or list");
    sub->add_option("--out", o.out, "Output directory");
    const char* suffix = lists ? " (comma list)" : "";
    sub->add_option("--max-cluster-size", o.max_cluster_size, std::string("Maximum cluster size") + suffix);
    sub->add_option("--cd", o.cd, std::string("Data compression factor") + suffix);
    sub->add_option("--ct", o.ct, std::string("Time compression factor") + suffix);
    sub->add_option("--motion", o.motion, std::string("random, explore or track") + suffix);
    sub->add_option("--comm", o.comm, "Communication: mlc, direct or none");
    sub->add_option("--duration", o.duration, "Simulated time in seconds");
    sub->add_option("--agents", o.agents, "Maximum concurrent agents");
    sub->add_flag("--strict", o.strict, "Abort on clustering rule violations");
  };

  auto* run_cmd = app.add_subcommand("run", "Run scenarios and write trace, summary and topology files");
  add_common(run_cmd, false);
  run_cmd->add_option("--topology-every", o.topology_every, "Write the topology every N ticks (0: final only)");
  run_cmd->add_flag("--fire-csv", o.fire_csv, "Write the final fire state");

  auto* base_cmd = app.add_subcommand("baseline", "Run the direct-communication baseline");
  add_common(base_cmd, false);
  base_cmd->add_option("--topology-every", o.topology_every, "Write the topology every N ticks (0: final only)");
  base_cmd->add_flag("--fire-csv", o.fire_csv, "Write the final fire state");

  auto* batch_cmd = app.add_subcommand("batch", "Run every parameter combination over all seeds");
  add_common(batch_cmd, true);
  batch_cmd->add_flag("--paired", o.paired, "Also run direct baselines to report normalized metrics");
  batch_cmd->add_option("--threads", o.threads, "Worker threads (default: MLC_SIM_THREADS or all cores)");

  auto* fix_cmd = app.add_subcommand("fixtures", "Regenerate the golden six-agent fixture files");
  fix_cmd->add_option("--out", o.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (*run_cmd) return cmd_run(o, false);
    if (*base_cmd) return cmd_run(o, true);
    if (*batch_cmd) return cmd_batch(o);
    if (*fix_cmd) return cmd_fixtures(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const InvariantViolation& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return kInvariantError;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kIoError;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kIoError;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kIoError;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kIoError;
  }
  return kOk;
}

}  // namespace mlc::cli
