#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "mlc/cluster_protocol.hpp"
#include "mlc/wildfire.hpp"

namespace mlc {

struct TraceRecord {
  double t = 0.0;
  int n_agents = 0;
  double main_cluster_ratio = 0.0;
  double avg_links = 0.0;
  double max_links = 0.0;
  double avg_link_dist = 0.0;
  double max_link_dist = 0.0;
  double avg_data_rate = 0.0;
  double max_data_rate = 0.0;
  double miss_ratio = 0.0;  // NaN while nothing burns
};

/// Largest connected component of the membership forest over the agent count.
/// NaN without agents.
double main_cluster_ratio(const Registry& reg);

/// Fraction of burning cells outside every field of view; NaN without fire.
double miss_ratio(const FireGrid& fire, std::span<const CellRect> fovs);

struct LinkStats {
  double avg_links = 0.0;
  double max_links = 0.0;
  double avg_dist = 0.0;
  double max_dist = 0.0;
};

/// Distinct undirected tree links; each counts once at both endpoints.
LinkStats link_stats(const Registry& reg);
/// Per-agent link counts over the same edge set.
std::map<AgentId, int> link_counts(const Registry& reg);

/// (mean, max) over `agents` of data units per second within a window.
std::pair<double, double> data_rate(const std::map<AgentId, double>& totals, std::span<const AgentId> agents,
                                    double window);

/// Ratio of mission miss ratios; NaN when the baseline is zero or undefined.
double normalized_miss(double mission_miss, double baseline_miss);

/// Mission-level means over a trace; the miss ratio skips fire-free rows.
struct MissionSummary {
  std::size_t records = 0;
  double mean_agents = 0.0;
  double mean_main_cluster_ratio = 0.0;
  double mean_links = 0.0;
  double max_links = 0.0;
  double mean_link_dist = 0.0;
  double max_link_dist = 0.0;
  double mean_data_rate = 0.0;
  double max_data_rate = 0.0;
  double mission_miss_ratio = 0.0;
  std::size_t fire_records = 0;
};

MissionSummary summarize(std::span<const TraceRecord> trace);

std::string trace_header();
std::string to_csv_row(const TraceRecord& r);
/// Shortest round-tripping decimal form; "nan" for NaN.
std::string format_number(double v);

}  // namespace mlc
