#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>

#include "mlc/belief_grid.hpp"
#include "mlc/cluster_protocol.hpp"
#include "mlc/metrics.hpp"
#include "mlc/scenario.hpp"
#include "mlc/wildfire.hpp"

namespace mlc {

/// I/O failures (unreadable or unwritable files, truncated dumps).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Grid CSV: header x,y,resolution,obs_time,fire; one row per observed cell.
void write_grid_csv(std::ostream& out, const BeliefGrid& grid);
/// Little-endian f64 triples (resolution, obs_time, fire) in row-major order, no header.
void write_grid_binary(std::ostream& out, const BeliefGrid& grid);
BeliefGrid read_grid_binary(std::istream& in, const GridShape& shape);
void save_grid_binary(const std::string& path, const BeliefGrid& grid);
BeliefGrid load_grid_binary(const std::string& path, const GridShape& shape);

/// Topology CSV rows: tick,child_id,parent_id,level.
void write_topology_header(std::ostream& out);
void write_topology(std::ostream& out, std::int64_t tick, std::span<const TreeEdge> edges);
/// Fire CSV rows for every burning or burnt-out cell: tick,x,y,burning,fuel.
void write_fire_header(std::ostream& out);
void write_fire(std::ostream& out, std::int64_t tick, const FireGrid& fire);

void write_trace_csv(std::ostream& out, std::span<const TraceRecord> trace);
void save_trace_csv(const std::string& path, std::span<const TraceRecord> trace);
std::vector<TraceRecord> load_trace_csv(const std::string& path);

/// Mission summary as JSON; `baseline_miss` and `baseline_rate` add the
/// normalized miss ratio and the data-rate ratio.
std::string summary_json(const ScenarioConfig& cfg, const MissionSummary& s, std::size_t violations,
                         std::optional<double> baseline_miss = std::nullopt,
                         std::optional<double> baseline_rate = std::nullopt, bool is_baseline = false);

/// Writes `text` to `path`, throwing IoError on failure.
void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace mlc
