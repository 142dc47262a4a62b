#include "mlc/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace mlc {

namespace {

void put_f64(std::ostream& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
  out.write(buf, 8);
}

double get_f64(std::istream& in) {
  unsigned char buf[8];
  if (!in.read(reinterpret_cast<char*>(buf), 8)) throw IoError("truncated grid dump");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out) throw IoError("cannot write " + path);
  return out;
}

std::ifstream open_in(const std::string& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw IoError("cannot read " + path);
  return in;
}

double parse_number(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw IoError("bad number '" + s + "'");
  return v;
}

nlohmann::json number_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

}  // namespace

void write_grid_csv(std::ostream& out, const BeliefGrid& grid) {
  out << "x,y,resolution,obs_time,fire\n";
  for (int y = 0; y < grid.height(); ++y) {
    for (int x = 0; x < grid.width(); ++x) {
      const MetaCell& c = grid.at(x, y);
      if (!c.observed()) continue;
      out << x << ',' << y << ',' << format_number(c.resolution) << ',' << format_number(c.obs_time) << ','
          << format_number(c.fire) << '\n';
    }
  }
}

void write_grid_binary(std::ostream& out, const BeliefGrid& grid) {
  for (const MetaCell& c : grid.cells()) {
    put_f64(out, c.resolution);
    put_f64(out, c.obs_time);
    put_f64(out, c.fire);
  }
}

BeliefGrid read_grid_binary(std::istream& in, const GridShape& shape) {
  BeliefGrid g(shape);
  for (MetaCell& c : g.cells()) {
    c.resolution = get_f64(in);
    c.obs_time = get_f64(in);
    c.fire = get_f64(in);
  }
  return g;
}

void save_grid_binary(const std::string& path, const BeliefGrid& grid) {
  auto out = open_out(path, std::ios::binary);
  write_grid_binary(out, grid);
  if (!out) throw IoError("failed writing " + path);
}

BeliefGrid load_grid_binary(const std::string& path, const GridShape& shape) {
  auto in = open_in(path, std::ios::binary);
  BeliefGrid g = read_grid_binary(in, shape);
  if (in.peek() != std::char_traits<char>::eof()) throw IoError(path + " is larger than the grid");
  return g;
}

void write_topology_header(std::ostream& out) { out << "tick,child_id,parent_id,level\n"; }

void write_topology(std::ostream& out, std::int64_t tick, std::span<const TreeEdge> edges) {
  for (const TreeEdge& e : edges) out << tick << ',' << e.child << ',' << e.parent << ',' << e.level << '\n';
}

void write_fire_header(std::ostream& out) { out << "tick,x,y,burning,fuel\n"; }

void write_fire(std::ostream& out, std::int64_t tick, const FireGrid& fire) {
  const GridShape& s = fire.shape();
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) {
      if (!fire.burning(x, y) && !fire.extinct(x, y)) continue;
      out << tick << ',' << x << ',' << y << ',' << (fire.burning(x, y) ? 1 : 0) << ','
          << format_number(fire.fuel(x, y)) << '\n';
    }
  }
}

void write_trace_csv(std::ostream& out, std::span<const TraceRecord> trace) {
  out << trace_header() << '\n';
  for (const TraceRecord& r : trace) out << to_csv_row(r) << '\n';
}

void save_trace_csv(const std::string& path, std::span<const TraceRecord> trace) {
  auto out = open_out(path);
  write_trace_csv(out, trace);
  if (!out) throw IoError("failed writing " + path);
}

std::vector<TraceRecord> load_trace_csv(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || line != trace_header()) throw IoError(path + " is not a trace CSV");
  std::vector<TraceRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 10) throw IoError("bad trace row in " + path);
    TraceRecord r;
    r.t = parse_number(f[0]);
    r.n_agents = std::stoi(f[1]);
    r.main_cluster_ratio = parse_number(f[2]);
    r.avg_links = parse_number(f[3]);
    r.max_links = parse_number(f[4]);
    r.avg_link_dist = parse_number(f[5]);
    r.max_link_dist = parse_number(f[6]);
    r.avg_data_rate = parse_number(f[7]);
    r.max_data_rate = parse_number(f[8]);
    r.miss_ratio = parse_number(f[9]);
    out.push_back(r);
  }
  return out;
}

std::string summary_json(const ScenarioConfig& cfg, const MissionSummary& s, std::size_t violations,
                         std::optional<double> baseline_miss, std::optional<double> baseline_rate,
                         bool is_baseline) {
  nlohmann::json j;
  j["seed"] = cfg.seed;
  j["baseline"] = is_baseline;
  j["communication"] = to_string(cfg.communication);
  j["motion"] = to_string(cfg.motion.mode);
  j["max_cluster_size"] = cfg.protocol.max_cluster_size;
  j["data_compression"] = cfg.propagation.data_compression;
  j["time_compression"] = cfg.propagation.time_compression;
  j["sim_time"] = cfg.sim_time;
  j["records"] = s.records;
  j["fire_records"] = s.fire_records;
  j["mean_agents"] = number_or_null(s.mean_agents);
  j["mean_main_cluster_ratio"] = number_or_null(s.mean_main_cluster_ratio);
  j["mean_links"] = number_or_null(s.mean_links);
  j["max_links"] = number_or_null(s.max_links);
  j["mean_link_dist"] = number_or_null(s.mean_link_dist);
  j["max_link_dist"] = number_or_null(s.max_link_dist);
  j["mean_data_rate"] = number_or_null(s.mean_data_rate);
  j["max_data_rate"] = number_or_null(s.max_data_rate);
  j["mission_miss_ratio"] = number_or_null(s.mission_miss_ratio);
  j["rule_violations"] = violations;
  if (baseline_miss) {
    j["baseline_miss_ratio"] = number_or_null(*baseline_miss);
    j["normalized_miss_ratio"] = number_or_null(normalized_miss(s.mission_miss_ratio, *baseline_miss));
  }
  if (baseline_rate) {
    j["baseline_data_rate"] = number_or_null(*baseline_rate);
    j["data_rate_ratio"] = number_or_null(*baseline_rate > 0 ? s.mean_data_rate / *baseline_rate : NAN);
  }
  return j.dump(2) + "\n";
}

void write_text_file(const std::string& path, const std::string& text) {
  auto out = open_out(path, std::ios::binary);
  out << text;
  if (!out) throw IoError("failed writing " + path);
}

std::string read_text_file(const std::string& path) {
  auto in = open_in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace mlc
