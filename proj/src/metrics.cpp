#include "mlc/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <set>

namespace mlc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::set<std::pair<AgentId, AgentId>> undirected_edges(const Registry& reg) {
  std::set<std::pair<AgentId, AgentId>> out;
  for (const TreeEdge& e : tree_edges(reg)) {
    if (e.child == e.parent || !reg.contains(e.child) || !reg.contains(e.parent)) continue;
    out.emplace(std::min(e.child, e.parent), std::max(e.child, e.parent));
  }
  return out;
}

struct UnionFind {
  std::map<AgentId, AgentId> parent;
  AgentId find(AgentId a) {
    AgentId r = a;
    while (parent[r] != r) r = parent[r];
    while (parent[a] != r) {
      const AgentId next = parent[a];
      parent[a] = r;
      a = next;
    }
    return r;
  }
  void unite(AgentId a, AgentId b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

double main_cluster_ratio(const Registry& reg) {
  if (reg.empty()) return kNaN;
  UnionFind uf;
  for (const auto& [id, a] : reg) uf.parent[id] = id;
  for (const auto& [a, b] : undirected_edges(reg)) uf.unite(a, b);
  std::map<AgentId, std::size_t> sizes;
  for (const auto& [id, a] : reg) ++sizes[uf.find(id)];
  std::size_t best = 0;
  for (const auto& [root, n] : sizes) best = std::max(best, n);
  return static_cast<double>(best) / static_cast<double>(reg.size());
}

double miss_ratio(const FireGrid& fire, std::span<const CellRect> fovs) {
  const GridShape& s = fire.shape();
  const auto burning = fire.burning_flags();
  std::size_t total = 0;
  std::size_t seen = 0;
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) {
      if (!burning[s.index(x, y)]) continue;
      ++total;
      if (std::any_of(fovs.begin(), fovs.end(), [&](const CellRect& r) { return r.contains(x, y); })) ++seen;
    }
  }
  if (total == 0) return kNaN;
  return 1.0 - static_cast<double>(seen) / static_cast<double>(total);
}

std::map<AgentId, int> link_counts(const Registry& reg) {
  std::map<AgentId, int> out;
  for (const auto& [id, a] : reg) out[id] = 0;
  for (const auto& [a, b] : undirected_edges(reg)) {
    ++out[a];
    ++out[b];
  }
  return out;
}

LinkStats link_stats(const Registry& reg) {
  LinkStats s;
  if (reg.empty()) return s;
  const auto counts = link_counts(reg);
  double sum = 0.0;
  for (const auto& [id, n] : counts) {
    sum += n;
    s.max_links = std::max(s.max_links, static_cast<double>(n));
  }
  s.avg_links = sum / static_cast<double>(counts.size());
  const auto edges = undirected_edges(reg);
  double dist_sum = 0.0;
  for (const auto& [a, b] : edges) {
    const Vec3 pa = reg.at(a).position;
    const Vec3 pb = reg.at(b).position;
    const double d = std::hypot(pa.x - pb.x, pa.y - pb.y);
    dist_sum += d;
    s.max_dist = std::max(s.max_dist, d);
  }
  if (!edges.empty()) s.avg_dist = dist_sum / static_cast<double>(edges.size());
  return s;
}

std::pair<double, double> data_rate(const std::map<AgentId, double>& totals, std::span<const AgentId> agents,
                                    double window) {
  if (agents.empty() || !(window > 0.0)) return {0.0, 0.0};
  double sum = 0.0;
  double max = 0.0;
  for (AgentId id : agents) {
    auto it = totals.find(id);
    const double rate = it == totals.end() ? 0.0 : it->second / window;
    sum += rate;
    max = std::max(max, rate);
  }
  return {sum / static_cast<double>(agents.size()), max};
}

double normalized_miss(double mission_miss, double baseline_miss) {
  if (std::isnan(mission_miss) || std::isnan(baseline_miss) || baseline_miss == 0.0) return kNaN;
  return mission_miss / baseline_miss;
}

MissionSummary summarize(std::span<const TraceRecord> trace) {
  MissionSummary m;
  double miss_sum = 0.0;
  std::size_t with_agents = 0;
  double ratio_sum = 0.0;
  for (const TraceRecord& r : trace) {
    ++m.records;
    m.mean_agents += r.n_agents;
    if (r.n_agents > 0) {
      ++with_agents;
      ratio_sum += r.main_cluster_ratio;
    }
    m.mean_links += r.avg_links;
    m.max_links = std::max(m.max_links, r.max_links);
    m.mean_link_dist += r.avg_link_dist;
    m.max_link_dist = std::max(m.max_link_dist, r.max_link_dist);
    m.mean_data_rate += r.avg_data_rate;
    m.max_data_rate = std::max(m.max_data_rate, r.max_data_rate);
    if (!std::isnan(r.miss_ratio)) {
      miss_sum += r.miss_ratio;
      ++m.fire_records;
    }
  }
  if (m.records) {
    const auto n = static_cast<double>(m.records);
    m.mean_agents /= n;
    m.mean_links /= n;
    m.mean_link_dist /= n;
    m.mean_data_rate /= n;
  }
  m.mean_main_cluster_ratio = with_agents ? ratio_sum / static_cast<double>(with_agents) : kNaN;
  m.mission_miss_ratio = m.fire_records ? miss_sum / static_cast<double>(m.fire_records) : kNaN;
  return m;
}

std::string trace_header() {
  return "t,n_agents,main_cluster_ratio,avg_links,max_links,avg_link_dist,max_link_dist,avg_data_rate,"
         "max_data_rate,miss_ratio";
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string to_csv_row(const TraceRecord& r) {
  std::string out = format_number(r.t);
  out += ',' + std::to_string(r.n_agents);
  for (double v : {r.main_cluster_ratio, r.avg_links, r.max_links, r.avg_link_dist, r.max_link_dist,
                   r.avg_data_rate, r.max_data_rate, r.miss_ratio}) {
    out += ',' + format_number(v);
  }
  return out;
}

}  // namespace mlc
