#include "mlc/belief_propagation.hpp"

#include <algorithm>
#include <cmath>

namespace mlc {

namespace {

constexpr double kTimeEps = 1e-9;

bool due(double last, double period, double now) { return now - last >= period - kTimeEps; }

BeliefPatch aggregate_all(const GridShape& shape, const std::vector<const BeliefPatch*>& parts,
                          const AggregationPolicy& policy, double now) {
  BeliefPatch out(shape);
  for (const BeliefPatch* p : parts) out = aggregate(out, *p, policy, now);
  return out;
}

}  // namespace

void PropagationConfig::validate() const {
  if (!(data_compression >= 1.0)) throw ConfigError("data compression factor must be >= 1");
  if (!(time_compression >= 1.0)) throw ConfigError("time compression factor must be >= 1");
  if (!(observation_period > 0.0) || !(dissemination_period > 0.0)) {
    throw ConfigError("observation and dissemination periods must be positive");
  }
  policy.validate();
}

double PropagationConfig::upstream_period(int level) const {
  return dissemination_period * std::pow(time_compression, level);
}

double PropagationConfig::gate_period(int level) const {
  return dissemination_period * std::pow(time_compression, level + 1);
}

// --- DataMeter --------------------------------------------------------------

void DataMeter::charge(AgentId sender, AgentId receiver, double amount) {
  if (amount <= 0.0) return;
  per_agent_[sender] += amount;
  per_agent_[receiver] += amount;
  per_link_[{sender, receiver}] += amount;
}

double DataMeter::agent_total(AgentId id) const {
  auto it = per_agent_.find(id);
  return it == per_agent_.end() ? 0.0 : it->second;
}

double DataMeter::link_total(AgentId sender, AgentId receiver) const {
  auto it = per_link_.find({sender, receiver});
  return it == per_link_.end() ? 0.0 : it->second;
}

double DataMeter::total() const {
  double sum = 0.0;
  for (const auto& [link, v] : per_link_) sum += v;
  return sum;
}

void DataMeter::reset() {
  per_agent_.clear();
  per_link_.clear();
}

// --- measurement ------------------------------------------------------------

BeliefPatch observe_fov(const FireGrid& fire, const CellRect& fov, double now) {
  BeliefPatch out(fire.shape());
  for (const auto& [i, f] : fire.observe(fov)) out.push_back(i, MetaCell{1.0, now, f});
  return out;
}

void measure(AgentState& agent, const FireGrid& fire, const CellRect& fov, double now,
             const AggregationPolicy& policy) {
  agent.observation = observe_fov(fire, fov, now);
  aggregate_into(agent.total_belief, agent.observation, policy, now);
}

BeliefPatch lower_belief(const Registry& reg, AgentId id, int level, double data_compression,
                         const AggregationPolicy& policy, double now) {
  const AgentState& a = reg.at(id);
  if (level == 0) return a.observation;
  if (!a.token || a.token->level != level) {
    throw ProtocolError("agent " + std::to_string(id) + " owns no level-" + std::to_string(level) + " token");
  }
  BeliefPatch out(a.observation.shape());
  for (AgentId m : a.token->members) {
    if (!reg.contains(m)) throw ProtocolError("dangling member " + std::to_string(m));
    out = aggregate(out, compress(lower_belief(reg, m, level - 1, data_compression, policy, now), data_compression),
                    policy, now);
  }
  return out;
}

void direct_exchange(Registry& reg, double now, DataMeter& meter, const AggregationPolicy& policy) {
  const auto ids = reg.ids();
  for (AgentId j : ids) {
    const BeliefPatch& o = reg.at(j).observation;
    const double d = data_amount(o);
    for (AgentId i : ids) {
      if (i == j) continue;
      aggregate_into(reg.at(i).total_belief, o, policy, now);
      meter.charge(j, i, d);
    }
  }
}

// --- BeliefPropagator -------------------------------------------------------

BeliefPropagator::BeliefPropagator(const GridShape& shape, const PropagationConfig& config)
    : shape_(shape), config_(config), base_(shape) {
  config_.validate();
}

BeliefGrid& BeliefPropagator::cache(AgentId from, AgentId to) {
  auto it = caches_.find({from, to});
  if (it == caches_.end()) it = caches_.emplace(std::make_pair(from, to), BeliefGrid(shape_)).first;
  return it->second;
}

double BeliefPropagator::send(AgentId from, AgentId to, const BeliefPatch& payload, double now,
                              DataMeter& meter) {
  if (!config_.link_caches) {
    const double d = data_amount(payload);
    meter.charge(from, to, d);
    return d;
  }
  BeliefGrid& known = cache(from, to);
  const BeliefPatch sent = subtract(payload, known, config_.policy, now);
  const double d = data_amount(sent);
  meter.charge(from, to, d);
  aggregate_into(known, sent, config_.policy, now);
  return d;
}

void BeliefPropagator::absorb(AgentId from, AgentId to, const BeliefPatch& payload, double now) {
  if (!config_.link_caches) return;
  aggregate_into(cache(from, to), payload, config_.policy, now);
}

void BeliefPropagator::disseminate(Registry& reg, double now, DataMeter& meter) {
  const double cd = config_.data_compression;
  const auto& policy = config_.policy;

  std::vector<AgentId> heads = reg.head_ids();
  std::stable_sort(heads.begin(), heads.end(),
                   [&](AgentId l, AgentId r) { return reg.token_of(l).level < reg.token_of(r).level; });

  std::map<AgentId, BeliefPatch> compressed_obs;
  for (const auto& [id, a] : reg) compressed_obs.emplace(id, compress(a.observation, cd));

  // λ bottom-up.
  lower_.clear();
  std::map<AgentId, BeliefPatch> compressed_lower;
  for (AgentId h : heads) {
    const ClusterToken& t = reg.token_of(h);
    std::vector<const BeliefPatch*> parts;
    for (AgentId m : t.members) {
      if (t.level == 1) {
        parts.push_back(&compressed_obs.at(m));
      } else {
        auto it = compressed_lower.find(m);
        if (it == compressed_lower.end()) throw ProtocolError("member " + std::to_string(m) + " has no lower belief");
        parts.push_back(&it->second);
      }
    }
    const BeliefPatch& l = lower_.emplace(h, aggregate_all(shape_, parts, policy, now)).first->second;
    compressed_lower.emplace(h, compress(l, cd));
  }

  // Upstream sends.
  for (auto& [id, a] : reg) {
    const AgentId h = a.level1_head;
    if (h == kNoAgent || h == id || !due(a.last_upstream, config_.upstream_period(0), now)) continue;
    const BeliefPatch& payload = compressed_obs.at(id);
    send(id, h, payload, now, meter);
    absorb(h, id, payload, now);
    a.last_upstream = now;
  }
  for (AgentId h : heads) {
    ClusterToken& t = reg.token_of(h);
    if (t.higher_head == kNoAgent || !due(t.last_upstream, config_.upstream_period(t.level), now)) continue;
    const BeliefPatch& payload = compressed_lower.at(h);
    send(h, t.higher_head, payload, now, meter);
    absorb(t.higher_head, h, payload, now);
    t.last_upstream = now;
  }

  // Λ top-down.
  aggregated_.clear();
  for (auto it = heads.rbegin(); it != heads.rend(); ++it) {
    const AgentId h = *it;
    ClusterToken& t = reg.token_of(h);
    const BeliefPatch& l = lower_.at(h);
    const bool open = t.higher_head != kNoAgent && aggregated_.count(t.higher_head) &&
                      due(t.last_higher_update, config_.gate_period(t.level), now);
    if (!open) {
      aggregated_.emplace(h, l);
      continue;
    }
    const BeliefPatch& higher = aggregated_.at(t.higher_head);
    send(t.higher_head, h, higher, now, meter);
    aggregated_.emplace(h, aggregate(l, higher, policy, now));
    t.last_higher_update = now;
    ++gate_openings_[h];
  }

  // Level-1 downstream delivery.
  delivered_.clear();
  for (AgentId h : heads) {
    const ClusterToken& t = reg.token_of(h);
    if (t.level != 1) continue;
    const BeliefPatch& payload = aggregated_.at(h);
    for (AgentId m : t.members) {
      AgentState& ma = reg.at(m);
      if (m != h && config_.link_caches) {
        BeliefGrid& known = cache(h, m);
        const BeliefPatch sent = subtract(payload, known, policy, now);
        meter.charge(h, m, data_amount(sent));
        aggregate_into(known, sent, policy, now);
        aggregate_into(ma.total_belief, sent, policy, now);
      } else {
        if (m != h) meter.charge(h, m, data_amount(payload));
        aggregate_into(ma.total_belief, payload, policy, now);
      }
      delivered_[m] = payload;
    }
  }

  if (config_.base_station_push) {
    for (AgentId h : heads) {
      ClusterToken& t = reg.token_of(h);
      if (t.higher_head != kNoAgent || !due(t.last_upstream, config_.upstream_period(t.level), now)) continue;
      aggregate_into(base_, compressed_lower.at(h), policy, now);
      t.last_upstream = now;
    }
  }
}

const BeliefPatch* BeliefPropagator::lower(AgentId head) const {
  auto it = lower_.find(head);
  return it == lower_.end() ? nullptr : &it->second;
}

const BeliefPatch* BeliefPropagator::aggregated(AgentId head) const {
  auto it = aggregated_.find(head);
  return it == aggregated_.end() ? nullptr : &it->second;
}

const BeliefPatch* BeliefPropagator::delivered(AgentId member) const {
  auto it = delivered_.find(member);
  return it == delivered_.end() ? nullptr : &it->second;
}

int BeliefPropagator::gate_openings(AgentId head) const {
  auto it = gate_openings_.find(head);
  return it == gate_openings_.end() ? 0 : it->second;
}

void BeliefPropagator::prune(const Registry& reg) {
  auto linked = [&](AgentId a, AgentId b) {
    const AgentState* x = reg.find(a);
    const AgentState* y = reg.find(b);
    if (!x || !y) return false;
    if (x->level1_head == b || y->level1_head == a) return true;
    if (x->token && x->token->higher_head == b) return true;
    if (y->token && y->token->higher_head == a) return true;
    return false;
  };
  std::erase_if(caches_, [&](const auto& kv) { return !linked(kv.first.first, kv.first.second); });
  std::erase_if(gate_openings_, [&](const auto& kv) {
    const AgentState* a = reg.find(kv.first);
    return !a || !a->token;
  });
}

void BeliefPropagator::land(const AgentState& agent, double now) {
  aggregate_into(base_, agent.total_belief, config_.policy, now);
}

void BeliefPropagator::spawn(AgentState& agent) const { agent.total_belief = base_; }

}  // namespace mlc
