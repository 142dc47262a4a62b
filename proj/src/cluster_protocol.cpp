#include "mlc/cluster_protocol.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace mlc {

namespace {

constexpr double kTimeEps = 1e-9;

// Links of every agent, enough to undo a tentative topology change.
struct LinkSnapshot {
  std::map<AgentId, std::pair<AgentId, std::optional<ClusterToken>>> links;
};

LinkSnapshot snapshot(const Registry& reg) {
  LinkSnapshot s;
  for (const auto& [id, a] : reg) s.links.emplace(id, std::make_pair(a.level1_head, a.token));
  return s;
}

void restore(Registry& reg, const LinkSnapshot& s) {
  for (auto& [id, a] : reg) {
    auto it = s.links.find(id);
    if (it == s.links.end()) continue;
    a.level1_head = it->second.first;
    a.token = it->second.second;
  }
}

std::set<AgentId> rule3_failures(const Registry& reg) {
  std::set<AgentId> out;
  for (const auto& [id, a] : reg) {
    if (a.token && !rule3_holds(reg, id)) out.insert(id);
  }
  return out;
}

bool introduces_rule3_failure(const Registry& reg, const std::set<AgentId>& before) {
  for (AgentId id : rule3_failures(reg)) {
    if (!before.count(id)) return true;
  }
  return false;
}

void erase_member(ClusterToken& t, AgentId m) { std::erase(t.members, m); }

bool has_member(const ClusterToken& t, AgentId m) {
  return std::find(t.members.begin(), t.members.end(), m) != t.members.end();
}

// Nearest agent to `p` among `ids`; ties go to the lowest id.
std::optional<AgentId> nearest(const Registry& reg, std::span<const AgentId> ids, const Vec3& p) {
  std::optional<AgentId> best;
  double best_d = std::numeric_limits<double>::infinity();
  for (AgentId id : ids) {
    const double d = distance(reg.at(id).position, p);
    if (d < best_d || (d == best_d && best && id < *best)) {
      best = id;
      best_d = d;
    }
  }
  return best;
}

// Re-links a member from one head's cluster to another's at the given level.
void move_member(Registry& reg, AgentId member, AgentId from, AgentId to, int level) {
  erase_member(reg.token_of(from), member);
  reg.token_of(to).members.push_back(member);
  if (level == 1) {
    reg.at(member).level1_head = to;
  } else {
    reg.token_of(member).higher_head = to;
  }
}

void pass_token(Registry& reg, AgentId from, AgentId to, const ProtocolConfig& cfg, double now) {
  AgentState& old_head = reg.at(from);
  ClusterToken t = std::move(*old_head.token);
  old_head.token.reset();
  t.head_id = to;
  for (AgentId m : t.members) {
    if (!reg.contains(m)) continue;
    if (t.level == 1) {
      reg.at(m).level1_head = to;
    } else if (reg.at(m).token) {
      reg.at(m).token->higher_head = to;
    }
  }
  if (t.higher_head != kNoAgent && reg.contains(t.higher_head) && reg.at(t.higher_head).token) {
    for (AgentId& m : reg.token_of(t.higher_head).members) {
      if (m == from) m = to;
    }
  }
  const bool boss = t.higher_head == kNoAgent;
  AgentState& new_head = reg.at(to);
  new_head.token = std::move(t);
  if (boss) start_join_phase(new_head, cfg, now);
}

// Heads of level-`level` tokens `depth` levels below `top`.
std::vector<AgentId> heads_below(const Registry& reg, AgentId top, int depth) {
  std::vector<AgentId> frontier{top};
  for (int d = 0; d < depth; ++d) {
    std::vector<AgentId> next;
    for (AgentId h : frontier) {
      const AgentState* a = reg.find(h);
      if (!a || !a->token || a->token->level <= 1) continue;
      for (AgentId m : a->token->members) {
        if (reg.contains(m) && reg.at(m).token) next.push_back(m);
      }
    }
    frontier = std::move(next);
  }
  return frontier;
}

// Level-1 heads inside the sub-tree of `head`.
std::vector<AgentId> level1_heads_below(const Registry& reg, AgentId head) {
  std::vector<AgentId> out;
  std::vector<AgentId> stack{head};
  while (!stack.empty()) {
    const AgentId h = stack.back();
    stack.pop_back();
    const AgentState* a = reg.find(h);
    if (!a || !a->token) continue;
    if (a->token->level == 1) {
      out.push_back(h);
      continue;
    }
    for (AgentId m : a->token->members) stack.push_back(m);
  }
  std::sort(out.begin(), out.end());
  return out;
}

// A token owner that lost its level-1 cluster rejoins one inside its own
// sub-tree, or hands its token on so that no rule is left broken.
void repair_level1_membership(Registry& reg, AgentId id, const ProtocolConfig& cfg, double now) {
  AgentState* a = reg.find(id);
  if (!a) return;
  if (!a->token) {
    if (a->level1_head == kNoAgent) start_join_phase(*a, cfg, now);
    return;
  }
  if (a->level1_head != kNoAgent) return;
  std::vector<AgentId> open;
  for (AgentId h : level1_heads_below(reg, id)) {
    if (static_cast<int>(reg.token_of(h).members.size()) < cfg.max_cluster_size) open.push_back(h);
  }
  if (auto h = nearest(reg, open, a->position)) {
    reg.token_of(*h).members.push_back(id);
    a->level1_head = *h;
    return;
  }
  maintain_reassign(reg, id, cfg, now, /*forced=*/true);
  if (AgentState* b = reg.find(id); b && !b->token && b->level1_head == kNoAgent) start_join_phase(*b, cfg, now);
}

// Heads whose level-1 cluster ended up outside their own sub-tree (after a
// token above them vanished) move their level-1 membership back inside it.
void repair_rule3(Registry& reg, const ProtocolConfig& cfg, double now) {
  for (std::size_t guard = 0; guard <= reg.size(); ++guard) {
    const auto failing = rule3_failures(reg);
    if (failing.empty()) return;
    for (AgentId id : failing) {
      AgentState* a = reg.find(id);
      if (!a || !a->token || rule3_holds(reg, id)) continue;
      if (a->level1_head != kNoAgent) {
        if (AgentState* h = reg.find(a->level1_head); h && h->token && h->token->level == 1) {
          erase_member(*h->token, id);
          if (h->token->members.empty()) destroy_token(reg, h->id, cfg, now);
        }
        if (AgentState* b = reg.find(id)) b->level1_head = kNoAgent;
      }
      repair_level1_membership(reg, id, cfg, now);
    }
  }
}

// Member of `head`'s token whose sub-tree contains `agent` as a level-1 member.
std::optional<AgentId> anchor_of(const Registry& reg, AgentId head, AgentId agent) {
  const ClusterToken& t = reg.token_of(head);
  AgentId c = reg.at(agent).level1_head;
  if (t.level == 1) {
    return c == head ? std::optional<AgentId>(agent) : std::nullopt;
  }
  for (int lvl = 1; lvl < t.level; ++lvl) {
    const AgentState* ca = reg.find(c);
    if (!ca || !ca->token || ca->token->level != lvl) return std::nullopt;
    if (lvl == t.level - 1) return ca->token->higher_head == head ? std::optional<AgentId>(c) : std::nullopt;
    c = ca->token->higher_head;
  }
  return std::nullopt;
}

}  // namespace

// --- config -----------------------------------------------------------------

double ProtocolConfig::threshold(int level) const {
  return level1_threshold * std::pow(2.0, std::max(0, level - 1));
}

void ProtocolConfig::validate() const {
  if (max_cluster_size < 2) throw ConfigError("max_cluster_size must be >= 2");
  if (!(maintenance_period > 0.0)) throw ConfigError("maintenance_period must be positive");
  if (max_escalation < 0) throw ConfigError("max_escalation must be >= 0");
  if (assimilation_threshold < 1) throw ConfigError("assimilation_threshold must be >= 1");
  if (!(level1_threshold > 0.0)) throw ConfigError("level1_threshold must be positive");
  if (!(join_period > 0.0) || !(create_period > 0.0) || !(poll_period > 0.0)) {
    throw ConfigError("join, create and poll periods must be positive");
  }
  if (!(discovery_range > 0.0)) throw ConfigError("discovery_range must be positive");
}

// --- registry ---------------------------------------------------------------

AgentState& Registry::add(AgentState agent) {
  if (agent.id == kNoAgent) throw ProtocolError("agent id 0 is reserved");
  auto [it, inserted] = agents_.emplace(agent.id, std::move(agent));
  if (!inserted) throw ProtocolError("duplicate agent id " + std::to_string(it->first));
  return it->second;
}

void Registry::remove(AgentId id) { agents_.erase(id); }

AgentState* Registry::find(AgentId id) {
  auto it = agents_.find(id);
  return it == agents_.end() ? nullptr : &it->second;
}

const AgentState* Registry::find(AgentId id) const {
  auto it = agents_.find(id);
  return it == agents_.end() ? nullptr : &it->second;
}

AgentState& Registry::at(AgentId id) {
  if (AgentState* a = find(id)) return *a;
  throw ProtocolError("unknown agent " + std::to_string(id));
}

const AgentState& Registry::at(AgentId id) const {
  if (const AgentState* a = find(id)) return *a;
  throw ProtocolError("unknown agent " + std::to_string(id));
}

ClusterToken& Registry::token_of(AgentId head) {
  AgentState& a = at(head);
  if (!a.token) throw ProtocolError("agent " + std::to_string(head) + " owns no token");
  return *a.token;
}

const ClusterToken& Registry::token_of(AgentId head) const {
  const AgentState& a = at(head);
  if (!a.token) throw ProtocolError("agent " + std::to_string(head) + " owns no token");
  return *a.token;
}

std::vector<AgentId> Registry::ids() const {
  std::vector<AgentId> out;
  out.reserve(agents_.size());
  for (const auto& [id, a] : agents_) out.push_back(id);
  return out;
}

std::vector<AgentId> Registry::head_ids() const {
  std::vector<AgentId> out;
  for (const auto& [id, a] : agents_) {
    if (a.token) out.push_back(id);
  }
  return out;
}

// --- tree queries -----------------------------------------------------------

bool seeks_cluster(const AgentState& a) {
  if (a.token) return a.token->higher_head == kNoAgent;
  return a.level1_head == kNoAgent;
}

int acting_level(const AgentState& a) { return a.token ? a.token->level : 0; }

bool is_boss(const AgentState& a) { return a.token && a.token->higher_head == kNoAgent; }

std::vector<AgentId> subtree_agents(const Registry& reg, AgentId head) {
  std::vector<AgentId> out;
  std::vector<std::pair<AgentId, int>> stack{{head, reg.token_of(head).level}};
  while (!stack.empty()) {
    auto [h, level] = stack.back();
    stack.pop_back();
    const AgentState* a = reg.find(h);
    if (!a || !a->token || a->token->level != level) continue;
    for (AgentId m : a->token->members) {
      if (!reg.contains(m)) continue;
      if (level == 1) {
        out.push_back(m);
      } else {
        stack.emplace_back(m, level - 1);
      }
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<AgentId> idle_descendants(const Registry& reg, AgentId head) {
  std::vector<AgentId> out;
  for (AgentId id : subtree_agents(reg, head)) {
    if (!reg.at(id).token) out.push_back(id);
  }
  return out;
}

Vec3 member_centroid(const Registry& reg, const ClusterToken& token) {
  Vec3 sum;
  int n = 0;
  for (AgentId m : token.members) {
    if (const AgentState* a = reg.find(m)) {
      sum += a->position;
      ++n;
    }
  }
  return n ? sum * (1.0 / n) : sum;
}

AgentId boss_of(const Registry& reg, AgentId id) {
  const AgentState& a = reg.at(id);
  AgentId cur = a.level1_head != kNoAgent ? a.level1_head : id;
  for (std::size_t guard = 0; guard <= reg.size(); ++guard) {
    const AgentState* c = reg.find(cur);
    if (!c || !c->token || c->token->higher_head == kNoAgent || !reg.contains(c->token->higher_head)) return cur;
    cur = c->token->higher_head;
  }
  return cur;
}

bool rule3_holds(const Registry& reg, AgentId head) {
  const AgentState* a = reg.find(head);
  if (!a || !a->token) return false;
  const int level = a->token->level;
  AgentId c = a->level1_head;
  for (int lvl = 1; lvl <= level; ++lvl) {
    const AgentState* ca = reg.find(c);
    if (!ca || !ca->token || ca->token->level != lvl) return false;
    if (lvl == level) return c == head;
    c = ca->token->higher_head;
  }
  return false;
}

std::string to_string(const RuleViolation& v) {
  std::ostringstream os;
  switch (v.rule) {
    case Rule::OneToken: os << "rule 1"; break;
    case Rule::Level1Membership: os << "rule 2"; break;
    case Rule::SubtreeMembership: os << "rule 3"; break;
    case Rule::MembershipBound: os << "membership bound"; break;
    case Rule::LinkConsistency: os << "link consistency"; break;
    case Rule::Cycle: os << "cycle"; break;
  }
  os << " (agent " << v.agent << "): " << v.detail;
  return os.str();
}

std::vector<RuleViolation> check_rules(const Registry& reg, const ProtocolConfig& cfg) {
  std::vector<RuleViolation> out;
  std::map<AgentId, int> headed;
  for (const auto& [id, a] : reg) {
    if (a.token) ++headed[a.token->head_id];
  }
  for (const auto& [id, count] : headed) {
    if (count > 1) out.push_back({Rule::OneToken, id, "heads " + std::to_string(count) + " clusters"});
  }

  for (const auto& [id, a] : reg) {
    if (a.level1_head != kNoAgent) {
      const AgentState* h = reg.find(a.level1_head);
      if (!h || !h->token || h->token->level != 1 || !has_member(*h->token, id)) {
        out.push_back({Rule::LinkConsistency, id, "level-1 head " + std::to_string(a.level1_head) + " does not list it"});
      }
    }
    if (!a.token) continue;
    const ClusterToken& t = *a.token;
    if (t.head_id != id) {
      out.push_back({Rule::LinkConsistency, id, "token names head " + std::to_string(t.head_id)});
    }
    const auto n = static_cast<int>(t.members.size());
    if (n < 1 || n > cfg.max_cluster_size) {
      out.push_back({Rule::MembershipBound, id, std::to_string(n) + " members"});
    }
    std::set<AgentId> seen;
    for (AgentId m : t.members) {
      if (!seen.insert(m).second) out.push_back({Rule::LinkConsistency, id, "duplicate member " + std::to_string(m)});
      const AgentState* ma = reg.find(m);
      if (!ma) {
        out.push_back({Rule::LinkConsistency, id, "dangling member " + std::to_string(m)});
      } else if (t.level == 1 && ma->level1_head != id) {
        out.push_back({Rule::LinkConsistency, id, "member " + std::to_string(m) + " has another level-1 head"});
      } else if (t.level > 1 && (!ma->token || ma->token->level != t.level - 1 || ma->token->higher_head != id)) {
        out.push_back({Rule::LinkConsistency, id, "member " + std::to_string(m) + " is not a linked level-" +
                                                      std::to_string(t.level - 1) + " head"});
      }
    }
    if (t.higher_head != kNoAgent) {
      const AgentState* hh = reg.find(t.higher_head);
      if (!hh || !hh->token || hh->token->level != t.level + 1 || !has_member(*hh->token, id)) {
        out.push_back({Rule::LinkConsistency, id, "higher head " + std::to_string(t.higher_head) + " does not list it"});
      }
    }
    if (a.level1_head == kNoAgent) {
      out.push_back({Rule::Level1Membership, id, "cluster-head without level-1 cluster"});
    } else if (!rule3_holds(reg, id)) {
      out.push_back({Rule::SubtreeMembership, id, "level-1 cluster outside own sub-tree"});
    }
    // The higher-head chain must terminate within |registry| steps.
    AgentId cur = id;
    std::size_t steps = 0;
    while (cur != kNoAgent && steps <= reg.size()) {
      const AgentState* c = reg.find(cur);
      if (!c || !c->token) break;
      cur = c->token->higher_head;
      ++steps;
    }
    if (steps > reg.size()) out.push_back({Rule::Cycle, id, "higher-head chain does not terminate"});
  }
  return out;
}

std::vector<TreeEdge> tree_edges(const Registry& reg) {
  std::vector<TreeEdge> out;
  for (const auto& [id, a] : reg) {
    if (a.level1_head != kNoAgent && a.level1_head != id) out.push_back({id, a.level1_head, 1});
    if (a.token && a.token->higher_head != kNoAgent) out.push_back({id, a.token->higher_head, a.token->level + 1});
  }
  return out;
}

// --- decentralized phases ---------------------------------------------------

void tick_discovery(Registry& reg, AgentId id, const ProtocolConfig& cfg) {
  const double range = cfg.discovery_range;
  AgentState& self = reg.at(id);
  std::vector<NeighborInfo> table;
  for (const auto& [oid, o] : reg) {
    if (oid == id || distance(o.position, self.position) > range) continue;
    NeighborInfo n;
    n.id = oid;
    n.position = o.position;
    if (o.token) {
      n.head_level = o.token->level;
      n.full = static_cast<int>(o.token->members.size()) >= cfg.max_cluster_size;
      n.boss = o.token->higher_head == kNoAgent;
    }
    table.push_back(n);
  }
  self.neighbors = std::move(table);
}

void start_join_phase(AgentState& a, const ProtocolConfig& cfg, double now) {
  a.phase = Phase::Join;
  a.phase_deadline = now + cfg.join_period;
}

void advance_phase(AgentState& a, const ProtocolConfig& cfg, double now) {
  while (now + kTimeEps >= a.phase_deadline) {
    if (a.phase == Phase::Join) {
      a.phase = Phase::Create;
      a.phase_deadline += cfg.create_period;
    } else {
      a.phase = Phase::Join;
      a.phase_deadline += cfg.join_period;
    }
  }
}

std::optional<AgentId> tick_join(Registry& reg, AgentId id, const ProtocolConfig& cfg, double /*now*/) {
  AgentState& a = reg.at(id);
  if (!seeks_cluster(a) || a.phase != Phase::Join) return std::nullopt;
  const int target = acting_level(a) + 1;
  std::vector<AgentId> open;
  for (const NeighborInfo& n : a.neighbors) {
    const AgentState* h = reg.find(n.id);
    if (n.full || n.head_level != target || !h || !h->token || h->token->level != target) continue;
    // The head refuses if it filled up since its last broadcast.
    if (static_cast<int>(h->token->members.size()) >= cfg.max_cluster_size) continue;
    open.push_back(n.id);
  }
  auto head = nearest(reg, open, a.position);
  if (!head) return std::nullopt;
  reg.token_of(*head).members.push_back(id);
  if (target == 1) {
    a.level1_head = *head;
  } else {
    a.token->higher_head = *head;
  }
  return head;
}

std::optional<AgentId> tick_create(Registry& reg, std::span<const AgentId> candidates,
                                   const ProtocolConfig& cfg, double now) {
  std::vector<AgentId> pool;
  for (AgentId id : candidates) {
    const AgentState* a = reg.find(id);
    if (a && seeks_cluster(*a) && a->phase == Phase::Create) pool.push_back(id);
  }
  if (pool.size() < 2) return std::nullopt;
  std::sort(pool.begin(), pool.end());
  const AgentId initiator = pool.front();
  const int level = acting_level(reg.at(initiator));
  const Vec3 origin = reg.at(initiator).position;

  std::vector<AgentId> others;
  for (AgentId id : pool) {
    if (id != initiator && acting_level(reg.at(id)) == level) others.push_back(id);
  }
  std::stable_sort(others.begin(), others.end(), [&](AgentId l, AgentId r) {
    return distance(reg.at(l).position, origin) < distance(reg.at(r).position, origin);
  });
  std::vector<AgentId> group{initiator};
  for (AgentId id : others) {
    if (static_cast<int>(group.size()) >= cfg.max_cluster_size) break;
    const bool in_range = std::all_of(group.begin(), group.end(), [&](AgentId g) {
      return distance(reg.at(g).position, reg.at(id).position) <= cfg.discovery_range;
    });
    if (in_range) group.push_back(id);
  }
  if (group.size() < 2) return std::nullopt;
  std::sort(group.begin(), group.end());

  ClusterToken t;
  t.level = level + 1;
  t.members = group;
  t.higher_head = kNoAgent;
  const Vec3 c = member_centroid(reg, t);

  std::vector<AgentId> electable;
  if (level == 0) {
    electable = group;
  } else {
    // Rule 1: the head of a new higher cluster must be an idle agent, and
    // Rule 3: it must come from the sub-trees being joined.
    for (AgentId g : group) {
      for (AgentId id : idle_descendants(reg, g)) electable.push_back(id);
    }
    std::sort(electable.begin(), electable.end());
  }
  auto head = nearest(reg, electable, c);
  if (!head) return std::nullopt;

  t.head_id = *head;
  for (AgentId m : group) {
    if (level == 0) {
      reg.at(m).level1_head = *head;
    } else {
      reg.token_of(m).higher_head = *head;
    }
  }
  AgentState& h = reg.at(*head);
  h.token = std::move(t);
  start_join_phase(h, cfg, now);
  return head;
}

void poll_clustering(Registry& reg, const ProtocolConfig& cfg, double now) {
  const auto ids = reg.ids();
  for (AgentId id : ids) tick_discovery(reg, id, cfg);
  for (AgentId id : ids) {
    AgentState& a = reg.at(id);
    if (seeks_cluster(a)) advance_phase(a, cfg, now);
  }
  for (AgentId id : ids) {
    if (const AgentState* a = reg.find(id); a && seeks_cluster(*a) && a->phase == Phase::Join) {
      tick_join(reg, id, cfg, now);
    }
  }
  std::map<int, std::vector<AgentId>> by_level;
  for (AgentId id : ids) {
    const AgentState& a = reg.at(id);
    if (seeks_cluster(a) && a.phase == Phase::Create) by_level[acting_level(a)].push_back(id);
  }
  for (auto& [level, pool] : by_level) {
    while (pool.size() >= 2) {
      const AgentId initiator = pool.front();
      tick_create(reg, pool, cfg, now);
      std::erase_if(pool, [&](AgentId id) {
        const AgentState& a = reg.at(id);
        return id == initiator || !seeks_cluster(a) || a.phase != Phase::Create || acting_level(a) != level;
      });
    }
  }
}

// --- maintenance ------------------------------------------------------------

std::optional<AgentId> maintain_reassign(Registry& reg, AgentId head, const ProtocolConfig& cfg, double now,
                                         bool forced) {
  const ClusterToken& t = reg.token_of(head);
  std::vector<AgentId> candidates;
  if (t.level == 1) {
    for (AgentId m : t.members) {
      if (m != head && reg.contains(m) && !reg.at(m).token) candidates.push_back(m);
    }
    std::sort(candidates.begin(), candidates.end());
  } else {
    candidates = idle_descendants(reg, head);
    std::erase(candidates, head);
  }
  const Vec3 c = member_centroid(reg, t);
  auto best = nearest(reg, candidates, c);
  if (!best) {
    if (forced) destroy_token(reg, head, cfg, now);
    return std::nullopt;
  }
  if (!forced && !(distance(reg.at(*best).position, c) < distance(reg.at(head).position, c))) return std::nullopt;
  pass_token(reg, head, *best, cfg, now);
  return best;
}

int maintain_transfer(Registry& reg, AgentId head, const ProtocolConfig& cfg, double /*now*/) {
  const ClusterToken& t = reg.token_of(head);
  if (t.higher_head == kNoAgent) return 0;
  const int level = t.level;
  std::vector<AgentId> leaving;
  for (AgentId m : t.members) {
    if (m != head && distance(reg.at(m).position, reg.at(head).position) > cfg.threshold(level)) leaving.push_back(m);
  }
  std::sort(leaving.begin(), leaving.end());

  int moved = 0;
  for (AgentId m : leaving) {
    const ClusterToken& cur = reg.token_of(head);
    if (!has_member(cur, m) || cur.members.size() <= 1) continue;
    const Vec3 pm = reg.at(m).position;
    const double d_now = distance(pm, reg.at(head).position);
    AgentId asked = cur.higher_head;
    bool done = false;
    for (int depth = 1; depth <= 1 + cfg.max_escalation && asked != kNoAgent && !done; ++depth) {
      std::vector<AgentId> options;
      for (AgentId s : heads_below(reg, asked, depth)) {
        if (s == head) continue;
        const ClusterToken& st = reg.token_of(s);
        if (st.level != level || static_cast<int>(st.members.size()) >= cfg.max_cluster_size) continue;
        if (distance(reg.at(s).position, pm) < d_now) options.push_back(s);
      }
      std::stable_sort(options.begin(), options.end(), [&](AgentId l, AgentId r) {
        const double dl = distance(reg.at(l).position, pm);
        const double dr = distance(reg.at(r).position, pm);
        return dl < dr || (dl == dr && l < r);
      });
      for (AgentId s : options) {
        const auto before = rule3_failures(reg);
        const LinkSnapshot snap = snapshot(reg);
        move_member(reg, m, head, s, level);
        if (introduces_rule3_failure(reg, before)) {
          restore(reg, snap);
          continue;
        }
        ++moved;
        done = true;
        break;
      }
      const AgentState* up = reg.find(asked);
      asked = (up && up->token) ? up->token->higher_head : kNoAgent;
    }
  }
  return moved;
}

std::optional<AgentId> maintain_split(Registry& reg, AgentId head, const ProtocolConfig& cfg, double now) {
  const ClusterToken& t = reg.token_of(head);
  if (static_cast<int>(t.members.size()) < cfg.max_cluster_size) return std::nullopt;
  const int level = t.level;
  const bool boss = t.higher_head == kNoAgent;
  // Without room above, the new cluster starts out unattached and looks for
  // a higher cluster through the join/create phases.
  const bool attach = !boss && static_cast<int>(reg.token_of(t.higher_head).members.size()) < cfg.max_cluster_size;
  const auto head_anchor = anchor_of(reg, head, head);
  if (!head_anchor) return std::nullopt;

  std::vector<AgentId> candidates;
  std::map<AgentId, AgentId> anchor;
  for (AgentId id : idle_descendants(reg, head)) {
    auto an = anchor_of(reg, head, id);
    if (!an || *an == *head_anchor) continue;
    anchor[id] = *an;
    candidates.push_back(id);
  }
  const Vec3 c = member_centroid(reg, t);
  auto new_head = nearest(reg, candidates, c);
  if (!new_head) return std::nullopt;

  std::optional<AgentId> lift;
  if (boss) {
    auto idle = idle_descendants(reg, head);
    std::erase(idle, *new_head);
    lift = nearest(reg, idle, c);
  }

  const auto before = rule3_failures(reg);
  const LinkSnapshot snap = snapshot(reg);

  const AgentId new_anchor = anchor.at(*new_head);
  const Vec3 ph = reg.at(head).position;
  const Vec3 pn = reg.at(*new_head).position;
  std::vector<AgentId> stay;
  std::vector<AgentId> go;
  for (AgentId m : t.members) {
    if (m == *head_anchor) {
      stay.push_back(m);
    } else if (m == new_anchor) {
      go.push_back(m);
    } else {
      const Vec3 pm = reg.at(m).position;
      (distance(pm, pn) < distance(pm, ph) ? go : stay).push_back(m);
    }
  }

  ClusterToken& kept = reg.token_of(head);
  kept.members = stay;
  ClusterToken split;
  split.level = level;
  split.head_id = *new_head;
  split.higher_head = attach ? kept.higher_head : kNoAgent;
  split.members = go;
  split.last_higher_update = kept.last_higher_update;
  for (AgentId m : go) {
    if (level == 1) {
      reg.at(m).level1_head = *new_head;
    } else {
      reg.token_of(m).higher_head = *new_head;
    }
  }
  if (attach) reg.token_of(kept.higher_head).members.push_back(*new_head);
  reg.at(*new_head).token = std::move(split);
  if (!boss && !attach) start_join_phase(reg.at(*new_head), cfg, now);

  if (boss && !lift) {
    // Nobody left to head a level above: the two clusters go on as separate
    // trees until a create phase finds them an idle head.
    start_join_phase(reg.at(*new_head), cfg, now);
  } else if (boss) {
    ClusterToken top;
    top.level = level + 1;
    top.head_id = *lift;
    top.members = {head, *new_head};
    reg.token_of(head).higher_head = *lift;
    reg.token_of(*new_head).higher_head = *lift;
    AgentState& l = reg.at(*lift);
    l.token = std::move(top);
    start_join_phase(l, cfg, now);
  }

  if (introduces_rule3_failure(reg, before)) {
    restore(reg, snap);
    return std::nullopt;
  }
  return new_head;
}

bool maintain_assimilate(Registry& reg, AgentId head, const ProtocolConfig& cfg, double /*now*/) {
  const ClusterToken& t = reg.token_of(head);
  if (static_cast<int>(t.members.size()) > cfg.assimilation_threshold || t.higher_head == kNoAgent) return false;
  const AgentId higher = t.higher_head;
  const int level = t.level;
  std::vector<AgentId> siblings;
  for (AgentId s : reg.token_of(higher).members) {
    if (s != head && reg.contains(s) && reg.at(s).token && reg.at(s).token->level == level) siblings.push_back(s);
  }
  if (siblings.empty()) return false;
  std::sort(siblings.begin(), siblings.end());

  // A sibling may only take members as long as it stays below capacity.
  std::map<AgentId, int> room;
  for (AgentId s : siblings) room[s] = cfg.max_cluster_size - 1 - static_cast<int>(reg.token_of(s).members.size());
  std::vector<std::pair<AgentId, AgentId>> plan;
  for (AgentId m : t.members) {
    std::vector<AgentId> open;
    for (AgentId s : siblings) {
      if (room[s] > 0) open.push_back(s);
    }
    auto target = nearest(reg, open, reg.at(m).position);
    if (!target) return false;
    --room[*target];
    plan.emplace_back(m, *target);
  }

  const auto before = rule3_failures(reg);
  const LinkSnapshot snap = snapshot(reg);
  for (const auto& [m, s] : plan) move_member(reg, m, head, s, level);
  erase_member(reg.token_of(higher), head);
  reg.at(head).token.reset();
  if (introduces_rule3_failure(reg, before)) {
    restore(reg, snap);
    return false;
  }
  return true;
}

bool maintain_demote(Registry& reg, AgentId boss, const ProtocolConfig& cfg, double now) {
  const ClusterToken& t = reg.token_of(boss);
  if (t.higher_head != kNoAgent || t.members.size() != 1) return false;
  destroy_token(reg, boss, cfg, now);
  return true;
}

void maintenance_round(Registry& reg, const ProtocolConfig& cfg, double now) {
  for (AgentId id : reg.head_ids()) {
    const AgentState* a = reg.find(id);
    if (!a || !a->token) continue;
    AgentId cur = id;
    if (auto passed = maintain_reassign(reg, cur, cfg, now)) cur = *passed;
    maintain_transfer(reg, cur, cfg, now);
    maintain_split(reg, cur, cfg, now);
    if (reg.at(cur).token) maintain_assimilate(reg, cur, cfg, now);
    if (reg.at(cur).token) maintain_demote(reg, cur, cfg, now);
  }
}

void destroy_token(Registry& reg, AgentId head, const ProtocolConfig& cfg, double now) {
  AgentState& h = reg.at(head);
  if (!h.token) return;
  const ClusterToken t = std::move(*h.token);
  h.token.reset();
  std::vector<AgentId> orphans;
  for (AgentId m : t.members) {
    AgentState* ma = reg.find(m);
    if (!ma) continue;
    if (t.level == 1) {
      if (ma->level1_head == head) ma->level1_head = kNoAgent;
    } else if (ma->token && ma->token->higher_head == head) {
      ma->token->higher_head = kNoAgent;
    }
    orphans.push_back(m);
  }
  if (t.higher_head != kNoAgent) {
    if (AgentState* up = reg.find(t.higher_head); up && up->token) {
      erase_member(*up->token, head);
      if (up->token->members.empty()) destroy_token(reg, t.higher_head, cfg, now);
    }
  }
  for (AgentId m : orphans) {
    AgentState* ma = reg.find(m);
    if (!ma) continue;
    if (ma->token && ma->level1_head == kNoAgent) {
      repair_level1_membership(reg, m, cfg, now);
    } else if (seeks_cluster(*ma)) {
      start_join_phase(*ma, cfg, now);
    }
  }
  repair_rule3(reg, cfg, now);
}

void handle_despawn(Registry& reg, AgentId id, const ProtocolConfig& cfg, double now) {
  if (!reg.contains(id)) return;
  if (reg.at(id).token) maintain_reassign(reg, id, cfg, now, /*forced=*/true);
  AgentState& a = reg.at(id);
  const AgentId h = a.level1_head;
  if (h != kNoAgent && h != id && reg.contains(h) && reg.at(h).token) {
    ClusterToken& t = reg.token_of(h);
    erase_member(t, id);
    if (t.members.empty()) destroy_token(reg, h, cfg, now);
  }
  reg.remove(id);
}

}  // namespace mlc
