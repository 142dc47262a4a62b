#pragma once

// Multi-level clustering: per-agent state, cluster tokens, the decentralized
// join/create phases and the locally-centralized maintenance procedures run by
// cluster-heads.

#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mlc/belief_grid.hpp"
#include "mlc/types.hpp"

namespace mlc {

struct ProtocolConfig {
  int max_cluster_size = 8;
  double maintenance_period = 5.0;  // s
  int max_escalation = 1;           // additional levels a transfer request may climb
  int assimilation_threshold = 2;   // clusters with at most this many members get assimilated
  double level1_threshold = 100.0;  // m
  double join_period = 1.0;         // P_j, s
  double create_period = 2.0;       // P_c, s
  double poll_period = 0.5;         // s
  double discovery_range = std::numeric_limits<double>::infinity();  // m

  /// Vicinity radius of a level-x cluster: doubles with every level.
  double threshold(int level) const;
  void validate() const;
};

struct ClusterToken {
  int level = 1;
  AgentId head_id = kNoAgent;
  AgentId higher_head = kNoAgent;  // 0 when the owner is the boss of its tree
  std::vector<AgentId> members;
  double last_higher_update = -std::numeric_limits<double>::infinity();
  double last_upstream = -std::numeric_limits<double>::infinity();
};

enum class Phase { Join, Create };

struct NeighborInfo {
  AgentId id = kNoAgent;
  Vec3 position;
  int head_level = 0;  // level of the owned token, 0 for idle agents
  bool full = false;
  bool boss = false;
};

struct AgentState {
  AgentId id = kNoAgent;
  Vec3 position;
  Vec3 velocity;
  double battery_remaining = 0.0;  // s
  BeliefPatch observation;         // O_i
  BeliefGrid total_belief;         // B_i
  AgentId level1_head = kNoAgent;  // h_i
  std::optional<ClusterToken> token;
  Phase phase = Phase::Join;
  double phase_deadline = 0.0;
  std::vector<NeighborInfo> neighbors;

  // Motion bookkeeping.
  Vec3 target;
  bool returning = false;
  CellRect fov;
  double last_upstream = -std::numeric_limits<double>::infinity();
};

/// All active agents, ordered by id.
class Registry {
 public:
  AgentState& add(AgentState agent);
  void remove(AgentId id);

  AgentState* find(AgentId id);
  const AgentState* find(AgentId id) const;
  AgentState& at(AgentId id);
  const AgentState& at(AgentId id) const;
  bool contains(AgentId id) const { return agents_.count(id) != 0; }

  /// Token owned by `head`; throws ProtocolError if there is none.
  ClusterToken& token_of(AgentId head);
  const ClusterToken& token_of(AgentId head) const;

  std::size_t size() const { return agents_.size(); }
  bool empty() const { return agents_.empty(); }
  std::vector<AgentId> ids() const;
  std::vector<AgentId> head_ids() const;

  auto begin() { return agents_.begin(); }
  auto end() { return agents_.end(); }
  auto begin() const { return agents_.begin(); }
  auto end() const { return agents_.end(); }

 private:
  std::map<AgentId, AgentState> agents_;
};

// --- tree queries -----------------------------------------------------------

/// Agents in need of decentralized clustering: unclustered idle agents and
/// heads without a higher-level head.
bool seeks_cluster(const AgentState& a);
/// Level an agent acts on during join/create: 0 for idle, token level otherwise.
int acting_level(const AgentState& a);
bool is_boss(const AgentState& a);
/// Level-1 members of the sub-tree of `head`'s token.
std::vector<AgentId> subtree_agents(const Registry& reg, AgentId head);
/// Sub-tree agents owning no token.
std::vector<AgentId> idle_descendants(const Registry& reg, AgentId head);
/// Mean position of the token's members.
Vec3 member_centroid(const Registry& reg, const ClusterToken& token);
/// Boss of the tree containing `id` (follows h_i, then higher heads).
AgentId boss_of(const Registry& reg, AgentId id);
/// True if `head`'s level-1 cluster lies inside its own sub-tree.
bool rule3_holds(const Registry& reg, AgentId head);

enum class Rule { OneToken = 1, Level1Membership = 2, SubtreeMembership = 3, MembershipBound, LinkConsistency, Cycle };

struct RuleViolation {
  Rule rule;
  AgentId agent;
  std::string detail;
};

std::string to_string(const RuleViolation& v);

/// Every rule or structural violation present in the registry.
std::vector<RuleViolation> check_rules(const Registry& reg, const ProtocolConfig& cfg);

// --- decentralized phases ---------------------------------------------------

/// Rebuilds the agent's neighbour table from "hello" broadcasts within the discovery range.
void tick_discovery(Registry& reg, AgentId id, const ProtocolConfig& cfg);
/// Sets `id` into the start of a Join phase.
void start_join_phase(AgentState& a, const ProtocolConfig& cfg, double now);
/// Toggles Join/Create when the phase deadline passed.
void advance_phase(AgentState& a, const ProtocolConfig& cfg, double now);
/// Join request of an agent in its Join phase. Returns the head joined.
std::optional<AgentId> tick_join(Registry& reg, AgentId id, const ProtocolConfig& cfg, double now);
/// Cluster creation among Create-phase candidates of one level. Returns the new head.
std::optional<AgentId> tick_create(Registry& reg, std::span<const AgentId> candidates,
                                   const ProtocolConfig& cfg, double now);
/// One polling round: discovery, phase toggles, joins then creates.
void poll_clustering(Registry& reg, const ProtocolConfig& cfg, double now);

// --- maintenance ------------------------------------------------------------

/// Passes the token to a better-placed idle sub-tree member. With `forced` the
/// token is always passed (head despawn) and destroyed if no candidate exists.
/// Returns the new head when the token was passed.
std::optional<AgentId> maintain_reassign(Registry& reg, AgentId head, const ProtocolConfig& cfg, double now, bool forced = false);
/// Moves members that left the head's vicinity to a closer sibling cluster.
/// Returns the number of members transferred.
int maintain_transfer(Registry& reg, AgentId head, const ProtocolConfig& cfg, double now);
/// Splits a full cluster. Returns the head of the new same-level cluster.
std::optional<AgentId> maintain_split(Registry& reg, AgentId head, const ProtocolConfig& cfg, double now);
bool maintain_assimilate(Registry& reg, AgentId head, const ProtocolConfig& cfg, double now);
bool maintain_demote(Registry& reg, AgentId boss, const ProtocolConfig& cfg, double now);
/// All heads in ascending id order, each running the five procedures in order.
void maintenance_round(Registry& reg, const ProtocolConfig& cfg, double now);

/// Token destruction: members are orphaned (level-1 members lose h_i, higher
/// level members lose their higher head) and start a Join phase.
void destroy_token(Registry& reg, AgentId head, const ProtocolConfig& cfg, double now);
/// Removes a despawning agent, passing on or destroying its token first.
void handle_despawn(Registry& reg, AgentId id, const ProtocolConfig& cfg, double now);

/// (child, parent, level) edges of the membership forest.
struct TreeEdge {
  AgentId child;
  AgentId parent;
  int level;
};
std::vector<TreeEdge> tree_edges(const Registry& reg);

}  // namespace mlc
