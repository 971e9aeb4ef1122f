// Semantic P2P layer: one ring per context domain, one peer cluster per
// attribute, a CSG entry cluster heading the ring, and Gnutella-0.4-style
// flooding (TTL decrement + duplicate suppression) inside a cluster.
#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "cdms/model.hpp"

namespace cdms::overlay {

// P2P network of every space sharing one attribute. The head peer carries
// the ring link and serves as the flood entry point.
struct SemanticCluster {
  std::string attribute;
  std::set<PeerId> members;
  std::vector<PeerId> members_order;  // join order; the sampling population
  std::optional<PeerId> head;
  std::map<PeerId, std::vector<PeerId>> adjacency;  // link order

  bool has_member(const PeerId& p) const { return members.count(p) > 0; }

  const std::vector<PeerId>& neighbors(const PeerId& p) const {
    static const std::vector<PeerId> empty;
    auto it = adjacency.find(p);
    return it == adjacency.end() ? empty : it->second;
  }

  bool has_edge(const PeerId& a, const PeerId& b) const {
    const auto& ns = neighbors(a);
    return std::find(ns.begin(), ns.end(), b) != ns.end();
  }
};

struct CsgState {
  std::string domain;
  std::map<std::string, PeerId> directory;  // attribute -> current cluster head
  std::vector<std::string> pending_log;     // clusters spawned after ring creation
};

struct DomainRing {
  std::string domain;
  CsgState csg;                           // position 0 of the ring
  std::vector<SemanticCluster> clusters;  // ring order = global-schema attribute order

  SemanticCluster* find_cluster(std::string_view attribute) {
    for (auto& c : clusters)
      if (c.attribute == attribute) return &c;
    return nullptr;
  }
  const SemanticCluster* find_cluster(std::string_view attribute) const {
    for (const auto& c : clusters)
      if (c.attribute == attribute) return &c;
    return nullptr;
  }
};

// Idempotent: creates the CSG plus one empty cluster per attribute on the
// first call; later calls append clusters for attributes added since,
// preserving the existing order.
inline void ensure_ring(DomainRing& ring, const GlobalSchema& domain) {
  bool fresh = ring.clusters.empty() && ring.domain.empty();
  ring.domain = domain.domain_name;
  ring.csg.domain = domain.domain_name;
  for (const auto& attr : domain.attributes) {
    if (ring.find_cluster(attr.name)) continue;
    ring.clusters.push_back(SemanticCluster{attr.name});
    if (!fresh) ring.csg.pending_log.push_back(attr.name);
  }
}

inline DomainRing make_ring(const GlobalSchema& domain) {
  DomainRing ring;
  ensure_ring(ring, domain);
  return ring;
}

struct JoinReport {
  // attribute -> neighbors linked at join time
  std::vector<std::pair<std::string, std::vector<PeerId>>> joined;
};

namespace detail {

// uniform sample of k distinct members, deterministic for a given rng state
inline std::vector<PeerId> sample_members(const std::vector<PeerId>& population, size_t k,
                                          std::mt19937_64& rng) {
  std::vector<PeerId> out;
  if (population.empty()) return out;
  k = std::min(k, population.size());
  std::set<size_t> picked;
  while (out.size() < k) {
    size_t j = rng() % population.size();
    if (picked.insert(j).second) out.push_back(population[j]);
  }
  return out;
}

inline void link(SemanticCluster& cluster, const PeerId& a, const PeerId& b) {
  if (a == b || cluster.has_edge(a, b)) return;
  cluster.adjacency[a].push_back(b);
  cluster.adjacency[b].push_back(a);
}

}  // namespace detail

// The peer joins exactly the clusters for attributes it has; in each it
// links to min(degree, existing members) uniformly sampled peers. The first
// member of a cluster becomes its head.
inline JoinReport join(DomainRing& ring, const PeerId& peer,
                       const std::vector<std::string>& attrs, std::mt19937_64& rng, int degree) {
  JoinReport report;
  for (const auto& attr : attrs) {
    SemanticCluster* cluster = ring.find_cluster(attr);
    if (!cluster) throw CdmsError("no cluster for attribute '" + attr + "' in " + ring.domain);
    if (cluster->has_member(peer)) continue;  // re-join is a no-op
    auto links = detail::sample_members(cluster->members_order, static_cast<size_t>(degree), rng);
    cluster->members.insert(peer);
    cluster->members_order.push_back(peer);
    cluster->adjacency.emplace(peer, std::vector<PeerId>{});
    for (const auto& other : links) detail::link(*cluster, peer, other);
    if (!cluster->head) {
      cluster->head = peer;
      ring.csg.directory[attr] = peer;
    }
    report.joined.emplace_back(attr, std::move(links));
  }
  return report;
}

struct RepairReport {
  std::vector<std::string> clusters_left;
  std::vector<std::pair<std::string, PeerId>> new_heads;
  std::vector<std::string> emptied;
};

// remove the peer from one cluster, fixing head and directory
inline void purge_from_cluster(DomainRing& ring, SemanticCluster& cluster, const PeerId& peer,
                               RepairReport& report) {
  if (!cluster.has_member(peer)) return;
  cluster.members.erase(peer);
  cluster.members_order.erase(
      std::find(cluster.members_order.begin(), cluster.members_order.end(), peer));
  auto it = cluster.adjacency.find(peer);
  if (it != cluster.adjacency.end()) {
    for (const auto& n : it->second) {
      auto nit = cluster.adjacency.find(n);
      if (nit != cluster.adjacency.end())
        std::erase(nit->second, peer);
    }
    cluster.adjacency.erase(it);
  }
  report.clusters_left.push_back(cluster.attribute);
  if (cluster.head && *cluster.head == peer) {
    if (cluster.members.empty()) {
      cluster.head.reset();
      ring.csg.directory.erase(cluster.attribute);
      report.emptied.push_back(cluster.attribute);
    } else {
      cluster.head = *cluster.members.begin();  // lowest id takes over
      ring.csg.directory[cluster.attribute] = *cluster.head;
      report.new_heads.emplace_back(cluster.attribute, *cluster.head);
    }
  }
}

// Full departure: memberships purged everywhere, heads handed to the lowest
// remaining id, CSG directory updated.
inline RepairReport leave(DomainRing& ring, const PeerId& peer) {
  RepairReport report;
  for (auto& cluster : ring.clusters) purge_from_cluster(ring, cluster, peer, report);
  return report;
}

struct LookupRequest {
  std::uint64_t query_id = 0;
  std::string domain;
  Predicate predicate;
  std::vector<std::string> projection;
  int ttl = 1;
  std::string origin;  // server reply address
  bool subscribe = false;
  bool continuous = false;
  std::int64_t sample_period_ms = 0;
  std::int64_t lifetime_ms = -1;  // subscriptions/continuous; -1 = unbounded
};

// Per-peer overlay state: neighbor sets per cluster, the Gnutella duplicate
// cache, and liveness bookkeeping per neighbor.
struct PeerOverlayState {
  std::map<std::string, std::vector<PeerId>> neighbors;  // attribute -> peers, link order
  std::map<PeerId, int> missed_pings;  // only neighbors currently unresponsive

  static constexpr size_t kSeenCapacity = 4096;
  std::deque<std::uint64_t> seen_order;
  std::unordered_set<std::uint64_t> seen;

  bool saw(std::uint64_t query_id) const { return seen.count(query_id) > 0; }

  void remember(std::uint64_t query_id) {
    if (seen.insert(query_id).second) {
      seen_order.push_back(query_id);
      if (seen_order.size() > kSeenCapacity) {  // FIFO eviction
        seen.erase(seen_order.front());
        seen_order.pop_front();
      }
    }
  }

  void add_neighbor(const std::string& attr, const PeerId& p) {
    auto& ns = neighbors[attr];
    if (std::find(ns.begin(), ns.end(), p) == ns.end()) ns.push_back(p);
  }

  void drop_neighbor(const PeerId& p) {
    for (auto& [attr, ns] : neighbors) std::erase(ns, p);
    missed_pings.erase(p);
  }

  void drop_neighbor_in(const std::string& attr, const PeerId& p) {
    auto it = neighbors.find(attr);
    if (it != neighbors.end()) std::erase(it->second, p);
  }
};

// One ping round against the current neighbor set: unresponsive neighbors
// accumulate misses, responsive ones reset. Returns the neighbors whose
// miss count reached the limit; the caller drops them and reports upstream.
inline std::vector<PeerId> record_ping_round(PeerOverlayState& state,
                                             const std::set<PeerId>& unresponsive,
                                             int miss_limit) {
  std::set<PeerId> all;
  for (const auto& [attr, ns] : state.neighbors) all.insert(ns.begin(), ns.end());
  std::vector<PeerId> dead;
  for (const auto& n : all) {
    if (unresponsive.count(n)) {
      if (++state.missed_pings[n] >= miss_limit) dead.push_back(n);
    } else {
      state.missed_pings.erase(n);
    }
  }
  return dead;
}

// Walks the ring from the CSG in link order and returns the first cluster
// whose attribute appears in the projection list. Ring hops do not consume
// TTL. Null means no cluster serves the projection (zero results).
inline const SemanticCluster* route_to_entry(const DomainRing& ring,
                                             const LookupRequest& request) {
  for (const auto& cluster : ring.clusters)
    for (const auto& name : request.projection)
      if (cluster.attribute == name) return &cluster;
  return nullptr;
}

struct FloodStep {
  bool evaluate = false;  // deliver to local evaluation
  std::vector<std::pair<PeerId, LookupRequest>> forwards;
};

// One Gnutella hop: duplicates are dropped; otherwise evaluate locally and,
// while TTL allows, forward with ttl-1 to every cluster neighbor but the
// sender.
inline FloodStep flood_step(PeerOverlayState& state, const std::string& cluster_attr,
                            const LookupRequest& request, const std::optional<PeerId>& from) {
  FloodStep step;
  if (request.ttl < 1) return step;
  if (state.saw(request.query_id)) return step;
  state.remember(request.query_id);
  step.evaluate = true;
  if (request.ttl <= 1) return step;
  auto it = state.neighbors.find(cluster_attr);
  if (it == state.neighbors.end()) return step;
  LookupRequest forwarded = request;
  forwarded.ttl = request.ttl - 1;
  for (const auto& n : it->second) {
    if (from && n == *from) continue;
    step.forwards.emplace_back(n, forwarded);
  }
  return step;
}

// Exact reach oracle: peers within ttl-1 edge hops of the entry, entry
// included, so bfs_reachable(ttl=1) == {entry}.
inline std::set<PeerId> bfs_reachable(const SemanticCluster& cluster, const PeerId& entry,
                                      int ttl) {
  std::set<PeerId> reached;
  if (ttl < 1 || !cluster.has_member(entry)) return reached;
  std::queue<std::pair<PeerId, int>> frontier;
  reached.insert(entry);
  frontier.emplace(entry, 0);
  while (!frontier.empty()) {
    auto [peer, depth] = frontier.front();
    frontier.pop();
    if (depth + 1 > ttl - 1) continue;
    for (const auto& n : cluster.neighbors(peer)) {
      if (reached.insert(n).second) frontier.emplace(n, depth + 1);
    }
  }
  return reached;
}

inline bool connected(const SemanticCluster& cluster) {
  if (cluster.members.size() <= 1) return true;
  auto all = bfs_reachable(cluster, *cluster.members.begin(),
                           static_cast<int>(cluster.members.size()) + 1);
  return all.size() == cluster.members.size();
}

// structural checks used by tests and world inspection
struct RingIssue {
  std::string cluster;
  std::string what;
};

inline std::vector<RingIssue> audit_ring(const DomainRing& ring) {
  std::vector<RingIssue> issues;
  for (const auto& cluster : ring.clusters) {
    if (std::set<PeerId>(cluster.members_order.begin(), cluster.members_order.end()) !=
        cluster.members)
      issues.push_back({cluster.attribute, "member order list out of sync"});
    if (!cluster.members.empty()) {
      if (!cluster.head) {
        issues.push_back({cluster.attribute, "missing head"});
      } else if (!cluster.has_member(*cluster.head)) {
        issues.push_back({cluster.attribute, "head is not a member"});
      }
      auto dir = ring.csg.directory.find(cluster.attribute);
      if (dir == ring.csg.directory.end() || !(cluster.head && dir->second == *cluster.head))
        issues.push_back({cluster.attribute, "directory out of date"});
    }
    for (const auto& [peer, nbrs] : cluster.adjacency) {
      if (!cluster.has_member(peer)) {
        issues.push_back({cluster.attribute, "adjacency lists non-member " + peer.address});
        continue;
      }
      for (const auto& n : nbrs) {
        if (n == peer) issues.push_back({cluster.attribute, "self loop at " + peer.address});
        if (!cluster.has_member(n))
          issues.push_back({cluster.attribute, "edge to non-member " + n.address});
        else if (!cluster.has_edge(n, peer))
          issues.push_back({cluster.attribute, "asymmetric edge " + peer.address});
      }
    }
  }
  return issues;
}

}  // namespace cdms::overlay
