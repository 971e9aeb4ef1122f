// Server-side query planning and the registration pipeline, plus the
// gateway-side state machine: local evaluation, continuous sampling jobs,
// event subscriptions, and the per-gateway history store.
//
// Everything here is a pure state machine driven by delivered messages and
// timer events; the simulator (simnet) owns the clock and the delivery
// order.
#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "cdms/cql.hpp"
#include "cdms/matcher.hpp"
#include "cdms/messages.hpp"
#include "cdms/model.hpp"
#include "cdms/overlay.hpp"
#include "cdms/schema_xml.hpp"

namespace cdms::engine {

// ---------------------------------------------------------------------------
// query plan

// Fixed two-operator shape: Project over Scan. The WHERE predicate lives
// inside the Scan and is evaluated at the gateways, never server-side.
struct ScanNode {
  std::string domain;
  Predicate predicate;
  std::vector<std::string> projection;
  int ttl = 1;
  bool continuous = false;
  bool subscribe = false;
  std::int64_t sample_period_ms = 0;
  std::int64_t lifetime_ms = -1;  // -1 = unbounded
};

struct QueryPlan {
  std::vector<std::string> project;
  ScanNode scan;
};

inline QueryPlan plan(const cql::QueryAst& q) {
  QueryPlan p;
  p.project = q.projection;
  p.scan.domain = q.domain;
  p.scan.predicate = q.predicate;
  p.scan.projection = q.projection;
  p.scan.ttl = q.ttl;
  p.scan.continuous = q.continuous;
  p.scan.subscribe = q.kind == cql::QueryKind::Subscribe;
  if (q.sample_period) p.scan.sample_period_ms = q.sample_period->ms;
  if (q.lifetime) p.scan.lifetime_ms = q.lifetime->ms;
  return p;
}

// ---------------------------------------------------------------------------
// timing

struct PhaseTiming {
  std::vector<std::pair<std::string, double>> spans;

  void add(std::string label, double ms) { spans.emplace_back(std::move(label), ms); }
  double total() const {
    double sum = 0;
    for (const auto& [label, ms] : spans) sum += ms;
    return sum;
  }
  double span(std::string_view label) const {
    for (const auto& [l, ms] : spans)
      if (l == label) return ms;
    return 0;
  }
};

// simulated-ms processing costs; network latency is sampled separately
struct Costs {
  double parse = 1.0;
  double match_per_attr = 0.1;
  double sc_per_cluster = 2.0;
  double space_lookup = 0.2;
  double cluster_lookup = 0.5;
  double eval = 0.5;
};

using LatencyFn = std::function<double()>;

// ---------------------------------------------------------------------------
// server state

struct RegisteredPeer {
  PeerId peer;
  std::string address;
  LocalSchema local_schema;
  matcher::SchemaMapping mapping;
};

struct Collector {
  std::uint64_t query_id = 0;
  QueryPlan query_plan;
  std::string entry_attribute;
  double opened_at = 0;
  double injected_at = 0;
  double last_activity = 0;
  double deadline = std::numeric_limits<double>::infinity();  // continuous/subscribe end
  bool closed = false;
  double closed_at = 0;
  std::vector<msg::Result> results;
  std::vector<msg::Notify> notifies;
  std::set<PeerId> responded;
  std::set<PeerId> truncated;  // streams cut short by a departed peer
  std::uint64_t flood_messages = 0;
  std::uint64_t evaluations = 0;
  PhaseTiming timing;
};

struct ServerState {
  std::vector<GlobalSchema> globals;
  std::map<std::string, overlay::DomainRing> rings;  // keys = global schema names
  matcher::MatcherState match;
  std::map<PeerId, RegisteredPeer> peers;
  std::map<std::uint64_t, Collector> active;
  std::uint64_t next_query_id = 1;

  GlobalSchema* find_global(std::string_view domain) {
    for (auto& g : globals)
      if (g.domain_name == domain) return &g;
    return nullptr;
  }
};

// ---------------------------------------------------------------------------
// registration pipeline

struct RegisterOutcome {
  msg::RegisterAck ack;
  PhaseTiming timing;
  overlay::JoinReport join_report;
  bool conflict = false;
  std::vector<std::string> appended;  // attributes added to the global schema
};

class RegistrationError : public CdmsError {
public:
  using CdmsError::CdmsError;
};

// parse request -> schema matching -> SC list -> cluster joins. Pending
// match candidates count as matches and go to the review queue; rejecting
// them later rewrites the mapping (apply_review_decision).
inline RegisterOutcome register_space(ServerState& server, const std::string& template_xml,
                                      const std::string& address, PeerId assigned,
                                      std::mt19937_64& topo_rng, const Costs& costs,
                                      const LatencyFn& latency, int degree) {
  RegisterOutcome out;

  LocalSchema local = parse_schema_template(template_xml);  // throws on malformed XML
  auto violations = validate_schema(local);
  if (!violations.empty()) {
    std::string what = "invalid schema template:";
    for (const auto& v : violations) what += std::string(" ") + to_string(v.code);
    throw RegistrationError(what);
  }
  out.timing.add("registration_request", latency() + costs.parse);

  bool already_registered = server.peers.count(assigned) > 0;
  auto proposal = matcher::match_schema(local, server.globals, server.match);
  auto integration =
      matcher::integrate_async(server.globals, server.match, proposal, !already_registered);
  integration.mapping.peer = assigned;
  out.conflict = integration.conflict_flagged;
  out.timing.add("schema_matching",
                 costs.match_per_attr * static_cast<double>(local.attributes.size()));

  const std::string& domain = integration.mapping.global_domain;
  GlobalSchema* global = server.find_global(domain);
  if (!global) throw CdmsError("global schema missing after integration: " + domain);
  overlay::DomainRing& ring = server.rings[domain];
  overlay::ensure_ring(ring, *global);

  std::vector<std::string> cluster_attrs;
  cluster_attrs.reserve(integration.mapping.pairs.size());
  for (const auto& [g, l] : integration.mapping.pairs) cluster_attrs.push_back(g);
  out.timing.add("return_sc_list",
                 costs.sc_per_cluster * static_cast<double>(cluster_attrs.size()) + latency());

  out.join_report = overlay::join(ring, assigned, cluster_attrs, topo_rng, degree);
  double connect_span = 0;
  for (const auto& [attr, links] : out.join_report.joined)
    if (!links.empty()) connect_span = std::max(connect_span, 2 * latency());
  out.timing.add("p2p_connection_establishment", connect_span);

  out.ack.sc_list.reserve(cluster_attrs.size());
  for (const auto& attr : cluster_attrs) {
    auto head = ring.csg.directory.find(attr);
    out.ack.sc_list.push_back(
        {domain, attr, head == ring.csg.directory.end() ? assigned : head->second});
  }
  out.ack.mapping = integration.mapping;
  out.appended = std::move(integration.appended);

  server.peers[assigned] =
      RegisteredPeer{assigned, address, std::move(local), std::move(integration.mapping)};
  return out;
}

struct UpdateReport {
  std::vector<std::string> joined_clusters;  // global attribute names
  std::vector<std::string> left_clusters;
  matcher::SchemaMapping mapping;
  overlay::JoinReport join_report;
};

// Incremental schema change: added attributes are matched into the peer's
// domain (new clusters spawn as the domain evolves), removed attributes
// trigger cluster departure, and the rewritten mapping is re-sent.
inline UpdateReport update_schema(ServerState& server, const PeerId& peer,
                                  const std::string& new_template_xml, std::mt19937_64& topo_rng,
                                  int degree) {
  auto pit = server.peers.find(peer);
  if (pit == server.peers.end()) throw CdmsError("unknown peer " + peer.address);
  RegisteredPeer& record = pit->second;

  LocalSchema fresh = parse_schema_template(new_template_xml);
  auto violations = validate_schema(fresh);
  if (!violations.empty()) throw RegistrationError("invalid schema template on update");

  const std::string& domain = record.mapping.global_domain;
  GlobalSchema* global = server.find_global(domain);
  overlay::DomainRing& ring = server.rings.at(domain);

  UpdateReport report;
  auto l2g = record.mapping.local_to_global();

  // removals first
  std::vector<std::pair<std::string, std::string>> kept;
  for (const auto& [g, l] : record.mapping.pairs) {
    if (fresh.find(l)) {
      kept.emplace_back(g, l);
      continue;
    }
    auto* cluster = ring.find_cluster(g);
    if (cluster && cluster->has_member(peer)) {
      overlay::RepairReport repair;
      overlay::purge_from_cluster(ring, *cluster, peer, repair);
    }
    report.left_clusters.push_back(g);
  }
  record.mapping.pairs = std::move(kept);

  // additions: match within the peer's domain only
  std::set<std::string> used_globals;
  for (const auto& [g, l] : record.mapping.pairs) used_globals.insert(g);
  for (const auto& attr : fresh.attributes) {
    if (l2g.count(attr.name)) continue;
    std::vector<std::pair<std::string, AttributeDef>> domain_attrs;
    for (const auto& def : global->attributes) domain_attrs.emplace_back(domain, def);
    auto candidates = matcher::match_attribute(attr, domain_attrs, server.match);
    std::string target;
    for (const auto& c : candidates) {
      if (used_globals.count(c.global_name)) continue;
      target = c.global_name;
      if (c.status == matcher::MatchStatus::Pending) {
        bool queued = std::any_of(server.match.review_queue.begin(),
                                  server.match.review_queue.end(),
                                  [&](const matcher::MatchCandidate& q) { return q.same_pair(c); });
        if (!queued) server.match.review_queue.push_back(c);
      }
      break;
    }
    if (target.empty())
      target = matcher::detail::place_unmatched(*global, attr, used_globals);
    used_globals.insert(target);
    record.mapping.pairs.emplace_back(target, attr.name);
    report.joined_clusters.push_back(target);
  }

  overlay::ensure_ring(ring, *global);
  auto join_report = overlay::join(ring, peer, report.joined_clusters, topo_rng, degree);
  record.local_schema = fresh;
  report.mapping = record.mapping;
  report.join_report = std::move(join_report);
  return report;
}

// ---------------------------------------------------------------------------
// gateway state

struct StoredRecord {
  double t_ms = 0;
  AttributeValue value;
};

class ContextStore {
public:
  void append(const std::string& attr, AttributeValue value, double t_ms) {
    auto& records = by_attr_[attr];
    if (!records.empty() && t_ms < records.back().t_ms)
      throw CdmsError("context store timestamps must be non-decreasing for " + attr);
    records.push_back({t_ms, std::move(value)});
  }

  // [start, end)
  std::vector<StoredRecord> range(const std::string& attr, double start, double end) const {
    std::vector<StoredRecord> out;
    auto it = by_attr_.find(attr);
    if (it == by_attr_.end()) return out;
    for (const auto& r : it->second)
      if (r.t_ms >= start && r.t_ms < end) out.push_back(r);
    return out;
  }

  size_t size(const std::string& attr) const {
    auto it = by_attr_.find(attr);
    return it == by_attr_.end() ? 0 : it->second.size();
  }

private:
  std::map<std::string, std::vector<StoredRecord>> by_attr_;
};

struct ContinuousJob {
  std::uint64_t query_id = 0;
  std::vector<std::string> projection_global;
  std::int64_t period_ms = 0;
  std::int64_t lifetime_ms = 0;
  double accepted_at = 0;
  std::int64_t emitted = 0;

  // sample at t=0 inclusive: floor(lifetime/period) + 1 pushes
  std::int64_t total_samples() const {
    if (period_ms <= 0) return 1;
    return lifetime_ms / period_ms + 1;
  }
};

struct Subscription {
  std::uint64_t query_id = 0;
  std::string event_local;
  double accepted_at = 0;
  std::int64_t lifetime_ms = -1;
  bool last_value = false;
};

struct PsgState {
  SpaceProfile profile;
  matcher::SchemaMapping mapping;
  overlay::PeerOverlayState net;
  ContextStore store;
  std::vector<ContinuousJob> jobs;
  std::vector<Subscription> subs;
  bool alive = true;
};

// Current value through the data-service abstraction: event attributes are
// deduced from their rule when one exists, everything else reads the data
// map.
inline std::optional<AttributeValue> current_value(const PsgState& psg,
                                                   const std::string& local_name) {
  const AttributeDef* def = psg.profile.schema.find(local_name);
  if (!def) return std::nullopt;
  if (def->is_event) {
    auto rule = psg.profile.event_rules.find(local_name);
    if (rule != psg.profile.event_rules.end()) {
      for (const auto& atom : rule->second.atoms) {
        auto it = psg.profile.data.find(atom.attribute);
        if (it == psg.profile.data.end()) return AttributeValue::boolean(false);
        try {
          if (!compare(it->second, atom.op, atom.literal)) return AttributeValue::boolean(false);
        } catch (const CdmsError&) {
          return AttributeValue::boolean(false);
        }
      }
      return AttributeValue::boolean(true);
    }
  }
  auto it = psg.profile.data.find(local_name);
  if (it == psg.profile.data.end()) return std::nullopt;
  return it->second;
}

// Local evaluation of a flooded request: the query is first converted to
// the local schema, then each atom runs against current values. An atom
// over a missing, unmapped, or private attribute is unsatisfied. Satisfied
// queries produce the projected tuple under global names, nulls for
// attributes the space cannot serve.
inline std::optional<std::vector<msg::ResultCell>> psg_evaluate(
    const PsgState& psg, const overlay::LookupRequest& request) {
  auto g2l = psg.mapping.global_to_local();
  for (const auto& atom : request.predicate.atoms) {
    auto mapped = g2l.find(atom.attribute);
    if (mapped == g2l.end()) return std::nullopt;  // unmapped -> unsatisfiable
    const std::string& local_name = mapped->second;
    const AttributeDef* def = psg.profile.schema.find(local_name);
    if (!def || def->is_private) return std::nullopt;
    auto value = current_value(psg, local_name);
    if (!value) return std::nullopt;
    try {
      if (!compare(*value, atom.op, atom.literal)) return std::nullopt;
    } catch (const CdmsError&) {
      return std::nullopt;
    }
  }
  std::vector<msg::ResultCell> tuple;
  for (const auto& name : request.projection) {
    msg::ResultCell cell{name, std::nullopt};
    auto mapped = g2l.find(name);
    if (mapped != g2l.end()) {
      const AttributeDef* def = psg.profile.schema.find(mapped->second);
      if (def && !def->is_private) {
        if (auto value = current_value(psg, mapped->second)) cell.value = std::move(*value);
      }
    }
    tuple.push_back(std::move(cell));
  }
  return tuple;
}

// One continuous-job sample: reads the projected values, appends them to
// the context store, and builds the RESULT push.
inline msg::Result continuous_sample(PsgState& psg, ContinuousJob& job, double now) {
  auto g2l = psg.mapping.global_to_local();
  msg::Result result;
  result.query_id = job.query_id;
  result.peer = psg.profile.peer;
  for (const auto& name : job.projection_global) {
    msg::ResultCell cell{name, std::nullopt};
    auto mapped = g2l.find(name);
    if (mapped != g2l.end()) {
      const AttributeDef* def = psg.profile.schema.find(mapped->second);
      if (def && !def->is_private) {
        if (auto value = current_value(psg, mapped->second)) {
          psg.store.append(mapped->second, *value, now);
          cell.value = std::move(*value);
        }
      }
    }
    result.tuple.push_back(std::move(cell));
  }
  job.emitted++;
  return result;
}

// Applies a data change and re-evaluates active subscriptions; a NOTIFY is
// produced for every event whose deduced value transitioned.
inline std::vector<msg::Notify> set_value(PsgState& psg, const std::string& local_attr,
                                          AttributeValue value, double now) {
  const AttributeDef* def = psg.profile.schema.find(local_attr);
  if (!def) throw CdmsError("unknown attribute " + local_attr);
  if (value.kind() != def->kind)
    throw KindMismatchError("attribute " + local_attr + " is " + to_string(def->kind));
  psg.profile.data[local_attr] = value;
  psg.store.append(local_attr, value, now);

  std::vector<msg::Notify> out;
  for (auto& sub : psg.subs) {
    auto current = current_value(psg, sub.event_local);
    bool v = current && current->kind() == Kind::Boolean && current->as_boolean();
    if (v != sub.last_value) {
      sub.last_value = v;
      out.push_back(msg::Notify{sub.query_id, psg.profile.peer, v, static_cast<std::int64_t>(now)});
    }
  }
  return out;
}

// All stored records for the attribute within [start, end), in time order.
inline std::vector<StoredRecord> history_query(const PsgState& psg, const std::string& local_attr,
                                               double start, double end) {
  if (!psg.profile.schema.find(local_attr)) throw CdmsError("unknown attribute " + local_attr);
  return psg.store.range(local_attr, start, end);
}

}  // namespace cdms::engine
