// World snapshots: one self-describing versioned JSON file so query and
// schema-review sessions can resume a built world. Snapshots are taken at
// quiescent points (no in-flight queries, jobs, or subscriptions); liveness
// ping cycles are re-armed on load.
#pragma once

#include <fstream>
#include <sstream>

#include "cdms/simnet.hpp"

namespace cdms::snapshot {

constexpr int kVersion = 1;
constexpr const char* kMagic = "cdms-world";

using nlohmann::json;

namespace detail {

inline json rng_to_json(const std::mt19937_64& rng) {
  std::ostringstream out;
  out << rng;
  return json(out.str());
}

inline void rng_from_json(const json& j, std::mt19937_64& rng) {
  std::istringstream in(j.get<std::string>());
  in >> rng;
  if (in.fail()) throw CdmsError("corrupt rng state in snapshot");
}

inline json config_to_json(const simnet::SimConfig& c) {
  return json{{"num_domains", c.num_domains},
              {"spaces_per_run", c.spaces_per_run},
              {"attrs_per_space", c.attrs_per_space},
              {"domain_attr_pool_size", c.domain_attr_pool_size},
              {"degree", c.degree},
              {"latency_model", c.latency_model},
              {"latency_fixed_ms", c.latency_fixed_ms},
              {"latency_min_ms", c.latency_min_ms},
              {"latency_max_ms", c.latency_max_ms},
              {"cost_parse_ms", c.cost_parse_ms},
              {"cost_match_per_attr_ms", c.cost_match_per_attr_ms},
              {"cost_sc_per_cluster_ms", c.cost_sc_per_cluster_ms},
              {"cost_space_lookup_ms", c.cost_space_lookup_ms},
              {"cost_cluster_lookup_ms", c.cost_cluster_lookup_ms},
              {"cost_eval_ms", c.cost_eval_ms},
              {"cost_result_ingest_ms", c.cost_result_ingest_ms},
              {"ttl_default", c.ttl_default},
              {"seed", c.seed},
              {"quiescence_ms", c.quiescence_ms},
              {"qualify_fraction", c.qualify_fraction},
              {"runs_per_point", c.runs_per_point},
              {"ping_period_ms", c.ping_period_ms},
              {"ping_miss_limit", c.ping_miss_limit},
              {"other_spaces_min", c.other_spaces_min},
              {"other_spaces_max", c.other_spaces_max}};
}

inline simnet::SimConfig config_from_json(const json& j) {
  simnet::SimConfig c;
  j.at("num_domains").get_to(c.num_domains);
  j.at("spaces_per_run").get_to(c.spaces_per_run);
  j.at("attrs_per_space").get_to(c.attrs_per_space);
  j.at("domain_attr_pool_size").get_to(c.domain_attr_pool_size);
  j.at("degree").get_to(c.degree);
  j.at("latency_model").get_to(c.latency_model);
  j.at("latency_fixed_ms").get_to(c.latency_fixed_ms);
  j.at("latency_min_ms").get_to(c.latency_min_ms);
  j.at("latency_max_ms").get_to(c.latency_max_ms);
  j.at("cost_parse_ms").get_to(c.cost_parse_ms);
  j.at("cost_match_per_attr_ms").get_to(c.cost_match_per_attr_ms);
  j.at("cost_sc_per_cluster_ms").get_to(c.cost_sc_per_cluster_ms);
  j.at("cost_space_lookup_ms").get_to(c.cost_space_lookup_ms);
  j.at("cost_cluster_lookup_ms").get_to(c.cost_cluster_lookup_ms);
  j.at("cost_eval_ms").get_to(c.cost_eval_ms);
  j.at("cost_result_ingest_ms").get_to(c.cost_result_ingest_ms);
  j.at("ttl_default").get_to(c.ttl_default);
  j.at("seed").get_to(c.seed);
  j.at("quiescence_ms").get_to(c.quiescence_ms);
  j.at("qualify_fraction").get_to(c.qualify_fraction);
  j.at("runs_per_point").get_to(c.runs_per_point);
  j.at("ping_period_ms").get_to(c.ping_period_ms);
  j.at("ping_miss_limit").get_to(c.ping_miss_limit);
  j.at("other_spaces_min").get_to(c.other_spaces_min);
  j.at("other_spaces_max").get_to(c.other_spaces_max);
  return c;
}

inline json cluster_to_json(const overlay::SemanticCluster& c) {
  json adj = json::object();
  for (const auto& [peer, ns] : c.adjacency) adj[std::to_string(peer.id)] = ns;
  json out{{"attribute", c.attribute},
           {"members", c.members_order},
           {"adjacency", adj}};
  if (c.head) out["head"] = *c.head;
  return out;
}

inline overlay::SemanticCluster cluster_from_json(const json& j) {
  overlay::SemanticCluster c;
  j.at("attribute").get_to(c.attribute);
  j.at("members").get_to(c.members_order);
  c.members = std::set<PeerId>(c.members_order.begin(), c.members_order.end());
  if (j.contains("head")) c.head = j.at("head").get<PeerId>();
  for (const auto& [key, ns] : j.at("adjacency").items()) {
    PeerId owner;
    owner.id = std::stoull(key);
    auto it = c.members.find(owner);
    if (it == c.members.end()) throw CdmsError("adjacency for non-member in snapshot");
    c.adjacency[*it] = ns.get<std::vector<PeerId>>();
  }
  return c;
}

inline json criterion_to_json(const matcher::Criterion& c) {
  return json{{"id", matcher::to_string(c.id)},
              {"weight", c.weight},
              {"hits", c.hits},
              {"confirms", c.confirms},
              {"rejects", c.rejects},
              {"window", std::vector<bool>(c.window.begin(), c.window.end())}};
}

}  // namespace detail

inline void save_world(const simnet::SimWorld& world, const std::string& path) {
  if (!world.queue.empty()) {
    // liveness pings and leftovers of finished queries are no-ops; anything
    // else is in-flight work a snapshot cannot represent
    auto copy = world.queue;
    while (!copy.empty()) {
      const auto& payload = copy.top().payload;
      bool harmless = std::holds_alternative<simnet::PingRound>(payload);
      if (const auto* check = std::get_if<simnet::CollectorCheck>(&payload))
        harmless = world.server.active.count(check->query_id) == 0;
      if (const auto* result = std::get_if<simnet::DeliverResult>(&payload))
        harmless = world.server.active.count(result->result.query_id) == 0;
      if (const auto* notify = std::get_if<simnet::DeliverNotify>(&payload))
        harmless = world.server.active.count(notify->notify.query_id) == 0;
      if (!harmless) throw CdmsError("cannot snapshot a world with in-flight work");
      copy.pop();
    }
  }
  for (const auto& [peer, psg] : world.psgs)
    if (!psg.jobs.empty() || !psg.subs.empty())
      throw CdmsError("cannot snapshot a world with active jobs or subscriptions");

  json j;
  j["magic"] = kMagic;
  j["version"] = kVersion;
  j["config"] = detail::config_to_json(world.config);
  j["now"] = world.now;
  j["next_peer_id"] = world.next_peer_id;
  j["next_query_id"] = world.server.next_query_id;
  j["server_busy_until"] = world.server_busy_until;
  j["query_domain"] = world.query_domain;
  j["query_attribute"] = world.query_attribute;
  j["qualify_literal"] = world.qualify_literal;
  j["rng_world"] = detail::rng_to_json(world.rng_world);
  j["rng_topology"] = detail::rng_to_json(world.rng_topology);
  j["rng_latency"] = detail::rng_to_json(world.rng_latency);

  j["globals"] = world.server.globals;

  json rings = json::array();
  for (const auto& [domain, ring] : world.server.rings) {
    json clusters = json::array();
    for (const auto& c : ring.clusters) clusters.push_back(detail::cluster_to_json(c));
    json directory = json::object();
    for (const auto& [attr, head] : ring.csg.directory) directory[attr] = head;
    rings.push_back(json{{"domain", domain},
                         {"clusters", clusters},
                         {"directory", directory},
                         {"pending_log", ring.csg.pending_log}});
  }
  j["rings"] = rings;

  json match;
  json criteria = json::array();
  for (const auto& c : world.server.match.criteria) criteria.push_back(detail::criterion_to_json(c));
  match["criteria"] = criteria;
  std::ostringstream synonyms;
  world.server.match.synonyms.save(synonyms);
  match["synonyms"] = synonyms.str();
  match["review_queue"] = world.server.match.review_queue;
  match["decision_log"] = world.server.match.decision_log;
  match["rejected_pairs"] = std::vector<std::string>(world.server.match.rejected_pairs.begin(),
                                                     world.server.match.rejected_pairs.end());
  match["window_size"] = world.server.match.window_size;
  j["matcher"] = match;

  json peers = json::array();
  for (const auto& [peer, rec] : world.server.peers)
    peers.push_back(json{{"peer", rec.peer},
                         {"address", rec.address},
                         {"schema", rec.local_schema},
                         {"mapping", rec.mapping}});
  j["peers"] = peers;

  json psgs = json::array();
  for (const auto& [peer, psg] : world.psgs) {
    json data = json::object();
    for (const auto& [name, value] : psg.profile.data) data[name] = value;
    json rules = json::object();
    for (const auto& [name, rule] : psg.profile.event_rules) rules[name] = rule;
    json net = json::object();
    for (const auto& [attr, ns] : psg.net.neighbors) net[attr] = ns;
    json store = json::object();
    for (const auto& def : psg.profile.schema.attributes) {
      auto records = psg.store.range(def.name, -1e300, 1e300);
      if (records.empty()) continue;
      json list = json::array();
      for (const auto& r : records) list.push_back(json{{"t", r.t_ms}, {"v", r.value}});
      store[def.name] = list;
    }
    psgs.push_back(json{{"peer", psg.profile.peer},
                        {"schema", psg.profile.schema},
                        {"data", data},
                        {"event_rules", rules},
                        {"mapping", psg.mapping},
                        {"neighbors", net},
                        {"store", store},
                        {"alive", psg.alive}});
  }
  j["psgs"] = psgs;

  simnet::write_file(path, j.dump());
}

inline simnet::SimWorld load_world(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CdmsError("cannot open world snapshot " + path);
  json j = json::parse(in, nullptr, /*allow_exceptions=*/true);
  if (!j.contains("magic") || j.at("magic") != kMagic)
    throw CdmsError(path + " is not a world snapshot");
  if (j.at("version").get<int>() != kVersion)
    throw CdmsError("unsupported snapshot version " + j.at("version").dump());

  simnet::SimWorld world;
  world.config = detail::config_from_json(j.at("config"));
  j.at("now").get_to(world.now);
  j.at("next_peer_id").get_to(world.next_peer_id);
  j.at("server_busy_until").get_to(world.server_busy_until);
  j.at("next_query_id").get_to(world.server.next_query_id);
  j.at("query_domain").get_to(world.query_domain);
  j.at("query_attribute").get_to(world.query_attribute);
  j.at("qualify_literal").get_to(world.qualify_literal);
  detail::rng_from_json(j.at("rng_world"), world.rng_world);
  detail::rng_from_json(j.at("rng_topology"), world.rng_topology);
  detail::rng_from_json(j.at("rng_latency"), world.rng_latency);

  j.at("globals").get_to(world.server.globals);

  for (const auto& r : j.at("rings")) {
    overlay::DomainRing ring;
    ring.domain = r.at("domain").get<std::string>();
    ring.csg.domain = ring.domain;
    for (const auto& c : r.at("clusters")) ring.clusters.push_back(detail::cluster_from_json(c));
    for (const auto& [attr, head] : r.at("directory").items())
      ring.csg.directory[attr] = head.get<PeerId>();
    r.at("pending_log").get_to(ring.csg.pending_log);
    world.server.rings.emplace(ring.domain, std::move(ring));
  }

  const json& match = j.at("matcher");
  {
    auto& m = world.server.match;
    size_t i = 0;
    for (const auto& c : match.at("criteria")) {
      if (i >= m.criteria.size()) throw CdmsError("too many criteria in snapshot");
      auto id = matcher::criterion_from_string(c.at("id").get<std::string>());
      if (!id || *id != m.criteria[i].id) throw CdmsError("criterion order mismatch in snapshot");
      c.at("weight").get_to(m.criteria[i].weight);
      c.at("hits").get_to(m.criteria[i].hits);
      c.at("confirms").get_to(m.criteria[i].confirms);
      c.at("rejects").get_to(m.criteria[i].rejects);
      auto window = c.at("window").get<std::vector<bool>>();
      m.criteria[i].window.assign(window.begin(), window.end());
      ++i;
    }
    std::istringstream synonyms(match.at("synonyms").get<std::string>());
    m.synonyms = matcher::SynonymDict{};
    m.synonyms.load(synonyms);
    match.at("review_queue").get_to(m.review_queue);
    match.at("decision_log").get_to(m.decision_log);
    auto rejected = match.at("rejected_pairs").get<std::vector<std::string>>();
    m.rejected_pairs = std::set<std::string>(rejected.begin(), rejected.end());
    match.at("window_size").get_to(m.window_size);
  }

  for (const auto& p : j.at("peers")) {
    engine::RegisteredPeer rec;
    p.at("peer").get_to(rec.peer);
    p.at("address").get_to(rec.address);
    p.at("schema").get_to(rec.local_schema);
    p.at("mapping").get_to(rec.mapping);
    world.server.peers.emplace(rec.peer, std::move(rec));
  }

  for (const auto& p : j.at("psgs")) {
    engine::PsgState psg;
    p.at("peer").get_to(psg.profile.peer);
    p.at("schema").get_to(psg.profile.schema);
    for (const auto& [name, value] : p.at("data").items())
      psg.profile.data[name] = value.get<AttributeValue>();
    for (const auto& [name, rule] : p.at("event_rules").items())
      psg.profile.event_rules[name] = rule.get<Predicate>();
    p.at("mapping").get_to(psg.mapping);
    for (const auto& [attr, ns] : p.at("neighbors").items())
      psg.net.neighbors[attr] = ns.get<std::vector<PeerId>>();
    for (const auto& [attr, records] : p.at("store").items())
      for (const auto& r : records)
        psg.store.append(attr, r.at("v").get<AttributeValue>(), r.at("t").get<double>());
    p.at("alive").get_to(psg.alive);
    world.psgs.emplace(psg.profile.peer, std::move(psg));
  }

  // re-arm liveness pings
  for (const auto& [peer, psg] : world.psgs)
    if (psg.alive) world.schedule(world.now + world.config.ping_period_ms, simnet::PingRound{peer});
  return world;
}

}  // namespace cdms::snapshot
