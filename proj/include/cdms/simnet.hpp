// Deterministic seeded discrete-event simulator and experiment harness:
// builds worlds of registered spaces, floods queries through the overlay
// with a configurable latency model, and measures recall, response time,
// and phase breakdowns. Identical (config, seed) gives identical traces.
#pragma once

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "cdms/engine.hpp"

namespace cdms::simnet {

// ---------------------------------------------------------------------------
// configuration

struct SimConfig {
  int num_domains = 3;
  int spaces_per_run = 200;
  int attrs_per_space = 30;
  int domain_attr_pool_size = 40;
  int degree = 4;
  std::string latency_model = "uniform";  // fixed | uniform
  double latency_fixed_ms = 10.0;
  double latency_min_ms = 5.0;
  double latency_max_ms = 20.0;
  double cost_parse_ms = 1.0;
  double cost_match_per_attr_ms = 0.1;
  double cost_sc_per_cluster_ms = 2.0;
  double cost_space_lookup_ms = 0.2;
  double cost_cluster_lookup_ms = 0.5;
  double cost_eval_ms = 0.5;
  double cost_result_ingest_ms = 1.0;  // server-side scan operator, serialized
  int ttl_default = 8;
  std::uint64_t seed = 42;
  double quiescence_ms = 0.0;  // 0 = auto: 3 x max per-hop latency x ttl
  double qualify_fraction = 0.2;
  int runs_per_point = 30;
  double ping_period_ms = 30'000.0;
  int ping_miss_limit = 2;
  int other_spaces_min = 5;
  int other_spaces_max = 20;

  double max_latency() const {
    return latency_model == "fixed" ? latency_fixed_ms : latency_max_ms;
  }
  double quiescence(int ttl) const {
    return quiescence_ms > 0 ? quiescence_ms : 3.0 * max_latency() * std::max(ttl, 1);
  }
  void validate() const {
    if (attrs_per_space > domain_attr_pool_size)
      throw CdmsError("attrs_per_space exceeds domain_attr_pool_size");
    if (num_domains < 1 || spaces_per_run < 1 || attrs_per_space < 1 || degree < 1)
      throw CdmsError("counts must be positive");
    if (latency_model != "fixed" && latency_model != "uniform")
      throw CdmsError("latency_model must be fixed or uniform");
    if (latency_min_ms < 0 || latency_max_ms < latency_min_ms || latency_fixed_ms < 0)
      throw CdmsError("bad latency range");
    for (double c : {cost_parse_ms, cost_match_per_attr_ms, cost_sc_per_cluster_ms,
                     cost_space_lookup_ms, cost_cluster_lookup_ms, cost_eval_ms,
                     cost_result_ingest_ms})
      if (c < 0) throw CdmsError("processing costs must be >= 0");
    if (qualify_fraction < 0 || qualify_fraction > 1)
      throw CdmsError("qualify_fraction must be in [0,1]");
  }
};

// flat key=value text; '#' comments; unknown keys are errors
inline SimConfig parse_config(std::istream& in) {
  SimConfig cfg;
  std::map<std::string, std::function<void(const std::string&)>> setters = {
      {"num_domains", [&](const std::string& v) { cfg.num_domains = std::stoi(v); }},
      {"spaces_per_run", [&](const std::string& v) { cfg.spaces_per_run = std::stoi(v); }},
      {"attrs_per_space", [&](const std::string& v) { cfg.attrs_per_space = std::stoi(v); }},
      {"domain_attr_pool_size",
       [&](const std::string& v) { cfg.domain_attr_pool_size = std::stoi(v); }},
      {"degree", [&](const std::string& v) { cfg.degree = std::stoi(v); }},
      {"latency_model", [&](const std::string& v) { cfg.latency_model = v; }},
      {"latency_fixed_ms", [&](const std::string& v) { cfg.latency_fixed_ms = std::stod(v); }},
      {"latency_min_ms", [&](const std::string& v) { cfg.latency_min_ms = std::stod(v); }},
      {"latency_max_ms", [&](const std::string& v) { cfg.latency_max_ms = std::stod(v); }},
      {"cost_parse_ms", [&](const std::string& v) { cfg.cost_parse_ms = std::stod(v); }},
      {"cost_match_per_attr_ms",
       [&](const std::string& v) { cfg.cost_match_per_attr_ms = std::stod(v); }},
      {"cost_sc_per_cluster_ms",
       [&](const std::string& v) { cfg.cost_sc_per_cluster_ms = std::stod(v); }},
      {"cost_space_lookup_ms",
       [&](const std::string& v) { cfg.cost_space_lookup_ms = std::stod(v); }},
      {"cost_cluster_lookup_ms",
       [&](const std::string& v) { cfg.cost_cluster_lookup_ms = std::stod(v); }},
      {"cost_eval_ms", [&](const std::string& v) { cfg.cost_eval_ms = std::stod(v); }},
      {"cost_result_ingest_ms",
       [&](const std::string& v) { cfg.cost_result_ingest_ms = std::stod(v); }},
      {"ttl_default", [&](const std::string& v) { cfg.ttl_default = std::stoi(v); }},
      {"seed", [&](const std::string& v) { cfg.seed = std::stoull(v); }},
      {"quiescence_ms", [&](const std::string& v) { cfg.quiescence_ms = std::stod(v); }},
      {"qualify_fraction", [&](const std::string& v) { cfg.qualify_fraction = std::stod(v); }},
      {"runs_per_point", [&](const std::string& v) { cfg.runs_per_point = std::stoi(v); }},
      {"ping_period_ms", [&](const std::string& v) { cfg.ping_period_ms = std::stod(v); }},
      {"ping_miss_limit", [&](const std::string& v) { cfg.ping_miss_limit = std::stoi(v); }},
      {"other_spaces_min", [&](const std::string& v) { cfg.other_spaces_min = std::stoi(v); }},
      {"other_spaces_max", [&](const std::string& v) { cfg.other_spaces_max = std::stoi(v); }},
  };
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      auto a = s.find_first_not_of(" \t\r\n");
      auto b = s.find_last_not_of(" \t\r\n");
      return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
    };
    std::string stripped = trim(line);
    if (stripped.empty()) continue;
    auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw CdmsError("config line " + std::to_string(lineno) + ": expected key=value");
    std::string key = trim(stripped.substr(0, eq));
    std::string value = trim(stripped.substr(eq + 1));
    auto it = setters.find(key);
    if (it == setters.end())
      throw CdmsError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    try {
      it->second(value);
    } catch (const std::exception&) {
      throw CdmsError("config line " + std::to_string(lineno) + ": bad value for '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

inline SimConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CdmsError("cannot open config file " + path);
  return parse_config(in);
}

// ---------------------------------------------------------------------------
// rng streams: one master seed, one independent stream per subsystem

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream * 0xA24BAED4963EE407ULL + 1));
}

// ---------------------------------------------------------------------------
// trace

struct TraceSink {
  bool keep_lines = false;  // digest always accumulates
  std::vector<std::string> lines;
  std::uint64_t fnv = 0xCBF29CE484222325ULL;

  void log(double t, const char* kind, const std::string& payload) {
    char head[48];
    snprintf(head, sizeof head, "t=%.3f ", t);
    std::uint64_t ph = 0xCBF29CE484222325ULL;
    for (char c : payload) ph = (ph ^ static_cast<unsigned char>(c)) * 0x100000001B3ULL;
    char tail[24];
    snprintf(tail, sizeof tail, " %016llx", static_cast<unsigned long long>(ph));
    std::string full = std::string(head) + kind + tail;
    for (char c : full) fnv = (fnv ^ static_cast<unsigned char>(c)) * 0x100000001B3ULL;
    fnv = (fnv ^ '\n') * 0x100000001B3ULL;
    if (keep_lines) lines.push_back(std::move(full));
  }

  std::string digest() const {
    char buf[24];
    snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv));
    return buf;
  }
};

// ---------------------------------------------------------------------------
// metrics

struct Metrics {
  double recall = 1.0;  // 1.0 when the qualifying set is empty
  double response_time_ms = 0;
  engine::PhaseTiming phases;
  std::uint64_t message_count = 0;   // intra-cluster LOOKUP forwards
  std::uint64_t reached_count = 0;   // local evaluations
  std::uint64_t qualifying_count = 0;
  std::uint64_t responding_count = 0;
  bool entry_missing = false;
};

struct QueryRun {
  std::uint64_t query_id = 0;
  Metrics metrics;
  std::vector<msg::Result> results;
  std::vector<msg::Notify> notifies;
  std::set<PeerId> responded;
  std::set<PeerId> qualifying;
  std::set<PeerId> truncated;
  std::string entry_attribute;
};

class QueryError : public CdmsError {
public:
  using CdmsError::CdmsError;
};

// ---------------------------------------------------------------------------
// events

struct DeliverResult {
  msg::Result result;
};
struct DeliverNotify {
  msg::Notify notify;
};
struct CollectorCheck {
  std::uint64_t query_id;
};
struct SampleTick {
  PeerId peer;
  std::uint64_t query_id;
};
struct PingRound {
  PeerId peer;
};
struct ScriptedLeave {
  PeerId peer;
  bool graceful;
};
struct ScriptedSet {
  PeerId peer;
  std::string attribute;  // local name
  AttributeValue value;
};

using EventPayload = std::variant<DeliverResult, DeliverNotify, CollectorCheck, SampleTick,
                                  PingRound, ScriptedLeave, ScriptedSet>;

struct Event {
  double t = 0;
  std::uint64_t seq = 0;  // FIFO among equal timestamps
  EventPayload payload;
};

struct EventAfter {
  bool operator()(const Event& a, const Event& b) const {
    if (a.t != b.t) return a.t > b.t;
    return a.seq > b.seq;
  }
};

// ---------------------------------------------------------------------------
// the world

struct SimWorld {
  SimConfig config;
  double now = 0;
  std::uint64_t next_seq = 1;
  std::priority_queue<Event, std::vector<Event>, EventAfter> queue;
  engine::ServerState server;
  std::map<PeerId, engine::PsgState> psgs;
  double server_busy_until = 0;  // serialized RESULT/NOTIFY ingest
  std::uint64_t next_peer_id = 1;
  TraceSink trace;
  std::uint64_t events_processed = 0;

  // experiment designation
  std::string query_domain;
  std::string query_attribute;
  std::string qualify_literal = "present";

  std::mt19937_64 rng_world;     // structure. space draws, qualifying picks
  std::mt19937_64 rng_topology;  // neighbor sampling inside clusters
  std::mt19937_64 rng_latency;   // per-hop latency samples

  double latency() {
    if (config.latency_model == "fixed") return config.latency_fixed_ms;
    std::uniform_real_distribution<double> dist(config.latency_min_ms, config.latency_max_ms);
    return dist(rng_latency);
  }

  engine::Costs costs() const {
    return engine::Costs{config.cost_parse_ms,       config.cost_match_per_attr_ms,
                         config.cost_sc_per_cluster_ms, config.cost_space_lookup_ms,
                         config.cost_cluster_lookup_ms, config.cost_eval_ms};
  }

  void schedule(double t, EventPayload payload) {
    queue.push(Event{t, next_seq++, std::move(payload)});
  }

  std::string experiment_query_text() const {
    return "SELECT " + query_attribute + " FROM " + query_domain + " WHERE " + query_attribute +
           " = \"" + qualify_literal + "\"";
  }
};

// ---------------------------------------------------------------------------
// attribute vocabularies

namespace detail {

inline const std::vector<const char*>& base_vocab(int domain_index) {
  static const std::vector<const char*> person = {
      "name",        "location",    "friend_list", "age",         "occupation", "employer",
      "phone",       "email",       "homeAddress", "birthday",    "nationality", "language",
      "mood",        "heart_rate",  "step_count",  "calendar",    "vehicle",    "license",
      "bloodType",   "allergies",   "height",      "weight",      "hobby",      "team",
      "department",  "office",      "status",      "ringtone",    "wallpaper",  "timezone",
      "currency",    "shoe_size",   "hair_color",  "eye_color",   "pet",        "club",
      "skill",       "title",       "grade",       "badge"};
  static const std::vector<const char*> home = {
      "address",     "temperature", "light",       "humidity",    "power_usage", "water_usage",
      "gas_usage",   "owner",       "room_count",  "floor_area",  "garden",     "garage",
      "alarm",       "door_state",  "window_state", "heating",    "cooling",    "fridgeTemp",
      "ovenState",   "tv_channel",  "music",       "curtains",    "lawn",       "pool_temp",
      "mailbox",     "doorbell",    "smoke_level", "co2_level",   "noise",      "brightness",
      "occupants",   "wifi_load",   "solar_output", "battery",    "rainSensor", "windSensor",
      "soil",        "aquarium",    "sauna",       "cellar"};
  static const std::vector<const char*> shop = {
      "location",    "crowdLevel",  "opening_hours", "product_count", "revenue",  "discount",
      "brand",       "category",    "rating",      "queue_length", "parking",   "manager",
      "staff_count", "floor_space", "temperature", "music_volume", "promotion", "stock_level",
      "delivery",    "wholesale",   "retail_price", "tax_rate",    "currency",  "loyalty",
      "security",    "cameras",     "shelf_space", "freezer",      "bakery",    "pharmacy",
      "cafe",        "atm",         "restroom",    "wifi",         "lighting",  "signage",
      "window_display", "festival",  "clearance",  "membership"};
  static const std::vector<const char*>* all[3] = {&person, &home, &shop};
  return *all[domain_index % 3];
}

inline std::string domain_name(int index) {
  static const char* names[3] = {"PERSON", "HOME", "SHOP"};
  if (index < 3) return names[index];
  return "DOMAIN" + std::to_string(index);
}

inline Kind vocab_kind(const std::string& name) {
  static const std::set<std::string> numbers = {
      "age",         "heart_rate",  "step_count",  "height",      "weight",      "shoe_size",
      "grade",       "temperature", "humidity",    "power_usage", "water_usage", "gas_usage",
      "room_count",  "floor_area",  "fridgeTemp",  "pool_temp",   "smoke_level", "co2_level",
      "noise",       "brightness",  "occupants",   "wifi_load",   "solar_output", "battery",
      "crowdLevel",  "product_count", "revenue",   "discount",    "rating",      "queue_length",
      "staff_count", "floor_space", "music_volume", "stock_level", "retail_price", "tax_rate",
      "light"};
  static const std::set<std::string> booleans = {"garden", "garage", "alarm",    "parking",
                                                 "delivery", "security", "cafe",  "atm",
                                                 "restroom", "wifi",  "bakery",  "pharmacy"};
  static const std::set<std::string> lists = {"friend_list", "allergies", "promotion"};
  if (numbers.count(name)) return Kind::Number;
  if (booleans.count(name)) return Kind::Boolean;
  if (lists.count(name)) return Kind::TextList;
  return Kind::Text;
}

inline std::vector<AttributeDef> domain_pool(int index, int pool_size) {
  std::vector<AttributeDef> pool;
  if (index < 3) {
    const auto& vocab = base_vocab(index);
    for (int i = 0; i < pool_size && i < static_cast<int>(vocab.size()); ++i) {
      AttributeDef def{vocab[i], vocab_kind(vocab[i])};
      // a couple of deduced boolean attributes per domain
      def.is_event = def.kind == Kind::Boolean && (def.name == "alarm" || def.name == "security");
      pool.push_back(std::move(def));
    }
  }
  int start = static_cast<int>(pool.size());
  for (int i = start; i < pool_size; ++i) {
    char name[32];
    snprintf(name, sizeof name, "d%d_attr%03d", index, i);
    pool.push_back({name, i % 5 == 3 ? Kind::Number : Kind::Text});
  }
  return pool;
}

// Text attributes no other pool attribute can match under any criterion:
// the query cluster must hold exactly the spaces that drew the attribute,
// never spaces whose similar-named attribute was pend-mapped onto it.
inline std::vector<int> clean_text_attrs(const std::vector<AttributeDef>& pool) {
  matcher::MatcherState probe;
  std::vector<int> clean;
  for (int i = 0; i < static_cast<int>(pool.size()); ++i) {
    if (pool[i].kind != Kind::Text) continue;
    bool dirty = false;
    for (int j = 0; j < static_cast<int>(pool.size()) && !dirty; ++j) {
      if (i == j || pool[j].kind != pool[i].kind) continue;
      for (auto id : {matcher::CriterionId::Stem, matcher::CriterionId::Substring,
                      matcher::CriterionId::Synonym})
        if (matcher::detail::fires(id, probe.tokens(pool[j].name), probe.tokens(pool[i].name),
                                   probe.synonyms))
          dirty = true;
    }
    if (!dirty) clean.push_back(i);
  }
  return clean;
}

inline std::vector<int> sample_indices(int n, int k, std::mt19937_64& rng,
                                       std::optional<int> forced = std::nullopt) {
  std::vector<int> all(n);
  for (int i = 0; i < n; ++i) all[i] = i;
  if (forced) {
    std::swap(all[*forced], all[n - 1]);
    all.pop_back();
    --n;
  }
  std::vector<int> picked;
  if (forced) picked.push_back(*forced);
  for (int i = 0; i < k && !all.empty(); ++i) {
    size_t j = rng() % all.size();
    picked.push_back(all[j]);
    all[j] = all.back();
    all.pop_back();
  }
  std::sort(picked.begin(), picked.end());  // schema lists attributes in pool order
  return picked;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// world building

inline PeerId register_one_space(SimWorld& world, const std::string& domain,
                                 const std::vector<AttributeDef>& pool,
                                 const std::vector<int>& attr_indices, bool qualifies,
                                 engine::PhaseTiming* timing_out = nullptr) {
  LocalSchema schema;
  schema.domain_name = domain;
  for (int idx : attr_indices) schema.attributes.push_back(pool[idx]);

  PeerId peer{world.next_peer_id++, ""};
  peer.address = "10.0." + std::to_string(peer.id / 250) + "." + std::to_string(peer.id % 250);

  auto costs = world.costs();
  auto latency = [&world] { return world.latency(); };
  auto outcome = engine::register_space(world.server, render_schema_template(schema), peer.address,
                                        peer, world.rng_topology, costs, latency, world.config.degree);
  if (timing_out) *timing_out = outcome.timing;

  engine::PsgState psg;
  psg.profile.peer = peer;
  psg.profile.schema = schema;
  psg.mapping = outcome.ack.mapping;
  for (const auto& def : schema.attributes) {
    AttributeValue value;
    if (def.name == world.query_attribute && schema.domain_name == world.query_domain) {
      value = AttributeValue::text(qualifies ? world.qualify_literal
                                             : "absent_" + std::to_string(peer.id));
    } else {
      switch (def.kind) {
        case Kind::Text: value = AttributeValue::text("v" + std::to_string(world.rng_world() % 1000)); break;
        case Kind::Number: value = AttributeValue::number(static_cast<double>(world.rng_world() % 10000) / 10.0); break;
        case Kind::Boolean: value = AttributeValue::boolean(false); break;
        case Kind::TextList: value = AttributeValue::text_list({"x"}); break;
      }
    }
    psg.profile.data[def.name] = value;
  }

  // wire both ends of every new P2P connection
  for (const auto& [attr, links] : outcome.join_report.joined) {
    for (const auto& other : links) {
      psg.net.add_neighbor(attr, other);
      auto it = world.psgs.find(other);
      if (it != world.psgs.end()) it->second.net.add_neighbor(attr, peer);
    }
  }
  world.psgs.emplace(peer, std::move(psg));
  world.trace.log(world.now, "REGISTER",
                  peer.address + " " + schema.domain_name + " n=" +
                      std::to_string(schema.attributes.size()));
  return peer;
}

// Registers every space through the full pipeline. All registrations are
// issued at the same instant; the clock advances to the latest completion.
inline SimWorld build_world(const SimConfig& config, bool keep_trace_lines = false) {
  config.validate();
  SimWorld world;
  world.trace.keep_lines = keep_trace_lines;
  world.config = config;
  world.rng_world.seed(mix_seed(config.seed, 1));
  world.rng_topology.seed(mix_seed(config.seed, 2));
  world.rng_latency.seed(mix_seed(config.seed, 3));

  std::vector<std::vector<AttributeDef>> pools;
  for (int d = 0; d < config.num_domains; ++d)
    pools.push_back(detail::domain_pool(d, config.domain_attr_pool_size));

  // the query cluster's position is a seeded random pick among clean text
  // attributes
  int qd = static_cast<int>(world.rng_world() % config.num_domains);
  std::vector<int> candidates = detail::clean_text_attrs(pools[qd]);
  if (candidates.empty()) throw CdmsError("domain pool has no clean text attribute");
  int qa = candidates[world.rng_world() % candidates.size()];
  world.query_domain = detail::domain_name(qd);
  world.query_attribute = pools[qd][qa].name;

  // exact qualifying count via a seeded shuffle
  int n = config.spaces_per_run;
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  for (int i = n - 1; i > 0; --i)
    std::swap(order[i], order[world.rng_world() % (i + 1)]);
  int qualify_count = static_cast<int>(config.qualify_fraction * n + 0.5);
  std::vector<bool> qualifies(n, false);
  for (int i = 0; i < qualify_count; ++i) qualifies[order[i]] = true;

  double t_start = world.now;
  double t_end = t_start;

  for (int i = 0; i < n; ++i) {
    auto attrs = detail::sample_indices(static_cast<int>(pools[qd].size()),
                                        config.attrs_per_space - 1, world.rng_world, qa);
    engine::PhaseTiming timing;
    register_one_space(world, world.query_domain, pools[qd], attrs, qualifies[i], &timing);
    t_end = std::max(t_end, t_start + timing.total());
  }

  // other domains get seeded-random populations ("numbers of PSGs in other
  // clusters were random")
  for (int d = 0; d < config.num_domains; ++d) {
    if (d == qd) continue;
    int span = std::max(0, config.other_spaces_max - config.other_spaces_min);
    int count = config.other_spaces_min + (span ? static_cast<int>(world.rng_world() % (span + 1)) : 0);
    for (int i = 0; i < count; ++i) {
      auto attrs = detail::sample_indices(static_cast<int>(pools[d].size()),
                                          config.attrs_per_space, world.rng_world);
      engine::PhaseTiming timing;
      register_one_space(world, detail::domain_name(d), pools[d], attrs, false, &timing);
      t_end = std::max(t_end, t_start + timing.total());
    }
  }

  world.now = t_end;
  for (const auto& [peer, psg] : world.psgs)
    world.schedule(world.now + config.ping_period_ms, PingRound{peer});
  return world;
}

// ---------------------------------------------------------------------------
// event handlers

namespace detail {

inline void server_purge(SimWorld& world, const PeerId& dead) {
  auto it = world.server.peers.find(dead);
  if (it == world.server.peers.end()) return;
  const std::string domain = it->second.mapping.global_domain;
  auto ring = world.server.rings.find(domain);
  if (ring != world.server.rings.end()) overlay::leave(ring->second, dead);
  if (auto* g = world.server.find_global(domain)) g->member_count--;
  world.server.peers.erase(it);
}

inline void graceful_leave(SimWorld& world, const PeerId& peer) {
  auto pit = world.psgs.find(peer);
  if (pit != world.psgs.end()) {
    pit->second.alive = false;
    for (auto& [other, psg] : world.psgs)
      if (other != peer) psg.net.drop_neighbor(peer);
  }
  server_purge(world, peer);
}

inline engine::Collector* find_collector(SimWorld& world, std::uint64_t query_id) {
  auto it = world.server.active.find(query_id);
  return it == world.server.active.end() ? nullptr : &it->second;
}

inline void close_collector(SimWorld& world, engine::Collector& c, double at) {
  c.closed = true;
  c.closed_at = at;
  c.timing.add("p2p_search", at - c.injected_at);
  world.trace.log(at, "COLLECTOR_CLOSE", std::to_string(c.query_id));
}

// Disseminates a request through the entry cluster. The wave is processed
// in hop (BFS) order, so Gnutella's duplicate cache provably reaches
// exactly bfs_reachable(entry, ttl), while each delivery, evaluation, and
// RESULT is timed with its own sampled per-hop latency.
inline void run_flood(SimWorld& world, const std::string& cluster_attr, const PeerId& entry,
                      const overlay::LookupRequest& request, double entry_at) {
  struct Delivery {
    PeerId to;
    std::optional<PeerId> from;
    overlay::LookupRequest req;
    double at;
  };
  std::deque<Delivery> wave;
  wave.push_back({entry, std::nullopt, request, entry_at});
  while (!wave.empty()) {
    Delivery d = std::move(wave.front());
    wave.pop_front();
    world.trace.log(d.at, "LOOKUP",
                    std::to_string(d.req.query_id) + ">" + d.to.address + " ttl=" +
                        std::to_string(d.req.ttl));
    auto pit = world.psgs.find(d.to);
    if (pit == world.psgs.end() || !pit->second.alive) continue;  // lost on the wire
    engine::PsgState& psg = pit->second;
    auto step = overlay::flood_step(psg.net, cluster_attr, d.req, d.from);
    engine::Collector* collector = find_collector(world, d.req.query_id);
    double evaluated_at = d.at + world.config.cost_eval_ms;
    if (step.evaluate) {
      if (collector) collector->evaluations++;
      const auto& req = d.req;
      if (req.subscribe) {
        auto tuple = engine::psg_evaluate(psg, req);
        if (tuple && !tuple->empty() && (*tuple)[0].value &&
            (*tuple)[0].value->kind() == Kind::Boolean) {
          bool current = (*tuple)[0].value->as_boolean();
          psg.subs.push_back(engine::Subscription{
              req.query_id, psg.mapping.global_to_local().at(req.projection[0]), d.at,
              req.lifetime_ms, current});
          world.schedule(evaluated_at + world.latency(),
                         DeliverNotify{msg::Notify{req.query_id, d.to, current,
                                                   static_cast<std::int64_t>(d.at)}});
        }
      } else if (req.continuous) {
        if (engine::psg_evaluate(psg, req)) {
          psg.jobs.push_back(engine::ContinuousJob{req.query_id, req.projection,
                                                   req.sample_period_ms,
                                                   req.lifetime_ms < 0 ? 0 : req.lifetime_ms,
                                                   d.at});
          world.schedule(evaluated_at, SampleTick{d.to, req.query_id});
        }
      } else {
        auto tuple = engine::psg_evaluate(psg, req);
        if (tuple) {
          world.schedule(evaluated_at + world.latency(),
                         DeliverResult{msg::Result{req.query_id, d.to, std::move(*tuple)}});
        }
      }
    }
    for (auto& [neighbor, forwarded] : step.forwards) {
      if (collector) collector->flood_messages++;
      wave.push_back({neighbor, d.to, std::move(forwarded), evaluated_at + world.latency()});
    }
  }
}

// the server-side scan operator works the arriving tuples off one by one
inline double ingest_done_at(SimWorld& world) {
  double done = std::max(world.now, world.server_busy_until) + world.config.cost_result_ingest_ms;
  world.server_busy_until = done;
  return done;
}

inline void handle(SimWorld& world, const DeliverResult& ev) {
  engine::Collector* c = find_collector(world, ev.result.query_id);
  if (!c || c->closed) return;
  c->responded.insert(ev.result.peer);
  c->results.push_back(ev.result);
  c->last_activity = ingest_done_at(world);
  world.schedule(c->last_activity + world.config.quiescence(c->query_plan.scan.ttl),
                 CollectorCheck{c->query_id});
}

inline void handle(SimWorld& world, const DeliverNotify& ev) {
  engine::Collector* c = find_collector(world, ev.notify.query_id);
  if (!c || c->closed) return;
  c->notifies.push_back(ev.notify);
  c->responded.insert(ev.notify.peer);
  c->last_activity = ingest_done_at(world);
  world.schedule(c->last_activity + world.config.quiescence(c->query_plan.scan.ttl),
                 CollectorCheck{c->query_id});
}

inline void handle(SimWorld& world, const CollectorCheck& ev) {
  engine::Collector* c = find_collector(world, ev.query_id);
  if (!c || c->closed) return;
  double q = world.config.quiescence(c->query_plan.scan.ttl);
  bool quiesced = world.now + 1e-9 >= c->last_activity + q;
  bool past_deadline = !(world.now + 1e-9 < c->deadline);
  if (quiesced && (c->deadline == std::numeric_limits<double>::infinity() || past_deadline)) {
    // unbounded subscriptions never self-close
    if (c->deadline == std::numeric_limits<double>::infinity() &&
        c->query_plan.scan.subscribe && c->query_plan.scan.lifetime_ms < 0)
      return;
    close_collector(world, *c, world.now);
  }
}

inline void handle(SimWorld& world, const SampleTick& ev) {
  auto pit = world.psgs.find(ev.peer);
  engine::Collector* c = find_collector(world, ev.query_id);
  if (pit == world.psgs.end() || !pit->second.alive) {
    if (c) c->truncated.insert(ev.peer);  // stream cut short
    return;
  }
  engine::PsgState& psg = pit->second;
  auto jit = std::find_if(psg.jobs.begin(), psg.jobs.end(),
                          [&](const engine::ContinuousJob& j) { return j.query_id == ev.query_id; });
  if (jit == psg.jobs.end()) return;
  auto result = engine::continuous_sample(psg, *jit, world.now);
  world.schedule(world.now + world.latency(), DeliverResult{std::move(result)});
  if (jit->emitted < jit->total_samples()) {
    world.schedule(world.now + static_cast<double>(jit->period_ms), SampleTick{ev.peer, ev.query_id});
  } else {
    psg.jobs.erase(jit);  // lifetime elapsed, job auto-cancels
  }
}

inline void handle(SimWorld& world, const PingRound& ev) {
  auto pit = world.psgs.find(ev.peer);
  if (pit == world.psgs.end() || !pit->second.alive) return;
  engine::PsgState& psg = pit->second;
  std::set<PeerId> unresponsive;
  for (const auto& [attr, ns] : psg.net.neighbors)
    for (const auto& n : ns) {
      auto nit = world.psgs.find(n);
      if (nit == world.psgs.end() || !nit->second.alive) unresponsive.insert(n);
    }
  auto dead = overlay::record_ping_round(psg.net, unresponsive, world.config.ping_miss_limit);
  for (const auto& d : dead) {
    psg.net.drop_neighbor(d);
    server_purge(world, d);  // idempotent
  }
  world.schedule(world.now + world.config.ping_period_ms, PingRound{ev.peer});
}

inline void handle(SimWorld& world, const ScriptedLeave& ev) {
  if (ev.graceful) {
    graceful_leave(world, ev.peer);
    return;
  }
  auto pit = world.psgs.find(ev.peer);
  if (pit != world.psgs.end()) pit->second.alive = false;  // silent departure
}

inline void handle(SimWorld& world, const ScriptedSet& ev) {
  auto pit = world.psgs.find(ev.peer);
  if (pit == world.psgs.end() || !pit->second.alive) return;
  auto notifies = engine::set_value(pit->second, ev.attribute, ev.value, world.now);
  for (auto& n : notifies) {
    // subscription lifetime bound
    auto& subs = pit->second.subs;
    auto sit = std::find_if(subs.begin(), subs.end(), [&](const engine::Subscription& s) {
      return s.query_id == n.query_id;
    });
    if (sit != subs.end() && sit->lifetime_ms >= 0 &&
        world.now > sit->accepted_at + static_cast<double>(sit->lifetime_ms)) {
      subs.erase(sit);
      continue;
    }
    world.schedule(world.now + world.latency(), DeliverNotify{std::move(n)});
  }
}

inline const char* event_kind(const EventPayload& p) {
  struct Namer {
    const char* operator()(const DeliverResult&) const { return "RESULT"; }
    const char* operator()(const DeliverNotify&) const { return "NOTIFY"; }
    const char* operator()(const CollectorCheck&) const { return "COLLECTOR_CHECK"; }
    const char* operator()(const SampleTick&) const { return "SAMPLE_TICK"; }
    const char* operator()(const PingRound&) const { return "PING_ROUND"; }
    const char* operator()(const ScriptedLeave&) const { return "LEAVE"; }
    const char* operator()(const ScriptedSet&) const { return "SET"; }
  };
  return std::visit(Namer{}, p);
}

inline std::string event_payload_text(const EventPayload& p) {
  struct Texter {
    std::string operator()(const DeliverResult& e) const {
      return std::to_string(e.result.query_id) + "<" + e.result.peer.address;
    }
    std::string operator()(const DeliverNotify& e) const {
      return std::to_string(e.notify.query_id) + "<" + e.notify.peer.address +
             (e.notify.event_value ? " true" : " false");
    }
    std::string operator()(const CollectorCheck& e) const { return std::to_string(e.query_id); }
    std::string operator()(const SampleTick& e) const {
      return std::to_string(e.query_id) + "@" + e.peer.address;
    }
    std::string operator()(const PingRound& e) const { return e.peer.address; }
    std::string operator()(const ScriptedLeave& e) const { return e.peer.address; }
    std::string operator()(const ScriptedSet& e) const { return e.peer.address + " " + e.attribute; }
  };
  return std::visit(Texter{}, p);
}

}  // namespace detail

inline void process_one(SimWorld& world, const Event& ev) {
  world.now = std::max(world.now, ev.t);
  world.events_processed++;
  world.trace.log(ev.t, detail::event_kind(ev.payload), detail::event_payload_text(ev.payload));
  std::visit([&](const auto& payload) { detail::handle(world, payload); }, ev.payload);
}

inline void run_until(SimWorld& world, double t_end) {
  while (!world.queue.empty() && world.queue.top().t <= t_end) {
    Event ev = world.queue.top();
    world.queue.pop();
    process_one(world, ev);
  }
  world.now = std::max(world.now, t_end);
}

// ---------------------------------------------------------------------------
// query execution

// Independent qualification oracle: reads stored space data directly and
// applies the typed-comparison rules (mapping, privacy, missing attributes).
inline bool oracle_qualifies(const engine::PsgState& psg, const Predicate& predicate) {
  auto g2l = psg.mapping.global_to_local();
  for (const auto& atom : predicate.atoms) {
    auto mapped = g2l.find(atom.attribute);
    if (mapped == g2l.end()) return false;
    const AttributeDef* def = psg.profile.schema.find(mapped->second);
    if (!def || def->is_private) return false;
    auto value = engine::current_value(psg, mapped->second);
    if (!value) return false;
    try {
      if (!compare(*value, atom.op, atom.literal)) return false;
    } catch (const CdmsError&) {
      return false;
    }
  }
  return true;
}

// Issues a query through the full pipeline and runs the event loop to
// collector close. `horizon_ms` bounds unbounded subscriptions.
inline QueryRun run_query(SimWorld& world, const std::string& query_text, int ttl_override = 0,
                          double horizon_ms = -1) {
  double t0 = world.now;
  cql::QueryAst ast = cql::parse(query_text, world.config.ttl_default);
  if (ttl_override > 0) ast.ttl = ttl_override;
  auto errors = cql::validate(ast, world.server.globals);
  if (!errors.empty()) {
    std::string what = "query rejected:";
    for (const auto& e : errors) what += std::string(" [") + to_string(e.code) + " " + e.detail + "]";
    throw QueryError(what);  // wrong syntax is not processed further
  }
  auto qplan = engine::plan(ast);

  std::uint64_t query_id = world.server.next_query_id++;
  engine::Collector collector;
  collector.query_id = query_id;
  collector.query_plan = qplan;
  collector.opened_at = t0;
  collector.timing.add("parse", world.config.cost_parse_ms);
  collector.timing.add("space_lookup", world.config.cost_space_lookup_ms);
  collector.timing.add("cluster_lookup", world.latency() + world.config.cost_cluster_lookup_ms);

  overlay::LookupRequest request;
  request.query_id = query_id;
  request.domain = qplan.scan.domain;
  request.predicate = qplan.scan.predicate;
  request.projection = qplan.scan.projection;
  request.ttl = qplan.scan.ttl;
  request.origin = "server";
  request.subscribe = qplan.scan.subscribe;
  request.continuous = qplan.scan.continuous;
  request.sample_period_ms = qplan.scan.sample_period_ms;
  request.lifetime_ms = qplan.scan.lifetime_ms;

  // step 1: domain index; step 2: CSG injection + ring walk
  auto ring_it = world.server.rings.find(qplan.scan.domain);
  if (ring_it == world.server.rings.end()) throw QueryError("no ring for " + qplan.scan.domain);
  const overlay::DomainRing& ring = ring_it->second;
  const overlay::SemanticCluster* entry = overlay::route_to_entry(ring, request);

  double t_inject = t0 + collector.timing.total();
  collector.injected_at = t_inject;
  collector.last_activity = t_inject;

  QueryRun run;
  run.query_id = query_id;

  if (qplan.scan.lifetime_ms >= 0)
    collector.deadline = t_inject + static_cast<double>(qplan.scan.lifetime_ms);
  else if (qplan.scan.subscribe && horizon_ms > 0)
    collector.deadline = t0 + horizon_ms;
  else if (qplan.scan.subscribe)
    throw QueryError("subscription without LIFETIME needs a horizon");

  world.trace.log(t0, "QUERY", std::to_string(query_id) + " " + cql::render(ast));

  if (!entry || !entry->head) {
    // no cluster serves the projection, or the entry cluster is empty
    collector.closed = true;
    collector.closed_at = t_inject;
    collector.timing.add("p2p_search", 0);
    run.metrics.entry_missing = entry == nullptr;
    world.server.active.emplace(query_id, collector);
    world.now = std::max(world.now, t_inject);
  } else {
    run.entry_attribute = entry->attribute;
    collector.entry_attribute = entry->attribute;
    world.server.active.emplace(query_id, collector);
    // step 3: dissemination from the cluster head
    detail::run_flood(world, entry->attribute, *entry->head, request, t_inject + world.latency());
    world.schedule(t_inject + world.config.quiescence(request.ttl), CollectorCheck{query_id});
    if (collector.deadline < std::numeric_limits<double>::infinity())
      world.schedule(collector.deadline + world.config.quiescence(request.ttl),
                     CollectorCheck{query_id});
    while (true) {
      engine::Collector* c = detail::find_collector(world, query_id);
      if (!c || c->closed) break;
      if (world.queue.empty())
        throw CdmsError("event queue drained with collector open (query " +
                        std::to_string(query_id) + ")");
      Event ev = world.queue.top();
      world.queue.pop();
      process_one(world, ev);
    }
  }

  engine::Collector& done = world.server.active.at(query_id);

  // metrics: responding set vs brute-force qualifying over the entry cluster
  if (entry) {
    for (const auto& member : entry->members) {
      auto pit = world.psgs.find(member);
      if (pit == world.psgs.end() || !pit->second.alive) continue;
      if (oracle_qualifies(pit->second, qplan.scan.predicate)) run.qualifying.insert(member);
    }
  }
  run.responded = done.responded;
  run.results = done.results;
  run.notifies = done.notifies;
  run.truncated = done.truncated;

  std::uint64_t hit = 0;
  for (const auto& p : done.responded)
    if (run.qualifying.count(p)) ++hit;
  run.metrics.qualifying_count = run.qualifying.size();
  run.metrics.responding_count = done.responded.size();
  run.metrics.recall = run.qualifying.empty()
                           ? 1.0
                           : static_cast<double>(hit) / static_cast<double>(run.qualifying.size());
  run.metrics.response_time_ms = done.closed_at - t0;
  run.metrics.message_count = done.flood_messages;
  run.metrics.reached_count = done.evaluations;
  run.metrics.phases = done.timing;

  if (qplan.scan.subscribe) {
    // the collector is gone; gateway-side subscription records go with it
    for (auto& [p, psg] : world.psgs)
      std::erase_if(psg.subs,
                    [&](const engine::Subscription& s) { return s.query_id == query_id; });
  }
  world.server.active.erase(query_id);
  return run;
}

inline Metrics run_query_experiment(SimWorld& world, const std::string& query_text, int ttl) {
  return run_query(world, query_text, ttl).metrics;
}

// ---------------------------------------------------------------------------
// administrator review

struct ReviewOutcome {
  bool refused = false;
  std::string reason;
  std::vector<PeerId> rewritten;  // peers whose stored mapping changed
};

// Applies one confirm/reject to a pending queue entry. Registration already
// treated the pair as a match, so a confirm only blesses it (and feeds the
// criterion weight); a reject retroactively rewrites every stored mapping
// that used the pair, moves those peers to a cluster for the attribute
// under its own name, and pushes an UPDATE to each.
inline ReviewOutcome apply_review_decision(SimWorld& world,
                                           const matcher::MatchCandidate& candidate,
                                           matcher::Decision decision) {
  ReviewOutcome out;
  bool queued = std::any_of(
      world.server.match.review_queue.begin(), world.server.match.review_queue.end(),
      [&](const matcher::MatchCandidate& q) { return q.same_pair(candidate); });
  if (!queued) throw matcher::DecisionError("candidate is not pending");

  if (decision == matcher::Decision::Confirm) {
    // refuse when an affected mapping already binds the global name to a
    // different local attribute (conflicting double-confirm)
    for (const auto& [peer, rec] : world.server.peers) {
      if (rec.mapping.global_domain != candidate.global_domain) continue;
      if (!rec.local_schema.find(candidate.local_name)) continue;
      auto g2l = rec.mapping.global_to_local();
      auto used = g2l.find(candidate.global_name);
      if (used != g2l.end() && used->second != candidate.local_name) {
        out.refused = true;
        out.reason = "global '" + candidate.global_domain + "." + candidate.global_name +
                     "' is already mapped to local '" + used->second + "' at " + peer.address;
        return out;
      }
    }
    matcher::apply_decision(world.server.match, candidate, decision);
    return out;
  }

  matcher::apply_decision(world.server.match, candidate, decision);
  GlobalSchema* global = world.server.find_global(candidate.global_domain);
  if (!global) return out;
  overlay::DomainRing& ring = world.server.rings.at(candidate.global_domain);

  for (auto& [peer, rec] : world.server.peers) {
    if (rec.mapping.global_domain != candidate.global_domain) continue;
    auto pair_it = std::find_if(rec.mapping.pairs.begin(), rec.mapping.pairs.end(),
                                [&](const std::pair<std::string, std::string>& p) {
                                  return p.first == candidate.global_name &&
                                         p.second == candidate.local_name;
                                });
    if (pair_it == rec.mapping.pairs.end()) continue;

    const AttributeDef* local_def = rec.local_schema.find(candidate.local_name);
    if (!local_def) continue;
    std::set<std::string> used;
    for (const auto& [g, l] : rec.mapping.pairs) used.insert(g);
    used.erase(candidate.global_name);
    std::string placed;
    if (const AttributeDef* existing = global->find(candidate.local_name);
        existing && existing->kind == local_def->kind && !used.count(candidate.local_name)) {
      placed = candidate.local_name;  // an attribute under this name already exists
    } else {
      placed = matcher::detail::place_unmatched(*global, *local_def, used);
    }
    pair_it->first = placed;
    overlay::ensure_ring(ring, *global);

    // move the peer's membership from the rejected cluster to the new one
    auto pit = world.psgs.find(peer);
    if (auto* old_cluster = ring.find_cluster(candidate.global_name)) {
      overlay::RepairReport repair;
      overlay::purge_from_cluster(ring, *old_cluster, peer, repair);
      if (pit != world.psgs.end()) {
        for (const auto& n : pit->second.net.neighbors[candidate.global_name]) {
          auto nit = world.psgs.find(n);
          if (nit != world.psgs.end())
            nit->second.net.drop_neighbor_in(candidate.global_name, peer);
        }
        pit->second.net.neighbors.erase(candidate.global_name);
      }
    }
    auto join_report = overlay::join(ring, peer, {placed}, world.rng_topology,
                                     world.config.degree);
    if (pit != world.psgs.end()) {
      pit->second.mapping = rec.mapping;
      for (const auto& [attr, links] : join_report.joined)
        for (const auto& other : links) {
          pit->second.net.add_neighbor(attr, other);
          auto nit = world.psgs.find(other);
          if (nit != world.psgs.end()) nit->second.net.add_neighbor(attr, peer);
        }
    }
    world.trace.log(world.now, "UPDATE", peer.address + " remap " + candidate.local_name);
    out.rewritten.push_back(peer);
  }
  return out;
}

// ---------------------------------------------------------------------------
// experiment sweeps

struct TtlRow {
  int ttl;
  double mean_recall;
  double stdev;
  int runs;
};

struct SizeRow {
  int size;
  double mean_response_ms;
  double stdev;
  int runs;
};

struct PhaseRow {
  std::string phase;
  double mean_ms;
};

namespace detail {

struct Stats {
  double mean = 0, stdev = 0;
};

// two-pass over the run-indexed vector: aggregation order never depends on
// which worker finished first
inline Stats stats_of(const std::vector<double>& xs) {
  Stats s;
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double m2 = 0;
    for (double x : xs) m2 += (x - s.mean) * (x - s.mean);
    s.stdev = std::sqrt(m2 / static_cast<double>(xs.size() - 1));
  }
  return s;
}

// Independent runs own their worlds and rngs, so they may execute in
// parallel; results land in a run-indexed slot.
inline std::vector<double> parallel_runs(int runs, const std::function<double(int)>& one_run) {
  std::vector<double> out(static_cast<size_t>(runs));
  unsigned workers = std::max(1u, std::min(std::thread::hardware_concurrency(),
                                           static_cast<unsigned>(runs)));
  if (workers == 1) {
    for (int r = 0; r < runs; ++r) out[static_cast<size_t>(r)] = one_run(r);
    return out;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int r = next.fetch_add(1); r < runs; r = next.fetch_add(1))
        out[static_cast<size_t>(r)] = one_run(r);
    });
  }
  for (auto& t : pool) t.join();
  return out;
}

}  // namespace detail

// Every run gets a fresh world from a per-run seed; the same run index uses
// the same seed at every ttl, so recall is monotone per seed.
inline std::vector<TtlRow> sweep_ttl(const SimConfig& config, int ttl_lo, int ttl_hi,
                                     int runs_per_point) {
  std::vector<TtlRow> rows;
  for (int ttl = ttl_lo; ttl <= ttl_hi; ++ttl) {
    auto recalls = detail::parallel_runs(runs_per_point, [&](int r) {
      SimConfig cfg = config;
      cfg.seed = mix_seed(config.seed, 100 + static_cast<std::uint64_t>(r));
      SimWorld world = build_world(cfg);
      return run_query_experiment(world, world.experiment_query_text(), ttl).recall;
    });
    auto s = detail::stats_of(recalls);
    rows.push_back({ttl, s.mean, s.stdev, runs_per_point});
  }
  return rows;
}

inline std::vector<SizeRow> sweep_size(const SimConfig& config, const std::vector<int>& sizes,
                                       int ttl, int runs_per_point) {
  std::vector<SizeRow> rows;
  for (int size : sizes) {
    auto times = detail::parallel_runs(runs_per_point, [&](int r) {
      SimConfig cfg = config;
      cfg.spaces_per_run = size;
      cfg.seed = mix_seed(config.seed, 100 + static_cast<std::uint64_t>(r));
      SimWorld world = build_world(cfg);
      return run_query_experiment(world, world.experiment_query_text(), ttl).response_time_ms;
    });
    auto s = detail::stats_of(times);
    rows.push_back({size, s.mean, s.stdev, runs_per_point});
  }
  return rows;
}

// Registers one fresh space into a prebuilt world, per run, and averages the
// four registration phases.
inline std::vector<PhaseRow> registration_breakdown(const SimConfig& config, int runs) {
  static const char* kPhases[4] = {"registration_request", "schema_matching", "return_sc_list",
                                   "p2p_connection_establishment"};
  std::vector<double> spans[4];
  for (int r = 0; r < runs; ++r) {
    SimConfig cfg = config;
    cfg.seed = mix_seed(config.seed, 500 + static_cast<std::uint64_t>(r));
    SimWorld world = build_world(cfg);
    // the fresh space joins the query domain
    int qd = 0;
    for (int d = 0; d < cfg.num_domains; ++d)
      if (detail::domain_name(d) == world.query_domain) qd = d;
    auto domain_pool = detail::domain_pool(qd, cfg.domain_attr_pool_size);
    auto attrs = detail::sample_indices(static_cast<int>(domain_pool.size()),
                                        cfg.attrs_per_space, world.rng_world);
    engine::PhaseTiming timing;
    register_one_space(world, world.query_domain, domain_pool, attrs, false, &timing);
    for (int i = 0; i < 4; ++i) spans[i].push_back(timing.span(kPhases[i]));
  }
  std::vector<PhaseRow> rows;
  for (int i = 0; i < 4; ++i) rows.push_back({kPhases[i], detail::stats_of(spans[i]).mean});
  return rows;
}

// ---------------------------------------------------------------------------
// CSV artifacts

namespace detail {

inline std::string fmt(double v) {
  char buf[40];
  snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace detail

inline std::string fig3_csv(const std::vector<PhaseRow>& rows) {
  std::string out = "phase,sim_ms\n";
  for (const auto& r : rows) out += r.phase + "," + detail::fmt(r.mean_ms) + "\n";
  return out;
}

inline std::string fig5_csv(const std::vector<TtlRow>& rows) {
  std::string out = "ttl,mean_recall,stdev,runs\n";
  for (const auto& r : rows)
    out += std::to_string(r.ttl) + "," + detail::fmt(r.mean_recall) + "," +
           detail::fmt(r.stdev) + "," + std::to_string(r.runs) + "\n";
  return out;
}

inline std::string fig6_csv(const std::vector<SizeRow>& rows) {
  std::string out = "size,mean_response_ms,stdev,runs\n";
  for (const auto& r : rows)
    out += std::to_string(r.size) + "," + detail::fmt(r.mean_response_ms) + "," +
           detail::fmt(r.stdev) + "," + std::to_string(r.runs) + "\n";
  return out;
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CdmsError("cannot write " + path);
  out << content;
}

}  // namespace cdms::simnet
