// nlohmann/json bindings for the core types, shared by the wire-message
// codec and the world snapshot format.
#pragma once

#include <json.hpp>

#include "cdms/matcher.hpp"
#include "cdms/model.hpp"
#include "cdms/overlay.hpp"

namespace cdms {

using nlohmann::json;

inline void to_json(json& j, const AttributeValue& v) {
  switch (v.kind()) {
    case Kind::Text: j = json{{"t", v.as_text()}}; break;
    case Kind::Number: j = json{{"n", v.as_number()}}; break;
    case Kind::Boolean: j = json{{"b", v.as_boolean()}}; break;
    case Kind::TextList: j = json{{"l", v.as_text_list()}}; break;
  }
}

inline void from_json(const json& j, AttributeValue& v) {
  if (j.contains("t")) v = AttributeValue::text(j.at("t").get<std::string>());
  else if (j.contains("n")) v = AttributeValue::number(j.at("n").get<double>());
  else if (j.contains("b")) v = AttributeValue::boolean(j.at("b").get<bool>());
  else if (j.contains("l")) v = AttributeValue::text_list(j.at("l").get<std::vector<std::string>>());
  else throw CdmsError("bad value encoding: " + j.dump());
}

inline void to_json(json& j, const CompareOp& op) { j = to_string(op); }
inline void from_json(const json& j, CompareOp& op) {
  auto parsed = compare_op_from_string(j.get<std::string>());
  if (!parsed) throw CdmsError("bad operator: " + j.dump());
  op = *parsed;
}

inline void to_json(json& j, const PredicateAtom& a) {
  j = json{{"attr", a.attribute}, {"op", a.op}, {"lit", a.literal}};
}
inline void from_json(const json& j, PredicateAtom& a) {
  j.at("attr").get_to(a.attribute);
  j.at("op").get_to(a.op);
  j.at("lit").get_to(a.literal);
}

inline void to_json(json& j, const Predicate& p) { j = json{{"atoms", p.atoms}}; }
inline void from_json(const json& j, Predicate& p) { j.at("atoms").get_to(p.atoms); }

inline void to_json(json& j, const Kind& k) { j = to_string(k); }
inline void from_json(const json& j, Kind& k) {
  auto parsed = kind_from_string(j.get<std::string>());
  if (!parsed) throw CdmsError("bad kind: " + j.dump());
  k = *parsed;
}

inline void to_json(json& j, const AttributeDef& d) {
  j = json{{"name", d.name}, {"kind", d.kind}};
  if (d.is_event) j["event"] = true;
  if (d.is_private) j["private"] = true;
}
inline void from_json(const json& j, AttributeDef& d) {
  j.at("name").get_to(d.name);
  j.at("kind").get_to(d.kind);
  d.is_event = j.value("event", false);
  d.is_private = j.value("private", false);
}

inline void to_json(json& j, const LocalSchema& s) {
  j = json{{"domain", s.domain_name}, {"attributes", s.attributes}};
  if (s.parent_domain) j["parent"] = *s.parent_domain;
}
inline void from_json(const json& j, LocalSchema& s) {
  j.at("domain").get_to(s.domain_name);
  j.at("attributes").get_to(s.attributes);
  if (j.contains("parent")) s.parent_domain = j.at("parent").get<std::string>();
}

inline void to_json(json& j, const GlobalSchema& s) {
  j = json{{"domain", s.domain_name}, {"attributes", s.attributes},
           {"member_count", s.member_count}};
}
inline void from_json(const json& j, GlobalSchema& s) {
  j.at("domain").get_to(s.domain_name);
  j.at("attributes").get_to(s.attributes);
  j.at("member_count").get_to(s.member_count);
}

inline void to_json(json& j, const PeerId& p) { j = json{{"id", p.id}, {"addr", p.address}}; }
inline void from_json(const json& j, PeerId& p) {
  j.at("id").get_to(p.id);
  j.at("addr").get_to(p.address);
}

}  // namespace cdms

namespace cdms::matcher {

inline void to_json(json& j, const SchemaMapping& m) {
  j = json{{"peer", m.peer}, {"domain", m.global_domain}, {"pairs", m.pairs}};
}
inline void from_json(const json& j, SchemaMapping& m) {
  j.at("peer").get_to(m.peer);
  j.at("domain").get_to(m.global_domain);
  j.at("pairs").get_to(m.pairs);
}

inline void to_json(json& j, const MatchCandidate& c) {
  j = json{{"local", c.local_name},
           {"global_domain", c.global_domain},
           {"global", c.global_name},
           {"criterion", to_string(c.criterion)},
           {"score", c.score},
           {"status", to_string(c.status)},
           {"conflict", c.conflict}};
}
inline void from_json(const json& j, MatchCandidate& c) {
  j.at("local").get_to(c.local_name);
  j.at("global_domain").get_to(c.global_domain);
  j.at("global").get_to(c.global_name);
  auto crit = criterion_from_string(j.at("criterion").get<std::string>());
  if (!crit) throw CdmsError("bad criterion: " + j.dump());
  c.criterion = *crit;
  j.at("score").get_to(c.score);
  std::string status = j.at("status").get<std::string>();
  if (status == "pending") c.status = MatchStatus::Pending;
  else if (status == "confirmed") c.status = MatchStatus::Confirmed;
  else if (status == "rejected") c.status = MatchStatus::Rejected;
  else throw CdmsError("bad status: " + status);
  c.conflict = j.value("conflict", false);
}

}  // namespace cdms::matcher

namespace cdms::overlay {

inline void to_json(json& j, const LookupRequest& r) {
  j = json{{"query_id", r.query_id},   {"domain", r.domain},
           {"predicate", r.predicate}, {"projection", r.projection},
           {"ttl", r.ttl},             {"origin", r.origin}};
  if (r.subscribe) {
    j["subscribe"] = true;
    j["lifetime_ms"] = r.lifetime_ms;
  }
  if (r.continuous) {
    j["continuous"] = true;
    j["sample_period_ms"] = r.sample_period_ms;
    j["lifetime_ms"] = r.lifetime_ms;
  }
}
inline void from_json(const json& j, LookupRequest& r) {
  j.at("query_id").get_to(r.query_id);
  j.at("domain").get_to(r.domain);
  j.at("predicate").get_to(r.predicate);
  j.at("projection").get_to(r.projection);
  j.at("ttl").get_to(r.ttl);
  j.at("origin").get_to(r.origin);
  r.subscribe = j.value("subscribe", false);
  r.continuous = j.value("continuous", false);
  r.sample_period_ms = j.value("sample_period_ms", static_cast<std::int64_t>(0));
  r.lifetime_ms = j.value("lifetime_ms", static_cast<std::int64_t>(-1));
}

}  // namespace cdms::overlay
