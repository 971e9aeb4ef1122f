// Wire-message catalog for the simulated transport. Messages serialize as
// tagged records `TAG {json payload}`, the same format a networked build
// would put on the wire.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cdms/json_io.hpp"

namespace cdms::msg {

struct Register {
  std::string address;
  std::string template_xml;
};

struct ScEntry {
  std::string domain;
  std::string attribute;
  PeerId head;
  bool operator==(const ScEntry&) const = default;
};

struct RegisterAck {
  std::vector<ScEntry> sc_list;
  matcher::SchemaMapping mapping;
};

struct Update {
  std::string template_xml;
};

struct JoinMsg {
  std::string domain;
  std::string attribute;
  PeerId peer;
};

struct Ping {
  std::uint64_t nonce = 0;
};

struct Pong {
  std::uint64_t nonce = 0;
};

using Lookup = overlay::LookupRequest;  // subscribe=false

struct ResultCell {
  std::string attribute;
  std::optional<AttributeValue> value;  // null = attribute not provided
  bool operator==(const ResultCell&) const = default;
};

struct Result {
  std::uint64_t query_id = 0;
  PeerId peer;
  std::vector<ResultCell> tuple;
};

using Subscribe = overlay::LookupRequest;  // subscribe=true, lifetime set

struct Notify {
  std::uint64_t query_id = 0;
  PeerId peer;
  bool event_value = false;
  std::int64_t timestamp_ms = 0;
};

using Message =
    std::variant<Register, RegisterAck, Update, JoinMsg, Ping, Pong, Lookup, Result, Notify>;

inline void to_json(json& j, const ScEntry& e) {
  j = json{{"domain", e.domain}, {"attribute", e.attribute}, {"head", e.head}};
}
inline void from_json(const json& j, ScEntry& e) {
  j.at("domain").get_to(e.domain);
  j.at("attribute").get_to(e.attribute);
  j.at("head").get_to(e.head);
}

inline void to_json(json& j, const ResultCell& c) {
  j = json{{"attribute", c.attribute}};
  if (c.value) j["value"] = *c.value;
}
inline void from_json(const json& j, ResultCell& c) {
  j.at("attribute").get_to(c.attribute);
  if (j.contains("value")) c.value = j.at("value").get<AttributeValue>();
}

inline const char* tag(const Message& m) {
  struct Tagger {
    const char* operator()(const Register&) const { return "REGISTER"; }
    const char* operator()(const RegisterAck&) const { return "REGISTER_ACK"; }
    const char* operator()(const Update&) const { return "UPDATE"; }
    const char* operator()(const JoinMsg&) const { return "JOIN"; }
    const char* operator()(const Ping&) const { return "PING"; }
    const char* operator()(const Pong&) const { return "PONG"; }
    const char* operator()(const Lookup& l) const { return l.subscribe ? "SUBSCRIBE" : "LOOKUP"; }
    const char* operator()(const Result&) const { return "RESULT"; }
    const char* operator()(const Notify&) const { return "NOTIFY"; }
  };
  return std::visit(Tagger{}, m);
}

inline std::string encode(const Message& m) {
  json payload;
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Register>) {
          payload = json{{"address", v.address}, {"template", v.template_xml}};
        } else if constexpr (std::is_same_v<T, RegisterAck>) {
          payload = json{{"sc_list", v.sc_list}, {"mapping", v.mapping}};
        } else if constexpr (std::is_same_v<T, Update>) {
          payload = json{{"template", v.template_xml}};
        } else if constexpr (std::is_same_v<T, JoinMsg>) {
          payload = json{{"domain", v.domain}, {"attribute", v.attribute}, {"peer", v.peer}};
        } else if constexpr (std::is_same_v<T, Ping> || std::is_same_v<T, Pong>) {
          payload = json{{"nonce", v.nonce}};
        } else if constexpr (std::is_same_v<T, Lookup>) {
          to_json(payload, v);
        } else if constexpr (std::is_same_v<T, Result>) {
          payload = json{{"query_id", v.query_id}, {"peer", v.peer}, {"tuple", v.tuple}};
        } else if constexpr (std::is_same_v<T, Notify>) {
          payload = json{{"query_id", v.query_id},
                         {"peer", v.peer},
                         {"value", v.event_value},
                         {"timestamp_ms", v.timestamp_ms}};
        }
      },
      m);
  return std::string(tag(m)) + " " + payload.dump();
}

inline Message decode(const std::string& line) {
  auto space = line.find(' ');
  if (space == std::string::npos) throw CdmsError("bad wire record: " + line);
  std::string t = line.substr(0, space);
  json payload = json::parse(line.substr(space + 1));
  if (t == "REGISTER")
    return Register{payload.at("address").get<std::string>(),
                    payload.at("template").get<std::string>()};
  if (t == "REGISTER_ACK")
    return RegisterAck{payload.at("sc_list").get<std::vector<ScEntry>>(),
                       payload.at("mapping").get<matcher::SchemaMapping>()};
  if (t == "UPDATE") return Update{payload.at("template").get<std::string>()};
  if (t == "JOIN")
    return JoinMsg{payload.at("domain").get<std::string>(),
                   payload.at("attribute").get<std::string>(), payload.at("peer").get<PeerId>()};
  if (t == "PING") return Ping{payload.at("nonce").get<std::uint64_t>()};
  if (t == "PONG") return Pong{payload.at("nonce").get<std::uint64_t>()};
  if (t == "LOOKUP" || t == "SUBSCRIBE") {
    auto req = payload.get<overlay::LookupRequest>();
    if ((t == "SUBSCRIBE") != req.subscribe)
      throw CdmsError("tag/payload mismatch in: " + line);
    return req;
  }
  if (t == "RESULT")
    return Result{payload.at("query_id").get<std::uint64_t>(), payload.at("peer").get<PeerId>(),
                  payload.at("tuple").get<std::vector<ResultCell>>()};
  if (t == "NOTIFY")
    return Notify{payload.at("query_id").get<std::uint64_t>(), payload.at("peer").get<PeerId>(),
                  payload.at("value").get<bool>(),
                  payload.at("timestamp_ms").get<std::int64_t>()};
  throw CdmsError("unknown wire tag: " + t);
}

}  // namespace cdms::msg
