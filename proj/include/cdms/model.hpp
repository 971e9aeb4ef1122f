// Core domain types of the attribute-value context model: typed values,
// attribute definitions, local/global schemas, peer identities, and the
// comparison semantics used by WHERE evaluation everywhere else.
#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace cdms {

enum class Kind { Text, Number, Boolean, TextList };

inline const char* to_string(Kind k) {
  switch (k) {
    case Kind::Text: return "text";
    case Kind::Number: return "number";
    case Kind::Boolean: return "boolean";
    case Kind::TextList: return "list-of-text";
  }
  return "?";
}

inline std::optional<Kind> kind_from_string(std::string_view s) {
  if (s == "text") return Kind::Text;
  if (s == "number") return Kind::Number;
  if (s == "boolean") return Kind::Boolean;
  if (s == "list-of-text") return Kind::TextList;
  return std::nullopt;
}

class CdmsError : public std::runtime_error {
public:
  explicit CdmsError(const std::string& what) : std::runtime_error(what) {}
};

class KindMismatchError : public CdmsError {
public:
  using CdmsError::CdmsError;
};

class UnsupportedOperatorError : public CdmsError {
public:
  using CdmsError::CdmsError;
};

// A context value holds exactly one of the four kinds. Numbers are finite.
class AttributeValue {
public:
  using TextList = std::vector<std::string>;

  AttributeValue() : v_(std::string{}) {}

  static AttributeValue text(std::string s) { return AttributeValue(Storage(std::move(s))); }
  static AttributeValue number(double d) {
    if (!std::isfinite(d)) throw CdmsError("number value must be finite");
    return AttributeValue(Storage(d));
  }
  static AttributeValue boolean(bool b) { return AttributeValue(Storage(b)); }
  static AttributeValue text_list(TextList xs) { return AttributeValue(Storage(std::move(xs))); }

  Kind kind() const { return static_cast<Kind>(v_.index()); }

  const std::string& as_text() const { return get<std::string>("text"); }
  double as_number() const { return get<double>("number"); }
  bool as_boolean() const { return get<bool>("boolean"); }
  const TextList& as_text_list() const { return get<TextList>("list-of-text"); }

  bool operator==(const AttributeValue& o) const {
    if (kind() != o.kind()) return false;
    if (kind() == Kind::TextList) {
      // list values compare as sets
      return as_set() == o.as_set();
    }
    return v_ == o.v_;
  }

  std::set<std::string> as_set() const {
    const auto& xs = as_text_list();
    return {xs.begin(), xs.end()};
  }

  // plain rendering for CSV cells and diagnostics
  std::string display() const {
    switch (kind()) {
      case Kind::Text: return as_text();
      case Kind::Number: {
        char buf[32];
        double d = as_number();
        if (d == static_cast<std::int64_t>(d) && std::abs(d) < 1e15)
          snprintf(buf, sizeof buf, "%lld", static_cast<long long>(d));
        else
          snprintf(buf, sizeof buf, "%.17g", d);
        return buf;
      }
      case Kind::Boolean: return as_boolean() ? "true" : "false";
      case Kind::TextList: {
        std::string out = "[";
        const auto& xs = as_text_list();
        for (size_t i = 0; i < xs.size(); ++i) {
          if (i) out += ";";
          out += xs[i];
        }
        out += "]";
        return out;
      }
    }
    return "";
  }

private:
  using Storage = std::variant<std::string, double, bool, TextList>;
  explicit AttributeValue(Storage v) : v_(std::move(v)) {}

  template <class T>
  const T& get(const char* want) const {
    if (auto p = std::get_if<T>(&v_)) return *p;
    throw KindMismatchError(std::string("value is ") + to_string(kind()) + ", not " + want);
  }

  Storage v_;
};

enum class CompareOp { Eq, Ne, Lt, Le, Gt, Ge };

inline const char* to_string(CompareOp op) {
  switch (op) {
    case CompareOp::Eq: return "=";
    case CompareOp::Ne: return "!=";
    case CompareOp::Lt: return "<";
    case CompareOp::Le: return "<=";
    case CompareOp::Gt: return ">";
    case CompareOp::Ge: return ">=";
  }
  return "?";
}

inline std::optional<CompareOp> compare_op_from_string(std::string_view s) {
  if (s == "=") return CompareOp::Eq;
  if (s == "!=") return CompareOp::Ne;
  if (s == "<") return CompareOp::Lt;
  if (s == "<=") return CompareOp::Le;
  if (s == ">") return CompareOp::Gt;
  if (s == ">=") return CompareOp::Ge;
  return std::nullopt;
}

inline bool is_ordering(CompareOp op) {
  return op != CompareOp::Eq && op != CompareOp::Ne;
}

// Typed comparison. Text is exact and case-sensitive; ordering is defined
// only on numbers; list-of-text supports =/!= with set semantics.
inline bool compare(const AttributeValue& value, CompareOp op, const AttributeValue& literal) {
  if (value.kind() != literal.kind())
    throw KindMismatchError(std::string("cannot compare ") + to_string(value.kind()) + " with " +
                            to_string(literal.kind()));
  if (is_ordering(op)) {
    if (value.kind() != Kind::Number)
      throw UnsupportedOperatorError(std::string("operator ") + to_string(op) +
                                     " requires number operands, got " + to_string(value.kind()));
    double a = value.as_number(), b = literal.as_number();
    switch (op) {
      case CompareOp::Lt: return a < b;
      case CompareOp::Le: return a <= b;
      case CompareOp::Gt: return a > b;
      case CompareOp::Ge: return a >= b;
      default: break;
    }
  }
  bool eq = value == literal;
  return op == CompareOp::Eq ? eq : !eq;
}

// One WHERE conjunct: attribute <op> literal. An empty conjunction is true.
struct PredicateAtom {
  std::string attribute;
  CompareOp op = CompareOp::Eq;
  AttributeValue literal;

  bool operator==(const PredicateAtom& o) const {
    return attribute == o.attribute && op == o.op && literal == o.literal;
  }
};

struct Predicate {
  std::vector<PredicateAtom> atoms;

  bool trivially_true() const { return atoms.empty(); }
  bool operator==(const Predicate&) const = default;
};

struct AttributeDef {
  std::string name;
  Kind kind = Kind::Text;
  bool is_event = false;
  bool is_private = false;

  bool operator==(const AttributeDef&) const = default;
};

inline bool is_token(std::string_view s) {
  if (s.empty()) return false;
  if (!(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
  });
}

struct LocalSchema {
  std::string domain_name;
  std::vector<AttributeDef> attributes;  // declaration order is meaningful
  std::optional<std::string> parent_domain;

  const AttributeDef* find(std::string_view name) const {
    for (const auto& a : attributes)
      if (a.name == name) return &a;
    return nullptr;
  }
  bool operator==(const LocalSchema&) const = default;
};

struct GlobalSchema {
  std::string domain_name;
  std::vector<AttributeDef> attributes;  // insertion order = cluster creation order
  int member_count = 0;

  const AttributeDef* find(std::string_view name) const {
    for (const auto& a : attributes)
      if (a.name == name) return &a;
    return nullptr;
  }
  bool operator==(const GlobalSchema&) const = default;
};

struct SchemaViolation {
  enum class Code {
    BadDomainName,
    BadAttributeName,
    DuplicateAttribute,
    EventNotBoolean,
    BadParent,
    DataKindMismatch,
  };
  Code code;
  std::string detail;

  bool operator==(const SchemaViolation&) const = default;
};

inline const char* to_string(SchemaViolation::Code c) {
  using Code = SchemaViolation::Code;
  switch (c) {
    case Code::BadDomainName: return "bad-domain-name";
    case Code::BadAttributeName: return "bad-attribute-name";
    case Code::DuplicateAttribute: return "duplicate-attribute";
    case Code::EventNotBoolean: return "event-not-boolean";
    case Code::BadParent: return "bad-parent";
    case Code::DataKindMismatch: return "data-kind-mismatch";
  }
  return "?";
}

// Returns every invariant violation; empty means well-formed.
inline std::vector<SchemaViolation> validate_schema(const LocalSchema& schema) {
  std::vector<SchemaViolation> out;
  if (!is_token(schema.domain_name))
    out.push_back({SchemaViolation::Code::BadDomainName, schema.domain_name});
  std::set<std::string> seen;
  for (const auto& a : schema.attributes) {
    if (!is_token(a.name)) out.push_back({SchemaViolation::Code::BadAttributeName, a.name});
    if (!seen.insert(a.name).second)
      out.push_back({SchemaViolation::Code::DuplicateAttribute, a.name});
    if (a.is_event && a.kind != Kind::Boolean)
      out.push_back({SchemaViolation::Code::EventNotBoolean, a.name});
  }
  if (schema.parent_domain) {
    if (!is_token(*schema.parent_domain) || *schema.parent_domain == schema.domain_name)
      out.push_back({SchemaViolation::Code::BadParent, schema.parent_domain.value_or("")});
  }
  return out;
}

struct PeerId {
  std::uint64_t id = 0;
  std::string address;  // stands in for the IP address of the gateway

  auto operator<=>(const PeerId& o) const { return id <=> o.id; }
  bool operator==(const PeerId& o) const { return id == o.id; }
};

// A registered space: its peer identity, declared schema, current attribute
// values, and the rules deducing event attributes from plain ones.
struct SpaceProfile {
  PeerId peer;
  LocalSchema schema;
  std::map<std::string, AttributeValue> data;
  std::map<std::string, Predicate> event_rules;
};

inline std::vector<SchemaViolation> validate_profile(const SpaceProfile& p) {
  auto out = validate_schema(p.schema);
  for (const auto& [name, value] : p.data) {
    const AttributeDef* def = p.schema.find(name);
    if (!def) {
      out.push_back({SchemaViolation::Code::BadAttributeName, "data key " + name});
    } else if (value.kind() != def->kind) {
      out.push_back({SchemaViolation::Code::DataKindMismatch, name});
    }
  }
  for (const auto& [event, rule] : p.event_rules) {
    const AttributeDef* def = p.schema.find(event);
    if (!def || !def->is_event) {
      out.push_back({SchemaViolation::Code::BadAttributeName, "event rule for " + event});
      continue;
    }
    for (const auto& atom : rule.atoms) {
      const AttributeDef* ref = p.schema.find(atom.attribute);
      if (!ref || ref->is_event)
        out.push_back({SchemaViolation::Code::BadAttributeName,
                       "event rule " + event + " references " + atom.attribute});
    }
  }
  return out;
}

}  // namespace cdms
