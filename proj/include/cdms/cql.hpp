// Context query language: recursive-descent parser, canonical printer,
// catalog validation, and the global-to-local rewrite applied at a gateway
// before evaluation.
//
//   query      := select | subscribe
//   select     := "SELECT" ["CONT"] proj "FROM" ident [where] [cont_tail]
//   subscribe  := "SUBSCRIBE" ident "FROM" ident [where] [lifetime]
//   proj       := ident ("," ident)*
//   where      := "WHERE" atom ("AND" atom)*
//   atom       := ident op literal
//   cont_tail  := "SAMPLE" "PERIOD" duration "LIFETIME" duration
//   lifetime   := "LIFETIME" duration
//
// Keywords are case-insensitive; identifiers and string literals keep case.
#pragma once

#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cdms/model.hpp"

namespace cdms::cql {

struct Duration {
  std::int64_t magnitude = 0;
  std::string unit;  // canonical lowercase token as written
  std::int64_t ms = 0;

  bool operator==(const Duration&) const = default;
};

enum class QueryKind { Select, Subscribe };

struct QueryAst {
  QueryKind kind = QueryKind::Select;
  bool continuous = false;
  std::vector<std::string> projection;
  std::string domain;
  Predicate predicate;
  std::optional<Duration> sample_period;
  std::optional<Duration> lifetime;
  int ttl = 8;

  bool operator==(const QueryAst&) const = default;
};

class ParseError : public CdmsError {
public:
  ParseError(std::string msg, int line, int column, std::vector<std::string> expected = {})
      : CdmsError("line " + std::to_string(line) + ":" + std::to_string(column) + ": " + msg),
        line(line),
        column(column),
        expected(std::move(expected)) {}
  int line;
  int column;
  std::vector<std::string> expected;
};

namespace detail {

enum class Tok { Ident, Keyword, String, Number, Comma, Op, End };

struct Token {
  Tok type = Tok::End;
  std::string text;     // idents/strings keep case; keywords uppercased
  double number = 0.0;
  int line = 1, column = 1;
};

inline std::string upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

inline const std::set<std::string>& keywords() {
  static const std::set<std::string> kw = {"SELECT", "SUBSCRIBE", "CONT",     "FROM", "WHERE",
                                           "AND",    "SAMPLE",    "PERIOD",   "LIFETIME"};
  return kw;
}

class Lexer {
public:
  explicit Lexer(std::string_view in) : in_(in) {}

  Token next() {
    skip_ws();
    Token t;
    t.line = line_;
    t.column = column_;
    if (eof()) {
      t.type = Tok::End;
      return t;
    }
    char c = peek();
    if (c == ',') {
      advance();
      t.type = Tok::Comma;
      t.text = ",";
      return t;
    }
    if (c == '"') return lex_string(t);
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '-' && pos_ + 1 < in_.size() && std::isdigit(static_cast<unsigned char>(in_[pos_ + 1]))))
      return lex_number(t);
    if (c == '=' || c == '!' || c == '<' || c == '>') return lex_op(t);
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return lex_word(t);
    throw ParseError(std::string("unexpected character '") + c + "'", line_, column_);
  }

private:
  bool eof() const { return pos_ >= in_.size(); }
  char peek() const { return in_[pos_]; }
  void advance() {
    if (in_[pos_] == '\n') {
      ++line_;
      column_ = 1;
    } else {
      ++column_;
    }
    ++pos_;
  }

  void skip_ws() {
    while (!eof() && std::isspace(static_cast<unsigned char>(peek()))) advance();
  }

  Token lex_string(Token t) {
    advance();  // opening quote
    std::string out;
    while (!eof() && peek() != '"') {
      if (peek() == '\\') {
        advance();
        if (eof()) break;
        char e = peek();
        if (e == '"' || e == '\\') out += e;
        else throw ParseError(std::string("bad escape '\\") + e + "'", line_, column_);
        advance();
      } else {
        out += peek();
        advance();
      }
    }
    if (eof()) throw ParseError("unterminated string literal", t.line, t.column);
    advance();  // closing quote
    t.type = Tok::String;
    t.text = std::move(out);
    return t;
  }

  Token lex_number(Token t) {
    size_t start = pos_;
    if (peek() == '-') advance();
    while (!eof() && std::isdigit(static_cast<unsigned char>(peek()))) advance();
    if (!eof() && peek() == '.') {
      advance();
      while (!eof() && std::isdigit(static_cast<unsigned char>(peek()))) advance();
    }
    std::string_view text = in_.substr(start, pos_ - start);
    double v = 0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || p != text.data() + text.size())
      throw ParseError("bad number literal '" + std::string(text) + "'", t.line, t.column);
    t.type = Tok::Number;
    t.text = std::string(text);
    t.number = v;
    return t;
  }

  Token lex_op(Token t) {
    char c = peek();
    advance();
    std::string op(1, c);
    if ((c == '!' || c == '<' || c == '>') && !eof() && peek() == '=') {
      op += '=';
      advance();
    }
    if (op == "!") throw ParseError("expected '!='", t.line, t.column);
    t.type = Tok::Op;
    t.text = op;
    return t;
  }

  Token lex_word(Token t) {
    size_t start = pos_;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_')) advance();
    std::string word(in_.substr(start, pos_ - start));
    std::string up = upper(word);
    if (keywords().count(up)) {
      t.type = Tok::Keyword;
      t.text = up;
    } else {
      t.type = Tok::Ident;
      t.text = std::move(word);
    }
    return t;
  }

  std::string_view in_;
  size_t pos_ = 0;
  int line_ = 1, column_ = 1;
};

inline std::optional<std::int64_t> unit_factor_ms(std::string_view unit) {
  if (unit == "ms") return 1;
  if (unit == "s" || unit == "sec" || unit == "secs") return 1000;
  if (unit == "min" || unit == "mins") return 60'000;
  if (unit == "hour" || unit == "hours") return 3'600'000;
  return std::nullopt;
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

class Parser {
public:
  explicit Parser(std::string_view text, int default_ttl)
      : lex_(text), default_ttl_(default_ttl) {
    bump();
  }

  QueryAst query() {
    QueryAst ast;
    ast.ttl = default_ttl_;
    if (accept_keyword("SELECT")) {
      ast.kind = QueryKind::Select;
      ast.continuous = accept_keyword("CONT");
      ast.projection.push_back(ident("attribute name"));
      while (accept(Tok::Comma)) ast.projection.push_back(ident("attribute name"));
      expect_keyword("FROM");
      ast.domain = ident("domain name");
      if (accept_keyword("WHERE")) ast.predicate = where_tail();
      if (ast.continuous) {
        expect_keyword("SAMPLE");
        expect_keyword("PERIOD");
        ast.sample_period = duration();
        expect_keyword("LIFETIME");
        ast.lifetime = duration();
      } else if (cur_.type == Tok::Keyword &&
                 (cur_.text == "SAMPLE" || cur_.text == "LIFETIME")) {
        throw err("SAMPLE PERIOD/LIFETIME require CONT", {"end of query"});
      }
    } else if (accept_keyword("SUBSCRIBE")) {
      ast.kind = QueryKind::Subscribe;
      ast.projection.push_back(ident("event name"));
      expect_keyword("FROM");
      ast.domain = ident("domain name");
      if (accept_keyword("WHERE")) ast.predicate = where_tail();
      if (accept_keyword("LIFETIME")) ast.lifetime = duration();
    } else {
      throw err("expected SELECT or SUBSCRIBE", {"SELECT", "SUBSCRIBE"});
    }
    if (cur_.type != Tok::End) throw err("trailing input '" + cur_.text + "'", {"end of query"});
    return ast;
  }

  Duration duration() {
    if (cur_.type != Tok::Number) throw err("expected duration magnitude", {"integer"});
    if (cur_.text.find('.') != std::string::npos || cur_.text[0] == '-')
      throw err("duration magnitude must be a non-negative integer", {"integer"});
    Duration d;
    d.magnitude = static_cast<std::int64_t>(cur_.number);
    bump();
    if (cur_.type != Tok::Ident) throw err("expected duration unit", {"ms", "s", "min", "hour"});
    std::string unit = lower(cur_.text);
    auto factor = unit_factor_ms(unit);
    if (!factor) throw err("unknown duration unit '" + cur_.text + "'", {"ms", "s", "min", "hour"});
    bump();
    d.unit = unit;
    d.ms = d.magnitude * *factor;
    return d;
  }

private:
  Predicate where_tail() {
    Predicate p;
    p.atoms.push_back(atom());
    while (accept_keyword("AND")) p.atoms.push_back(atom());
    return p;
  }

  PredicateAtom atom() {
    PredicateAtom a;
    a.attribute = ident("attribute name");
    if (cur_.type != Tok::Op) throw err("expected comparison operator", {"=", "!=", "<", "<=", ">", ">="});
    a.op = *compare_op_from_string(cur_.text);
    bump();
    a.literal = literal();
    return a;
  }

  AttributeValue literal() {
    if (cur_.type == Tok::String) {
      auto v = AttributeValue::text(cur_.text);
      bump();
      return v;
    }
    if (cur_.type == Tok::Number) {
      auto v = AttributeValue::number(cur_.number);
      bump();
      return v;
    }
    if (cur_.type == Tok::Ident) {
      std::string low = lower(cur_.text);
      if (low == "true" || low == "false") {
        auto v = AttributeValue::boolean(low == "true");
        bump();
        return v;
      }
    }
    throw err("expected literal", {"string", "number", "true", "false"});
  }

  std::string ident(const char* what) {
    if (cur_.type != Tok::Ident) throw err(std::string("expected ") + what, {"identifier"});
    std::string s = cur_.text;
    bump();
    return s;
  }

  bool accept(Tok t) {
    if (cur_.type == t) {
      bump();
      return true;
    }
    return false;
  }

  bool accept_keyword(std::string_view kw) {
    if (cur_.type == Tok::Keyword && cur_.text == kw) {
      bump();
      return true;
    }
    return false;
  }

  void expect_keyword(std::string_view kw) {
    if (!accept_keyword(kw)) throw err("expected " + std::string(kw), {std::string(kw)});
  }

  ParseError err(const std::string& msg, std::vector<std::string> expected) {
    return ParseError(msg + " (got '" + (cur_.type == Tok::End ? "<end>" : cur_.text) + "')",
                      cur_.line, cur_.column, std::move(expected));
  }

  void bump() { cur_ = lex_.next(); }

  Lexer lex_;
  Token cur_;
  int default_ttl_;
};

inline std::string render_number(double d) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, d);
  (void)ec;
  return std::string(buf, p);
}

inline std::string render_literal(const AttributeValue& v) {
  switch (v.kind()) {
    case Kind::Text: {
      std::string out = "\"";
      for (char c : v.as_text()) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
      }
      return out + "\"";
    }
    case Kind::Number: return render_number(v.as_number());
    case Kind::Boolean: return v.as_boolean() ? "true" : "false";
    case Kind::TextList: break;
  }
  throw CdmsError("list literals have no query syntax");
}

}  // namespace detail

inline QueryAst parse(std::string_view text, int default_ttl = 8) {
  return detail::Parser(text, default_ttl).query();
}

// "1 min" -> 60000 ms. One magnitude, one unit.
inline Duration parse_duration(std::string_view text) {
  detail::Parser p(text, 0);
  return p.duration();
}

// Canonical printer: parse(render(ast)) == ast for every well-formed ast.
inline std::string render(const QueryAst& ast) {
  std::string out = ast.kind == QueryKind::Select ? "SELECT" : "SUBSCRIBE";
  if (ast.continuous) out += " CONT";
  for (size_t i = 0; i < ast.projection.size(); ++i)
    out += (i ? ", " : " ") + ast.projection[i];
  out += " FROM " + ast.domain;
  if (!ast.predicate.atoms.empty()) {
    out += " WHERE ";
    for (size_t i = 0; i < ast.predicate.atoms.size(); ++i) {
      const auto& a = ast.predicate.atoms[i];
      if (i) out += " AND ";
      out += a.attribute + " " + to_string(a.op) + " " + detail::render_literal(a.literal);
    }
  }
  if (ast.sample_period)
    out += " SAMPLE PERIOD " + std::to_string(ast.sample_period->magnitude) + " " +
           ast.sample_period->unit;
  if (ast.lifetime)
    out += " LIFETIME " + std::to_string(ast.lifetime->magnitude) + " " + ast.lifetime->unit;
  return out;
}

struct ValidationError {
  enum class Code {
    UnknownDomain,
    UnknownAttribute,
    KindMismatch,
    UnsupportedOperator,
    SubscribeOnNonEvent,
  };
  Code code;
  std::string detail;

  bool operator==(const ValidationError&) const = default;
};

inline const char* to_string(ValidationError::Code c) {
  using Code = ValidationError::Code;
  switch (c) {
    case Code::UnknownDomain: return "unknown-domain";
    case Code::UnknownAttribute: return "unknown-attribute";
    case Code::KindMismatch: return "kind-mismatch";
    case Code::UnsupportedOperator: return "unsupported-operator";
    case Code::SubscribeOnNonEvent: return "subscribe-on-non-event";
  }
  return "?";
}

inline const GlobalSchema* find_schema(const std::vector<GlobalSchema>& globals,
                                       std::string_view domain) {
  for (const auto& g : globals)
    if (g.domain_name == domain) return &g;
  return nullptr;
}

// Checks the query against the global schemas; all problems are collected.
// An empty result means the query is well-typed and may be planned.
inline std::vector<ValidationError> validate(const QueryAst& ast,
                                             const std::vector<GlobalSchema>& globals) {
  std::vector<ValidationError> out;
  const GlobalSchema* schema = find_schema(globals, ast.domain);
  if (!schema) {
    out.push_back({ValidationError::Code::UnknownDomain, ast.domain});
    return out;
  }
  for (const auto& name : ast.projection) {
    const AttributeDef* def = schema->find(name);
    if (!def) {
      out.push_back({ValidationError::Code::UnknownAttribute, name});
    } else if (ast.kind == QueryKind::Subscribe && !def->is_event) {
      out.push_back({ValidationError::Code::SubscribeOnNonEvent, name});
    }
  }
  for (const auto& atom : ast.predicate.atoms) {
    const AttributeDef* def = schema->find(atom.attribute);
    if (!def) {
      out.push_back({ValidationError::Code::UnknownAttribute, atom.attribute});
      continue;
    }
    if (atom.literal.kind() != def->kind) {
      out.push_back({ValidationError::Code::KindMismatch,
                     atom.attribute + " is " + std::string(to_string(def->kind)) + ", literal is " +
                         to_string(atom.literal.kind())});
      continue;
    }
    if (is_ordering(atom.op) && def->kind != Kind::Number) {
      out.push_back({ValidationError::Code::UnsupportedOperator,
                     std::string(to_string(atom.op)) + " on " + to_string(def->kind) + " " +
                         atom.attribute});
    }
  }
  return out;
}

struct RewriteResult {
  QueryAst ast;
  std::set<std::string> unmapped;  // names that passed through unchanged
};

// Convert a global-schema query to a gateway's local names. Names missing
// from the mapping stay unchanged but are flagged; the evaluator treats
// atoms over them as unsatisfiable.
inline RewriteResult rewrite_to_local(const QueryAst& ast,
                                      const std::map<std::string, std::string>& global_to_local) {
  RewriteResult r{ast, {}};
  auto map_name = [&](std::string& name) {
    auto it = global_to_local.find(name);
    if (it == global_to_local.end()) {
      r.unmapped.insert(name);
    } else {
      name = it->second;
    }
  };
  for (auto& name : r.ast.projection) map_name(name);
  for (auto& atom : r.ast.predicate.atoms) map_name(atom.attribute);
  return r;
}

}  // namespace cdms::cql
