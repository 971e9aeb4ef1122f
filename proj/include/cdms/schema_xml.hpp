// Schema-template codec: the XML payload a gateway sends when registering.
// The dialect is closed: exactly <schema>, optional <parent>, and
// <attribute/> elements; anything else is a parse error.
#pragma once

#include <cctype>
#include <string>
#include <string_view>

#include "cdms/model.hpp"

namespace cdms {

class SchemaXmlError : public CdmsError {
public:
  using CdmsError::CdmsError;
};

namespace detail_xml {

struct Cursor {
  std::string_view in;
  size_t pos = 0;

  bool eof() const { return pos >= in.size(); }
  char peek() const { return in[pos]; }

  void skip_ws_and_comments() {
    for (;;) {
      while (!eof() && std::isspace(static_cast<unsigned char>(peek()))) ++pos;
      if (!eof() && in.compare(pos, 4, "<!--") == 0) {
        size_t end = in.find("-->", pos + 4);
        if (end == std::string_view::npos) throw SchemaXmlError("unterminated comment");
        pos = end + 3;
        continue;
      }
      return;
    }
  }

  bool consume(std::string_view lit) {
    if (in.compare(pos, lit.size(), lit) == 0) {
      pos += lit.size();
      return true;
    }
    return false;
  }

  void expect(std::string_view lit) {
    if (!consume(lit))
      throw SchemaXmlError("expected '" + std::string(lit) + "' at offset " + std::to_string(pos));
  }

  std::string name() {
    size_t start = pos;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' ||
                      peek() == '-' || peek() == ':'))
      ++pos;
    if (pos == start) throw SchemaXmlError("expected name at offset " + std::to_string(pos));
    return std::string(in.substr(start, pos - start));
  }

  std::string quoted() {
    expect("\"");
    std::string out;
    while (!eof() && peek() != '"') {
      if (peek() == '&') {
        size_t semi = in.find(';', pos);
        if (semi == std::string_view::npos) throw SchemaXmlError("bad entity");
        std::string_view ent = in.substr(pos, semi - pos + 1);
        if (ent == "&amp;") out += '&';
        else if (ent == "&lt;") out += '<';
        else if (ent == "&gt;") out += '>';
        else if (ent == "&quot;") out += '"';
        else if (ent == "&apos;") out += '\'';
        else throw SchemaXmlError("unknown entity " + std::string(ent));
        pos = semi + 1;
      } else {
        out += peek();
        ++pos;
      }
    }
    expect("\"");
    return out;
  }
};

inline std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline bool parse_bool_attr(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw SchemaXmlError("attribute '" + key + "' must be true or false, got '" + v + "'");
}

}  // namespace detail_xml

inline LocalSchema parse_schema_template(std::string_view xml) {
  using detail_xml::Cursor;
  Cursor c{xml};
  c.skip_ws_and_comments();
  if (c.consume("<?")) {  // optional declaration
    size_t end = xml.find("?>", c.pos);
    if (end == std::string_view::npos) throw SchemaXmlError("unterminated declaration");
    c.pos = end + 2;
    c.skip_ws_and_comments();
  }

  LocalSchema schema;
  c.expect("<schema");
  c.skip_ws_and_comments();
  bool have_domain = false;
  while (!c.eof() && c.peek() != '>' && c.peek() != '/') {
    std::string key = c.name();
    c.expect("=");
    std::string value = c.quoted();
    if (key == "domain") {
      schema.domain_name = value;
      have_domain = true;
    } else {
      throw SchemaXmlError("unknown attribute '" + key + "' on <schema>");
    }
    c.skip_ws_and_comments();
  }
  if (!have_domain) throw SchemaXmlError("<schema> requires a domain attribute");
  c.expect(">");

  for (;;) {
    c.skip_ws_and_comments();
    if (c.consume("</schema>")) break;
    if (c.consume("<parent>")) {
      if (schema.parent_domain) throw SchemaXmlError("duplicate <parent>");
      size_t end = xml.find("</parent>", c.pos);
      if (end == std::string_view::npos) throw SchemaXmlError("unterminated <parent>");
      std::string p(xml.substr(c.pos, end - c.pos));
      // trim surrounding whitespace
      size_t a = p.find_first_not_of(" \t\r\n"), b = p.find_last_not_of(" \t\r\n");
      schema.parent_domain = (a == std::string::npos) ? "" : p.substr(a, b - a + 1);
      c.pos = end + 9;
      continue;
    }
    if (c.consume("<attribute")) {
      AttributeDef def;
      bool have_name = false, have_kind = false;
      c.skip_ws_and_comments();
      while (!c.eof() && c.peek() != '/' && c.peek() != '>') {
        std::string key = c.name();
        c.expect("=");
        std::string value = c.quoted();
        if (key == "name") {
          def.name = value;
          have_name = true;
        } else if (key == "kind") {
          auto k = kind_from_string(value);
          if (!k) throw SchemaXmlError("unknown kind '" + value + "'");
          def.kind = *k;
          have_kind = true;
        } else if (key == "event") {
          def.is_event = detail_xml::parse_bool_attr(key, value);
        } else if (key == "private") {
          def.is_private = detail_xml::parse_bool_attr(key, value);
        } else {
          throw SchemaXmlError("unknown attribute '" + key + "' on <attribute>");
        }
        c.skip_ws_and_comments();
      }
      c.expect("/>");
      if (!have_name || !have_kind)
        throw SchemaXmlError("<attribute> requires name and kind");
      schema.attributes.push_back(std::move(def));
      continue;
    }
    if (c.eof()) throw SchemaXmlError("unterminated <schema>");
    throw SchemaXmlError("unknown element at offset " + std::to_string(c.pos));
  }
  c.skip_ws_and_comments();
  if (!c.eof()) throw SchemaXmlError("trailing content after </schema>");
  return schema;
}

inline std::string render_schema_template(const LocalSchema& schema) {
  using detail_xml::escape;
  std::string out = "<schema domain=\"" + escape(schema.domain_name) + "\">\n";
  if (schema.parent_domain)
    out += "  <parent>" + escape(*schema.parent_domain) + "</parent>\n";
  for (const auto& a : schema.attributes) {
    out += "  <attribute name=\"" + escape(a.name) + "\" kind=\"" + to_string(a.kind) + "\"";
    if (a.is_event) out += " event=\"true\"";
    if (a.is_private) out += " private=\"true\"";
    out += "/>\n";
  }
  out += "</schema>\n";
  return out;
}

}  // namespace cdms
