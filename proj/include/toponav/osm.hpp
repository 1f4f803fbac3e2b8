#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "toponav/errors.hpp"
#include "toponav/geo.hpp"
#include "toponav/road_graph.hpp"

namespace toponav {
namespace xml {

// Minimal non-validating XML reader: elements, attributes, comments,
// processing instructions, CDATA, and the five standard entities. That is
// all the map extracts in the wild need. Positions are 1-based.
struct Element {
  std::string name;
  std::vector<std::pair<std::string, std::string>> attrs;
  std::vector<Element> children;
  int line = 1;
  int col = 1;

  const std::string* attr(std::string_view key) const {
    for (const auto& [k, v] : attrs)
      if (k == key) return &v;
    return nullptr;
  }
};

class Reader {
 public:
  explicit Reader(std::string_view text) : s_(text) {}

  Element parse_document() {
    skip_misc();
    Element root = parse_element();
    skip_misc();
    if (pos_ < s_.size()) fail("trailing content after document element");
    return root;
  }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;

  [[noreturn]] void fail(const std::string& msg) {
    throw ParseError(msg, line_, col_);
  }
  [[noreturn]] void fail_at(const std::string& msg, int line, int col) {
    throw ParseError(msg, line, col);
  }

  bool eof() const { return pos_ >= s_.size(); }
  char peek() const { return s_[pos_]; }

  char get() {
    char c = s_[pos_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  }

  bool starts_with(std::string_view p) const {
    return s_.compare(pos_, p.size(), p) == 0;
  }

  void expect(char c) {
    if (eof() || peek() != c)
      fail(std::string("expected '") + c + "'");
    get();
  }

  void skip_ws() {
    while (!eof() && (peek() == ' ' || peek() == '\t' || peek() == '\n' ||
                      peek() == '\r'))
      get();
  }

  // Whitespace, comments, <?...?> between markup.
  void skip_misc() {
    while (true) {
      skip_ws();
      if (starts_with("<!--")) {
        int l = line_, c = col_;
        while (!starts_with("-->")) {
          if (eof()) fail_at("unterminated comment", l, c);
          get();
        }
        get(); get(); get();
      } else if (starts_with("<?")) {
        int l = line_, c = col_;
        while (!starts_with("?>")) {
          if (eof()) fail_at("unterminated processing instruction", l, c);
          get();
        }
        get(); get();
      } else {
        return;
      }
    }
  }

  static bool name_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
           (c >= '0' && c <= '9') || c == '_' || c == '-' || c == ':' ||
           c == '.';
  }

  std::string parse_name() {
    if (eof() || !name_char(peek())) fail("expected name");
    std::string n;
    while (!eof() && name_char(peek())) n += get();
    return n;
  }

  std::string decode_entity() {
    int l = line_, c = col_;
    get();  // '&'
    std::string ent;
    while (!eof() && peek() != ';') {
      ent += get();
      if (ent.size() > 8) fail_at("bad entity", l, c);
    }
    if (eof()) fail_at("unterminated entity", l, c);
    get();  // ';'
    if (ent == "amp") return "&";
    if (ent == "lt") return "<";
    if (ent == "gt") return ">";
    if (ent == "quot") return "\"";
    if (ent == "apos") return "'";
    if (ent.size() > 1 && ent[0] == '#') {
      long code = 0;
      try {
        code = ent[1] == 'x' ? std::stol(ent.substr(2), nullptr, 16)
                             : std::stol(ent.substr(1));
      } catch (...) {
        fail_at("bad character reference", l, c);
      }
      if (code < 1 || code > 127)
        fail_at("unsupported character reference", l, c);
      return std::string(1, static_cast<char>(code));
    }
    fail_at("unknown entity '&" + ent + ";'", l, c);
  }

  std::string parse_attr_value() {
    if (eof() || (peek() != '"' && peek() != '\''))
      fail("expected quoted attribute value");
    char quote = get();
    std::string v;
    while (true) {
      if (eof()) fail("unterminated attribute value");
      if (peek() == quote) {
        get();
        return v;
      }
      if (peek() == '<') fail("'<' in attribute value");
      if (peek() == '&')
        v += decode_entity();
      else
        v += get();
    }
  }

  Element parse_element() {
    if (eof() || peek() != '<') fail("expected element");
    Element el;
    el.line = line_;
    el.col = col_;
    get();  // '<'
    el.name = parse_name();
    while (true) {
      skip_ws();
      if (eof()) fail("unterminated start tag");
      if (peek() == '/') {
        get();
        expect('>');
        return el;  // self-closing
      }
      if (peek() == '>') {
        get();
        break;
      }
      int al = line_, ac = col_;
      std::string key = parse_name();
      skip_ws();
      if (eof() || peek() != '=') fail_at("expected '='", al, ac);
      get();
      skip_ws();
      el.attrs.emplace_back(std::move(key), parse_attr_value());
    }
    // Content: child elements and (ignored) character data.
    while (true) {
      if (eof())
        fail_at("unterminated element <" + el.name + ">", el.line, el.col);
      if (peek() == '<') {
        if (starts_with("</")) {
          get(); get();
          int nl = line_, nc = col_;
          std::string close = parse_name();
          if (close != el.name)
            fail_at("mismatched close tag </" + close + "> for <" + el.name +
                        ">",
                    nl, nc);
          skip_ws();
          expect('>');
          return el;
        }
        if (starts_with("<!--") || starts_with("<?")) {
          skip_misc();
          continue;
        }
        if (starts_with("<![CDATA[")) {
          int l = line_, c = col_;
          while (!starts_with("]]>")) {
            if (eof()) fail_at("unterminated CDATA section", l, c);
            get();
          }
          get(); get(); get();
          continue;
        }
        el.children.push_back(parse_element());
      } else if (peek() == '&') {
        decode_entity();  // character data is ignored, but must be valid
      } else {
        get();
      }
    }
  }
};

}  // namespace xml

namespace detail {

inline double attr_double(const xml::Element& el, const char* key) {
  const std::string* v = el.attr(key);
  if (!v)
    throw ParseError("<" + el.name + "> missing attribute '" + key + "'",
                     el.line, el.col);
  try {
    std::size_t used = 0;
    double d = std::stod(*v, &used);
    if (used != v->size()) throw std::invalid_argument("trailing junk");
    return d;
  } catch (...) {
    throw ParseError("<" + el.name + "> attribute '" + key +
                         "' is not a number",
                     el.line, el.col);
  }
}

inline std::int64_t attr_int(const xml::Element& el, const char* key) {
  const std::string* v = el.attr(key);
  if (!v)
    throw ParseError("<" + el.name + "> missing attribute '" + key + "'",
                     el.line, el.col);
  try {
    std::size_t used = 0;
    std::int64_t i = std::stoll(*v, &used);
    if (used != v->size()) throw std::invalid_argument("trailing junk");
    return i;
  } catch (...) {
    throw ParseError("<" + el.name + "> attribute '" + key +
                         "' is not an integer",
                     el.line, el.col);
  }
}

}  // namespace detail

// Builds a road graph from the node/way subset of a map XML document.
// Every <node> becomes a graph node; every <way> becomes one directed edge
// per direction (forward only when tagged oneway=yes). Any other element
// or tag is ignored. `origin` defaults to the first node.
inline RoadGraph parse_osm(const std::string& text,
                           std::optional<GeoPoint> origin = {}) {
  xml::Reader reader(text);
  xml::Element root = reader.parse_document();

  struct WayRec {
    std::int64_t id;
    std::vector<std::int64_t> nds;
    bool oneway;
  };
  std::map<std::int64_t, GeoPoint> geo_nodes;
  std::vector<WayRec> ways;

  for (const xml::Element& el : root.children) {
    if (el.name == "node") {
      std::int64_t id = detail::attr_int(el, "id");
      GeoPoint p{detail::attr_double(el, "lat"),
                 detail::attr_double(el, "lon")};
      if (!geo_valid(p))
        throw ParseError("node " + std::to_string(id) +
                             " coordinates out of range",
                         el.line, el.col);
      geo_nodes[id] = p;
    } else if (el.name == "way") {
      WayRec w;
      w.id = detail::attr_int(el, "id");
      w.oneway = false;
      for (const xml::Element& child : el.children) {
        if (child.name == "nd") {
          w.nds.push_back(detail::attr_int(child, "ref"));
        } else if (child.name == "tag") {
          const std::string* k = child.attr("k");
          const std::string* v = child.attr("v");
          if (k && v && *k == "oneway" && *v == "yes") w.oneway = true;
        }
      }
      if (w.nds.size() < 2) throw DegenerateWayError(w.id);
      ways.push_back(std::move(w));
    }
    // anything else (<bounds>, <relation>, ...) is out of the subset
  }

  GeoPoint org = origin.value_or(
      geo_nodes.empty() ? GeoPoint{0.0, 0.0} : geo_nodes.begin()->second);
  if (!geo_valid(org)) throw Error("origin out of range");

  std::map<std::int64_t, Vec2> nodes;
  for (const auto& [id, p] : geo_nodes) nodes[id] = geo_project(p, org);

  std::vector<RoadEdge> edges;
  for (const WayRec& w : ways) {
    std::vector<Vec2> poly;
    double len = 0.0;
    for (std::size_t i = 0; i < w.nds.size(); ++i) {
      auto it = geo_nodes.find(w.nds[i]);
      if (it == geo_nodes.end()) throw DanglingReferenceError(w.nds[i]);
      poly.push_back(nodes.at(w.nds[i]));
      if (i > 0)
        len += great_circle_distance(geo_nodes.at(w.nds[i - 1]), it->second);
    }
    RoadEdge fwd{w.nds.front(), w.nds.back(), len, poly};
    edges.push_back(fwd);
    if (!w.oneway)
      edges.push_back({w.nds.back(), w.nds.front(), len, reversed(poly)});
  }
  return finalize_graph(org, std::move(nodes), std::move(edges));
}

}  // namespace toponav
