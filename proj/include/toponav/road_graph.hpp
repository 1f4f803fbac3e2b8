#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <queue>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "toponav/errors.hpp"
#include "toponav/geo.hpp"

namespace toponav {

// Directed edge. Edge ids are indices into RoadGraph::edges. `weight` is
// the great-circle length of the polyline (meters); the polyline itself is
// stored in projected planar coordinates relative to the graph origin.
struct RoadEdge {
  std::int64_t from = 0;
  std::int64_t to = 0;
  double weight = 0.0;
  std::vector<Vec2> polyline;
  bool operator==(const RoadEdge&) const = default;
};

struct RoadGraph {
  GeoPoint origin;
  std::map<std::int64_t, Vec2> nodes;
  std::vector<RoadEdge> edges;
  // node id -> indices into edges, ascending. Built by finalize_graph.
  std::map<std::int64_t, std::vector<int>> out;

  bool operator==(const RoadGraph& o) const {
    return origin == o.origin && nodes == o.nodes && edges == o.edges;
  }

  const std::vector<int>& out_edges(std::int64_t node) const {
    static const std::vector<int> empty;
    auto it = out.find(node);
    return it == out.end() ? empty : it->second;
  }

  int degree(std::int64_t node) const {
    return static_cast<int>(out_edges(node).size());
  }
};

// Great-circle length of a planar polyline, measured by unprojecting each
// vertex back to geographic coordinates. This is the one authoritative
// definition of edge weight, shared by the parser and the generators.
inline double polyline_length(const std::vector<Vec2>& poly,
                              const GeoPoint& origin) {
  double len = 0.0;
  for (std::size_t i = 1; i < poly.size(); ++i)
    len += great_circle_distance(geo_unproject(poly[i - 1], origin),
                                 geo_unproject(poly[i], origin));
  return len;
}

// Validates invariants and builds the adjacency index. All construction
// paths (parser, generators, deserializer) go through here.
inline RoadGraph finalize_graph(GeoPoint origin,
                                std::map<std::int64_t, Vec2> nodes,
                                std::vector<RoadEdge> edges) {
  if (!geo_valid(origin)) throw Error("graph origin out of range");
  RoadGraph g;
  g.origin = origin;
  g.nodes = std::move(nodes);
  g.edges = std::move(edges);
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    RoadEdge& e = g.edges[i];
    auto from_it = g.nodes.find(e.from);
    auto to_it = g.nodes.find(e.to);
    if (from_it == g.nodes.end()) throw DanglingReferenceError(e.from);
    if (to_it == g.nodes.end()) throw DanglingReferenceError(e.to);
    if (e.polyline.size() < 2)
      throw Error("edge " + std::to_string(i) + " polyline has < 2 points");
    if (norm(e.polyline.front() - from_it->second) > 1e-6 ||
        norm(e.polyline.back() - to_it->second) > 1e-6)
      throw Error("edge " + std::to_string(i) +
                  " polyline does not join its endpoints");
    double len = polyline_length(e.polyline, g.origin);
    if (!(e.weight > 0.0) ||
        std::abs(e.weight - len) > 1e-6 * std::max(1.0, len))
      throw Error("edge " + std::to_string(i) +
                  " weight does not match polyline length");
    g.out[e.from].push_back(static_cast<int>(i));
  }
  return g;
}

inline std::vector<Vec2> reversed(std::vector<Vec2> poly) {
  std::reverse(poly.begin(), poly.end());
  return poly;
}

// --- line-oriented JSON serialization -------------------------------------
//
// One JSON object per line: first the origin, then nodes in ascending id
// order, then edges in id order. nlohmann's double formatting is shortest
// round-trip, so serialize(parse(s)) is byte-stable.

inline std::string serialize_graph(const RoadGraph& g) {
  using nlohmann::json;
  std::string out;
  out += json{{"origin", {{"lat", g.origin.lat}, {"lon", g.origin.lon}}}}
             .dump();
  out += '\n';
  for (const auto& [id, p] : g.nodes) {
    out += json{{"node", {{"id", id}, {"x", p.x}, {"y", p.y}}}}.dump();
    out += '\n';
  }
  for (const RoadEdge& e : g.edges) {
    json poly = json::array();
    for (const Vec2& v : e.polyline) poly.push_back({v.x, v.y});
    out += json{{"edge",
                 {{"from", e.from},
                  {"to", e.to},
                  {"weight", e.weight},
                  {"polyline", poly}}}}
               .dump();
    out += '\n';
  }
  return out;
}

inline RoadGraph parse_graph(const std::string& text) {
  using nlohmann::json;
  GeoPoint origin;
  bool have_origin = false;
  std::map<std::int64_t, Vec2> nodes;
  std::vector<RoadEdge> edges;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    ++line_no;
    std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad graph line: ") + e.what(), line_no, 1);
    }
    try {
      if (j.contains("origin")) {
        origin = {j["origin"]["lat"].get<double>(),
                  j["origin"]["lon"].get<double>()};
        have_origin = true;
      } else if (j.contains("node")) {
        const json& n = j["node"];
        nodes[n["id"].get<std::int64_t>()] = {n["x"].get<double>(),
                                              n["y"].get<double>()};
      } else if (j.contains("edge")) {
        const json& je = j["edge"];
        RoadEdge e;
        e.from = je["from"].get<std::int64_t>();
        e.to = je["to"].get<std::int64_t>();
        e.weight = je["weight"].get<double>();
        for (const json& p : je["polyline"])
          e.polyline.push_back({p[0].get<double>(), p[1].get<double>()});
        edges.push_back(std::move(e));
      } else {
        throw ParseError("unknown graph record", line_no, 1);
      }
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad graph record: ") + e.what(), line_no,
                       1);
    }
  }
  if (!have_origin) throw ParseError("graph has no origin record", 1, 1);
  return finalize_graph(origin, std::move(nodes), std::move(edges));
}

// --- shortest route --------------------------------------------------------

// Dijkstra over edge weights. Returns an ordered list of edge ids; empty
// when src == dst. Ties are broken toward the lowest node id so the result
// is unique and deterministic. Throws NoRouteError when dst is unreachable.
inline std::vector<int> shortest_route(const RoadGraph& g, std::int64_t src,
                                       std::int64_t dst) {
  if (!g.nodes.count(src))
    throw std::invalid_argument("unknown source node " + std::to_string(src));
  if (!g.nodes.count(dst))
    throw std::invalid_argument("unknown target node " + std::to_string(dst));
  if (src == dst) return {};

  std::map<std::int64_t, double> dist;
  std::map<std::int64_t, int> pred_edge;
  using Item = std::pair<double, std::int64_t>;  // (distance, node)
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
  dist[src] = 0.0;
  heap.push({0.0, src});
  while (!heap.empty()) {
    auto [d, u] = heap.top();
    heap.pop();
    auto du = dist.find(u);
    if (du == dist.end() || d > du->second) continue;  // stale entry
    if (u == dst) break;
    for (int ei : g.out_edges(u)) {
      const RoadEdge& e = g.edges[static_cast<std::size_t>(ei)];
      double nd = d + e.weight;
      auto it = dist.find(e.to);
      // Strict improvement, or equal cost reached through a lower node id:
      // lowest-node-id predecessor wins, which pins down one canonical path.
      bool better = it == dist.end() || nd < it->second;
      if (!better && nd == it->second &&
          u < g.edges[static_cast<std::size_t>(pred_edge[e.to])].from)
        better = true;
      if (better) {
        dist[e.to] = nd;
        pred_edge[e.to] = ei;
        heap.push({nd, e.to});
      }
    }
  }
  if (!dist.count(dst))
    throw NoRouteError("no route from " + std::to_string(src) + " to " +
                       std::to_string(dst));
  std::vector<int> route;
  std::int64_t v = dst;
  while (v != src) {
    int ei = pred_edge.at(v);
    route.push_back(ei);
    v = g.edges[static_cast<std::size_t>(ei)].from;
  }
  std::reverse(route.begin(), route.end());
  return route;
}

inline double route_length(const RoadGraph& g, const std::vector<int>& route) {
  double len = 0.0;
  for (int ei : route) len += g.edges[static_cast<std::size_t>(ei)].weight;
  return len;
}

}  // namespace toponav
