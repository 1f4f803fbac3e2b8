#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <queue>
#include <string>
#include <vector>

#include "toponav/errors.hpp"
#include "toponav/geo.hpp"
#include "toponav/render.hpp"
#include "toponav/road_graph.hpp"

namespace toponav {

struct MatchConfig {
  double sigma_emit = 4.07;       // GPS emission std, meters
  double beta_trans = 3.0;        // transition sharpness
  double candidate_radius = 30.0; // candidate search radius, meters
};

// Candidate edge for one trace sample: perpendicular distance of the fix to
// the edge and the arc position of its projection along the edge.
struct EdgeCandidate {
  int edge = 0;
  double dist = 0.0;
  double arc = 0.0;
};

namespace detail {

// Arc length of an edge polyline (planar; edges are short enough that the
// planar length matches the stored great-circle weight to high accuracy).
inline double edge_planar_length(const RoadEdge& e) {
  double len = 0.0;
  for (std::size_t i = 1; i < e.polyline.size(); ++i)
    len += norm(e.polyline[i] - e.polyline[i - 1]);
  return len;
}

inline EdgeCandidate project_to_edge(const RoadEdge& e, int edge_id, Vec2 p) {
  double best_d = std::numeric_limits<double>::infinity();
  double best_arc = 0.0;
  double cum = 0.0;
  for (std::size_t i = 1; i < e.polyline.size(); ++i) {
    double seg = norm(e.polyline[i] - e.polyline[i - 1]);
    double t = 0.0;
    double d = point_segment_distance(p, e.polyline[i - 1], e.polyline[i], &t);
    if (d < best_d - 1e-12) {
      best_d = d;
      best_arc = cum + t * seg;
    }
    cum += seg;
  }
  return {edge_id, best_d, best_arc};
}

// Dijkstra from a node, pruned beyond `bound`. Returns node distances.
inline std::map<std::int64_t, double> bounded_distances(const RoadGraph& g,
                                                        std::int64_t src,
                                                        double bound) {
  std::map<std::int64_t, double> dist;
  using Item = std::pair<double, std::int64_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
  dist[src] = 0.0;
  heap.push({0.0, src});
  while (!heap.empty()) {
    auto [d, u] = heap.top();
    heap.pop();
    if (d > dist[u]) continue;
    if (d > bound) continue;
    for (int ei : g.out_edges(u)) {
      const RoadEdge& e = g.edges[static_cast<std::size_t>(ei)];
      double nd = d + e.weight;
      if (nd > bound) continue;
      auto it = dist.find(e.to);
      if (it == dist.end() || nd < it->second) {
        dist[e.to] = nd;
        heap.push({nd, e.to});
      }
    }
  }
  return dist;
}

}  // namespace detail

// All edges whose distance to `p` is within the radius, ascending edge id.
inline std::vector<EdgeCandidate> edge_candidates(const RoadGraph& g, Vec2 p,
                                                  double radius) {
  std::vector<EdgeCandidate> out;
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    EdgeCandidate c =
        detail::project_to_edge(g.edges[i], static_cast<int>(i), p);
    if (c.dist <= radius) out.push_back(c);
  }
  return out;
}

// log N(dist; 0, sigma): Gaussian emission in perpendicular distance.
inline double emission_logprob(const MatchConfig& cfg, double dist) {
  double z = dist / cfg.sigma_emit;
  return -0.5 * z * z -
         std::log(cfg.sigma_emit * std::sqrt(2.0 * std::numbers::pi));
}

// Large finite penalty for impossible transitions; keeps the Viterbi lattice
// total finite so some path always survives. Small enough in magnitude that
// later emission terms still register against an accumulated score (at 1e18
// the ulp exceeds any log-probability and the lattice saturates).
inline constexpr double kMatchImpossible = -1e6;

namespace detail {

// Routing distance from position arc_a on edge ea to arc_b on edge eb,
// capped; infinity when unreachable within the cap.
inline double route_distance(const RoadGraph& g, const EdgeCandidate& a,
                             const EdgeCandidate& b, double cap) {
  const RoadEdge& ea = g.edges[static_cast<std::size_t>(a.edge)];
  double len_a = edge_planar_length(ea);
  if (a.edge == b.edge) {
    if (b.arc >= a.arc) return b.arc - a.arc;
    // Fall through: loop around via the graph back to the same edge start.
  }
  double rem = len_a - a.arc;  // to the end node of edge a
  double bound = std::max(0.0, cap - rem);
  auto dist = bounded_distances(g, ea.to, bound);
  const RoadEdge& eb = g.edges[static_cast<std::size_t>(b.edge)];
  auto it = dist.find(eb.from);
  if (it == dist.end()) return std::numeric_limits<double>::infinity();
  double total = rem + it->second + b.arc;
  return total;
}

}  // namespace detail

// exp(-beta * |route - straight| / straight) transition weight, in log
// domain. The straight-line distance is floored at 1 m so stationary fixes
// do not blow up the ratio.
inline double transition_logprob(const RoadGraph& g, const MatchConfig& cfg,
                                 const EdgeCandidate& from, Vec2 from_p,
                                 const EdgeCandidate& to, Vec2 to_p) {
  double straight = norm(to_p - from_p);
  double floor_straight = std::max(straight, 1.0);
  double cap = 4.0 * floor_straight;
  double route = detail::route_distance(g, from, to, cap);
  if (!std::isfinite(route) || route > cap) return kMatchImpossible;
  return -cfg.beta_trans * std::abs(route - straight) / floor_straight;
}

// Viterbi decode: one edge id per trace sample. Ties at every argmax are
// broken toward the lowest edge id (candidates are scanned in id order and
// only a strictly better score replaces the incumbent).
inline std::vector<int> match_trace(const RoadGraph& g,
                                    const std::vector<Pose>& trace,
                                    const MatchConfig& cfg = {}) {
  if (trace.empty()) throw std::invalid_argument("empty trace");
  if (!(cfg.sigma_emit > 0.0) || !(cfg.beta_trans > 0.0) ||
      !(cfg.candidate_radius > 0.0))
    throw ConfigError("match config values must be > 0");

  std::vector<std::vector<EdgeCandidate>> cands(trace.size());
  for (std::size_t t = 0; t < trace.size(); ++t) {
    cands[t] = edge_candidates(g, {trace[t].x, trace[t].y},
                               cfg.candidate_radius);
    if (cands[t].empty()) throw NoCandidateError(t);
  }

  std::vector<std::vector<double>> score(trace.size());
  std::vector<std::vector<int>> back(trace.size());
  score[0].resize(cands[0].size());
  back[0].assign(cands[0].size(), -1);
  for (std::size_t i = 0; i < cands[0].size(); ++i)
    score[0][i] = emission_logprob(cfg, cands[0][i].dist);

  for (std::size_t t = 1; t < trace.size(); ++t) {
    Vec2 prev_p{trace[t - 1].x, trace[t - 1].y};
    Vec2 cur_p{trace[t].x, trace[t].y};
    score[t].resize(cands[t].size());
    back[t].resize(cands[t].size());
    for (std::size_t i = 0; i < cands[t].size(); ++i) {
      double emit = emission_logprob(cfg, cands[t][i].dist);
      double best = -std::numeric_limits<double>::infinity();
      int best_j = 0;
      for (std::size_t j = 0; j < cands[t - 1].size(); ++j) {
        double s = score[t - 1][j] + transition_logprob(g, cfg, cands[t - 1][j],
                                                        prev_p, cands[t][i],
                                                        cur_p);
        if (s > best) {
          best = s;
          best_j = static_cast<int>(j);
        }
      }
      score[t][i] = best + emit;
      back[t][i] = best_j;
    }
  }

  std::size_t last = trace.size() - 1;
  std::size_t best_i = 0;
  for (std::size_t i = 1; i < cands[last].size(); ++i)
    if (score[last][i] > score[last][best_i]) best_i = i;

  std::vector<int> out(trace.size());
  std::size_t cur = best_i;
  for (std::size_t t = trace.size(); t-- > 0;) {
    out[t] = cands[t][cur].edge;
    if (t > 0) cur = static_cast<std::size_t>(back[t][cur]);
  }
  return out;
}

// Collapse consecutive duplicates into a connected edge route.
inline std::vector<int> route_edges(const RoadGraph& g,
                                    const std::vector<int>& match) {
  std::vector<int> route;
  for (int e : match)
    if (route.empty() || route.back() != e) route.push_back(e);
  for (std::size_t i = 1; i < route.size(); ++i) {
    const RoadEdge& a = g.edges.at(static_cast<std::size_t>(route[i - 1]));
    const RoadEdge& b = g.edges.at(static_cast<std::size_t>(route[i]));
    if (a.to != b.from) throw BrokenRouteError(route[i - 1], route[i]);
  }
  return route;
}

}  // namespace toponav
