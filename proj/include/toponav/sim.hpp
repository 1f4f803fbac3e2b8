#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "toponav/errors.hpp"
#include "toponav/geo.hpp"
#include "toponav/render.hpp"
#include "toponav/rng.hpp"
#include "toponav/road_graph.hpp"
#include "toponav/util.hpp"

namespace toponav {

inline constexpr double kKappaMax = 0.2;  // 1/m, 5 m minimum turn radius

// Ego-frame drivable raster: the camera stand-in. Rendered from the true
// pose only; carries no route information.
struct Observation {
  int size = 32;
  double resolution = 1.0;
  std::vector<float> values;
};

struct ObsNoise {
  double sigma_lat = 0.5;   // lateral pose jitter, meters
  double sigma_head = 0.05; // heading jitter, radians
  double dropout = 0.1;     // per-pixel zeroing probability, [0,1)
};

struct ObsConfig {
  int size = 32;
  double resolution = 1.0;
  double stroke = 3.0;
  ObsNoise noise;
};

inline Observation synthesize_observation(const RoadGraph& g,
                                          const Pose& true_pose,
                                          const ObsConfig& cfg, Rng& rng) {
  if (cfg.noise.dropout < 0.0 || cfg.noise.dropout >= 1.0)
    throw std::invalid_argument("dropout must be in [0,1)");
  if (cfg.noise.sigma_lat < 0.0 || cfg.noise.sigma_head < 0.0)
    throw std::invalid_argument("jitter sigma must be >= 0");
  Pose p = true_pose;
  if (cfg.noise.sigma_lat > 0.0) {
    double lat = rng.normal(0.0, cfg.noise.sigma_lat);
    // Jitter across the direction of travel.
    p.x += lat * std::cos(p.alpha);
    p.y += lat * std::sin(p.alpha);
  }
  if (cfg.noise.sigma_head > 0.0)
    p.alpha = wrap_angle(p.alpha + rng.normal(0.0, cfg.noise.sigma_head));
  MapPatch patch =
      render_patch(g, p, nullptr, cfg.size, cfg.resolution, cfg.stroke);
  Observation obs{cfg.size, cfg.resolution, std::move(patch.drivable)};
  if (cfg.noise.dropout > 0.0)
    for (float& v : obs.values)
      if (rng.uniform() < cfg.noise.dropout) v = 0.0f;
  return obs;
}

// --- route geometry ---------------------------------------------------------

// Concatenated route polyline with cumulative arc length, for projection
// and lookahead queries. Shared by the oracle driver, the simulator, and
// the experiment harness.
class RoutePath {
 public:
  RoutePath(const RoadGraph& g, const std::vector<int>& route) {
    if (route.empty()) throw std::invalid_argument("empty route");
    pts_.push_back(
        g.edges.at(static_cast<std::size_t>(route.front())).polyline.front());
    cum_.push_back(0.0);
    edge_of_pt_.push_back(route.front());
    node_arc_.push_back(
        {g.edges.at(static_cast<std::size_t>(route.front())).from, 0.0});
    for (std::size_t i = 0; i < route.size(); ++i) {
      const RoadEdge& e = g.edges.at(static_cast<std::size_t>(route[i]));
      if (norm(e.polyline.front() - pts_.back()) > 1e-6)
        throw InvalidRouteError("route edges " + std::to_string(i - 1) +
                                " and " + std::to_string(i) +
                                " are not connected");
      for (std::size_t j = 1; j < e.polyline.size(); ++j) {
        double seg = norm(e.polyline[j] - pts_.back());
        if (seg == 0.0) continue;
        cum_.push_back(cum_.back() + seg);
        pts_.push_back(e.polyline[j]);
        edge_of_pt_.push_back(route[i]);
      }
      node_arc_.push_back({e.to, cum_.back()});
    }
  }

  double length() const { return cum_.back(); }

  // Nearest point on the path. Returns (arc length, distance); ties pick
  // the earliest arc. `window` restricts the search to an arc interval.
  std::pair<double, double> project(Vec2 p, double lo = 0.0,
                                    double hi = -1.0) const {
    if (hi < 0.0) hi = length();
    double best_arc = 0.0, best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < pts_.size(); ++i) {
      if (cum_[i] < lo) continue;
      if (cum_[i - 1] > hi) break;
      double t = 0.0;
      double d = point_segment_distance(p, pts_[i - 1], pts_[i], &t);
      if (d < best_d - 1e-12) {
        best_d = d;
        best_arc = cum_[i - 1] + t * (cum_[i] - cum_[i - 1]);
      }
    }
    return {best_arc, best_d};
  }

  Vec2 point_at(double arc) const {
    if (arc <= 0.0) return pts_.front();
    if (arc >= length()) return pts_.back();
    auto it = std::lower_bound(cum_.begin(), cum_.end(), arc);
    std::size_t i = static_cast<std::size_t>(it - cum_.begin());
    if (i == 0) i = 1;
    double t = (arc - cum_[i - 1]) / (cum_[i] - cum_[i - 1]);
    return pts_[i - 1] + t * (pts_[i] - pts_[i - 1]);
  }

  // Edge id owning the path segment at this arc position.
  int edge_at(double arc) const {
    if (arc <= 0.0) return edge_of_pt_[1];
    if (arc >= length()) return edge_of_pt_.back();
    auto it = std::lower_bound(cum_.begin(), cum_.end(), arc);
    std::size_t i = static_cast<std::size_t>(it - cum_.begin());
    if (i == 0) i = 1;
    return edge_of_pt_[i];
  }

  double initial_heading() const {
    return vec_heading(pts_[1] - pts_[0]);
  }

  // Arc positions of route nodes (graph vertices) along the path.
  const std::vector<std::pair<std::int64_t, double>>& node_arcs() const {
    return node_arc_;
  }

 private:
  std::vector<Vec2> pts_;
  std::vector<double> cum_;
  std::vector<int> edge_of_pt_;  // edge id per polyline point (segment end)
  std::vector<std::pair<std::int64_t, double>> node_arc_;
};

// Pure-pursuit steering toward the point `lookahead` meters further along
// the route: kappa = 2 sin(eta) / L_d, clamped to the curvature bound.
inline double pursuit_curvature(const Pose& pose, Vec2 target,
                                double lookahead,
                                double kappa_max = kKappaMax) {
  double bearing = wrap_angle(vec_heading({target.x - pose.x,
                                           target.y - pose.y}) -
                              pose.alpha);
  double kappa = 2.0 * std::sin(bearing) / lookahead;
  return std::clamp(kappa, -kappa_max, kappa_max);
}

inline constexpr double kRouteCorridor = 10.0;  // meters

inline double oracle_steering(const RoadGraph& g, const std::vector<int>& route,
                              const Pose& pose, double lookahead = 8.0,
                              double kappa_max = kKappaMax) {
  RoutePath path(g, route);
  auto [arc, dist] = path.project({pose.x, pose.y});
  if (dist > kRouteCorridor)
    throw OffRouteError("pose is " + fmt_double(dist) +
                        " m from the route (limit " +
                        fmt_double(kRouteCorridor) + ")");
  return pursuit_curvature(pose, path.point_at(arc + lookahead), lookahead,
                           kappa_max);
}

// Midpoint unicycle step; heading stays wrapped.
inline Pose step_dynamics(const Pose& pose, double theta_s, double v,
                          double dt) {
  if (!(v > 0.0) || !(dt > 0.0))
    throw std::invalid_argument("v and dt must be > 0");
  double dalpha = theta_s * v * dt;
  double mid = pose.alpha + 0.5 * dalpha;
  return {pose.x - v * dt * std::sin(mid), pose.y + v * dt * std::cos(mid),
          wrap_angle(pose.alpha + dalpha)};
}

inline Pose corrupt_gps(const Pose& pose, double sigma_xy, double sigma_alpha,
                        Rng& rng) {
  if (sigma_xy < 0.0 || sigma_alpha < 0.0)
    throw std::invalid_argument("gps sigma must be >= 0");
  Pose out = pose;
  if (sigma_xy > 0.0) {
    out.x += rng.normal(0.0, sigma_xy);
    out.y += rng.normal(0.0, sigma_xy);
  }
  if (sigma_alpha > 0.0)
    out.alpha = wrap_angle(out.alpha + rng.normal(0.0, sigma_alpha));
  return out;
}

// --- closed-loop trace generation -------------------------------------------

struct TraceSample {
  double t = 0.0;
  Pose true_pose;
  Pose gps_pose;
  double gamma = 0.0;    // rad/s
  double v = 0.0;        // m/s
  double theta_s = 0.0;  // 1/m, = gamma / v
};

struct Trace {
  std::vector<TraceSample> samples;
  // Bookkeeping for experiments (not serialized): route edge id and route
  // arc-length position of each sample.
  std::vector<int> edge_ids;
  std::vector<double> arcs;
};

struct SimConfig {
  double speed = 5.0;        // m/s
  double dt = 0.1;           // s
  double lookahead = 8.0;    // m
  double kappa_max = kKappaMax;
  double corridor = kRouteCorridor;  // max distance from route, meters
  double gps_sigma_xy = 1.5;
  double gps_sigma_alpha = 0.05;
};

// Drives the oracle controller down the route, recording one sample per
// step until the projected arc reaches the route end.
inline Trace simulate_route(const RoadGraph& g, const std::vector<int>& route,
                            const SimConfig& cfg, Rng& rng,
                            std::optional<Pose> start = {}) {
  if (!(cfg.speed > 0.0) || !(cfg.dt > 0.0))
    throw std::invalid_argument("speed and dt must be > 0");
  RoutePath path(g, route);
  Pose pose;
  if (start) {
    pose = *start;
  } else {
    Vec2 p0 = path.point_at(0.0);
    pose = {p0.x, p0.y, path.initial_heading()};
  }
  Trace trace;
  double step_len = cfg.speed * cfg.dt;
  double end_arc = path.length() - 0.5 * step_len;
  double cursor = 0.0;
  // Enough iterations to finish plus slack; tripping it means the
  // controller stalled without leaving the corridor.
  std::size_t max_steps =
      static_cast<std::size_t>(path.length() / step_len * 4.0) + 64;
  for (std::size_t step = 0;; ++step) {
    if (step > max_steps)
      throw SimulationDivergedError("controller failed to reach route end");
    // Window keeps projection monotone on self-overlapping routes.
    auto [arc, dist] = path.project({pose.x, pose.y},
                                    cursor - 2.0 * step_len,
                                    cursor + cfg.lookahead + 4.0 * step_len);
    cursor = arc;
    if (dist > cfg.corridor)
      throw SimulationDivergedError("vehicle left the route corridor (" +
                                    fmt_double(dist) + " m)");
    if (arc >= end_arc) break;
    double theta = pursuit_curvature(pose, path.point_at(arc + cfg.lookahead),
                                     cfg.lookahead, cfg.kappa_max);
    TraceSample s;
    s.t = static_cast<double>(trace.samples.size()) * cfg.dt;
    s.true_pose = pose;
    s.gps_pose = corrupt_gps(pose, cfg.gps_sigma_xy, cfg.gps_sigma_alpha, rng);
    s.v = cfg.speed;
    s.theta_s = theta;
    s.gamma = theta * cfg.speed;
    trace.samples.push_back(s);
    trace.edge_ids.push_back(path.edge_at(arc));
    trace.arcs.push_back(arc);
    pose = step_dynamics(pose, theta, cfg.speed, cfg.dt);
  }
  return trace;
}

// --- trace serialization ------------------------------------------------------

inline std::string trace_to_csv(const Trace& trace) {
  std::string out = "t,x,y,alpha,gx,gy,galpha,gamma,v,theta_s\n";
  for (const TraceSample& s : trace.samples) {
    out += fmt_double(s.t);
    out += ',';
    out += fmt_double(s.true_pose.x);
    out += ',';
    out += fmt_double(s.true_pose.y);
    out += ',';
    out += fmt_double(s.true_pose.alpha);
    out += ',';
    out += fmt_double(s.gps_pose.x);
    out += ',';
    out += fmt_double(s.gps_pose.y);
    out += ',';
    out += fmt_double(s.gps_pose.alpha);
    out += ',';
    out += fmt_double(s.gamma);
    out += ',';
    out += fmt_double(s.v);
    out += ',';
    out += fmt_double(s.theta_s);
    out += '\n';
  }
  return out;
}

inline Trace trace_from_csv(const std::string& text) {
  Trace trace;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != "t,x,y,alpha,gx,gy,galpha,gamma,v,theta_s")
        throw ParseError("bad trace header", 1, 1);
      continue;
    }
    auto cols = split(line, ',');
    if (cols.size() != 10)
      throw ParseError("expected 10 columns, got " +
                           std::to_string(cols.size()),
                       line_no, 1);
    TraceSample s;
    s.t = parse_double(cols[0], "t");
    s.true_pose = {parse_double(cols[1], "x"), parse_double(cols[2], "y"),
                   parse_double(cols[3], "alpha")};
    s.gps_pose = {parse_double(cols[4], "gx"), parse_double(cols[5], "gy"),
                  parse_double(cols[6], "galpha")};
    s.gamma = parse_double(cols[7], "gamma");
    s.v = parse_double(cols[8], "v");
    s.theta_s = parse_double(cols[9], "theta_s");
    trace.samples.push_back(s);
  }
  return trace;
}

}  // namespace toponav
