#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "toponav/errors.hpp"
#include "toponav/geo.hpp"
#include "toponav/road_graph.hpp"
#include "toponav/util.hpp"

namespace toponav {

// Wrap to [-pi, pi).
inline double wrap_angle(double a) {
  double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a + std::numbers::pi, two_pi);
  if (a < 0.0) a += two_pi;
  return a - std::numbers::pi;
}

// Heading convention: 0 points along +y (north), increasing counter-clockwise.
struct Pose {
  double x = 0.0;
  double y = 0.0;
  double alpha = 0.0;  // [-pi, pi)
  bool operator==(const Pose&) const = default;
};

inline Vec2 heading_vec(double alpha) {
  return {-std::sin(alpha), std::cos(alpha)};
}

// Angle of a direction vector under the same convention.
inline double vec_heading(Vec2 d) { return std::atan2(-d.x, d.y); }

// Pose-centered heading-up raster. Grids are row-major, row 0 at the top
// (ahead of the vehicle); integer pixel coordinates address pixel centers.
struct MapPatch {
  int size = 64;
  double resolution = 1.0;  // meters per pixel
  Pose center;
  std::vector<float> drivable;          // size*size, values in [0,1]
  std::optional<std::vector<float>> route;

  bool routed() const { return route.has_value(); }
  float at(int px, int py) const {
    return drivable[static_cast<std::size_t>(py) * size + px];
  }
  float route_at(int px, int py) const {
    return (*route)[static_cast<std::size_t>(py) * size + px];
  }
};

// World point -> continuous pixel coordinate. The pose sits at (S/2, S/2);
// one meter ahead of the pose is one pixel row up at 1 m/px.
inline Vec2 world_to_pixel(const Pose& pose, Vec2 point, int size,
                           double resolution) {
  double ca = std::cos(pose.alpha), sa = std::sin(pose.alpha);
  Vec2 d{point.x - pose.x, point.y - pose.y};
  double ego_x = d.x * ca + d.y * sa;   // right of vehicle
  double ego_y = -d.x * sa + d.y * ca;  // ahead of vehicle
  return {size / 2.0 + ego_x / resolution, size / 2.0 - ego_y / resolution};
}

inline Vec2 pixel_to_world(const Pose& pose, Vec2 px, int size,
                           double resolution) {
  double ego_x = (px.x - size / 2.0) * resolution;
  double ego_y = (size / 2.0 - px.y) * resolution;
  double ca = std::cos(pose.alpha), sa = std::sin(pose.alpha);
  return {pose.x + ego_x * ca - ego_y * sa, pose.y + ego_x * sa + ego_y * ca};
}

namespace detail {

// Stamp one polyline into a binary grid: a pixel is set iff its center is
// within `radius_px` of some segment. No anti-aliasing, so renders are
// bit-exact and independent of edge order.
inline void stamp_polyline(std::vector<float>& grid, int size,
                           const std::vector<Vec2>& poly_px,
                           double radius_px) {
  for (std::size_t i = 1; i < poly_px.size(); ++i) {
    Vec2 a = poly_px[i - 1], b = poly_px[i];
    int x0 = static_cast<int>(std::floor(std::min(a.x, b.x) - radius_px));
    int x1 = static_cast<int>(std::ceil(std::max(a.x, b.x) + radius_px));
    int y0 = static_cast<int>(std::floor(std::min(a.y, b.y) - radius_px));
    int y1 = static_cast<int>(std::ceil(std::max(a.y, b.y) + radius_px));
    x0 = std::max(x0, 0);
    y0 = std::max(y0, 0);
    x1 = std::min(x1, size - 1);
    y1 = std::min(y1, size - 1);
    for (int py = y0; py <= y1; ++py)
      for (int px = x0; px <= x1; ++px) {
        if (grid[static_cast<std::size_t>(py) * size + px] != 0.0f) continue;
        double d = point_segment_distance(
            {static_cast<double>(px), static_cast<double>(py)}, a, b);
        if (d <= radius_px)
          grid[static_cast<std::size_t>(py) * size + px] = 1.0f;
      }
  }
}

inline std::vector<Vec2> edge_pixels(const RoadEdge& e, const Pose& pose,
                                     int size, double resolution) {
  std::vector<Vec2> out;
  out.reserve(e.polyline.size());
  for (const Vec2& p : e.polyline)
    out.push_back(world_to_pixel(pose, p, size, resolution));
  return out;
}

}  // namespace detail

inline MapPatch render_patch(const RoadGraph& g, const Pose& pose,
                             const std::vector<int>* route, int size = 64,
                             double resolution = 1.0, double stroke = 3.0) {
  if (size < 8) throw std::invalid_argument("patch size must be >= 8");
  if (!(resolution > 0.0))
    throw std::invalid_argument("resolution must be > 0");
  if (!(stroke >= resolution))
    throw std::invalid_argument("stroke must be >= resolution");

  MapPatch patch;
  patch.size = size;
  patch.resolution = resolution;
  patch.center = pose;
  patch.drivable.assign(static_cast<std::size_t>(size) * size, 0.0f);
  double radius_px = 0.5 * stroke / resolution;

  for (const RoadEdge& e : g.edges)
    detail::stamp_polyline(patch.drivable, size,
                           detail::edge_pixels(e, pose, size, resolution),
                           radius_px);

  if (route) {
    patch.route.emplace(static_cast<std::size_t>(size) * size, 0.0f);
    for (int ei : *route)
      detail::stamp_polyline(
          *patch.route, size,
          detail::edge_pixels(g.edges.at(static_cast<std::size_t>(ei)), pose,
                              size, resolution),
          radius_px);
  }
  return patch;
}

// --- chart splitting --------------------------------------------------------

// A contiguous slice [start_index, end_index) of a route whose interior
// nodes are distinct, so its rendering has no self-crossings.
struct Chart {
  std::vector<int> edges;
  int start_index = 0;
  int end_index = 0;  // exclusive
};

// Greedy left-to-right scan: a chart is closed right before the edge that
// would revisit a node. A route that returns exactly to the chart's start
// node closes the chart as a pure loop including that edge.
inline std::vector<Chart> split_charts(const RoadGraph& g,
                                       const std::vector<int>& route) {
  for (std::size_t i = 1; i < route.size(); ++i) {
    const RoadEdge& prev = g.edges.at(static_cast<std::size_t>(route[i - 1]));
    const RoadEdge& cur = g.edges.at(static_cast<std::size_t>(route[i]));
    if (prev.to != cur.from)
      throw InvalidRouteError("route edges " + std::to_string(i - 1) +
                              " and " + std::to_string(i) +
                              " are not connected");
  }
  std::vector<Chart> charts;
  std::size_t start = 0;
  while (start < route.size()) {
    std::int64_t chart_start =
        g.edges.at(static_cast<std::size_t>(route[start])).from;
    std::set<std::int64_t> visited{chart_start};
    std::size_t k = start;
    for (; k < route.size(); ++k) {
      std::int64_t v = g.edges.at(static_cast<std::size_t>(route[k])).to;
      if (visited.count(v)) {
        if (v == chart_start) ++k;  // pure loop: keep the closing edge
        break;
      }
      visited.insert(v);
    }
    Chart c;
    c.start_index = static_cast<int>(start);
    c.end_index = static_cast<int>(k);
    c.edges.assign(route.begin() + static_cast<std::ptrdiff_t>(start),
                   route.begin() + static_cast<std::ptrdiff_t>(k));
    charts.push_back(std::move(c));
    start = k;
  }
  return charts;
}

// --- patch dumps ------------------------------------------------------------

inline std::string to_pgm(const std::vector<float>& grid, int size) {
  std::string out = "P5\n" + std::to_string(size) + " " +
                    std::to_string(size) + "\n255\n";
  out.reserve(out.size() + grid.size());
  for (float v : grid)
    out.push_back(static_cast<char>(
        static_cast<unsigned char>(std::lround(255.0f * v))));
  return out;
}

// Writes <base>.pgm (drivable), <base>_route.pgm when routed, and a
// <base>.json sidecar with the patch geometry.
inline void write_patch(const MapPatch& p, const std::string& base) {
  atomic_write_file(base + ".pgm", to_pgm(p.drivable, p.size));
  if (p.routed()) atomic_write_file(base + "_route.pgm", to_pgm(*p.route, p.size));
  nlohmann::json side{{"size", p.size},
                      {"resolution", p.resolution},
                      {"center",
                       {{"x", p.center.x},
                        {"y", p.center.y},
                        {"alpha", p.center.alpha}}},
                      {"routed", p.routed()}};
  atomic_write_file(base + ".json", side.dump(2) + "\n");
}

}  // namespace toponav
