#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "toponav/errors.hpp"
#include "toponav/geo.hpp"
#include "toponav/rng.hpp"
#include "toponav/road_graph.hpp"

namespace toponav {

enum class WorldKind { grid, four_way, t_junction, fork, roundabout, composite };

inline WorldKind parse_world_kind(const std::string& s) {
  if (s == "grid") return WorldKind::grid;
  if (s == "four-way") return WorldKind::four_way;
  if (s == "t-junction") return WorldKind::t_junction;
  if (s == "fork") return WorldKind::fork;
  if (s == "roundabout") return WorldKind::roundabout;
  if (s == "composite") return WorldKind::composite;
  throw ConfigError("unsupported world kind '" + s + "'");
}

inline std::string world_kind_name(WorldKind k) {
  switch (k) {
    case WorldKind::grid: return "grid";
    case WorldKind::four_way: return "four-way";
    case WorldKind::t_junction: return "t-junction";
    case WorldKind::fork: return "fork";
    case WorldKind::roundabout: return "roundabout";
    case WorldKind::composite: return "composite";
  }
  throw ConfigError("unsupported world kind");
}

struct WorldSpec {
  WorldKind kind = WorldKind::grid;
  double extents = 200.0;    // meters
  double block_size = 100.0; // meters
  std::uint64_t seed = 1;
};

namespace detail {

// Generators work in planar meters about a fixed origin; node positions are
// converted to the graph form via the shared projection so edge weights are
// the usual great-circle lengths.
inline const GeoPoint kWorldOrigin{40.0, -74.0};

struct WorldBuilder {
  std::map<std::int64_t, Vec2> nodes;
  std::vector<RoadEdge> edges;

  void node(std::int64_t id, Vec2 p) { nodes[id] = p; }

  void one_way(std::int64_t a, std::int64_t b) {
    std::vector<Vec2> poly{nodes.at(a), nodes.at(b)};
    edges.push_back(
        {a, b, polyline_length(poly, kWorldOrigin), std::move(poly)});
  }

  void two_way(std::int64_t a, std::int64_t b) {
    one_way(a, b);
    one_way(b, a);
  }

  RoadGraph finish() {
    return finalize_graph(kWorldOrigin, std::move(nodes), std::move(edges));
  }
};

inline void add_grid(WorldBuilder& b, double extents, double block,
                     std::int64_t id0, Vec2 center, Rng* jitter) {
  int n = static_cast<int>(std::floor(extents / block)) + 1;
  double span = (n - 1) * block;
  auto id = [&](int r, int c) {
    return id0 + static_cast<std::int64_t>(r) * n + c;
  };
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      Vec2 p{center.x + c * block - span / 2.0,
             center.y + r * block - span / 2.0};
      // Interior nodes only, so the outline stays rectangular.
      if (jitter && r > 0 && r < n - 1 && c > 0 && c < n - 1) {
        p.x += jitter->normal(0.0, 0.15 * block);
        p.y += jitter->normal(0.0, 0.15 * block);
      }
      b.node(id(r, c), p);
    }
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      if (c + 1 < n) b.two_way(id(r, c), id(r, c + 1));
      if (r + 1 < n) b.two_way(id(r, c), id(r + 1, c));
    }
}

// 16-node one-way ring (counterclockwise) + 4 two-way radial approaches.
inline void add_roundabout(WorldBuilder& b, double extents, double block,
                           std::int64_t id0, Vec2 center) {
  constexpr int kRing = 16;
  double radius = std::max(12.0, block / 4.0);
  for (int k = 0; k < kRing; ++k) {
    double a = 2.0 * std::numbers::pi * k / kRing;
    b.node(id0 + k, {center.x + radius * std::cos(a),
                     center.y + radius * std::sin(a)});
  }
  for (int k = 0; k < kRing; ++k) b.one_way(id0 + k, id0 + (k + 1) % kRing);
  double arm = extents / 2.0;
  // Approach roads meet the ring at the E/N/W/S ring nodes.
  const std::int64_t entryE = id0, entryN = id0 + 4, entryW = id0 + 8,
                     entryS = id0 + 12;
  b.node(id0 + kRing + 0, {center.x + arm, center.y});
  b.node(id0 + kRing + 1, {center.x, center.y + arm});
  b.node(id0 + kRing + 2, {center.x - arm, center.y});
  b.node(id0 + kRing + 3, {center.x, center.y - arm});
  b.two_way(id0 + kRing + 0, entryE);
  b.two_way(id0 + kRing + 1, entryN);
  b.two_way(id0 + kRing + 2, entryW);
  b.two_way(id0 + kRing + 3, entryS);
}

}  // namespace detail

// Deterministic synthetic road networks. Node ids start at 1 and follow the
// documented per-kind layout; only the composite kind consumes the seed
// (interior lattice jitter), so all other kinds are seed-invariant.
inline RoadGraph build_world(const WorldSpec& spec) {
  if (!(spec.block_size > 0.0))
    throw ConfigError("world block-size must be > 0");
  if (!(spec.extents >= spec.block_size))
    throw ConfigError("world extents must be >= block-size");

  detail::WorldBuilder b;
  double arm = spec.extents / 2.0;

  switch (spec.kind) {
    case WorldKind::grid:
      detail::add_grid(b, spec.extents, spec.block_size, 1, {0.0, 0.0},
                       nullptr);
      break;

    case WorldKind::four_way:
      // 1 center; 2..5 = N, E, S, W arm tips.
      b.node(1, {0.0, 0.0});
      b.node(2, {0.0, arm});
      b.node(3, {arm, 0.0});
      b.node(4, {0.0, -arm});
      b.node(5, {-arm, 0.0});
      for (std::int64_t t = 2; t <= 5; ++t) b.two_way(1, t);
      break;

    case WorldKind::t_junction:
      // 1 center; 2 = W, 3 = E, 4 = N.
      b.node(1, {0.0, 0.0});
      b.node(2, {-arm, 0.0});
      b.node(3, {arm, 0.0});
      b.node(4, {0.0, arm});
      b.two_way(1, 2);
      b.two_way(1, 3);
      b.two_way(1, 4);
      break;

    case WorldKind::fork: {
      // Stem from the south splitting into two branches 35° off north.
      double spread = deg2rad(35.0);
      b.node(1, {0.0, 0.0});
      b.node(2, {0.0, -arm});
      b.node(3, {-arm * std::sin(spread), arm * std::cos(spread)});
      b.node(4, {arm * std::sin(spread), arm * std::cos(spread)});
      b.two_way(1, 2);
      b.two_way(1, 3);
      b.two_way(1, 4);
      break;
    }

    case WorldKind::roundabout:
      detail::add_roundabout(b, spec.extents, spec.block_size, 1, {0.0, 0.0});
      break;

    case WorldKind::composite: {
      // Jittered lattice joined to a roundabout by a short connector road.
      Rng rng(spec.seed);
      detail::add_grid(b, spec.extents, spec.block_size, 1, {0.0, 0.0}, &rng);
      int n = static_cast<int>(std::floor(spec.extents / spec.block_size)) + 1;
      double span = (n - 1) * spec.block_size;
      Vec2 hub{span / 2.0 + 2.0 * spec.block_size + spec.extents / 2.0, 0.0};
      detail::add_roundabout(b, spec.extents, spec.block_size, 1000, hub);
      // East-middle lattice node to the roundabout's west approach tip.
      std::int64_t east_mid = 1 + static_cast<std::int64_t>(n / 2) * n + (n - 1);
      b.two_way(east_mid, 1000 + 16 + 2);
      break;
    }
  }
  return b.finish();
}

}  // namespace toponav
