#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <vector>

#include "toponav/mdn.hpp"
#include "toponav/render.hpp"
#include "toponav/rng.hpp"
#include "toponav/road_graph.hpp"
#include "toponav/sim.hpp"
#include "toponav/worldgen.hpp"

namespace toponav {

// Training-corpus builder. Samples supervised steering examples along
// shortest routes through a fixed set of synthetic worlds, with three
// augmentations that matter downstream:
//   - recovery perturbations: part of the poses are pushed off the lane
//     (lateral + heading noise) and supervised with the pursuit curvature
//     that steers back, so the routed head learns to correct, not just
//     to coast;
//   - observation blanking: part of the egocentric rasters are zeroed so
//     the heads learn to fall back on the map channels alone;
//   - straight-road capping: samples far from every junction are kept only
//     up to a fixed fraction of the corpus, so junction approaches (where
//     the steering distribution is actually multimodal) dominate.
struct CurriculumConfig {
  int samples = 10000;
  double spacing = 4.0;          // mean arc-length gap between samples
  double p_recovery = 0.5;       // fraction of poses drawn off-lane
  double sigma_lat = 1.0;        // recovery lateral offset std, meters
  double sigma_head = 0.15;      // recovery heading offset std, radians
  double p_blank = 0.25;         // observation zeroing probability
  double straight_cap = 0.45;    // max fraction far from junctions
  double junction_window = 25.0; // meters that count as junction-adjacent
  int junction_oversample = 2;   // extra draws around each junction per pass
  double p_rollout = 0.5;        // chance a route also yields rollout poses
  // Supervision curvature is capped at this fraction of kappa_max. Only
  // useful when the regression head's output scale equals the supervision
  // bound: a target exactly at a tanh head's scale sits on the asymptote and
  // the fit stalls short. With the model scale set above the vehicle bound
  // (the usual setup) leave this at 1.
  double target_cap = 1.0;
  double min_route = 50.0;       // meters; shorter routes are re-drawn
  double lookahead = 8.0;        // pursuit target distance, meters
  double kappa_max = kKappaMax;
  ObsConfig obs;                 // egocentric raster + sensor noise
  int map_size = 64;
  double map_resolution = 1.0;
  double stroke = 3.0;
};

// Junctions are nodes with three or more distinct road neighbors. Out-degree
// alone misclassifies two-way chains (two out-edges) and one-way ring entry
// nodes (two out-edges but three roads), so count neighbor nodes instead.
inline std::set<std::int64_t> junction_nodes(const RoadGraph& g) {
  std::map<std::int64_t, std::set<std::int64_t>> nb;
  for (const RoadEdge& e : g.edges) {
    nb[e.from].insert(e.to);
    nb[e.to].insert(e.from);
  }
  std::set<std::int64_t> out;
  for (const auto& [id, peers] : nb)
    if (peers.size() >= 3) out.insert(id);
  return out;
}

// Pose on the route at this arc position, heading along the local tangent.
inline Pose route_pose_at(const RoutePath& path, double arc) {
  const Vec2 p = path.point_at(arc);
  const Vec2 a = path.point_at(std::max(0.0, arc - 0.5));
  const Vec2 b = path.point_at(std::min(path.length(), arc + 0.5));
  return {p.x, p.y, vec_heading(b - a)};
}

// The five training worlds. The composite kind and all reseeded variants
// stay out of the corpus so evaluations have genuinely unseen geometry.
inline std::vector<WorldSpec> curriculum_worlds(std::uint64_t seed) {
  return {
      {WorldKind::four_way, 200.0, 100.0, seed},
      {WorldKind::t_junction, 200.0, 100.0, seed + 1},
      {WorldKind::fork, 200.0, 100.0, seed + 2},
      {WorldKind::roundabout, 200.0, 100.0, seed + 3},
      {WorldKind::grid, 200.0, 100.0, seed + 4},
  };
}

namespace detail {

inline std::vector<std::uint8_t> quantize_raster(const std::vector<float>& v) {
  std::vector<std::uint8_t> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] > 0.5f ? 1 : 0;
  return out;
}

// Arc positions of junction nodes along one route.
inline std::vector<double> junction_arcs(const RoutePath& path,
                                         const std::set<std::int64_t>& junc) {
  std::vector<double> arcs;
  for (const auto& [node, arc] : path.node_arcs())
    if (junc.count(node)) arcs.push_back(arc);
  return arcs;
}

}  // namespace detail

inline Dataset build_curriculum(const CurriculumConfig& cfg,
                                std::uint64_t seed) {
  if (cfg.samples < 1) throw std::invalid_argument("samples must be >= 1");
  if (!(cfg.spacing > 0.0)) throw std::invalid_argument("spacing must be > 0");
  if (cfg.p_recovery < 0.0 || cfg.p_recovery > 1.0 || cfg.p_blank < 0.0 ||
      cfg.p_blank > 1.0)
    throw std::invalid_argument("probabilities must be in [0, 1]");
  if (!(cfg.straight_cap > 0.0) || cfg.straight_cap > 1.0)
    throw std::invalid_argument("straight_cap must be in (0, 1]");
  if (cfg.junction_oversample < 0)
    throw std::invalid_argument("junction_oversample must be >= 0");
  if (!(cfg.target_cap > 0.0) || cfg.target_cap > 1.0)
    throw std::invalid_argument("target_cap must be in (0, 1]");
  if (cfg.p_rollout < 0.0 || cfg.p_rollout > 1.0)
    throw std::invalid_argument("p_rollout must be in [0, 1]");

  Dataset ds;
  ds.obs_size = cfg.obs.size;
  ds.obs_resolution = cfg.obs.resolution;
  ds.map_size = cfg.map_size;
  ds.map_resolution = cfg.map_resolution;

  const std::vector<WorldSpec> specs = curriculum_worlds(seed);
  std::vector<RoadGraph> graphs;
  std::vector<std::set<std::int64_t>> junctions;
  std::vector<std::vector<std::int64_t>> node_ids;
  for (const WorldSpec& spec : specs) {
    graphs.push_back(build_world(spec));
    junctions.push_back(junction_nodes(graphs.back()));
    node_ids.emplace_back();
    for (const auto& [id, p] : graphs.back().nodes)
      node_ids.back().push_back(id);
  }

  Rng rng(seed);
  const auto target = static_cast<std::size_t>(cfg.samples);
  std::size_t straight_kept = 0;
  std::size_t wi = 0;
  std::size_t dry_routes = 0;  // consecutive routes contributing nothing

  while (ds.samples.size() < target) {
    const std::size_t w = wi++ % graphs.size();
    const RoadGraph& g = graphs[w];
    const auto& ids = node_ids[w];

    const std::int64_t a = ids[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<int>(ids.size()) - 1))];
    const std::int64_t b = ids[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<int>(ids.size()) - 1))];
    if (a == b) continue;
    std::vector<int> route;
    try {
      route = shortest_route(g, a, b);
    } catch (const NoRouteError&) {
      continue;
    }
    if (route.empty() || route_length(g, route) < cfg.min_route) continue;

    const RoutePath path(g, route);
    const std::vector<double> jarcs = detail::junction_arcs(path, junctions[w]);
    const std::size_t before = ds.samples.size();

    const auto emit_pose = [&](const Pose& pose, double near_arc) {
      const auto [parc, pdist] =
          path.project({pose.x, pose.y}, near_arc - 15.0, near_arc + 15.0);
      if (pdist > 6.0) return;  // too far off the lane to supervise
      const double kappa =
          pursuit_curvature(pose, path.point_at(parc + cfg.lookahead),
                            cfg.lookahead, cfg.target_cap * cfg.kappa_max);

      double dist_ahead = 1e9;
      bool adjacent = false;
      for (double ja : jarcs) {
        if (ja >= parc - 1.0) dist_ahead = std::min(dist_ahead, ja - parc);
        if (std::abs(ja - parc) <= cfg.junction_window) adjacent = true;
      }
      if (!adjacent) {
        // Keep the running straight fraction at or under the cap.
        if (static_cast<double>(straight_kept + 1) >
            cfg.straight_cap * static_cast<double>(ds.samples.size() + 1))
          return;
        ++straight_kept;
      }

      Observation obs = synthesize_observation(g, pose, cfg.obs, rng);
      if (rng.uniform() < cfg.p_blank)
        for (float& v : obs.values) v = 0.0f;
      const MapPatch patch = render_patch(g, pose, &route, cfg.map_size,
                                          cfg.map_resolution, cfg.stroke);

      CompactSample cs;
      cs.obs = detail::quantize_raster(obs.values);
      cs.map_d = detail::quantize_raster(patch.drivable);
      cs.map_r = detail::quantize_raster(*patch.route);
      cs.target = kappa;
      cs.dist_junction = static_cast<float>(std::max(dist_ahead, 0.0));
      ds.samples.push_back(std::move(cs));
    };

    const auto emit = [&](double arc) {
      const Pose base = route_pose_at(path, arc);
      Pose pose = base;
      if (rng.uniform() < cfg.p_recovery) {
        const double lat = rng.normal(0.0, cfg.sigma_lat);
        // Left of the vehicle: forward (-sin a, cos a) rotated +90 degrees.
        pose.x += lat * -std::cos(base.alpha);
        pose.y += lat * -std::sin(base.alpha);
        pose.alpha = wrap_angle(base.alpha + rng.normal(0.0, cfg.sigma_head));
      }
      emit_pose(pose, arc);
    };

    for (double arc = rng.uniform(0.5, cfg.spacing);
         arc + cfg.lookahead < path.length() && ds.samples.size() < target;
         arc += rng.uniform(0.7, 1.3) * cfg.spacing)
      emit(arc);

    // Turn execution spans only a few meters around each junction; the even
    // walk undersamples it, so revisit every junction with dense draws.
    for (double ja : jarcs)
      for (int k = 0; k < cfg.junction_oversample; ++k) {
        if (ds.samples.size() >= target) break;
        const double arc = ja + rng.uniform(-10.0, 6.0);
        if (arc < 0.5 || arc + cfg.lookahead >= path.length()) continue;
        emit(arc);
      }

    // Gaussian jitter around the polyline never reaches the poses a vehicle
    // actually occupies mid-turn (inside the cut, heading half swung), so
    // supervise along closed-loop oracle rollouts near junctions as well.
    if (!jarcs.empty() && cfg.p_rollout > 0.0 &&
        rng.uniform() < cfg.p_rollout && ds.samples.size() < target) {
      SimConfig rsim;
      rsim.lookahead = cfg.lookahead;
      // Half the rollouts use a weakened steering bound; they swing wide
      // through corners the way an under-trained imitator does, which puts
      // supervision on the poses such a driver actually needs corrected.
      rsim.kappa_max = cfg.kappa_max * (rng.uniform() < 0.5 ? 1.0 : 0.7);
      try {
        const Trace tr = simulate_route(g, route, rsim, rng);
        const std::size_t stride = std::max<std::size_t>(
            1, static_cast<std::size_t>(
                   std::llround(2.0 / (rsim.speed * rsim.dt))));
        for (std::size_t i = 0; i < tr.samples.size(); i += stride) {
          if (ds.samples.size() >= target) break;
          const double arc = tr.arcs[i];
          if (arc + cfg.lookahead >= path.length()) break;
          bool near = false;
          for (double ja : jarcs)
            if (std::abs(ja - arc) <= cfg.junction_window + 4.0) near = true;
          if (near) emit_pose(tr.samples[i].true_pose, arc);
        }
      } catch (const SimulationDivergedError&) {
        // An oracle stall is a route quirk, not a curriculum error.
      }
    }

    if (ds.samples.size() == before) {
      if (++dry_routes > 1000)
        throw Error("curriculum sampling stalled; config rejects everything");
    } else {
      dry_routes = 0;
    }
  }
  return ds;
}

}  // namespace toponav
