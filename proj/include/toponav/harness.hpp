#pragma once

#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "toponav/belief.hpp"
#include "toponav/config.hpp"
#include "toponav/curriculum.hpp"
#include "toponav/match.hpp"
#include "toponav/mdn.hpp"
#include "toponav/render.hpp"
#include "toponav/report.hpp"
#include "toponav/rng.hpp"
#include "toponav/road_graph.hpp"
#include "toponav/sim.hpp"
#include "toponav/util.hpp"
#include "toponav/worldgen.hpp"

namespace toponav {

inline constexpr const char* kToponavVersion = "0.1.0";

// Everything a finished run leaves behind.
struct RunResult {
  std::filesystem::path out_dir;
  nlohmann::json metrics;
  std::vector<std::filesystem::path> files;
};

// --- shared plumbing --------------------------------------------------------

inline CurriculumConfig curriculum_config(const ExperimentConfig& cfg) {
  CurriculumConfig cc;
  cc.samples = cfg.train_samples;
  cc.lookahead = cfg.sim.lookahead;
  // Supervision targets live inside the vehicle envelope, not the model's
  // output scale; the two may differ when the output range is widened to
  // keep bound-level targets off the tanh asymptote.
  cc.kappa_max = cfg.sim.kappa_max;
  cc.obs.size = cfg.model.obs_size;
  cc.obs.resolution = cfg.model.obs_resolution;
  cc.obs.noise = cfg.obs_noise;
  cc.map_size = cfg.model.map_size;
  cc.map_resolution = cfg.model.map_resolution;
  return cc;
}

// Loads the configured checkpoint, or trains a fresh model on the synthetic
// curriculum. Training is fully seeded, so in-run training keeps reruns
// byte-identical.
inline SteeringModel provision_model(const ExperimentConfig& cfg) {
  if (!cfg.checkpoint.empty()) {
    if (!std::filesystem::exists(cfg.checkpoint))
      throw MissingArtifactError("checkpoint not found: " + cfg.checkpoint);
    return load_checkpoint(read_file(cfg.checkpoint));
  }
  const Dataset ds = build_curriculum(curriculum_config(cfg), cfg.seed);
  SteeringModel model = SteeringModel::init(cfg.model, cfg.seed);
  train(model, ds, cfg.train);
  return model;
}

namespace detail {

inline std::string iso8601_utc_now() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Deterministic route picker: draws node pairs from the seeded stream and
// keeps the first route at least min_len long, falling back to the longest
// seen. Junction-weighted variant for drives below.
inline std::vector<int> pick_route(const RoadGraph& g, Rng& rng,
                                   double min_len, int attempts = 200) {
  std::vector<std::int64_t> ids;
  for (const auto& [id, p] : g.nodes) ids.push_back(id);
  std::vector<int> best;
  double best_len = -1.0;
  for (int t = 0; t < attempts; ++t) {
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
    if (route.empty()) continue;
    const double len = route_length(g, route);
    if (len >= min_len) return route;
    if (len > best_len) {
      best_len = len;
      best = route;
    }
  }
  if (best.empty()) throw NoRouteError("world has no usable route");
  return best;
}

// Route with the most junction crossings among seeded draws; ties go to the
// longer route. Used by the drive experiment so there is something to steer.
inline std::vector<int> pick_junction_route(const RoadGraph& g, Rng& rng,
                                            int attempts = 120) {
  const std::set<std::int64_t> junc = junction_nodes(g);
  std::vector<std::int64_t> ids;
  for (const auto& [id, p] : g.nodes) ids.push_back(id);
  std::vector<int> best;
  double best_len = -1.0;
  int best_junc = -1;
  for (int t = 0; t < attempts; ++t) {
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
    if (route.empty()) continue;
    const RoutePath path(g, route);
    int nj = 0;
    for (const auto& [node, arc] : path.node_arcs())
      if (junc.count(node) && arc > 1.0 && arc < path.length() - 1.0) ++nj;
    const double len = path.length();
    if (nj > best_junc || (nj == best_junc && len > best_len)) {
      best_junc = nj;
      best_len = len;
      best = route;
    }
  }
  if (best.empty()) throw NoRouteError("world has no usable route");
  return best;
}

}  // namespace detail

// --- evaluation sample builders ----------------------------------------------

// Held-out steering samples for calibration: same corpus generator, fresh
// seed stream. The generator only consumes the seed for sampling, so eval
// sees the training geometry with poses and noise it never trained on.
inline std::vector<CalibSample> calibration_samples(
    const ExperimentConfig& cfg, int n, std::uint64_t seed) {
  CurriculumConfig cc = curriculum_config(cfg);
  cc.samples = n;
  const Dataset ds = build_curriculum(cc, seed);
  std::vector<CalibSample> out;
  out.reserve(ds.samples.size());
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    BatchItem it = ds.item(i);
    out.push_back({std::move(it.obs), std::move(it.map_u), it.target});
  }
  return out;
}

// One pose-estimation trial: a true pose near a junction, the curvature the
// controller executes there, and one noisy egocentric observation.
struct LocSample {
  Pose pose;
  double theta = 0.0;
  Observation obs;
};

inline std::vector<LocSample> localization_samples(const ExperimentConfig& cfg,
                                                   const RoadGraph& g, int n,
                                                   std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("need at least one sample");
  const std::set<std::int64_t> junc = junction_nodes(g);
  if (junc.empty()) throw Error("world has no junctions to localize against");
  const ObsConfig obs_cfg{cfg.model.obs_size, cfg.model.obs_resolution, 3.0,
                          cfg.obs_noise};
  Rng rng(seed);
  std::vector<LocSample> out;
  std::size_t guard = 0;
  while (out.size() < static_cast<std::size_t>(n)) {
    if (++guard > 10000u + 100u * static_cast<std::size_t>(n))
      throw Error("localization sampling stalled");
    std::vector<int> route;
    try {
      route = detail::pick_route(g, rng, 60.0, 20);
    } catch (const NoRouteError&) {
      continue;
    }
    const RoutePath path(g, route);
    std::vector<double> jarcs;
    for (const auto& [node, arc] : path.node_arcs())
      if (junc.count(node)) jarcs.push_back(arc);
    if (jarcs.empty()) continue;
    for (double arc = rng.uniform(2.0, 6.0);
         arc + cfg.sim.lookahead < path.length() &&
         out.size() < static_cast<std::size_t>(n);
         arc += rng.uniform(3.0, 7.0)) {
      bool adjacent = false;
      for (double ja : jarcs)
        if (std::abs(ja - arc) <= 20.0) { adjacent = true; break; }
      if (!adjacent) continue;
      LocSample s;
      s.pose = route_pose_at(path, arc);
      s.theta =
          pursuit_curvature(s.pose, path.point_at(arc + cfg.sim.lookahead),
                            cfg.sim.lookahead, cfg.sim.kappa_max);
      s.obs = synthesize_observation(g, s.pose, obs_cfg, rng);
      out.push_back(std::move(s));
    }
  }
  return out;
}

// --- place-recognition scene set ---------------------------------------------

// Five structurally distinct locations: plain straight road, a four-way
// crossing taken straight, left and right turns at a T, and a roundabout
// ring arc. Geometry is fixed; only observation noise consumes the seed.
struct PlaceScene {
  std::string name;
  WorldSpec world;
  std::int64_t from = 0;
  std::int64_t to = 0;
  double arc = 0.0;
};

// Five locations whose executed steering separates cleanly: mid-block
// straight (0), left fork branch (~+0.10), tee turns (~±0.19), and the
// sustained ring curvature (+0.04). Turn scenes sit 3 m before the junction
// so the commanded curvature is already bending.
inline std::vector<PlaceScene> place_scenes() {
  return {
      {"straight", {WorldKind::four_way, 200.0, 100.0, 1}, 4, 2, 40.0},
      {"fork", {WorldKind::fork, 200.0, 100.0, 1}, 2, 3, 97.0},
      {"tee_left", {WorldKind::t_junction, 200.0, 100.0, 1}, 2, 4, 97.0},
      {"tee_right", {WorldKind::t_junction, 200.0, 100.0, 1}, 3, 4, 97.0},
      {"ring", {WorldKind::roundabout, 200.0, 100.0, 1}, 20, 17, 95.0},
  };
}

struct PlaceSet {
  std::vector<std::string> names;
  std::vector<PlaceSample> locs;
  std::vector<MapPatch> patches;
};

inline PlaceSet build_place_set(const ExperimentConfig& cfg,
                                std::uint64_t seed) {
  const ObsConfig obs_cfg{cfg.model.obs_size, cfg.model.obs_resolution, 3.0,
                          cfg.obs_noise};
  Rng rng(seed);
  PlaceSet set;
  for (const PlaceScene& scene : place_scenes()) {
    const RoadGraph g = build_world(scene.world);
    const std::vector<int> route = shortest_route(g, scene.from, scene.to);
    const RoutePath path(g, route);
    const Pose pose = route_pose_at(path, scene.arc);
    const double theta =
        pursuit_curvature(pose, path.point_at(scene.arc + cfg.sim.lookahead),
                          cfg.sim.lookahead, cfg.sim.kappa_max);
    set.names.push_back(scene.name);
    set.locs.push_back({synthesize_observation(g, pose, obs_cfg, rng), theta});
    set.patches.push_back(render_patch(g, pose, nullptr, cfg.model.map_size,
                                       cfg.model.map_resolution, 3.0));
  }
  return set;
}

// --- closed-loop driving -------------------------------------------------------

struct DriveStep {
  double t = 0.0;
  Pose pose;
  double theta = 0.0;      // commanded curvature
  double deviation = 0.0;  // meters off the route
  double arc = 0.0;        // projected route position
};

struct DriveResult {
  bool completed = false;
  double max_deviation = 0.0;
  int junctions_passed = 0;
  double distance = 0.0;
  std::vector<DriveStep> steps;
};

// Drives the routed head closed-loop down a route. Same projection-window
// bookkeeping as the oracle simulator; the only difference is who steers.
inline DriveResult drive_route(const SteeringModel& model, const RoadGraph& g,
                               const std::vector<int>& route,
                               const SimConfig& sim, const ObsNoise& noise,
                               Rng& rng) {
  if (!(sim.speed > 0.0) || !(sim.dt > 0.0))
    throw std::invalid_argument("speed and dt must be > 0");
  const ObsConfig obs_cfg{model.cfg.obs_size, model.cfg.obs_resolution, 3.0,
                          noise};
  const RoutePath path(g, route);
  const Vec2 p0 = path.point_at(0.0);
  Pose pose{p0.x, p0.y, path.initial_heading()};

  DriveResult res;
  const double step_len = sim.speed * sim.dt;
  const double end_arc = path.length() - 0.5 * step_len;
  double cursor = 0.0;
  const std::size_t max_steps =
      static_cast<std::size_t>(path.length() / step_len * 4.0) + 64;
  for (std::size_t step = 0;; ++step) {
    if (step > max_steps) break;  // stalled: incomplete
    const auto [arc, dist] =
        path.project({pose.x, pose.y}, cursor - 2.0 * step_len,
                     cursor + sim.lookahead + 4.0 * step_len);
    cursor = arc;
    res.max_deviation = std::max(res.max_deviation, dist);
    if (dist > sim.corridor) break;  // left the corridor: incomplete
    if (arc >= end_arc) {
      res.completed = true;
      break;
    }
    const Observation obs = synthesize_observation(g, pose, obs_cfg, rng);
    const MapPatch map_r =
        render_patch(g, pose, &route, model.cfg.map_size,
                     model.cfg.map_resolution, 3.0);
    // The head's output range can exceed what the platform executes; the
    // command is saturated at the vehicle bound like any real actuator.
    const double theta = std::clamp(model.forward_deterministic(obs, map_r),
                                    -sim.kappa_max, sim.kappa_max);
    res.steps.push_back(
        {static_cast<double>(step) * sim.dt, pose, theta, dist, arc});
    pose = step_dynamics(pose, theta, sim.speed, sim.dt);
  }
  res.distance = cursor;
  const std::set<std::int64_t> junc = junction_nodes(g);
  for (const auto& [node, arc] : path.node_arcs())
    if (junc.count(node) && arc > 1.0 && arc < cursor - 1.0)
      ++res.junctions_passed;
  return res;
}

// --- experiments ---------------------------------------------------------------

namespace detail {

struct ExperimentOutput {
  nlohmann::json metrics;
  std::vector<std::pair<std::string, std::string>> csvs;
  Report report;
};

// Coverage of a centered unit Gaussian within z standard deviations; the
// reference curve drawn next to observed calibration fractions.
inline double normal_coverage(double z) {
  return std::erf(z / std::sqrt(2.0));
}

inline ExperimentOutput run_calibration(const ExperimentConfig& cfg,
                                        const SteeringModel& model) {
  const int n_eval = 400;
  const std::vector<CalibSample> samples =
      calibration_samples(cfg, n_eval, cfg.seed + 1000003);
  const std::vector<double> zs = {0.5, 1.0, 2.0, 3.0};

  ExperimentOutput out;
  std::string csv = "z,fraction\n";
  std::vector<double> fractions;
  for (double z : zs) {
    fractions.push_back(calibration_fraction(model, samples, z));
    csv += fmt_double(z) + "," + fmt_double(fractions.back()) + "\n";
  }
  bool monotone = true;
  for (std::size_t i = 1; i < fractions.size(); ++i)
    if (fractions[i] < fractions[i - 1]) monotone = false;

  out.metrics = {{"experiment", "calibration"},
                 {"n_samples", n_eval},
                 {"z", zs},
                 {"fraction", fractions},
                 {"monotone", monotone}};
  out.csvs.emplace_back("calibration.csv", csv);

  LineChart chart;
  chart.title = "steering calibration";
  chart.x_label = "z";
  chart.y_label = "fraction within z sigma";
  chart.series.push_back({"observed", zs, fractions});
  std::vector<double> ref;
  for (double z : zs) ref.push_back(normal_coverage(z));
  chart.series.push_back({"unit normal", zs, ref});
  out.report.line_charts.emplace_back("calibration_curve", chart);
  return out;
}

inline ExperimentOutput run_localization(const ExperimentConfig& cfg,
                                         const SteeringModel& model) {
  const int n_samples = 200;
  const int n_hyp = 64;
  const RoadGraph g = build_world(cfg.world);
  const std::vector<LocSample> samples =
      localization_samples(cfg, g, n_samples, cfg.seed + 2000003);

  PosteriorConfig pcfg;
  pcfg.kappa_max = cfg.model.kappa_max;

  const std::vector<double> sigmas_xy = {1.0, 2.0, 4.0};
  const std::vector<double> sigmas_alpha = {0.4, 0.8};

  ExperimentOutput out;
  std::string csv =
      "sigma_xy,sigma_alpha,sample,d_spatial,d_angular,d_total,d_entropy\n";
  BarChart bars;
  bars.title = "posterior uncertainty reduction";
  bars.y_label = "mean reduction";
  bars.bar_names = {"spatial", "angular", "total", "entropy"};
  nlohmann::json levels = nlohmann::json::array();

  Rng rng(cfg.seed + 3000003);
  bool all_positive = true;
  for (double sxy : sigmas_xy) {
    for (double sa : sigmas_alpha) {
      double dsp = 0.0, dan = 0.0, dto = 0.0, den = 0.0;
      for (std::size_t i = 0; i < samples.size(); ++i) {
        const LocSample& s = samples[i];
        const PoseBelief prior = make_prior(s.pose, sxy, sa, n_hyp, rng);
        const BeliefStats before = belief_stats(prior);
        const PoseBelief post = posterior_update(prior, s.obs, g, model, pcfg,
                                                 s.theta, rng);
        const BeliefStats after = belief_stats(post);
        const double d_spatial = before.spatial_variance - after.spatial_variance;
        const double d_angular = before.angular_variance - after.angular_variance;
        const double d_total = before.total_variance - after.total_variance;
        const double d_entropy = before.entropy - after.entropy;
        dsp += d_spatial;
        dan += d_angular;
        dto += d_total;
        den += d_entropy;
        csv += fmt_double(sxy) + "," + fmt_double(sa) + "," +
               std::to_string(i) + "," + fmt_double(d_spatial) + "," +
               fmt_double(d_angular) + "," + fmt_double(d_total) + "," +
               fmt_double(d_entropy) + "\n";
      }
      const double inv = 1.0 / static_cast<double>(samples.size());
      dsp *= inv;
      dan *= inv;
      dto *= inv;
      den *= inv;
      if (!(dsp > 0.0 && dan > 0.0 && dto > 0.0 && den > 0.0))
        all_positive = false;
      levels.push_back({{"sigma_xy", sxy},
                        {"sigma_alpha", sa},
                        {"d_spatial", dsp},
                        {"d_angular", dan},
                        {"d_total", dto},
                        {"d_entropy", den}});
      bars.groups.push_back({fmt_double(sxy) + "m/" + fmt_double(sa) + "rad",
                             {dsp, dan, dto, den}});
    }
  }

  out.metrics = {{"experiment", "localization"},
                 {"n_samples", n_samples},
                 {"n_hypotheses", n_hyp},
                 {"levels", levels},
                 {"all_reductions_positive", all_positive}};
  out.csvs.emplace_back("localization.csv", csv);
  out.report.bar_charts.emplace_back("uncertainty_reduction", bars);
  return out;
}

inline ExperimentOutput run_confusion(const ExperimentConfig& cfg,
                                      const SteeringModel& model) {
  const PlaceSet set = build_place_set(cfg, cfg.seed + 4000003);
  const ConfusionMatrix cm =
      place_recognition(model, set.locs, set.patches);

  int diagonal = 0;
  for (int i = 0; i < cm.n; ++i)
    if (cm.argmax[static_cast<std::size_t>(i)] == i) ++diagonal;

  ExperimentOutput out;
  std::string csv = "location,predicted";
  for (const std::string& name : set.names) csv += "," + name;
  csv += "\n";
  for (std::size_t i = 0; i < set.names.size(); ++i) {
    csv += set.names[i] + "," +
           set.names[static_cast<std::size_t>(cm.argmax[i])];
    for (std::size_t j = 0; j < set.names.size(); ++j)
      csv += "," + fmt_double(cm.normalized[i][j]);
    csv += "\n";
  }

  out.metrics = {{"experiment", "confusion"},
                 {"locations", set.names},
                 {"diagonal", diagonal},
                 {"n", cm.n},
                 {"normalized", cm.normalized}};
  out.csvs.emplace_back("confusion.csv", csv);

  Heatmap hm;
  hm.title = "place recognition";
  hm.row_labels = set.names;
  hm.col_labels = set.names;
  hm.values = cm.normalized;
  out.report.heatmaps.emplace_back("confusion_heatmap", hm);
  return out;
}

inline ExperimentOutput run_matching(const ExperimentConfig& cfg) {
  const RoadGraph g = build_world(cfg.world);
  Rng rng(cfg.seed);
  const std::vector<int> route = pick_route(g, rng, 250.0);
  const Trace trace = simulate_route(g, route, cfg.sim, rng);

  // One fix every ~20 m, offset half a gap so no fix sits on the start
  // node where every incident edge ties.
  const std::size_t stride = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(20.0 / (cfg.sim.speed * cfg.sim.dt))));
  std::vector<Pose> fixes;
  std::vector<std::size_t> fix_idx;
  for (std::size_t i = stride / 2; i < trace.samples.size(); i += stride) {
    fixes.push_back(trace.samples[i].gps_pose);
    fix_idx.push_back(i);
  }
  if (fixes.empty()) throw Error("trace too short for any fix");

  MatchConfig mcfg;
  mcfg.candidate_radius = 50.0;
  const std::vector<int> matched = match_trace(g, fixes, mcfg);

  std::size_t correct = 0;
  std::string csv = "t,true_x,true_y,gps_x,gps_y,true_edge,matched_edge\n";
  for (std::size_t k = 0; k < fixes.size(); ++k) {
    const TraceSample& s = trace.samples[fix_idx[k]];
    const int true_edge = trace.edge_ids[fix_idx[k]];
    if (matched[k] == true_edge) ++correct;
    csv += fmt_double(s.t) + "," + fmt_double(s.true_pose.x) + "," +
           fmt_double(s.true_pose.y) + "," + fmt_double(s.gps_pose.x) + "," +
           fmt_double(s.gps_pose.y) + "," + std::to_string(true_edge) + "," +
           std::to_string(matched[k]) + "\n";
  }
  const double accuracy =
      static_cast<double>(correct) / static_cast<double>(fixes.size());

  bool route_ok = true;
  std::size_t route_edge_count = 0;
  try {
    route_edge_count = route_edges(g, matched).size();
  } catch (const BrokenRouteError&) {
    route_ok = false;
  }

  ExperimentOutput out;
  out.metrics = {{"experiment", "matching"},
                 {"n_fixes", fixes.size()},
                 {"gps_sigma_xy", cfg.sim.gps_sigma_xy},
                 {"edge_accuracy", accuracy},
                 {"route_reconstructed", route_ok},
                 {"route_edge_count", route_edge_count}};
  out.csvs.emplace_back("matching.csv", csv);

  LineChart chart;
  chart.title = "matched trajectory";
  chart.x_label = "x";
  chart.y_label = "y";
  Series truth{"true", {}, {}};
  Series gps{"gps", {}, {}};
  for (std::size_t k = 0; k < fixes.size(); ++k) {
    const TraceSample& s = trace.samples[fix_idx[k]];
    truth.x.push_back(s.true_pose.x);
    truth.y.push_back(s.true_pose.y);
    gps.x.push_back(s.gps_pose.x);
    gps.y.push_back(s.gps_pose.y);
  }
  chart.series.push_back(std::move(truth));
  chart.series.push_back(std::move(gps));
  out.report.line_charts.emplace_back("trajectory", chart);
  return out;
}

inline ExperimentOutput run_drive(const ExperimentConfig& cfg,
                                  const SteeringModel& model) {
  const RoadGraph g = build_world(cfg.world);
  Rng rng(cfg.seed);
  const std::vector<int> route = pick_junction_route(g, rng);
  const DriveResult res =
      drive_route(model, g, route, cfg.sim, cfg.obs_noise, rng);

  ExperimentOutput out;
  out.metrics = {{"experiment", "drive"},
                 {"route_completion", res.completed},
                 {"max_lateral_deviation_m", res.max_deviation},
                 {"junctions_passed", res.junctions_passed},
                 {"distance_m", res.distance},
                 {"route_length_m", route_length(g, route)}};

  std::string csv = "t,x,y,alpha,theta,deviation\n";
  for (const DriveStep& s : res.steps)
    csv += fmt_double(s.t) + "," + fmt_double(s.pose.x) + "," +
           fmt_double(s.pose.y) + "," + fmt_double(s.pose.alpha) + "," +
           fmt_double(s.theta) + "," + fmt_double(s.deviation) + "\n";
  out.csvs.emplace_back("drive.csv", csv);

  LineChart chart;
  chart.title = "closed-loop drive";
  chart.x_label = "x";
  chart.y_label = "y";
  const RoutePath path(g, route);
  Series planned{"route", {}, {}};
  for (double arc = 0.0; arc <= path.length(); arc += 5.0) {
    const Vec2 p = path.point_at(arc);
    planned.x.push_back(p.x);
    planned.y.push_back(p.y);
  }
  Series driven{"driven", {}, {}};
  for (std::size_t i = 0; i < res.steps.size(); i += 5) {
    driven.x.push_back(res.steps[i].pose.x);
    driven.y.push_back(res.steps[i].pose.y);
  }
  if (driven.x.empty() && !res.steps.empty()) {
    driven.x.push_back(res.steps[0].pose.x);
    driven.y.push_back(res.steps[0].pose.y);
  }
  chart.series.push_back(std::move(planned));
  if (!driven.x.empty()) chart.series.push_back(std::move(driven));
  out.report.line_charts.emplace_back("drive_path", chart);
  return out;
}

}  // namespace detail

// --- the run entry point --------------------------------------------------------

// Executes one experiment and writes its artifact set: config.json,
// metrics.json, per-sample CSVs, SVG figures, a checkpoint when the model
// was trained in-run, and manifest.json. Every numeric artifact is a pure
// function of (config, seed); only the manifest timestamp differs between
// reruns. All files are fully rendered before the first write.
inline RunResult run(const ExperimentConfig& cfg) {
  validate_config(cfg);

  std::optional<SteeringModel> model;
  std::optional<std::string> checkpoint_text;
  const bool needs_model = cfg.experiment != Experiment::matching;
  if (needs_model) {
    model = provision_model(cfg);
    if (cfg.checkpoint.empty())
      checkpoint_text = save_checkpoint(*model);
  }

  detail::ExperimentOutput out;
  switch (cfg.experiment) {
    case Experiment::calibration:
      out = detail::run_calibration(cfg, *model);
      break;
    case Experiment::localization:
      out = detail::run_localization(cfg, *model);
      break;
    case Experiment::confusion:
      out = detail::run_confusion(cfg, *model);
      break;
    case Experiment::matching:
      out = detail::run_matching(cfg);
      break;
    case Experiment::drive:
      out = detail::run_drive(cfg, *model);
      break;
  }

  std::vector<std::pair<std::string, std::string>> files;
  files.emplace_back("config.json", serialize_config(cfg));
  files.emplace_back("metrics.json", out.metrics.dump(2) + "\n");
  for (auto& [name, csv] : out.csvs) files.emplace_back(name, std::move(csv));
  if (checkpoint_text)
    files.emplace_back("checkpoint.json", std::move(*checkpoint_text));
  for (const auto& [stem, chart] : out.report.line_charts)
    files.emplace_back(stem + ".svg", svg_line_chart(chart));
  for (const auto& [stem, chart] : out.report.bar_charts)
    files.emplace_back(stem + ".svg", svg_bar_chart(chart));
  for (const auto& [stem, hm] : out.report.heatmaps)
    files.emplace_back(stem + ".svg", svg_heatmap(hm));

  const nlohmann::json manifest = {
      {"config_hash", hex64(config_hash(cfg))},
      {"seed", cfg.seed},
      {"experiment", experiment_name(cfg.experiment)},
      {"versions",
       {{"toponav", kToponavVersion},
        {"config_format", 1},
        {"checkpoint_format", 1}}},
      {"timestamp", detail::iso8601_utc_now()}};
  files.emplace_back("manifest.json", manifest.dump(2) + "\n");

  RunResult res;
  res.out_dir = cfg.output_dir;
  res.metrics = out.metrics;
  for (const auto& [name, content] : files) {
    const std::filesystem::path p = res.out_dir / name;
    atomic_write_file(p, content);
    res.files.push_back(p);
  }
  return res;
}

}  // namespace toponav
