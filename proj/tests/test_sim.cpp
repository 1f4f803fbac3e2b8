#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "toponav/rng.hpp"
#include "toponav/sim.hpp"
#include "toponav/worldgen.hpp"

using namespace toponav;

namespace {

RoadGraph straight_road(double length) {
  GeoPoint origin{40.0, -74.0};
  std::map<std::int64_t, Vec2> nodes{{1, {0.0, 0.0}}, {2, {0.0, length}}};
  std::vector<Vec2> poly{nodes.at(1), nodes.at(2)};
  double w = polyline_length(poly, origin);
  std::vector<RoadEdge> edges{{1, 2, w, poly}, {2, 1, w, reversed(poly)}};
  return finalize_graph(origin, nodes, edges);
}

// Circle of the given radius as four quarter-arc edges, CCW from east.
RoadGraph circle_road(double radius, int pts_per_quarter = 24) {
  GeoPoint origin{40.0, -74.0};
  std::map<std::int64_t, Vec2> nodes;
  auto on_circle = [&](double ang) -> Vec2 {
    return {radius * std::cos(ang), radius * std::sin(ang)};
  };
  for (int q = 0; q < 4; ++q)
    nodes[q + 1] = on_circle(q * std::numbers::pi / 2.0);
  std::vector<RoadEdge> edges;
  for (int q = 0; q < 4; ++q) {
    std::vector<Vec2> poly;
    for (int i = 0; i <= pts_per_quarter; ++i) {
      double ang = (q + static_cast<double>(i) / pts_per_quarter) *
                   std::numbers::pi / 2.0;
      poly.push_back(on_circle(ang));
    }
    poly.front() = nodes.at(q + 1);
    poly.back() = nodes.at((q + 1) % 4 + 1);
    edges.push_back(
        {q + 1, (q + 1) % 4 + 1, polyline_length(poly, origin), poly});
  }
  return finalize_graph(origin, nodes, edges);
}

}  // namespace

TEST_CASE("pursuit curvature worked examples") {
  // Target 90 degrees left of the nose at lookahead 10: kappa =
  // 2 sin(pi/2) / 10 = 0.2, a counterclockwise (positive) turn. The same
  // geometry on the right is the mirror image. Both clamp to the bound.
  REQUIRE(pursuit_curvature({0.0, 0.0, 0.0}, {-10.0, 0.0}, 10.0, 0.5) ==
          Catch::Approx(0.2));
  REQUIRE(pursuit_curvature({0.0, 0.0, 0.0}, {10.0, 0.0}, 10.0, 0.5) ==
          Catch::Approx(-0.2));
  REQUIRE(pursuit_curvature({0.0, 0.0, 0.0}, {-10.0, 0.0}, 10.0, 0.15) ==
          Catch::Approx(0.15));
  // Dead ahead: zero curvature.
  REQUIRE(pursuit_curvature({0.0, 0.0, 0.0}, {0.0, 25.0}, 10.0) ==
          Catch::Approx(0.0).margin(1e-15));
  // Directly left at 45 degrees.
  double k = pursuit_curvature({0.0, 0.0, 0.0}, {-5.0, 5.0}, 10.0, 0.5);
  REQUIRE(k == Catch::Approx(2.0 * std::sin(std::numbers::pi / 4.0) / 10.0));
  // Rotation invariance: same geometry under a heading change.
  double base = pursuit_curvature({0.0, 0.0, 0.0}, {3.0, 9.0}, 10.0);
  double a = 1.234;
  Vec2 fwd = heading_vec(a);
  Vec2 right{std::cos(a), std::sin(a)};
  Vec2 rotated = 3.0 * right + 9.0 * fwd;
  REQUIRE(pursuit_curvature({0.0, 0.0, a}, rotated, 10.0) ==
          Catch::Approx(base));
}

TEST_CASE("step_dynamics straight and curved") {
  Pose p{0.0, 0.0, 0.0};
  Pose q = step_dynamics(p, 0.0, 5.0, 0.1);
  REQUIRE(q.x == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(q.y == Catch::Approx(0.5));
  REQUIRE(q.alpha == Catch::Approx(0.0).margin(1e-12));

  // gamma = 0.1 rad/s at v = 5 means theta_s = 0.02; one step turns by
  // gamma * dt.
  q = step_dynamics(p, 0.02, 5.0, 0.1);
  REQUIRE(q.alpha == Catch::Approx(0.1 * 0.1));

  // Midpoint integration of a constant-curvature arc closes a circle to
  // within 0.1 m after exactly one full period (whole steps plus the
  // fractional remainder).
  double theta_s = 0.05;  // radius 20
  double v = 5.0, dt = 0.1;
  double period = 2.0 * std::numbers::pi / (theta_s * v);
  int steps = static_cast<int>(period / dt);
  double rem = period - steps * dt;
  Pose cur{0.0, 0.0, 0.0};
  for (int i = 0; i < steps; ++i) cur = step_dynamics(cur, theta_s, v, dt);
  cur = step_dynamics(cur, theta_s, v, rem);
  REQUIRE(std::hypot(cur.x, cur.y) < 0.1);

  // Heading always comes back wrapped.
  Pose w = step_dynamics({0.0, 0.0, 3.0}, 0.2, 5.0, 1.0);
  REQUIRE((w.alpha >= -std::numbers::pi && w.alpha < std::numbers::pi));
  REQUIRE_THROWS_AS(step_dynamics(p, 0.0, 0.0, 0.1), std::invalid_argument);
  REQUIRE_THROWS_AS(step_dynamics(p, 0.0, 5.0, 0.0), std::invalid_argument);
}

TEST_CASE("route path projection and lookup") {
  RoadGraph g = straight_road(100.0);
  RoutePath path(g, {0});
  REQUIRE(path.length() == Catch::Approx(100.0).margin(1e-6));
  auto [arc, dist] = path.project({3.0, 40.0}, 0.0, path.length());
  REQUIRE(arc == Catch::Approx(40.0).margin(1e-9));
  REQUIRE(dist == Catch::Approx(3.0).margin(1e-9));
  Vec2 p = path.point_at(25.0);
  REQUIRE(p.x == Catch::Approx(0.0).margin(1e-9));
  REQUIRE(p.y == Catch::Approx(25.0).margin(1e-6));
  REQUIRE(path.edge_at(10.0) == 0);
  REQUIRE(path.initial_heading() == Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("oracle steering is zero on a straight and signed on turns") {
  RoadGraph g = straight_road(100.0);
  REQUIRE(oracle_steering(g, {0}, {0.0, 10.0, 0.0}) ==
          Catch::Approx(0.0).margin(1e-9));
  // Pose displaced right of the path (+x): steering turns counterclockwise
  // (positive) back toward it, and mirrored on the other side.
  REQUIRE(oracle_steering(g, {0}, {2.0, 10.0, 0.0}) > 0.0);
  REQUIRE(oracle_steering(g, {0}, {-2.0, 10.0, 0.0}) < 0.0);
  // Clamped to the curvature bound.
  REQUIRE(std::abs(oracle_steering(g, {0}, {0.0, 10.0, 2.5})) <=
          kKappaMax + 1e-15);
  // Off the corridor: error.
  REQUIRE_THROWS_AS(oracle_steering(g, {0}, {30.0, 10.0, 0.0}),
                    OffRouteError);
}

TEST_CASE("closed loop on a circle settles at its curvature") {
  RoadGraph g = circle_road(20.0);
  SimConfig cfg;
  cfg.gps_sigma_xy = 0.0;
  cfg.gps_sigma_alpha = 0.0;
  Rng rng(3);
  Trace tr = simulate_route(g, {0, 1, 2, 3}, cfg, rng);
  REQUIRE(tr.samples.size() > 100);
  // Steady-state window: past the initial transient, before the lookahead
  // target pins to the route end.
  std::size_t lo = tr.samples.size() / 4;
  std::size_t hi = tr.samples.size() - 40;
  for (std::size_t i = lo; i < hi; ++i)
    REQUIRE(std::abs(std::abs(tr.samples[i].theta_s) - 1.0 / 20.0) < 0.01);
}

TEST_CASE("straight 100 m drive yields exactly 200 samples") {
  RoadGraph g = straight_road(100.0);
  SimConfig cfg;
  cfg.speed = 5.0;
  cfg.dt = 0.1;
  Rng rng(11);
  Trace tr = simulate_route(g, {0}, cfg, rng);
  REQUIRE(tr.samples.size() == 200);
  REQUIRE(tr.samples.front().t == Catch::Approx(0.0));
  REQUIRE(tr.samples.front().true_pose.y == Catch::Approx(0.0).margin(1e-9));
  REQUIRE(tr.samples.back().t == Catch::Approx(19.9));
  REQUIRE(tr.samples.back().true_pose.y == Catch::Approx(99.5).margin(1e-6));
  for (const TraceSample& s : tr.samples) {
    REQUIRE(std::abs(s.true_pose.x) < 1e-6);
    REQUIRE(std::abs(s.theta_s) < 1e-6);
    REQUIRE(s.v == Catch::Approx(5.0));
  }
}

TEST_CASE("trace invariant theta_s equals gamma over v") {
  WorldSpec spec;
  spec.kind = WorldKind::t_junction;
  RoadGraph g = build_world(spec);
  std::vector<int> route = shortest_route(g, 2, 4);
  SimConfig cfg;
  Rng rng(4);
  Trace tr = simulate_route(g, route, cfg, rng);
  bool saw_turn = false;
  for (const TraceSample& s : tr.samples) {
    REQUIRE(s.theta_s == Catch::Approx(s.gamma / s.v).margin(1e-12));
    if (std::abs(s.theta_s) > 0.01) saw_turn = true;
  }
  REQUIRE(saw_turn);
}

TEST_CASE("same seed reproduces the trace exactly") {
  WorldSpec spec;
  spec.kind = WorldKind::four_way;
  RoadGraph g = build_world(spec);
  std::vector<int> route = shortest_route(g, 2, 3);
  SimConfig cfg;
  Rng a(9), b(9), c(10);
  std::string ta = trace_to_csv(simulate_route(g, route, cfg, a));
  std::string tb = trace_to_csv(simulate_route(g, route, cfg, b));
  std::string tc = trace_to_csv(simulate_route(g, route, cfg, c));
  REQUIRE(ta == tb);
  REQUIRE(ta != tc);  // gps noise differs
}

TEST_CASE("simulation completes across worlds and seeds") {
  int completed = 0;
  for (WorldKind kind : {WorldKind::four_way, WorldKind::t_junction,
                         WorldKind::fork, WorldKind::grid}) {
    WorldSpec spec;
    spec.kind = kind;
    RoadGraph g = build_world(spec);
    std::vector<std::int64_t> ids;
    for (auto& [id, v] : g.nodes) ids.push_back(id);
    Rng pick(static_cast<std::uint64_t>(7 + static_cast<int>(kind)));
    for (int trial = 0; trial < 20; ++trial) {
      std::int64_t a = ids[static_cast<std::size_t>(
          pick.uniform_int(0, static_cast<int>(ids.size()) - 1))];
      std::int64_t b = ids[static_cast<std::size_t>(
          pick.uniform_int(0, static_cast<int>(ids.size()) - 1))];
      if (a == b) continue;
      std::vector<int> route = shortest_route(g, a, b);
      if (route.empty()) continue;
      SimConfig cfg;
      Rng rng(static_cast<std::uint64_t>(100 + trial));
      Trace tr = simulate_route(g, route, cfg, rng);
      ++completed;
      REQUIRE_FALSE(tr.samples.empty());
      RoutePath path(g, route);
      // Covered at least 99% of the route length.
      REQUIRE(tr.arcs.back() >= 0.99 * path.length() - 1.0);
    }
  }
  REQUIRE(completed >= 50);
}

TEST_CASE("gps corruption matches its configured noise") {
  Pose pose{3.0, -8.0, 0.4};
  double sigma_pos = 2.0, sigma_head = 0.8;
  double sum_pos = 0.0;
  double sum_sin = 0.0, sum_cos = 0.0;
  int n = 10000;
  Rng rng(77);
  for (int i = 0; i < n; ++i) {
    Pose noisy = corrupt_gps(pose, sigma_pos, sigma_head, rng);
    double dx = noisy.x - pose.x, dy = noisy.y - pose.y;
    sum_pos += dx * dx + dy * dy;
    double dh = wrap_angle(noisy.alpha - pose.alpha);
    sum_sin += std::sin(dh);
    sum_cos += std::cos(dh);
  }
  // Per-axis empirical std against sigma_xy.
  REQUIRE(std::sqrt(sum_pos / (2.0 * n)) ==
          Catch::Approx(sigma_pos).margin(0.05));
  // Circular std: sqrt(-2 ln R) for resultant length R.
  double r = std::hypot(sum_sin / n, sum_cos / n);
  REQUIRE(std::sqrt(-2.0 * std::log(r)) ==
          Catch::Approx(sigma_head).margin(0.03));
  // Zero sigma is the identity.
  Pose same = corrupt_gps(pose, 0.0, 0.0, rng);
  REQUIRE(same.x == pose.x);
  REQUIRE(same.y == pose.y);
  REQUIRE(same.alpha == pose.alpha);
  REQUIRE_THROWS_AS(corrupt_gps(pose, -1.0, 0.0, rng), std::invalid_argument);
}

TEST_CASE("trace csv round-trips byte identically") {
  WorldSpec spec;
  spec.kind = WorldKind::four_way;
  RoadGraph g = build_world(spec);
  std::vector<int> route = shortest_route(g, 2, 3);
  SimConfig cfg;
  Rng rng(21);
  Trace tr = simulate_route(g, route, cfg, rng);
  std::string csv = trace_to_csv(tr);
  REQUIRE(csv.rfind("t,x,y,alpha,gx,gy,galpha,gamma,v,theta_s\n", 0) == 0);
  Trace back = trace_from_csv(csv);
  REQUIRE(trace_to_csv(back) == csv);
  REQUIRE(back.samples.size() == tr.samples.size());
  for (std::size_t i = 0; i < tr.samples.size(); ++i) {
    REQUIRE(back.samples[i].true_pose.x == tr.samples[i].true_pose.x);
    REQUIRE(back.samples[i].gps_pose.alpha == tr.samples[i].gps_pose.alpha);
    REQUIRE(back.samples[i].theta_s == tr.samples[i].theta_s);
  }
}

TEST_CASE("trace csv rejects malformed input") {
  REQUIRE_THROWS_AS(trace_from_csv("bogus\n"), ParseError);
  REQUIRE_THROWS_AS(
      trace_from_csv("t,x,y,alpha,gx,gy,galpha,gamma,v,theta_s\n1,2,3\n"),
      ParseError);
}

TEST_CASE("synthesize_observation shows the road ahead") {
  RoadGraph g = straight_road(200.0);
  ObsConfig cfg;
  cfg.noise = ObsNoise{0.0, 0.0, 0.0};
  Rng rng(5);
  Observation obs = synthesize_observation(g, {0.0, 50.0, 0.0}, cfg, rng);
  REQUIRE(obs.values.size() == static_cast<std::size_t>(cfg.size) *
                                   static_cast<std::size_t>(cfg.size));
  // Center column is road; with noise off it matches render_patch exactly.
  MapPatch patch = render_patch(g, {0.0, 50.0, 0.0}, nullptr, cfg.size,
                                cfg.resolution, cfg.stroke);
  REQUIRE(obs.values == patch.drivable);
  REQUIRE(obs.values[static_cast<std::size_t>(cfg.size / 2) * cfg.size +
                     cfg.size / 2] == 1.0f);
  // Same seed twice: identical.
  ObsConfig noisy;  // default jitter + dropout
  Rng r1(99), r2(99);
  Observation o1 = synthesize_observation(g, {0.0, 50.0, 0.0}, noisy, r1);
  Observation o2 = synthesize_observation(g, {0.0, 50.0, 0.0}, noisy, r2);
  REQUIRE(o1.values == o2.values);
  // Dropout close to 1 blanks most pixels.
  ObsConfig sparse_cfg;
  sparse_cfg.noise = ObsNoise{0.0, 0.0, 0.99};
  Observation sparse =
      synthesize_observation(g, {0.0, 50.0, 0.0}, sparse_cfg, rng);
  int lit = 0, base = 0;
  for (float v : sparse.values) lit += (v > 0.0f) ? 1 : 0;
  for (float v : obs.values) base += (v > 0.0f) ? 1 : 0;
  REQUIRE(lit < base / 4);
  ObsConfig bad;
  bad.noise.dropout = 1.0;
  REQUIRE_THROWS_AS(synthesize_observation(g, {0.0, 50.0, 0.0}, bad, rng),
                    std::invalid_argument);
}
