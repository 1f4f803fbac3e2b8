#include <catch2/catch_amalgamated.hpp>

#include "toponav/geo.hpp"
#include "toponav/rng.hpp"

using namespace toponav;

TEST_CASE("great-circle distance of identical points is zero") {
  GeoPoint p{37.5, -122.3};
  REQUIRE(great_circle_distance(p, p) == 0.0);
}

TEST_CASE("one degree of longitude at the equator") {
  // Independent value: R * pi / 180 with R = 6,371,000 m.
  double d = great_circle_distance({0.0, 0.0}, {0.0, 1.0});
  REQUIRE(std::abs(d - 111194.9266) < 0.1);
}

TEST_CASE("one degree of latitude anywhere") {
  double d = great_circle_distance({40.0, -74.0}, {41.0, -74.0});
  REQUIRE(std::abs(d - 111194.9266) < 0.1);
}

TEST_CASE("distance is symmetric") {
  Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    GeoPoint a{rng.uniform(-80.0, 80.0), rng.uniform(-179.0, 179.0)};
    GeoPoint b{rng.uniform(-80.0, 80.0), rng.uniform(-179.0, 179.0)};
    REQUIRE(great_circle_distance(a, b) == great_circle_distance(b, a));
    REQUIRE(great_circle_distance(a, b) >= 0.0);
  }
}

TEST_CASE("geo point validity bounds") {
  REQUIRE(geo_valid({0.0, 0.0}));
  REQUIRE(geo_valid({-90.0, -180.0}));
  REQUIRE(geo_valid({90.0, 179.999}));
  REQUIRE_FALSE(geo_valid({90.5, 0.0}));
  REQUIRE_FALSE(geo_valid({0.0, 180.0}));
  REQUIRE_FALSE(geo_valid({0.0, -181.0}));
}

TEST_CASE("projection round-trips within a centimeter-free tolerance") {
  GeoPoint origin{40.0, -74.0};
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    Vec2 p{rng.uniform(-25000.0, 25000.0), rng.uniform(-25000.0, 25000.0)};
    Vec2 q = geo_project(geo_unproject(p, origin), origin);
    REQUIRE(norm(q - p) < 1e-8);
  }
}

TEST_CASE("projection places the origin at zero") {
  GeoPoint origin{40.0, -74.0};
  Vec2 v = geo_project(origin, origin);
  REQUIRE(v.x == 0.0);
  REQUIRE(v.y == 0.0);
}

TEST_CASE("northward displacement maps to +y") {
  GeoPoint origin{40.0, -74.0};
  Vec2 v = geo_project({40.01, -74.0}, origin);
  REQUIRE(v.x == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(v.y > 1000.0);
}

TEST_CASE("point-segment distance") {
  REQUIRE(point_segment_distance({0.0, 1.0}, {-1.0, 0.0}, {1.0, 0.0}) == 1.0);
  REQUIRE(point_segment_distance({5.0, 0.0}, {-1.0, 0.0}, {1.0, 0.0}) == 4.0);
  // Degenerate segment behaves as a point.
  REQUIRE(point_segment_distance({3.0, 4.0}, {0.0, 0.0}, {0.0, 0.0}) == 5.0);
  double t = -1.0;
  point_segment_distance({0.5, 2.0}, {0.0, 0.0}, {1.0, 0.0}, &t);
  REQUIRE(t == 0.5);
}
