#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include "toponav/errors.hpp"

namespace toponav {

inline constexpr double kEarthRadius = 6'371'000.0;  // meters, spherical model

struct GeoPoint {
  double lat = 0.0;  // degrees, [-90, 90]
  double lon = 0.0;  // degrees, [-180, 180)
  bool operator==(const GeoPoint&) const = default;
};

inline bool geo_valid(const GeoPoint& p) {
  return std::isfinite(p.lat) && std::isfinite(p.lon) && p.lat >= -90.0 &&
         p.lat <= 90.0 && p.lon >= -180.0 && p.lon < 180.0;
}

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

// Haversine great-circle distance in meters.
inline double great_circle_distance(const GeoPoint& a, const GeoPoint& b) {
  double phi1 = deg2rad(a.lat);
  double phi2 = deg2rad(b.lat);
  double dphi = deg2rad(b.lat - a.lat);
  double dlam = deg2rad(b.lon - a.lon);
  double s1 = std::sin(dphi / 2.0);
  double s2 = std::sin(dlam / 2.0);
  double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  return 2.0 * kEarthRadius * std::asin(std::sqrt(std::min(1.0, h)));
}

// Planar coordinates in meters, east = +x, north = +y.
struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Vec2&) const = default;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }

// Local equirectangular projection about `origin`. Exact inverse of
// geo_unproject, so geo -> plane -> geo is lossless up to rounding.
inline Vec2 geo_project(const GeoPoint& p, const GeoPoint& origin) {
  double x = kEarthRadius * deg2rad(p.lon - origin.lon) *
             std::cos(deg2rad(origin.lat));
  double y = kEarthRadius * deg2rad(p.lat - origin.lat);
  return {x, y};
}

inline GeoPoint geo_unproject(const Vec2& v, const GeoPoint& origin) {
  double lat = origin.lat + rad2deg(v.y / kEarthRadius);
  double lon = origin.lon +
               rad2deg(v.x / (kEarthRadius * std::cos(deg2rad(origin.lat))));
  return {lat, lon};
}

// Distance from point p to segment [a, b].
inline double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  Vec2 ab = b - a;
  double len2 = dot(ab, ab);
  if (len2 == 0.0) return norm(p - a);
  double t = dot(p - a, ab) / len2;
  t = std::clamp(t, 0.0, 1.0);
  return norm(p - (a + t * ab));
}

// As above, also reporting the clamped parameter t along [a, b].
inline double point_segment_distance(Vec2 p, Vec2 a, Vec2 b, double* t_out) {
  Vec2 ab = b - a;
  double len2 = dot(ab, ab);
  double t = len2 == 0.0 ? 0.0 : std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
  *t_out = t;
  return norm(p - (a + t * ab));
}

}  // namespace toponav
