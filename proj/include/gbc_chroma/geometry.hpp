#pragma once

#include <cmath>
#include <numbers>

namespace gbc_chroma {

// A point or direction in the plane. Disc positions, sensor locations and
// PCA axes all use it.
struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
  constexpr Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
  constexpr Vec2& operator*=(double s) { x *= s; y *= s; return *this; }

  friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend constexpr Vec2 operator*(Vec2 a, double s) { return {s * a.x, s * a.y}; }
  friend constexpr bool operator==(Vec2, Vec2) = default;
};

constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }

inline Vec2 unit_at(double radians) { return {std::cos(radians), std::sin(radians)}; }

inline Vec2 rotate(Vec2 p, double radians) {
  const double c = std::cos(radians);
  const double s = std::sin(radians);
  return {c * p.x - s * p.y, s * p.x + c * p.y};
}

// Pulls points outside the closed unit disc back onto the circle.
inline Vec2 clamp_to_disc(Vec2 p) {
  const double r = norm(p);
  return r > 1.0 ? (1.0 / r) * p : p;
}

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

}  // namespace gbc_chroma
