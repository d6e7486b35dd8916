#pragma once

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <ranges>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gbc_chroma/error.hpp"
#include "gbc_chroma/geometry.hpp"

namespace gbc_chroma {

inline constexpr double kDefaultEllipseScale = 2.0;

// PCA ellipse of a point cloud. axis1 is the major direction; a1 >= a2 > 0.
struct EllipseModel {
  Vec2 center;
  Vec2 axis1{1.0, 0.0};
  Vec2 axis2{0.0, 1.0};
  double a1 = 1.0;
  double a2 = 1.0;
};

struct Covariance2 {
  double xx = 0.0;
  double xy = 0.0;
  double yy = 0.0;
};

// Population covariance (divides by m).
inline Covariance2 covariance(std::span<const Vec2> points, Vec2 mean) {
  Covariance2 c;
  for (const Vec2& p : points) {
    const Vec2 d = p - mean;
    c.xx += d.x * d.x;
    c.xy += d.x * d.y;
    c.yy += d.y * d.y;
  }
  const double inv = 1.0 / static_cast<double>(points.size());
  c.xx *= inv;
  c.xy *= inv;
  c.yy *= inv;
  return c;
}

// Closed-form symmetric 2x2 eigensystem. The major axis angle is taken in
// (-pi/2, pi/2], which fixes the eigenvector signs.
struct Eigen2 {
  double lambda1 = 0.0;  // larger
  double lambda2 = 0.0;
  Vec2 v1{1.0, 0.0};
  Vec2 v2{0.0, 1.0};
};

inline Eigen2 eigen_symmetric(const Covariance2& c) {
  const double mean = 0.5 * (c.xx + c.yy);
  const double half_diff = 0.5 * (c.xx - c.yy);
  const double radius = std::hypot(half_diff, c.xy);
  Eigen2 e;
  e.lambda1 = mean + radius;
  e.lambda2 = std::max(0.0, mean - radius);
  const double theta = 0.5 * std::atan2(2.0 * c.xy, c.xx - c.yy);
  e.v1 = {std::cos(theta), std::sin(theta)};
  e.v2 = {-e.v1.y, e.v1.x};
  return e;
}

// Semi-axes are scale_k standard deviations along each principal direction;
// a2 is floored at max(1e-3, 0.01 * a1) so degenerate clouds still give a
// usable ellipse.
inline EllipseModel fit_ellipse(std::span<const Vec2> points, double scale_k = kDefaultEllipseScale) {
  if (points.size() < 2) throw Error(ErrorCode::TooFewPoints, "ellipse fit needs at least 2 points");
  if (!(scale_k > 0.0)) throw Error(ErrorCode::InvalidArgument, "ellipse scale must be positive");
  Vec2 mean{};
  for (const Vec2& p : points) mean += p;
  mean *= 1.0 / static_cast<double>(points.size());

  const Eigen2 eig = eigen_symmetric(covariance(points, mean));
  EllipseModel e;
  e.center = mean;
  e.axis1 = eig.v1;
  e.axis2 = eig.v2;
  e.a1 = scale_k * std::sqrt(eig.lambda1);
  e.a2 = std::max(scale_k * std::sqrt(eig.lambda2), std::max(1e-3, 0.01 * e.a1));
  e.a1 = std::max(e.a1, e.a2);
  return e;
}

// Coordinates in the ellipse frame, scaled so the boundary is the unit circle.
inline Vec2 ellipse_coord(Vec2 p, const EllipseModel& e) {
  const Vec2 d = p - e.center;
  return {dot(d, e.axis1) / e.a1, dot(d, e.axis2) / e.a2};
}

inline Vec2 ellipse_point(Vec2 coord, const EllipseModel& e) {
  return e.center + (coord.x * e.a1) * e.axis1 + (coord.y * e.a2) * e.axis2;
}

inline double ellipse_radius(Vec2 p, const EllipseModel& e) { return norm(ellipse_coord(p, e)); }

// Closed polyline of `segments` pieces; the last point repeats the first.
inline std::vector<Vec2> ellipse_outline(const EllipseModel& e, std::size_t segments = 64) {
  std::vector<Vec2> out;
  out.reserve(segments + 1);
  for (std::size_t k = 0; k < segments; ++k)
    out.push_back(ellipse_point(unit_at(kTwoPi * static_cast<double>(k) / static_cast<double>(segments)), e));
  out.push_back(out.front());
  return out;
}

// Whitening: sends the ellipse to the unit circle centered at the origin,
// keeping the principal directions.
inline Vec2 whiten(Vec2 p, const EllipseModel& e) {
  const Vec2 c = ellipse_coord(p, e);
  return c.x * e.axis1 + c.y * e.axis2;
}

enum class WarpKind { none, color_preserving, contrast_enhancement, comparison_compression };

struct WarpMode {
  WarpKind kind = WarpKind::none;
  double shrink = 0.35;      // comparison_compression
  double percentile = 0.95;  // color_preserving

  friend bool operator==(const WarpMode&, const WarpMode&) = default;
};

inline void validate(const WarpMode& w) {
  if (!(w.shrink > 0.0 && w.shrink <= 1.0)) throw Error(ErrorCode::InvalidArgument, "shrink must lie in (0, 1]");
  if (!(w.percentile > 0.0 && w.percentile < 1.0))
    throw Error(ErrorCode::InvalidArgument, "percentile must lie in (0, 1)");
}

inline std::string_view to_string(WarpKind k) {
  switch (k) {
    case WarpKind::none: return "none";
    case WarpKind::color_preserving: return "color_preserving";
    case WarpKind::contrast_enhancement: return "contrast_enhancement";
    case WarpKind::comparison_compression: return "comparison_compression";
  }
  return "none";
}

// Accepts the long names and the CLI short forms.
inline WarpKind parse_warp_kind(std::string_view s) {
  if (s == "none") return WarpKind::none;
  if (s == "color_preserving" || s == "preserve") return WarpKind::color_preserving;
  if (s == "contrast_enhancement" || s == "contrast") return WarpKind::contrast_enhancement;
  if (s == "comparison_compression" || s == "compress") return WarpKind::comparison_compression;
  throw Error(ErrorCode::InvalidArgument, "unknown warp mode '" + std::string(s) + "'");
}

inline std::vector<Vec2> warp_contrast(std::span<const Vec2> points, const EllipseModel& e) {
  std::vector<Vec2> out(points.size());
  for (std::size_t j = 0; j < points.size(); ++j) out[j] = clamp_to_disc(whiten(points[j], e));
  return out;
}

// Linear-interpolated quantile of the point radii.
inline double radius_quantile(std::span<const Vec2> points, double q) {
  std::vector<double> r(points.size());
  std::transform(points.begin(), points.end(), r.begin(), [](Vec2 p) { return norm(p); });
  std::sort(r.begin(), r.end());
  const double pos = q * static_cast<double>(r.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, r.size() - 1);
  return r[lo] + (pos - static_cast<double>(lo)) * (r[hi] - r[lo]);
}

// Global radial gain that moves the `percentile` radius quantile to radius
// `percentile`. Points only slide along their own ray, so hue is untouched
// and nothing crosses the white point.
inline std::vector<Vec2> warp_color_preserving(std::span<const Vec2> points, const EllipseModel&,
                                               double percentile = 0.95) {
  if (!(percentile > 0.0 && percentile < 1.0))
    throw Error(ErrorCode::InvalidArgument, "percentile must lie in (0, 1)");
  if (points.empty() || std::all_of(points.begin(), points.end(), [](Vec2 p) { return norm(p) == 0.0; }))
    throw Error(ErrorCode::DegenerateCloud, "all points sit at the white point");
  const double rq = radius_quantile(points, percentile);
  const double gain = rq > 0.0 ? percentile / rq : std::numeric_limits<double>::infinity();
  std::vector<Vec2> out(points.size());
  for (std::size_t j = 0; j < points.size(); ++j) {
    const double r = norm(points[j]);
    out[j] = r > 0.0 ? std::min(gain, 1.0 / r) * points[j] : Vec2{};
  }
  return out;
}

inline constexpr double kCompressionBlendOuter = 1.5;

// Ellipse interior goes to a disc of radius `shrink` around the white point;
// points beyond ellipse radius 1.5 stay put; the band in between blends the
// two maps linearly in ellipse radius.
inline std::vector<Vec2> warp_compression(std::span<const Vec2> points, const EllipseModel& e, double shrink = 0.35) {
  if (!(shrink > 0.0 && shrink <= 1.0)) throw Error(ErrorCode::InvalidArgument, "shrink must lie in (0, 1]");
  std::vector<Vec2> out(points.size());
  for (std::size_t j = 0; j < points.size(); ++j) {
    const Vec2 p = points[j];
    const double rho = ellipse_radius(p, e);
    const Vec2 inner = shrink * whiten(p, e);
    const Vec2 outer = clamp_to_disc(p);
    Vec2 q;
    if (rho <= 1.0) q = inner;
    else if (rho >= kCompressionBlendOuter) q = outer;
    else {
      const double t = (rho - 1.0) / (kCompressionBlendOuter - 1.0);
      q = (1.0 - t) * inner + t * outer;
    }
    out[j] = clamp_to_disc(q);
  }
  return out;
}

inline std::vector<Vec2> apply_warp(std::span<const Vec2> points, const EllipseModel& e, const WarpMode& mode) {
  validate(mode);
  switch (mode.kind) {
    case WarpKind::none: return {points.begin(), points.end()};
    case WarpKind::color_preserving: return warp_color_preserving(points, e, mode.percentile);
    case WarpKind::contrast_enhancement: return warp_contrast(points, e);
    case WarpKind::comparison_compression: return warp_compression(points, e, mode.shrink);
  }
  return {points.begin(), points.end()};
}

// Convex hull (Andrew's monotone chain), counterclockwise, no repeated
// endpoint. Collinear points are dropped.
template <std::ranges::input_range R>
  requires std::convertible_to<std::ranges::range_value_t<R>, Vec2>
std::vector<Vec2> convex_hull(const R& range) {
  std::vector<Vec2> pts(std::ranges::begin(range), std::ranges::end(range));
  std::sort(pts.begin(), pts.end(), [](Vec2 a, Vec2 b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Vec2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const Vec2& p : pts) {
    while (k >= 2 && cross(hull[k - 1] - hull[k - 2], p - hull[k - 2]) <= 0.0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

// Convex-hull area of the points in disc units (the full disc is pi).
template <std::ranges::input_range R>
  requires std::convertible_to<std::ranges::range_value_t<R>, Vec2>
double gamut_area(const R& range) {
  if (std::ranges::distance(range) < 3) throw Error(ErrorCode::TooFewPoints, "gamut area needs at least 3 points");
  const auto hull = convex_hull(range);
  if (hull.size() < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < hull.size(); ++i) twice += cross(hull[i], hull[(i + 1) % hull.size()]);
  return 0.5 * std::abs(twice);
}

}  // namespace gbc_chroma
