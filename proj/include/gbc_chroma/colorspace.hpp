#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <string>

#include "gbc_chroma/error.hpp"
#include "gbc_chroma/geometry.hpp"

namespace gbc_chroma {

// Lightness of the plain (non-intensity) HS disc slice.
inline constexpr double kDefaultLightness = 0.65;

struct HslColor {
  double h = 0.0;  // degrees, [0, 360)
  double s = 0.0;  // [0, 1]
  double l = 0.0;  // [0, 1]

  friend bool operator==(const HslColor&, const HslColor&) = default;
};

struct RgbColor {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const RgbColor&, const RgbColor&) = default;
};

inline double canonical_hue(double degrees) {
  double h = std::fmod(degrees, 360.0);
  if (h < 0.0) h += 360.0;
  if (h >= 360.0) h -= 360.0;
  return h;
}

// Hue 0 lies on the +x axis and grows counterclockwise; saturation is the
// distance from the achromatic center. The legend and renderer both use
// this one convention.
inline HslColor disc_to_hsl(Vec2 p, double lightness = kDefaultLightness) {
  const double r = norm(p);
  HslColor c;
  c.s = std::min(r, 1.0);
  c.h = r > 0.0 ? canonical_hue(std::atan2(p.y, p.x) * 180.0 / std::numbers::pi) : 0.0;
  c.l = std::clamp(lightness, 0.0, 1.0);
  return c;
}

// Inverse of disc_to_hsl on the (h, s) part.
inline Vec2 hsl_to_disc(const HslColor& c) {
  return c.s * unit_at(c.h * std::numbers::pi / 180.0);
}

namespace detail {

inline std::uint8_t to_channel(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::floor(v * 255.0 + 0.5), 0.0, 255.0));
}

}  // namespace detail

// Hexcone conversion with half-up rounding.
inline RgbColor hsl_to_rgb(const HslColor& c) {
  const double s = std::clamp(c.s, 0.0, 1.0);
  const double l = std::clamp(c.l, 0.0, 1.0);
  const double chroma = (1.0 - std::abs(2.0 * l - 1.0)) * s;
  const double hp = canonical_hue(c.h) / 60.0;
  const double x = chroma * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0.0, g = 0.0, b = 0.0;
  switch (static_cast<int>(hp)) {
    case 0: r = chroma; g = x; break;
    case 1: r = x; g = chroma; break;
    case 2: g = chroma; b = x; break;
    case 3: g = x; b = chroma; break;
    case 4: r = x; b = chroma; break;
    default: r = chroma; b = x; break;
  }
  const double m = l - chroma / 2.0;
  return {detail::to_channel(r + m), detail::to_channel(g + m), detail::to_channel(b + m)};
}

inline HslColor rgb_to_hsl(const RgbColor& c) {
  const double r = c.r / 255.0, g = c.g / 255.0, b = c.b / 255.0;
  const double hi = std::max({r, g, b});
  const double lo = std::min({r, g, b});
  const double chroma = hi - lo;
  HslColor out;
  out.l = (hi + lo) / 2.0;
  if (chroma <= 0.0) return out;
  out.s = chroma / (1.0 - std::abs(2.0 * out.l - 1.0));
  double h = 0.0;
  if (hi == r) h = std::fmod((g - b) / chroma, 6.0);
  else if (hi == g) h = (b - r) / chroma + 2.0;
  else h = (r - g) / chroma + 4.0;
  out.h = canonical_hue(60.0 * h);
  out.s = std::min(out.s, 1.0);
  return out;
}

inline std::string to_hex(const RgbColor& c) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02X%02X%02X", c.r, c.g, c.b);
  return buf;
}

struct LightnessRange {
  double lo = 0.25;
  double hi = 0.85;

  friend bool operator==(const LightnessRange&, const LightnessRange&) = default;
};

// Heavier samples get darker: weight w_lo maps to range.hi, w_hi to range.lo.
inline HslColor apply_intensity(HslColor c, double weight, double w_lo, double w_hi,
                                LightnessRange range = {}) {
  if (!(w_lo < w_hi)) throw Error(ErrorCode::DegenerateRange, "intensity weight range must satisfy w_lo < w_hi");
  if (!(0.0 <= range.lo && range.lo < range.hi && range.hi <= 1.0))
    throw Error(ErrorCode::DegenerateRange, "lightness range must satisfy 0 <= lo < hi <= 1");
  const double t = std::clamp((weight - w_lo) / (w_hi - w_lo), 0.0, 1.0);
  c.l = range.hi - (range.hi - range.lo) * t;
  return c;
}

}  // namespace gbc_chroma
