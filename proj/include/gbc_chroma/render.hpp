#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "gbc_chroma/colorspace.hpp"
#include "gbc_chroma/data_model.hpp"
#include "gbc_chroma/error.hpp"
#include "gbc_chroma/geometry.hpp"

namespace gbc_chroma {

struct Extent {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 1.0;
  double y_max = 1.0;

  double width() const noexcept { return x_max - x_min; }
  double height() const noexcept { return y_max - y_min; }
  double diagonal() const { return std::hypot(width(), height()); }
  bool valid() const noexcept { return x_max > x_min && y_max > y_min; }

  friend bool operator==(const Extent&, const Extent&) = default;
};

// Bounding box of the locations padded by `margin` of its larger side. A
// degenerate box (one point, or all on a line) is widened to a square.
inline Extent extent_for(std::span<const Vec2> locations, double margin = 0.05) {
  if (locations.empty()) return {};
  Extent e{locations[0].x, locations[0].y, locations[0].x, locations[0].y};
  for (const Vec2& p : locations) {
    e.x_min = std::min(e.x_min, p.x);
    e.y_min = std::min(e.y_min, p.y);
    e.x_max = std::max(e.x_max, p.x);
    e.y_max = std::max(e.y_max, p.y);
  }
  double side = std::max(e.width(), e.height());
  if (side <= 0.0) side = 1.0;
  const double pad_x = margin * side + (e.width() <= 0.0 ? 0.5 * side : 0.0);
  const double pad_y = margin * side + (e.height() <= 0.0 ? 0.5 * side : 0.0);
  return {e.x_min - pad_x, e.y_min - pad_y, e.x_max + pad_x, e.y_max + pad_y};
}

struct GridSpec {
  std::size_t width = 512;
  std::size_t height = 512;
  Extent extent;

  // Pixel centers; row 0 is the top edge (y_max).
  Vec2 pixel_center(std::size_t col, std::size_t row) const {
    return {extent.x_min + (static_cast<double>(col) + 0.5) / static_cast<double>(width) * extent.width(),
            extent.y_max - (static_cast<double>(row) + 0.5) / static_cast<double>(height) * extent.height()};
  }
};

inline void validate(const GridSpec& g) {
  if (g.width < 1 || g.height < 1) throw Error(ErrorCode::InvalidArgument, "grid must be at least 1x1");
  if (!g.extent.valid()) throw Error(ErrorCode::InvalidArgument, "grid extent is degenerate");
}

struct RasterField {
  std::size_t width = 0;
  std::size_t height = 0;
  Extent extent;
  std::vector<RgbColor> pixels;  // row-major, row 0 on top

  RasterField() = default;
  RasterField(std::size_t w, std::size_t h, Extent e = {}, RgbColor fill = {})
      : width(w), height(h), extent(e), pixels(w * h, fill) {}

  RgbColor& at(std::size_t col, std::size_t row) { return pixels[row * width + col]; }
  const RgbColor& at(std::size_t col, std::size_t row) const { return pixels[row * width + col]; }
};

inline constexpr RgbColor kBackgroundGray{200, 200, 200};

enum class KernelKind { gaussian };

struct KernelConfig {
  std::size_t k_neighbors = 8;
  KernelKind kernel = KernelKind::gaussian;
  double bandwidth_scale = 1.0;

  friend bool operator==(const KernelConfig&, const KernelConfig&) = default;
};

inline void validate(const KernelConfig& cfg) {
  if (cfg.k_neighbors < 1) throw Error(ErrorCode::InvalidArgument, "k_neighbors must be >= 1");
  if (!(cfg.bandwidth_scale > 0.0) || !std::isfinite(cfg.bandwidth_scale))
    throw Error(ErrorCode::InvalidArgument, "bandwidth_scale must be positive");
}

// Per-sample bandwidth: bandwidth_scale times the distance to the k-th
// nearest other sample, floored at 1e-6 of the location bounding-box
// diagonal.
inline std::vector<double> adaptive_bandwidths(std::span<const Vec2> locations, const KernelConfig& cfg = {}) {
  validate(cfg);
  const std::size_t m = locations.size();
  if (m <= cfg.k_neighbors)
    throw Error(ErrorCode::TooFewSamples,
                "need more than k_neighbors=" + std::to_string(cfg.k_neighbors) + " samples, got " + std::to_string(m));
  const double diag = extent_for(locations, 0.0).diagonal();
  const double floor = 1e-6 * (diag > 0.0 ? diag : 1.0);

  std::vector<double> h(m);
  std::vector<double> dist(m - 1);
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t k = 0;
    for (std::size_t j = 0; j < m; ++j)
      if (j != i) dist[k++] = norm(locations[j] - locations[i]);
    std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(cfg.k_neighbors - 1), dist.end());
    h[i] = std::max(cfg.bandwidth_scale * dist[cfg.k_neighbors - 1], floor);
  }
  return h;
}

namespace detail {

// exp() of anything below this is exactly zero in double precision.
inline constexpr double kExpUnderflow = -746.0;

// Density-normalized 2D Gaussian up to the constant 1/(2*pi), which cancels
// in the regression ratio: h^-2 * exp(-|d|^2 / (2 h^2)).
inline double gaussian_weight(Vec2 x, Vec2 center, double inv_h2) {
  const double dx = x.x - center.x;
  const double dy = x.y - center.y;
  const double arg = -0.5 * (dx * dx + dy * dy) * inv_h2;
  return arg < kExpUnderflow ? 0.0 : inv_h2 * std::exp(arg);
}

inline constexpr double kMinDenominator = 1e-300;

// Runs fn(row) for every row, split into contiguous row blocks.
template <typename Fn>
void for_each_row(std::size_t rows, unsigned threads, Fn&& fn) {
  if (threads <= 1 || rows < 2) {
    for (std::size_t r = 0; r < rows; ++r) fn(r);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(threads, rows);
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = rows * w / workers;
    const std::size_t end = rows * (w + 1) / workers;
    pool.emplace_back([begin, end, &fn] {
      for (std::size_t r = begin; r < end; ++r) fn(r);
    });
  }
}

inline void check_lengths(std::size_t locations, std::size_t values, std::size_t bandwidths) {
  if (locations != values || locations != bandwidths)
    throw Error(ErrorCode::LengthMismatch, "locations, values and bandwidths must have the same length");
}

}  // namespace detail

struct RenderOptions {
  unsigned threads = 1;
};

// Normalized kernel weights of all samples at x; empty when every weight
// underflows.
inline std::vector<double> kernel_weights(Vec2 x, std::span<const Vec2> locations, std::span<const double> bandwidths) {
  detail::check_lengths(locations.size(), locations.size(), bandwidths.size());
  std::vector<double> w(locations.size());
  double total = 0.0;
  for (std::size_t i = 0; i < locations.size(); ++i) {
    w[i] = detail::gaussian_weight(x, locations[i], 1.0 / (bandwidths[i] * bandwidths[i]));
    total += w[i];
  }
  if (total < detail::kMinDenominator) return {};
  for (double& v : w) v /= total;
  return w;
}

// Color blending coordinates: the HS disc position plus lightness. Averaging
// here instead of in (h, s) avoids the 0/360 hue seam.
struct BlendCoord {
  double a = 0.0;
  double b = 0.0;
  double l = 0.0;
};

inline BlendCoord to_blend(const HslColor& c) {
  const Vec2 p = hsl_to_disc(c);
  return {p.x, p.y, c.l};
}

inline HslColor from_blend(const BlendCoord& c) { return disc_to_hsl({c.a, c.b}, c.l); }

// Nadaraya-Watson regression of sample colors onto the pixel grid in blend
// coordinates, with a per-sample Gaussian bandwidth. Pixels without numerical
// kernel support are empty. Each pixel sums samples in index order, so the
// output does not depend on the thread count.
inline std::vector<std::optional<BlendCoord>> akde_blend(std::span<const Vec2> locations,
                                                         std::span<const HslColor> colors,
                                                         std::span<const double> bandwidths, const GridSpec& grid,
                                                         const RenderOptions& opts = {}) {
  detail::check_lengths(locations.size(), colors.size(), bandwidths.size());
  validate(grid);
  const std::size_t m = locations.size();
  std::vector<BlendCoord> blend(m);
  std::vector<double> inv_h2(m);
  for (std::size_t i = 0; i < m; ++i) {
    blend[i] = to_blend(colors[i]);
    inv_h2[i] = 1.0 / (bandwidths[i] * bandwidths[i]);
  }
  std::vector<std::optional<BlendCoord>> out(grid.width * grid.height);
  detail::for_each_row(grid.height, opts.threads, [&](std::size_t row) {
    for (std::size_t col = 0; col < grid.width; ++col) {
      const Vec2 x = grid.pixel_center(col, row);
      double sw = 0.0, sa = 0.0, sb = 0.0, sl = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        const double w = detail::gaussian_weight(x, locations[i], inv_h2[i]);
        if (w == 0.0) continue;
        sw += w;
        sa += w * blend[i].a;
        sb += w * blend[i].b;
        sl += w * blend[i].l;
      }
      if (sw >= detail::kMinDenominator) out[row * grid.width + col] = BlendCoord{sa / sw, sb / sw, sl / sw};
    }
  });
  return out;
}

// Continuous pseudo-colored map; unsupported pixels get kBackgroundGray.
inline RasterField akde_render(std::span<const Vec2> locations, std::span<const HslColor> colors,
                               std::span<const double> bandwidths, const GridSpec& grid,
                               const RenderOptions& opts = {}) {
  const auto blend = akde_blend(locations, colors, bandwidths, grid, opts);
  RasterField field(grid.width, grid.height, grid.extent, kBackgroundGray);
  for (std::size_t p = 0; p < blend.size(); ++p)
    if (blend[p]) field.pixels[p] = hsl_to_rgb(from_blend(*blend[p]));
  return field;
}

// Scalar version of the same regression. Unsupported pixels are NaN.
inline std::vector<double> akde_scalar(std::span<const Vec2> locations, std::span<const double> values,
                                       std::span<const double> bandwidths, const GridSpec& grid,
                                       const RenderOptions& opts = {}) {
  detail::check_lengths(locations.size(), values.size(), bandwidths.size());
  validate(grid);
  const std::size_t m = locations.size();
  std::vector<double> inv_h2(m);
  for (std::size_t i = 0; i < m; ++i) inv_h2[i] = 1.0 / (bandwidths[i] * bandwidths[i]);
  std::vector<double> out(grid.width * grid.height, std::numeric_limits<double>::quiet_NaN());
  detail::for_each_row(grid.height, opts.threads, [&](std::size_t row) {
    for (std::size_t col = 0; col < grid.width; ++col) {
      const Vec2 x = grid.pixel_center(col, row);
      double sw = 0.0, sv = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        const double w = detail::gaussian_weight(x, locations[i], inv_h2[i]);
        sw += w;
        sv += w * values[i];
      }
      if (sw >= detail::kMinDenominator) out[row * grid.width + col] = sv / sw;
    }
  });
  return out;
}

// Lightness for a normalized attribute value: 0 is light (0.9), 1 is dark (0.3).
inline double heatmap_lightness(double value) { return 0.9 - 0.6 * value; }

// Single-attribute map tinted with `base` hue and saturation.
inline RasterField attribute_heatmap(const NormalizedTable& norm, std::size_t attr, const HslColor& base,
                                     const GridSpec& grid, const KernelConfig& cfg = {},
                                     const RenderOptions& opts = {}) {
  if (attr >= norm.attribute_count()) throw Error(ErrorCode::InvalidArgument, "attribute index out of range");
  const auto& locations = norm.source->locations;
  const std::vector<double> values = norm.norm_values.column(attr);
  const std::vector<double> h = adaptive_bandwidths(locations, cfg);
  const std::vector<double> v = akde_scalar(locations, values, h, grid, opts);
  RasterField field(grid.width, grid.height, grid.extent, kBackgroundGray);
  for (std::size_t p = 0; p < v.size(); ++p) {
    if (std::isnan(v[p])) continue;
    field.pixels[p] = hsl_to_rgb({base.h, base.s, heatmap_lightness(std::clamp(v[p], 0.0, 1.0))});
  }
  return field;
}

namespace detail {

struct PngWriteState {
  std::string* out;
};

inline void png_append(png_structp png, png_bytep data, png_size_t len) {
  auto* state = static_cast<PngWriteState*>(png_get_io_ptr(png));
  state->out->append(reinterpret_cast<const char*>(data), len);
}

inline void png_noop_flush(png_structp) {}

struct PngReadState {
  std::string_view bytes;
  std::size_t pos = 0;
};

inline void png_consume(png_structp png, png_bytep data, png_size_t len) {
  auto* state = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (state->pos + len > state->bytes.size()) png_error(png, "truncated PNG");
  std::memcpy(data, state->bytes.data() + state->pos, len);
  state->pos += len;
}

}  // namespace detail

// 8-bit RGB, non-interlaced, no ancillary chunks, so identical fields encode
// to identical bytes.
inline std::string encode_png(const RasterField& field) {
  if (field.width == 0 || field.height == 0 || field.pixels.size() != field.width * field.height)
    throw Error(ErrorCode::InvalidArgument, "raster field is empty or malformed");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error(ErrorCode::IoFailure, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  std::string out;
  detail::PngWriteState state{&out};
  std::vector<png_byte> row(field.width * 3);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::IoFailure, "PNG encoding failed");
  }
  png_set_write_fn(png, &state, detail::png_append, detail::png_noop_flush);
  png_set_IHDR(png, info, static_cast<png_uint_32>(field.width), static_cast<png_uint_32>(field.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t r = 0; r < field.height; ++r) {
    for (std::size_t c = 0; c < field.width; ++c) {
      const RgbColor px = field.at(c, r);
      row[3 * c] = px.r;
      row[3 * c + 1] = px.g;
      row[3 * c + 2] = px.b;
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

// Decodes any PNG libpng understands into 8-bit RGB. The extent is not stored
// in the file and comes back as the default unit square.
inline RasterField decode_png(std::string_view bytes) {
  if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) != 0)
    throw Error(ErrorCode::IoFailure, "not a PNG stream");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error(ErrorCode::IoFailure, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  detail::PngReadState state{bytes, 0};
  RasterField field;
  std::vector<png_byte> row;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::IoFailure, "PNG decoding failed");
  }
  png_set_read_fn(png, &state, detail::png_consume);
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_palette_to_rgb(png);
  png_set_gray_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);
  const std::size_t w = png_get_image_width(png, info);
  const std::size_t h = png_get_image_height(png, info);
  field = RasterField(w, h);
  row.resize(png_get_rowbytes(png, info));
  for (std::size_t r = 0; r < h; ++r) {
    png_read_row(png, row.data(), nullptr);
    for (std::size_t c = 0; c < w; ++c) field.at(c, r) = {row[3 * c], row[3 * c + 1], row[3 * c + 2]};
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return field;
}

inline void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw Error(ErrorCode::IoFailure, "write to '" + path + "' failed");
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void export_png(const RasterField& field, const std::string& path) { write_file(path, encode_png(field)); }

inline RasterField import_png(const std::string& path) { return decode_png(read_file(path)); }

}  // namespace gbc_chroma
