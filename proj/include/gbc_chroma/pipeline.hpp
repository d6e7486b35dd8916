#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>
#include <typeinfo>
#include <vector>

#include "json.hpp"

#include "gbc_chroma/colorspace.hpp"
#include "gbc_chroma/data_model.hpp"
#include "gbc_chroma/error.hpp"
#include "gbc_chroma/layout.hpp"
#include "gbc_chroma/render.hpp"
#include "gbc_chroma/warp.hpp"

namespace gbc_chroma {

using nlohmann::json;

// Every user-tunable knob of the pipeline.
struct SessionConfig {
  WarpMode warp;
  double ellipse_scale_k = kDefaultEllipseScale;
  double lightness = kDefaultLightness;
  bool intensity_on = false;
  LightnessRange l_range;
  KernelConfig kernel;
  std::size_t grid_width = 512;
  std::size_t grid_height = 512;
  WeightMode weight_mode = WeightMode::raw_sum;
  DistanceMetric metric = DistanceMetric::one_minus_abs_corr;

  friend bool operator==(const SessionConfig&, const SessionConfig&) = default;
};

inline constexpr std::size_t kMaxGridSide = 4096;

inline void validate(const SessionConfig& c) {
  validate(c.warp);
  validate(c.kernel);
  if (!(c.ellipse_scale_k > 0.0) || !std::isfinite(c.ellipse_scale_k))
    throw Error(ErrorCode::InvalidArgument, "ellipse_scale_k must be positive");
  if (!(c.lightness >= 0.0 && c.lightness <= 1.0)) throw Error(ErrorCode::InvalidArgument, "lightness must lie in [0, 1]");
  if (!(0.0 <= c.l_range.lo && c.l_range.lo < c.l_range.hi && c.l_range.hi <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "l_range must satisfy 0 <= lo < hi <= 1");
  if (c.grid_width < 1 || c.grid_height < 1 || c.grid_width > kMaxGridSide || c.grid_height > kMaxGridSide)
    throw Error(ErrorCode::InvalidArgument, "grid sides must lie in [1, 4096]");
}

inline std::string_view to_string(WeightMode m) { return m == WeightMode::raw_sum ? "raw_sum" : "normalized_sum"; }
inline std::string_view to_string(DistanceMetric m) {
  return m == DistanceMetric::one_minus_abs_corr ? "one_minus_abs_corr" : "column_euclidean";
}

inline json to_json(const SessionConfig& c) {
  return json{
      {"warp_mode", to_string(c.warp.kind)},
      {"shrink", c.warp.shrink},
      {"percentile", c.warp.percentile},
      {"ellipse_scale_k", c.ellipse_scale_k},
      {"lightness", c.lightness},
      {"intensity_on", c.intensity_on},
      {"l_range", {c.l_range.lo, c.l_range.hi}},
      {"kernel", {{"kernel", "gaussian"}, {"k_neighbors", c.kernel.k_neighbors}, {"bandwidth_scale", c.kernel.bandwidth_scale}}},
      {"grid", {{"width", c.grid_width}, {"height", c.grid_height}}},
      {"weight_mode", to_string(c.weight_mode)},
      {"metric", to_string(c.metric)},
  };
}

// Applies the keys present in `patch` on top of `c`. Unknown keys and wrongly
// typed values throw json exceptions; out-of-range values throw
// Error(InvalidArgument).
inline SessionConfig merge_config(SessionConfig c, const json& patch) {
  if (!patch.is_object()) throw json::type_error::create(302, "config patch must be a JSON object", &patch);
  for (const auto& [key, value] : patch.items()) {
    if (key == "warp_mode") c.warp.kind = parse_warp_kind(value.get<std::string>());
    else if (key == "shrink") c.warp.shrink = value.get<double>();
    else if (key == "percentile") c.warp.percentile = value.get<double>();
    else if (key == "ellipse_scale_k") c.ellipse_scale_k = value.get<double>();
    else if (key == "lightness") c.lightness = value.get<double>();
    else if (key == "intensity_on") c.intensity_on = value.get<bool>();
    else if (key == "l_range") {
      const auto pair = value.get<std::vector<double>>();
      if (pair.size() != 2) throw json::type_error::create(302, "l_range must have two entries", &value);
      c.l_range = {pair[0], pair[1]};
    } else if (key == "kernel") {
      if (!value.is_object()) throw json::type_error::create(302, "kernel must be an object", &value);
      for (const auto& [k, v] : value.items()) {
        if (k == "k_neighbors") {
          const auto n = v.get<long long>();
          if (n < 1) throw Error(ErrorCode::InvalidArgument, "k_neighbors must be >= 1");
          c.kernel.k_neighbors = static_cast<std::size_t>(n);
        } else if (k == "bandwidth_scale") c.kernel.bandwidth_scale = v.get<double>();
        else if (k == "kernel") {
          if (v.get<std::string>() != "gaussian") throw Error(ErrorCode::InvalidArgument, "only the gaussian kernel is supported");
        } else throw json::other_error::create(501, "unknown kernel key '" + k + "'", &value);
      }
    } else if (key == "grid") {
      long long w = 0, h = 0;
      if (value.is_array() && value.size() == 2) {
        w = value[0].get<long long>();
        h = value[1].get<long long>();
      } else if (value.is_object()) {
        w = value.value("width", static_cast<long long>(c.grid_width));
        h = value.value("height", static_cast<long long>(c.grid_height));
      } else throw json::type_error::create(302, "grid must be {width,height} or [w,h]", &value);
      if (w < 1 || h < 1) throw Error(ErrorCode::InvalidArgument, "grid sides must be >= 1");
      c.grid_width = static_cast<std::size_t>(w);
      c.grid_height = static_cast<std::size_t>(h);
    } else if (key == "weight_mode") {
      const auto s = value.get<std::string>();
      if (s == "raw_sum") c.weight_mode = WeightMode::raw_sum;
      else if (s == "normalized_sum") c.weight_mode = WeightMode::normalized_sum;
      else throw Error(ErrorCode::InvalidArgument, "unknown weight_mode '" + s + "'");
    } else if (key == "metric") {
      const auto s = value.get<std::string>();
      if (s == "one_minus_abs_corr") c.metric = DistanceMetric::one_minus_abs_corr;
      else if (s == "column_euclidean") c.metric = DistanceMetric::column_euclidean;
      else throw Error(ErrorCode::InvalidArgument, "unknown metric '" + s + "'");
    } else if (key == "version") {
      // Echoed back by clients; ignored.
    } else {
      throw json::other_error::create(501, "unknown config key '" + key + "'", &patch);
    }
  }
  validate(c);
  return c;
}

inline json to_json(Vec2 p) { return json{{"x", p.x}, {"y", p.y}}; }
inline json to_json(const HslColor& c) { return json{{"h", c.h}, {"s", c.s}, {"l", c.l}}; }

inline json to_json(const LayoutModel& layout, const std::vector<std::string>& names) {
  json points = json::array();
  for (Vec2 p : layout.points) points.push_back({p.x, p.y});
  return json{{"attributes", names}, {"order", layout.order}, {"vertex_angles", layout.vertex_angles}, {"points", points}};
}

// Embedded layout and the normalized table it was computed from.
struct LayoutStage {
  NormalizedTable norm;
  DistanceMatrix distances;
  LayoutModel layout;
};

struct WarpStage {
  EllipseModel ellipse;
  std::vector<Vec2> points;  // warped legend positions
};

struct ColorStage {
  std::vector<HslColor> colors;  // final per-sample colors, intensity applied
};

inline LayoutStage compute_layout(std::shared_ptr<const DataTable> table, const SessionConfig& cfg) {
  LayoutStage s;
  s.norm = normalize(std::move(table), cfg.weight_mode);
  if (s.norm.sample_count() < 2) {
    // Correlation is undefined for a single sample; fall back to index order.
    s.distances = DistanceMatrix(s.norm.attribute_count(), s.norm.attribute_count(), 0.0);
    std::vector<std::size_t> order(s.norm.attribute_count());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    s.layout = gbc_embed(s.norm, order);
    return s;
  }
  s.distances = attribute_distances(s.norm, cfg.metric);
  s.layout = gbc_embed(s.norm, order_attributes(s.distances));
  return s;
}

inline WarpStage compute_warp(const LayoutStage& layout, const SessionConfig& cfg) {
  WarpStage s;
  const auto& pts = layout.layout.points;
  if (pts.size() >= 2) {
    s.ellipse = fit_ellipse(pts, cfg.ellipse_scale_k);
  } else {
    s.ellipse.center = pts.front();
    s.ellipse.a1 = s.ellipse.a2 = 1e-3;
  }
  s.points = apply_warp(pts, s.ellipse, cfg.warp);
  return s;
}

inline ColorStage compute_colors(const LayoutStage& layout, const WarpStage& warp, const SessionConfig& cfg) {
  ColorStage s;
  s.colors.resize(warp.points.size());
  const auto& w = layout.norm.sample_weights;
  const auto [lo_it, hi_it] = std::minmax_element(w.begin(), w.end());
  // Intensity needs a nondegenerate weight range; equal weights keep the plain slice.
  const bool modulate = cfg.intensity_on && *lo_it < *hi_it;
  for (std::size_t j = 0; j < warp.points.size(); ++j) {
    HslColor c = disc_to_hsl(warp.points[j], cfg.lightness);
    if (modulate) c = apply_intensity(c, w[j], *lo_it, *hi_it, cfg.l_range);
    s.colors[j] = c;
  }
  return s;
}

// Color of an attribute's vertex at the session lightness. Legend vertices and
// single-attribute heat maps both read it from here.
inline HslColor vertex_color(const LayoutModel& layout, std::size_t attr, double lightness) {
  return disc_to_hsl(layout.vertex(attr), lightness);
}

// Small datasets cannot supply k neighbors; clamp k to m - 1.
inline KernelConfig effective_kernel(const KernelConfig& k, std::size_t m) {
  if (m < 2) throw Error(ErrorCode::TooFewSamples, "rendering needs at least 2 samples");
  KernelConfig out = k;
  out.k_neighbors = std::min(k.k_neighbors, m - 1);
  return out;
}

inline GridSpec map_grid(const DataTable& table, const SessionConfig& cfg) {
  return {cfg.grid_width, cfg.grid_height, extent_for(table.locations)};
}

inline constexpr std::size_t kLegendSize = 401;
inline constexpr double kLegendRadius = 190.0;

// Legend pixel (col, row) to disc coordinates; the middle pixel is the origin.
inline Vec2 legend_to_disc(double col, double row) {
  const double c = 0.5 * static_cast<double>(kLegendSize - 1);
  return {(col - c) / kLegendRadius, (c - row) / kLegendRadius};
}

inline Vec2 disc_to_legend(Vec2 p) {
  const double c = 0.5 * static_cast<double>(kLegendSize - 1);
  return {c + p.x * kLegendRadius, c - p.y * kLegendRadius};
}

namespace detail {

inline void plot(RasterField& f, long col, long row, RgbColor c) {
  if (col < 0 || row < 0 || col >= static_cast<long>(f.width) || row >= static_cast<long>(f.height)) return;
  f.at(static_cast<std::size_t>(col), static_cast<std::size_t>(row)) = c;
}

inline void draw_line(RasterField& f, Vec2 a, Vec2 b, RgbColor c) {
  const double len = std::max(std::abs(b.x - a.x), std::abs(b.y - a.y));
  const auto steps = static_cast<long>(std::ceil(len));
  for (long k = 0; k <= steps; ++k) {
    const double t = steps == 0 ? 0.0 : static_cast<double>(k) / static_cast<double>(steps);
    plot(f, std::lround(a.x + t * (b.x - a.x)), std::lround(a.y + t * (b.y - a.y)), c);
  }
}

inline void fill_disc(RasterField& f, Vec2 center, double radius, RgbColor c) {
  const long r = static_cast<long>(std::ceil(radius));
  const long cx = std::lround(center.x), cy = std::lround(center.y);
  for (long dy = -r; dy <= r; ++dy)
    for (long dx = -r; dx <= r; ++dx)
      if (static_cast<double>(dx * dx + dy * dy) <= radius * radius) plot(f, cx + dx, cy + dy, c);
}

}  // namespace detail

// The HS wheel at the session lightness with the fitted ellipse, the warped
// samples (single pixels in their own color) and the attribute vertices.
inline RasterField render_legend(const LayoutStage& layout, const WarpStage& warp, const ColorStage& colors,
                                 const SessionConfig& cfg) {
  RasterField f(kLegendSize, kLegendSize, Extent{-1.0, -1.0, 1.0, 1.0}, RgbColor{255, 255, 255});
  for (std::size_t row = 0; row < kLegendSize; ++row) {
    for (std::size_t col = 0; col < kLegendSize; ++col) {
      const Vec2 p = legend_to_disc(static_cast<double>(col), static_cast<double>(row));
      if (norm(p) <= 1.0) f.at(col, row) = hsl_to_rgb(disc_to_hsl(p, cfg.lightness));
    }
  }
  const auto outline = ellipse_outline(warp.ellipse);
  for (std::size_t k = 0; k + 1 < outline.size(); ++k)
    detail::draw_line(f, disc_to_legend(outline[k]), disc_to_legend(outline[k + 1]), RgbColor{40, 40, 40});
  for (std::size_t j = 0; j < warp.points.size(); ++j) {
    const Vec2 px = disc_to_legend(warp.points[j]);
    detail::plot(f, std::lround(px.x), std::lround(px.y), hsl_to_rgb(colors.colors[j]));
  }
  for (std::size_t i = 0; i < layout.layout.vertex_angles.size(); ++i) {
    const Vec2 px = disc_to_legend(layout.layout.vertex(i));
    detail::fill_disc(f, px, 7.0, RgbColor{0, 0, 0});
    detail::fill_disc(f, px, 5.5, hsl_to_rgb(vertex_color(layout.layout, i, cfg.lightness)));
  }
  return f;
}

inline json legend_payload(const DataTable& table, const LayoutStage& layout, const WarpStage& warp,
                           const ColorStage& colors, const SessionConfig& cfg) {
  json vertices = json::array();
  const auto& model = layout.layout;
  for (std::size_t rank = 0; rank < model.order.size(); ++rank) {
    const std::size_t attr = model.order[rank];
    const HslColor c = vertex_color(model, attr, cfg.lightness);
    vertices.push_back({{"name", table.attribute_names[attr]},
                        {"attribute", attr},
                        {"rank", rank},
                        {"angle", model.vertex_angles[attr]},
                        {"angle_degrees", model.vertex_angles[attr] * 180.0 / std::numbers::pi},
                        {"position", to_json(model.vertex(attr))},
                        {"color", to_json(c)},
                        {"hex", to_hex(hsl_to_rgb(c))}});
  }
  json samples = json::array();
  for (std::size_t j = 0; j < warp.points.size(); ++j) {
    samples.push_back({{"index", j},
                       {"position", to_json(warp.points[j])},
                       {"embedded_position", to_json(model.points[j])},
                       {"color", to_json(colors.colors[j])},
                       {"hex", to_hex(hsl_to_rgb(colors.colors[j]))}});
  }
  json outline = json::array();
  for (Vec2 p : ellipse_outline(warp.ellipse)) outline.push_back({p.x, p.y});
  return json{
      {"vertices", vertices},
      {"samples", samples},
      {"ellipse",
       {{"center", to_json(warp.ellipse.center)},
        {"axis1", to_json(warp.ellipse.axis1)},
        {"axis2", to_json(warp.ellipse.axis2)},
        {"a1", warp.ellipse.a1},
        {"a2", warp.ellipse.a2},
        {"scale_k", cfg.ellipse_scale_k},
        {"outline", outline}}},
      {"wheel",
       {{"lightness", cfg.lightness},
        {"center", {0.0, 0.0}},
        {"radius", 1.0},
        {"hue_zero", "+x"},
        {"hue_direction", "counterclockwise"},
        {"saturation", "distance from center"}}},
      {"warp_mode", to_string(cfg.warp.kind)},
  };
}

// Ties go to the lowest sample index.
inline std::size_t nearest_sample(const DataTable& table, Vec2 query) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < table.sample_count(); ++j) {
    const Vec2 d = table.locations[j] - query;
    const double d2 = d.x * d.x + d.y * d.y;
    if (d2 < best_d) best_d = d2, best = j;
  }
  return best;
}

inline json sample_payload(const DataTable& table, const LayoutStage& layout, const WarpStage& warp,
                           const ColorStage& colors, std::size_t j) {
  json values = json::object();
  for (std::size_t i = 0; i < table.attribute_count(); ++i) values[table.attribute_names[i]] = table.values(j, i);
  return json{{"index", j},
              {"location", to_json(table.locations[j])},
              {"values", values},
              {"weight", layout.norm.sample_weights[j]},
              {"color", to_json(colors.colors[j])},
              {"hex", to_hex(hsl_to_rgb(colors.colors[j]))},
              {"legend_position", to_json(warp.points[j])}};
}

// Memoizes every stage of the pipeline for one dataset, keyed by the config
// fields the stage depends on. Thread-safe; stages are computed outside the
// lock so cached artifacts stay readable while a long render runs.
class PipelineCache {
 public:
  explicit PipelineCache(std::shared_ptr<const DataTable> table) : table_(std::move(table)) {}

  const std::shared_ptr<const DataTable>& table() const noexcept { return table_; }

  std::shared_ptr<const LayoutStage> layout(const SessionConfig& cfg) {
    return memo<LayoutStage>(layout_key(cfg), [&] { return compute_layout(table_, cfg); });
  }

  std::shared_ptr<const WarpStage> warp(const SessionConfig& cfg) {
    auto l = layout(cfg);
    return memo<WarpStage>(warp_key(cfg), [&] { return compute_warp(*l, cfg); });
  }

  std::shared_ptr<const ColorStage> colors(const SessionConfig& cfg) {
    auto l = layout(cfg);
    auto w = warp(cfg);
    return memo<ColorStage>(color_key(cfg), [&] { return compute_colors(*l, *w, cfg); });
  }

  std::shared_ptr<const std::vector<double>> bandwidths(const SessionConfig& cfg) {
    return memo<std::vector<double>>(bandwidth_key(cfg), [&] {
      return adaptive_bandwidths(table_->locations, effective_kernel(cfg.kernel, table_->sample_count()));
    });
  }

  std::shared_ptr<const std::string> map_png(const SessionConfig& cfg, const RenderOptions& opts = {}) {
    auto c = colors(cfg);
    auto h = bandwidths(cfg);
    const std::string key = "map|" + color_key(cfg) + bandwidth_key(cfg) + grid_key(cfg);
    return memo<std::string>(key, [&] {
      return encode_png(akde_render(table_->locations, c->colors, *h, map_grid(*table_, cfg), opts));
    });
  }

  std::shared_ptr<const std::string> attribute_png(const SessionConfig& cfg, std::size_t attr,
                                                   const RenderOptions& opts = {}) {
    auto l = layout(cfg);
    const std::string key = "attr|" + std::to_string(attr) + "|" + json(cfg.lightness).dump() + layout_key(cfg) +
                            bandwidth_key(cfg) + grid_key(cfg);
    return memo<std::string>(key, [&] {
      const HslColor base = vertex_color(l->layout, attr, cfg.lightness);
      return encode_png(attribute_heatmap(l->norm, attr, base, map_grid(*table_, cfg),
                                          effective_kernel(cfg.kernel, table_->sample_count()), opts));
    });
  }

  std::shared_ptr<const std::string> legend_png(const SessionConfig& cfg) {
    auto l = layout(cfg);
    auto w = warp(cfg);
    auto c = colors(cfg);
    return memo<std::string>("legend|" + color_key(cfg), [&] { return encode_png(render_legend(*l, *w, *c, cfg)); });
  }

  json legend(const SessionConfig& cfg) { return legend_payload(*table_, *layout(cfg), *warp(cfg), *colors(cfg), cfg); }

  json sample(const SessionConfig& cfg, std::size_t j) {
    return sample_payload(*table_, *layout(cfg), *warp(cfg), *colors(cfg), j);
  }

  std::size_t cached_entries() const {
    std::lock_guard lock(mu_);
    return entries_.size();
  }

 private:
  static std::string layout_key(const SessionConfig& c) {
    return json{{"w", to_string(c.weight_mode)}, {"m", to_string(c.metric)}}.dump();
  }
  static std::string warp_key(const SessionConfig& c) {
    return layout_key(c) + json{{"mode", to_string(c.warp.kind)}, {"shrink", c.warp.shrink},
                                {"pct", c.warp.percentile}, {"k", c.ellipse_scale_k}}.dump();
  }
  static std::string color_key(const SessionConfig& c) {
    return warp_key(c) + json{{"l", c.lightness}, {"i", c.intensity_on}, {"lr", {c.l_range.lo, c.l_range.hi}}}.dump();
  }
  static std::string bandwidth_key(const SessionConfig& c) {
    return json{{"kn", c.kernel.k_neighbors}, {"bs", c.kernel.bandwidth_scale}}.dump();
  }
  static std::string grid_key(const SessionConfig& c) {
    return json{{"gw", c.grid_width}, {"gh", c.grid_height}}.dump();
  }

  template <typename T, typename Fn>
  std::shared_ptr<const T> memo(const std::string& key, Fn&& compute) {
    const std::string full = std::string(typeid(T).name()) + "#" + key;
    {
      std::lock_guard lock(mu_);
      if (auto it = entries_.find(full); it != entries_.end()) {
        it->second.last_use = ++clock_;
        return std::static_pointer_cast<const T>(it->second.value);
      }
    }
    auto value = std::make_shared<const T>(compute());
    std::lock_guard lock(mu_);
    auto [it, inserted] = entries_.try_emplace(full, Entry{value, ++clock_});
    if (!inserted) return std::static_pointer_cast<const T>(it->second.value);
    evict_locked();
    return value;
  }

  void evict_locked() {
    while (entries_.size() > kMaxEntries) {
      auto oldest = entries_.begin();
      for (auto it = entries_.begin(); it != entries_.end(); ++it)
        if (it->second.last_use < oldest->second.last_use) oldest = it;
      entries_.erase(oldest);
    }
  }

  struct Entry {
    std::shared_ptr<const void> value;
    std::uint64_t last_use = 0;
  };

  static constexpr std::size_t kMaxEntries = 96;

  std::shared_ptr<const DataTable> table_;
  mutable std::mutex mu_;
  std::map<std::string, Entry> entries_;
  std::uint64_t clock_ = 0;
};

// Files written by the CLI `render` command, relative to the output directory.
struct RenderOutputs {
  std::vector<std::string> files;
};

inline std::string attribute_file_name(const std::string& name) { return "attr_" + name + ".png"; }

// Runs the whole pipeline and writes map.png, legend.png, one attr_<name>.png
// per attribute and layout.json into `out_dir` (which must exist).
inline RenderOutputs render_all(std::shared_ptr<const DataTable> table, const SessionConfig& cfg,
                                const std::string& out_dir, const RenderOptions& opts = {}) {
  validate(cfg);
  PipelineCache cache(std::move(table));
  const auto& t = *cache.table();
  RenderOutputs out;
  const auto emit = [&](const std::string& name, std::string_view bytes) {
    write_file(out_dir + "/" + name, bytes);
    out.files.push_back(name);
  };
  emit("map.png", *cache.map_png(cfg, opts));
  emit("legend.png", *cache.legend_png(cfg));
  for (std::size_t i = 0; i < t.attribute_count(); ++i)
    emit(attribute_file_name(t.attribute_names[i]), *cache.attribute_png(cfg, i, opts));
  emit("layout.json", to_json(cache.layout(cfg)->layout, t.attribute_names).dump(2) + "\n");
  return out;
}

}  // namespace gbc_chroma
