#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "gbc_chroma/gbc_chroma.hpp"
#include "test_support.hpp"

namespace gbc_chroma {
namespace {

std::shared_ptr<const DataTable> synthetic(std::size_t m = 300, std::size_t n = 8, std::uint64_t seed = 7) {
  return std::make_shared<const DataTable>(generate_synthetic(m, n, default_clusters(m, n), seed));
}

TEST(Config, MergeAppliesKnownKeys) {
  const SessionConfig c = merge_config({}, json::parse(R"({
    "warp_mode": "compress", "shrink": 0.5, "lightness": 0.4, "intensity_on": true,
    "l_range": [0.2, 0.8], "kernel": {"k_neighbors": 5, "bandwidth_scale": 1.5},
    "grid": [64, 32], "weight_mode": "normalized_sum", "metric": "column_euclidean", "version": 9})"));
  EXPECT_EQ(c.warp.kind, WarpKind::comparison_compression);
  EXPECT_EQ(c.warp.shrink, 0.5);
  EXPECT_EQ(c.lightness, 0.4);
  EXPECT_TRUE(c.intensity_on);
  EXPECT_EQ(c.l_range.lo, 0.2);
  EXPECT_EQ(c.kernel.k_neighbors, 5u);
  EXPECT_EQ(c.kernel.bandwidth_scale, 1.5);
  EXPECT_EQ(c.grid_width, 64u);
  EXPECT_EQ(c.grid_height, 32u);
  EXPECT_EQ(c.weight_mode, WeightMode::normalized_sum);
  EXPECT_EQ(c.metric, DistanceMetric::column_euclidean);
}

TEST(Config, JsonRoundTrip) {
  SessionConfig c;
  c.warp.kind = WarpKind::color_preserving;
  c.ellipse_scale_k = 1.5;
  c.grid_width = 100;
  EXPECT_EQ(merge_config({}, to_json(c)), c);
  EXPECT_EQ(merge_config(c, json::object()), c);
}

TEST(Config, RejectsBadPatches) {
  EXPECT_THROW(merge_config({}, json{{"colour", 1}}), json::exception);
  EXPECT_THROW(merge_config({}, json{{"lightness", "bright"}}), json::exception);
  EXPECT_THROW(merge_config({}, json::array()), json::exception);
  EXPECT_THROW(merge_config({}, json{{"kernel", {{"radius", 2}}}}), json::exception);
  for (const json& bad : {json{{"lightness", 1.5}}, json{{"shrink", 0.0}}, json{{"warp_mode", "sideways"}},
                          json{{"grid", {0, 10}}}, json{{"grid", {5000, 10}}}, json{{"l_range", {0.8, 0.2}}},
                          json{{"kernel", {{"k_neighbors", 0}}}}, json{{"ellipse_scale_k", -1}}}) {
    try {
      merge_config({}, bad);
      ADD_FAILURE() << bad.dump();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::InvalidArgument) << bad.dump();
    }
  }
}

struct Stages {
  LayoutStage layout;
  WarpStage warp;
  ColorStage colors;
};

Stages run(std::shared_ptr<const DataTable> t, const SessionConfig& cfg) {
  Stages s;
  s.layout = compute_layout(std::move(t), cfg);
  s.warp = compute_warp(s.layout, cfg);
  s.colors = compute_colors(s.layout, s.warp, cfg);
  return s;
}

TEST(Legend, EightVerticesAreEquallySpaced) {
  const auto t = synthetic();
  const SessionConfig cfg;
  const Stages s = run(t, cfg);
  const json legend = legend_payload(*t, s.layout, s.warp, s.colors, cfg);
  ASSERT_EQ(legend["vertices"].size(), 8u);
  for (std::size_t k = 0; k < 8; ++k) {
    const json& v = legend["vertices"][k];
    EXPECT_EQ(v["rank"], k);
    EXPECT_NEAR(v["angle_degrees"].get<double>(), 45.0 * double(k), 1e-9);
    EXPECT_NEAR(std::hypot(v["position"]["x"].get<double>(), v["position"]["y"].get<double>()), 1.0, 1e-12);
    EXPECT_EQ(v["name"], t->attribute_names[v["attribute"].get<std::size_t>()]);
  }
  EXPECT_EQ(legend["samples"].size(), 300u);
  EXPECT_EQ(legend["warp_mode"], "none");
}

TEST(Legend, OutlineLiesOnEllipse) {
  const auto t = synthetic();
  for (const char* mode : {"none", "contrast", "preserve", "compress"}) {
    SessionConfig cfg;
    cfg.warp.kind = parse_warp_kind(mode);
    const Stages s = run(t, cfg);
    const json legend = legend_payload(*t, s.layout, s.warp, s.colors, cfg);
    const json& outline = legend["ellipse"]["outline"];
    ASSERT_EQ(outline.size(), 65u);
    EXPECT_EQ(outline.front(), outline.back());
    for (const json& p : outline)
      EXPECT_NEAR(ellipse_radius({p[0].get<double>(), p[1].get<double>()}, s.warp.ellipse), 1.0, 1e-9);
  }
}

TEST(Legend, CenterPixelIsNeutralGray) {
  const auto t = synthetic();
  const SessionConfig cfg;
  const Stages s = run(t, cfg);
  const RasterField legend = render_legend(s.layout, s.warp, s.colors, cfg);
  ASSERT_EQ(legend.width, kLegendSize);
  const RgbColor c = legend.at(kLegendSize / 2, kLegendSize / 2);
  for (int ch : {c.r, c.g, c.b}) EXPECT_NEAR(ch, 166, 1);
  EXPECT_EQ(legend.at(0, 0), (RgbColor{255, 255, 255}));
}

TEST(Legend, VertexColorsMatchHeatmapBase) {
  const auto t = synthetic();
  SessionConfig cfg;
  cfg.grid_width = cfg.grid_height = 24;
  PipelineCache cache(t);
  const auto layout = cache.layout(cfg);
  const json legend = cache.legend(cfg);
  const auto h = adaptive_bandwidths(t->locations, cfg.kernel);
  const RasterField legend_png = decode_png(*cache.legend_png(cfg));
  for (const json& v : legend["vertices"]) {
    const auto attr = v["attribute"].get<std::size_t>();
    const HslColor base = vertex_color(layout->layout, attr, cfg.lightness);
    EXPECT_EQ(v["hex"], to_hex(hsl_to_rgb(base)));

    const Vec2 px = disc_to_legend(layout->layout.vertex(attr));
    EXPECT_EQ(legend_png.at(std::lround(px.x), std::lround(px.y)), hsl_to_rgb(base));

    const RasterField heat = decode_png(*cache.attribute_png(cfg, attr));
    const GridSpec grid = map_grid(*t, cfg);
    const auto values = akde_scalar(t->locations, layout->norm.norm_values.column(attr), h, grid);
    for (std::size_t p = 0; p < values.size(); ++p)
      ASSERT_EQ(heat.pixels[p], hsl_to_rgb({base.h, base.s, heatmap_lightness(values[p])}));
  }
}

TEST(Legend, PixelMappingIsCentered) {
  const Vec2 o = legend_to_disc(200, 200);
  EXPECT_EQ(o.x, 0.0);
  EXPECT_EQ(o.y, 0.0);
  const Vec2 p = disc_to_legend({0.3, -0.7});
  const Vec2 back = legend_to_disc(p.x, p.y);
  EXPECT_NEAR(back.x, 0.3, 1e-15);
  EXPECT_NEAR(back.y, -0.7, 1e-15);
}

TEST(Colors, IntensityDarkensHeavierSamples) {
  const auto t = synthetic();
  SessionConfig cfg;
  cfg.intensity_on = true;
  const Stages s = run(t, cfg);
  const auto& w = s.layout.norm.sample_weights;
  std::size_t lightest = 0, heaviest = 0;
  for (std::size_t j = 0; j < w.size(); ++j) {
    if (w[j] < w[lightest]) lightest = j;
    if (w[j] > w[heaviest]) heaviest = j;
    EXPECT_GE(s.colors.colors[j].l, cfg.l_range.lo - 1e-12);
    EXPECT_LE(s.colors.colors[j].l, cfg.l_range.hi + 1e-12);
  }
  EXPECT_NEAR(s.colors.colors[lightest].l, cfg.l_range.hi, 1e-12);
  EXPECT_NEAR(s.colors.colors[heaviest].l, cfg.l_range.lo, 1e-12);
}

TEST(Colors, EqualWeightsKeepSessionLightness) {
  auto t = std::make_shared<DataTable>();
  t->attribute_names = {"a", "b", "c"};
  t->locations = {{0, 0}, {1, 0}, {0, 1}};
  t->values = Matrix(3, 3, 0.0);
  t->values(0, 0) = t->values(1, 1) = t->values(2, 2) = 1.0;
  SessionConfig cfg;
  cfg.intensity_on = true;
  const Stages s = run(t, cfg);
  for (const auto& c : s.colors.colors) EXPECT_EQ(c.l, cfg.lightness);
}

TEST(Pipeline, TinyDatasetsStillRender) {
  auto t = std::make_shared<DataTable>();
  t->attribute_names = {"a", "b", "c"};
  t->locations = {{0, 0}, {1, 1}};
  t->values = Matrix(2, 3, 0.0);
  t->values(0, 0) = 1.0;
  t->values(1, 2) = 2.0;
  SessionConfig cfg;
  cfg.grid_width = cfg.grid_height = 8;
  PipelineCache cache(t);
  EXPECT_EQ(decode_png(*cache.map_png(cfg)).width, 8u);

  auto one = std::make_shared<DataTable>(*t);
  one->locations.resize(1);
  one->values = Matrix(1, 3, 1.0);
  PipelineCache single(one);
  EXPECT_NO_THROW(single.legend(cfg));
  try {
    single.map_png(cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooFewSamples);
  }
}

TEST(Pipeline, CacheReusesUnaffectedStages) {
  PipelineCache cache(synthetic(120, 5));
  SessionConfig cfg;
  cfg.grid_width = cfg.grid_height = 16;
  const auto layout = cache.layout(cfg);
  const auto png = cache.map_png(cfg);
  EXPECT_EQ(cache.map_png(cfg), png);

  SessionConfig warped = cfg;
  warped.warp.kind = WarpKind::contrast_enhancement;
  EXPECT_EQ(cache.layout(warped), layout);
  EXPECT_NE(*cache.map_png(warped), *png);

  SessionConfig bigger = cfg;
  bigger.grid_width = 20;
  EXPECT_EQ(cache.colors(bigger), cache.colors(cfg));
  EXPECT_EQ(decode_png(*cache.map_png(bigger)).width, 20u);
}

TEST(Pipeline, NearestSampleBreaksTiesByIndex) {
  DataTable t;
  t.attribute_names = {"a", "b", "c"};
  t.locations = {{1, 0}, {0, 1}, {-1, 0}, {2, 2}};
  t.values = Matrix(4, 3, 1.0);
  EXPECT_EQ(nearest_sample(t, {0, 0}), 0u);
  EXPECT_EQ(nearest_sample(t, {-0.9, 0.1}), 2u);
  EXPECT_EQ(nearest_sample(t, {2, 2}), 3u);
}

TEST(Pipeline, SamplePayloadCarriesValuesAndColor) {
  const auto t = synthetic(60, 4);
  PipelineCache cache(t);
  const SessionConfig cfg;
  const json s = cache.sample(cfg, 17);
  EXPECT_EQ(s["index"], 17);
  EXPECT_EQ(s["values"].size(), 4u);
  EXPECT_EQ(s["values"][t->attribute_names[2]].get<double>(), t->values(17, 2));
  EXPECT_EQ(s["location"]["x"].get<double>(), t->locations[17].x);
  const HslColor c{s["color"]["h"], s["color"]["s"], s["color"]["l"]};
  EXPECT_EQ(s["hex"], to_hex(hsl_to_rgb(c)));
}

TEST(Pipeline, RenderAllWritesEveryArtifact) {
  const auto dir = std::filesystem::temp_directory_path() / "gbc_chroma_render_all";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const auto t = synthetic(80, 5);
  SessionConfig cfg;
  cfg.grid_width = 32;
  cfg.grid_height = 24;
  const auto out = render_all(t, cfg, dir.string());
  std::vector<std::string> want{"map.png", "legend.png"};
  for (const auto& name : t->attribute_names) want.push_back("attr_" + name + ".png");
  want.push_back("layout.json");
  EXPECT_EQ(out.files, want);
  for (const auto& f : want) EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;

  const RasterField map = import_png((dir / "map.png").string());
  EXPECT_EQ(map.width, 32u);
  EXPECT_EQ(map.height, 24u);
  std::ifstream in(dir / "layout.json");
  const json layout = json::parse(in);
  EXPECT_EQ(layout["attributes"].size(), 5u);
  EXPECT_EQ(layout["points"].size(), 80u);
  EXPECT_EQ(layout["order"][0], 0);

  try {
    render_all(t, cfg, (dir / "absent").string());
    FAIL();
  } catch (const Error& e) {
    EXPECT_TRUE(e.is_io());
  }
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace gbc_chroma
