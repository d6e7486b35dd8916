// Command-line front end: render a dataset, generate synthetic data, or run
// the HTTP service.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <thread>

#include "CLI11.hpp"

#include "gbc_chroma/gbc_chroma.hpp"
#include "gbc_chroma/service.hpp"

namespace {

using namespace gbc_chroma;

constexpr int kExitValidation = 2;
constexpr int kExitIo = 3;

struct RenderArgs {
  std::string input;
  std::string mode = "none";
  double ellipse_scale = kDefaultEllipseScale;
  double lightness = kDefaultLightness;
  bool intensity = false;
  std::string grid = "512x512";
  std::size_t k_neighbors = 8;
  double bandwidth_scale = 1.0;
  std::string out = "out";
  bool seeded = false;
};

void parse_grid(const std::string& text, SessionConfig& cfg) {
  const auto x = text.find_first_of("xX");
  std::size_t w = 0, h = 0;
  const auto parse = [](std::string_view s, std::size_t& v) {
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    return ec == std::errc() && p == s.data() + s.size();
  };
  if (x == std::string::npos || !parse(std::string_view(text).substr(0, x), w) ||
      !parse(std::string_view(text).substr(x + 1), h))
    throw Error(ErrorCode::InvalidArgument, "--grid expects WxH, got '" + text + "'");
  cfg.grid_width = w;
  cfg.grid_height = h;
}

int run_render(const RenderArgs& a) {
  SessionConfig cfg;
  std::shared_ptr<const DataTable> table;
  try {
    cfg.warp.kind = parse_warp_kind(a.mode);
    cfg.ellipse_scale_k = a.ellipse_scale;
    cfg.lightness = a.lightness;
    cfg.intensity_on = a.intensity;
    cfg.kernel.k_neighbors = a.k_neighbors;
    cfg.kernel.bandwidth_scale = a.bandwidth_scale;
    parse_grid(a.grid, cfg);
    validate(cfg);
    // An unreadable input is an input problem, not an output failure.
    table = std::make_shared<const DataTable>(load_table(a.input));
  } catch (const Error& e) {
    std::cerr << "render: " << e.what() << '\n';
    return kExitValidation;
  }

  std::error_code ec;
  std::filesystem::create_directories(a.out, ec);
  if (ec) {
    std::cerr << "render: cannot create output directory '" << a.out << "': " << ec.message() << '\n';
    return kExitIo;
  }
  const unsigned threads = a.seeded ? 1u : std::max(1u, std::thread::hardware_concurrency());
  try {
    const auto outputs = render_all(table, cfg, a.out, RenderOptions{threads});
    for (const auto& f : outputs.files) std::cout << (std::filesystem::path(a.out) / f).string() << '\n';
  } catch (const Error& e) {
    std::cerr << "render: " << e.what() << '\n';
    return e.is_io() ? kExitIo : kExitValidation;
  }
  return 0;
}

int run_synth(std::size_t m, std::size_t n, std::uint64_t seed, const std::string& out) {
  DataTable table;
  try {
    table = generate_synthetic(m, n, default_clusters(m, n), seed);
  } catch (const Error& e) {
    std::cerr << "synth: " << e.what() << '\n';
    return kExitValidation;
  }
  try {
    save_table(table, out);
  } catch (const Error& e) {
    std::cerr << "synth: " << e.what() << '\n';
    return kExitIo;
  }
  return 0;
}

int run_serve(int port, const std::string& static_dir) {
  if (const char* env = std::getenv("GBC_CHROMA_PORT"); env && *env) {
    try {
      port = std::stoi(env);
    } catch (const std::exception&) {
      std::cerr << "serve: GBC_CHROMA_PORT is not a port number: " << env << '\n';
      return kExitValidation;
    }
  }
  Service service;
  if (!static_dir.empty() && !service.mount_static(static_dir)) {
    std::cerr << "serve: static directory '" << static_dir << "' does not exist\n";
    return kExitValidation;
  }
  std::cerr << "serving on http://0.0.0.0:" << port << "/api/v1\n";
  if (!service.listen("0.0.0.0", port)) {
    std::cerr << "serve: cannot listen on port " << port << '\n';
    return kExitIo;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multivariate color mapping via barycentric layouts in the HSL disc"};
  app.require_subcommand(1);

  RenderArgs render;
  auto* render_cmd = app.add_subcommand("render", "Render map, legend, heat maps and layout.json");
  render_cmd->add_option("--input", render.input, "Input CSV (x,y,<attributes...>)")->required();
  render_cmd->add_option("--mode", render.mode, "Warp mode: none|preserve|contrast|compress");
  render_cmd->add_option("--ellipse-scale", render.ellipse_scale, "PCA ellipse scale in standard deviations");
  render_cmd->add_option("--lightness", render.lightness, "HSL lightness of the color disc");
  render_cmd->add_flag("--intensity", render.intensity, "Darken heavier samples");
  render_cmd->add_option("--grid", render.grid, "Map resolution WxH");
  render_cmd->add_option("--k-neighbors", render.k_neighbors, "Neighbor rank for adaptive bandwidths");
  render_cmd->add_option("--bandwidth-scale", render.bandwidth_scale, "Global bandwidth multiplier");
  render_cmd->add_option("--out", render.out, "Output directory");
  render_cmd->add_flag("--seeded", render.seeded, "Single-threaded, reproducible run");

  std::size_t synth_m = 300, synth_n = 8;
  std::uint64_t synth_seed = 7;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic clustered dataset as CSV");
  synth_cmd->add_option("--m", synth_m, "Number of samples");
  synth_cmd->add_option("--n", synth_n, "Number of attributes");
  synth_cmd->add_option("--seed", synth_seed, "RNG seed");
  synth_cmd->add_option("--out", synth_out, "Output CSV path")->required();

  int port = 8080;
  std::string static_dir;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  serve_cmd->add_option("--port", port, "Listen port (GBC_CHROMA_PORT overrides)");
  serve_cmd->add_option("--static", static_dir, "Directory with the UI bundle");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  if (*render_cmd) return run_render(render);
  if (*synth_cmd) return run_synth(synth_m, synth_n, synth_seed, synth_out);
  if (*serve_cmd) return run_serve(port, static_dir);
  return kExitValidation;
}
