#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gbc_chroma/error.hpp"
#include "gbc_chroma/geometry.hpp"
#include "gbc_chroma/matrix.hpp"

namespace gbc_chroma {

// Named attributes measured at 2D sensor locations. values(j, i) is the raw
// measurement of attribute i at sample j.
struct DataTable {
  std::vector<std::string> attribute_names;
  std::vector<Vec2> locations;
  Matrix values;

  std::size_t attribute_count() const noexcept { return attribute_names.size(); }
  std::size_t sample_count() const noexcept { return locations.size(); }

  friend bool operator==(const DataTable&, const DataTable&) = default;
};

// Throws unless the table satisfies the DataTable invariants.
inline void validate(const DataTable& t) {
  const std::size_t n = t.attribute_names.size();
  if (n < 3) throw Error(ErrorCode::TooFewAttributes, "need at least 3 attributes, got " + std::to_string(n));
  if (t.locations.empty()) throw Error(ErrorCode::EmptyTable, "table has no samples");
  if (t.values.rows() != t.locations.size() || t.values.cols() != n)
    throw Error(ErrorCode::InconsistentArity, "value matrix shape does not match names/locations");
  std::set<std::string> seen;
  for (const auto& name : t.attribute_names) {
    if (name.empty()) throw Error(ErrorCode::InvalidHeader, "empty attribute name");
    if (!seen.insert(name).second) throw Error(ErrorCode::InvalidHeader, "duplicate attribute name '" + name + "'");
  }
  for (std::size_t j = 0; j < t.locations.size(); ++j) {
    if (!std::isfinite(t.locations[j].x) || !std::isfinite(t.locations[j].y))
      throw Error(ErrorCode::NonNumericCell, "non-finite location", j + 2, 1);
    for (std::size_t i = 0; i < n; ++i)
      if (!std::isfinite(t.values(j, i)))
        throw Error(ErrorCode::NonNumericCell, "non-finite value", j + 2, i + 3);
  }
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto not_space = [](char c) { return c != ' ' && c != '\t' && c != '\r' && c != '\n'; };
  while (!s.empty() && !not_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && !not_space(s.back())) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline bool parse_number(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

}  // namespace detail

// Reads `x,y,<attr1>,...` CSV. Error rows/columns are 1-based file positions
// (the header is row 1).
inline DataTable parse_table(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (!detail::trim(line).empty()) { have_header = true; break; }
  }
  if (!have_header) throw Error(ErrorCode::MissingHeader, "input is empty");

  const auto header = detail::split_commas(line);
  if (header.size() < 2 || header[0] != "x" || header[1] != "y")
    throw Error(ErrorCode::MissingHeader, "first row must be a header starting with x,y", line_no, 1);

  DataTable table;
  for (std::size_t c = 2; c < header.size(); ++c) table.attribute_names.emplace_back(header[c]);
  const std::size_t n = table.attribute_names.size();
  if (n < 3) throw Error(ErrorCode::TooFewAttributes, "need at least 3 attributes, got " + std::to_string(n));

  std::vector<double> flat;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_commas(line);
    if (cells.size() != n + 2)
      throw Error(ErrorCode::InconsistentArity,
                  "expected " + std::to_string(n + 2) + " fields, got " + std::to_string(cells.size()), line_no);
    double v[2];
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double value = 0.0;
      if (!detail::parse_number(cells[c], value))
        throw Error(ErrorCode::NonNumericCell, "cell '" + std::string(cells[c]) + "' is not a finite number",
                    line_no, c + 1);
      if (c < 2) v[c] = value;
      else flat.push_back(value);
    }
    table.locations.push_back({v[0], v[1]});
  }
  if (table.locations.empty()) throw Error(ErrorCode::EmptyTable, "no data rows after the header");

  table.values = Matrix(table.locations.size(), n);
  std::copy(flat.begin(), flat.end(), table.values.row(0).data());
  validate(table);
  return table;
}

inline DataTable parse_table(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_table(in);
}

inline DataTable load_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open '" + path + "'");
  return parse_table(in);
}

// Writes with 17 significant digits so that parse_table(format_table(t)) == t.
inline std::string format_table(const DataTable& t) {
  std::string out = "x,y";
  for (const auto& name : t.attribute_names) out += "," + name;
  out += '\n';
  char buf[32];
  const auto put = [&](double v) {
    const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
    out.append(buf, static_cast<std::size_t>(len));
  };
  for (std::size_t j = 0; j < t.sample_count(); ++j) {
    put(t.locations[j].x);
    out += ',';
    put(t.locations[j].y);
    for (double v : t.values.row(j)) {
      out += ',';
      put(v);
    }
    out += '\n';
  }
  return out;
}

inline void save_table(const DataTable& t, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write '" + path + "'");
  const std::string text = format_table(t);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "write to '" + path + "' failed");
}

enum class WeightMode { raw_sum, normalized_sum };

// Per-attribute min-max scaled copy of a table plus per-sample weights.
struct NormalizedTable {
  std::shared_ptr<const DataTable> source;
  Matrix norm_values;
  std::vector<double> sample_weights;
  WeightMode weight_mode = WeightMode::raw_sum;

  std::size_t attribute_count() const noexcept { return norm_values.cols(); }
  std::size_t sample_count() const noexcept { return norm_values.rows(); }
};

// Constant columns map to 0.5 so the attribute keeps a presence in the layout.
inline NormalizedTable normalize(std::shared_ptr<const DataTable> table, WeightMode mode = WeightMode::raw_sum) {
  validate(*table);
  const std::size_t m = table->sample_count();
  const std::size_t n = table->attribute_count();
  NormalizedTable out;
  out.norm_values = Matrix(m, n);
  out.weight_mode = mode;
  for (std::size_t i = 0; i < n; ++i) {
    double lo = table->values(0, i);
    double hi = lo;
    for (std::size_t j = 1; j < m; ++j) {
      lo = std::min(lo, table->values(j, i));
      hi = std::max(hi, table->values(j, i));
    }
    const double span = hi - lo;
    for (std::size_t j = 0; j < m; ++j) {
      const double v = table->values(j, i);
      double scaled = 0.5;
      if (span > 0.0) {
        // Exact endpoints, then clamp against rounding.
        if (v == lo) scaled = 0.0;
        else if (v == hi) scaled = 1.0;
        else scaled = std::clamp((v - lo) / span, 0.0, 1.0);
      }
      out.norm_values(j, i) = scaled;
    }
  }
  out.sample_weights.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    const auto row = mode == WeightMode::raw_sum ? table->values.row(j) : out.norm_values.row(j);
    double sum = 0.0;
    for (double v : row) sum += v;
    out.sample_weights[j] = sum;
  }
  out.source = std::move(table);
  return out;
}

inline NormalizedTable normalize(const DataTable& table, WeightMode mode = WeightMode::raw_sum) {
  return normalize(std::make_shared<const DataTable>(table), mode);
}

// One group of synthetic samples: a dominant attribute profile, the noise
// added to it, and how many samples to draw.
struct ClusterSpec {
  std::vector<double> proportions;
  double spread = 0.1;
  std::size_t count = 0;
};

namespace detail {

// Platform-stable draws: std::mt19937_64 is fully specified, the standard
// distributions are not.
class StableRng {
 public:
  explicit StableRng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(kTwoPi * u2);
    have_spare_ = true;
    return r * std::cos(kTwoPi * u2);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace detail

inline std::vector<std::string> default_attribute_names(std::size_t n) {
  static const char* const kPollutants[] = {"As", "Cd", "Cr", "Cu", "Hg", "Ni", "Pb", "Zn"};
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n; ++i)
    names.push_back(n <= 8 ? std::string(kPollutants[i]) : "v" + std::to_string(i + 1));
  return names;
}

// Samples are placed uniformly in the unit square, pulled halfway toward a
// per-cluster anchor and jittered. Values are the cluster profile plus
// Gaussian noise, clamped at zero and scaled by a per-sample load in [5, 15].
inline DataTable generate_synthetic(std::size_t m, std::size_t n, const std::vector<ClusterSpec>& clusters,
                                    std::uint64_t seed) {
  if (n < 3) throw Error(ErrorCode::TooFewAttributes, "need at least 3 attributes");
  std::size_t total = 0;
  for (const auto& c : clusters) {
    if (c.proportions.size() != n) throw Error(ErrorCode::SpecMismatch, "cluster proportions must have length n");
    if (c.spread < 0.0) throw Error(ErrorCode::SpecMismatch, "cluster spread must be nonnegative");
    total += c.count;
  }
  if (total != m || m == 0)
    throw Error(ErrorCode::SpecMismatch,
                "cluster counts sum to " + std::to_string(total) + ", expected m=" + std::to_string(m));

  detail::StableRng rng(seed);
  DataTable t;
  t.attribute_names = default_attribute_names(n);
  t.values = Matrix(m, n);
  t.locations.reserve(m);
  std::size_t j = 0;
  for (const auto& c : clusters) {
    const Vec2 anchor{rng.uniform(0.15, 0.85), rng.uniform(0.15, 0.85)};
    for (std::size_t k = 0; k < c.count; ++k, ++j) {
      const Vec2 u{rng.uniform(), rng.uniform()};
      Vec2 loc = 0.5 * (u + anchor);
      loc += Vec2{0.02 * rng.normal(), 0.02 * rng.normal()};
      t.locations.push_back({std::clamp(loc.x, 0.0, 1.0), std::clamp(loc.y, 0.0, 1.0)});
      const double load = rng.uniform(5.0, 15.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double noise = c.spread > 0.0 ? c.spread * rng.normal() : 0.0;
        t.values(j, i) = load * std::max(0.0, c.proportions[i] + noise);
      }
    }
  }
  validate(t);
  return t;
}

// Three clusters, each dominated by a contiguous block of attributes, with
// sizes split as evenly as possible. Used by the CLI `synth` command.
inline std::vector<ClusterSpec> default_clusters(std::size_t m, std::size_t n) {
  const std::size_t k = std::min<std::size_t>(3, m);
  std::vector<ClusterSpec> out(k);
  for (std::size_t c = 0; c < k; ++c) {
    out[c].proportions.assign(n, 0.1);
    const std::size_t first = c * n / k;
    const std::size_t last = (c + 1) * n / k;
    for (std::size_t i = first; i < last; ++i) out[c].proportions[i] = 1.0;
    out[c].spread = 0.15;
    out[c].count = m / k + (c < m % k ? 1 : 0);
  }
  return out;
}

}  // namespace gbc_chroma
