#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "gbc_chroma/data_model.hpp"
#include "gbc_chroma/error.hpp"
#include "gbc_chroma/geometry.hpp"
#include "gbc_chroma/matrix.hpp"

namespace gbc_chroma {

// Symmetric, zero-diagonal attribute dissimilarities.
using DistanceMatrix = Matrix;

enum class DistanceMetric { one_minus_abs_corr, column_euclidean };

namespace detail {

// Pearson correlation; zero when either column is constant.
inline double pearson(std::span<const double> a, std::span<const double> b) {
  const std::size_t m = a.size();
  double mean_a = 0.0, mean_b = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    mean_a += a[j];
    mean_b += b[j];
  }
  mean_a /= static_cast<double>(m);
  mean_b /= static_cast<double>(m);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const double da = a[j] - mean_a;
    const double db = b[j] - mean_b;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

}  // namespace detail

inline DistanceMatrix attribute_distances(const NormalizedTable& norm,
                                          DistanceMetric metric = DistanceMetric::one_minus_abs_corr) {
  const std::size_t n = norm.attribute_count();
  const std::size_t m = norm.sample_count();
  if (metric == DistanceMetric::one_minus_abs_corr && m < 2)
    throw Error(ErrorCode::TooFewRows, "correlation distance needs at least 2 samples");

  std::vector<std::vector<double>> cols(n);
  for (std::size_t i = 0; i < n; ++i) cols[i] = norm.norm_values.column(i);

  DistanceMatrix d(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = i + 1; k < n; ++k) {
      double v = 0.0;
      if (metric == DistanceMetric::one_minus_abs_corr) {
        v = 1.0 - std::abs(detail::pearson(cols[i], cols[k]));
      } else {
        double ss = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
          const double diff = cols[i][j] - cols[k][j];
          ss += diff * diff;
        }
        v = std::sqrt(ss);
      }
      d(i, k) = d(k, i) = v;
    }
  }
  if (metric == DistanceMetric::column_euclidean) {
    double max = 0.0;
    for (double v : d.data()) max = std::max(max, v);
    if (max > 0.0)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k) d(i, k) /= max;
  }
  return d;
}

// Sum of distances between cyclically adjacent attributes.
inline double cyclic_cost(const DistanceMatrix& d, std::span<const std::size_t> order) {
  double cost = 0.0;
  const std::size_t n = order.size();
  for (std::size_t k = 0; k < n; ++k) cost += d(order[k], order[(k + 1) % n]);
  return cost;
}

struct OrderingOptions {
  // Run 2-opt local search after the greedy construction.
  bool refine = true;
  // Up to this many attributes the refinement finishes with an exact
  // Held-Karp pass, since a 2-opt local optimum is not always global.
  std::size_t exact_limit = 12;
};

namespace detail {

// Rotates so the order starts at attribute 0 and picks the direction whose
// second element has the lower index. Cost is unchanged.
inline std::vector<std::size_t> canonical_cycle(std::vector<std::size_t> order) {
  const auto zero = std::find(order.begin(), order.end(), std::size_t{0});
  std::rotate(order.begin(), zero, order.end());
  if (order.size() > 2 && order.back() < order[1]) std::reverse(order.begin() + 1, order.end());
  return order;
}

inline std::vector<std::size_t> greedy_cycle(const DistanceMatrix& d) {
  const std::size_t n = d.rows();
  std::size_t a = 0, b = 1;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = i + 1; k < n; ++k)
      if (d(i, k) < d(a, b)) a = i, b = k;

  std::vector<std::size_t> path{a, b};
  std::vector<bool> used(n, false);
  used[a] = used[b] = true;
  while (path.size() < n) {
    const std::size_t last = path.back();
    std::size_t best = n;
    for (std::size_t k = 0; k < n; ++k)
      if (!used[k] && (best == n || d(last, k) < d(last, best))) best = k;
    path.push_back(best);
    used[best] = true;
  }
  return path;
}

// First-improvement 2-opt over the cyclic tour until no segment reversal
// lowers the cost.
inline void two_opt(const DistanceMatrix& d, std::vector<std::size_t>& tour) {
  const std::size_t n = tour.size();
  if (n < 4) return;
  bool improved = true;
  while (improved) {
    improved = false;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      for (std::size_t j = i + 2; j < n; ++j) {
        if (i == 0 && j == n - 1) continue;
        const std::size_t a = tour[i], b = tour[i + 1], c = tour[j], e = tour[(j + 1) % n];
        const double delta = d(a, c) + d(b, e) - d(a, b) - d(c, e);
        if (delta < -1e-12) {
          std::reverse(tour.begin() + static_cast<std::ptrdiff_t>(i) + 1,
                       tour.begin() + static_cast<std::ptrdiff_t>(j) + 1);
          improved = true;
        }
      }
    }
  }
}

// Exact minimum-cost Hamiltonian cycle by dynamic programming over subsets
// (Held-Karp), anchored at attribute 0.
inline std::vector<std::size_t> held_karp(const DistanceMatrix& d) {
  const std::size_t n = d.rows();
  const std::size_t full = std::size_t{1} << (n - 1);
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // cost[mask][k]: cheapest path from 0 through `mask` (over nodes 1..n-1) ending at node k+1.
  std::vector<double> cost(full * (n - 1), kInf);
  std::vector<std::uint8_t> parent(full * (n - 1), 0);
  for (std::size_t k = 0; k + 1 < n; ++k) cost[(std::size_t{1} << k) * (n - 1) + k] = d(0, k + 1);
  for (std::size_t mask = 1; mask < full; ++mask) {
    for (std::size_t k = 0; k + 1 < n; ++k) {
      if (!(mask & (std::size_t{1} << k))) continue;
      const double base = cost[mask * (n - 1) + k];
      if (base == kInf) continue;
      for (std::size_t next = 0; next + 1 < n; ++next) {
        if (mask & (std::size_t{1} << next)) continue;
        const std::size_t to = mask | (std::size_t{1} << next);
        const double c = base + d(k + 1, next + 1);
        if (c < cost[to * (n - 1) + next]) {
          cost[to * (n - 1) + next] = c;
          parent[to * (n - 1) + next] = static_cast<std::uint8_t>(k);
        }
      }
    }
  }
  const std::size_t all = full - 1;
  std::size_t last = 0;
  double best = kInf;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double c = cost[all * (n - 1) + k] + d(k + 1, 0);
    if (c < best) best = c, last = k;
  }
  std::vector<std::size_t> tour;
  std::size_t mask = all;
  std::size_t k = last;
  for (std::size_t step = 0; step + 1 < n; ++step) {
    tour.push_back(k + 1);
    const std::size_t prev = parent[mask * (n - 1) + k];
    mask &= ~(std::size_t{1} << k);
    k = prev;
  }
  tour.push_back(0);
  std::reverse(tour.begin(), tour.end());
  return tour;
}

}  // namespace detail

// Cyclic attribute order that keeps similar attributes adjacent. Greedy
// nearest-neighbor tour seeded at the closest pair, refined by 2-opt (and
// solved exactly for small n). Never worse than the identity order.
inline std::vector<std::size_t> order_attributes(const DistanceMatrix& d, const OrderingOptions& opts = {}) {
  const std::size_t n = d.rows();
  if (n < 3 || d.cols() != n) throw Error(ErrorCode::InvalidArgument, "distance matrix must be square with n >= 3");

  std::vector<std::size_t> identity(n);
  std::iota(identity.begin(), identity.end(), std::size_t{0});

  std::vector<std::size_t> tour = detail::greedy_cycle(d);
  if (opts.refine) {
    detail::two_opt(d, tour);
    std::vector<std::size_t> from_identity = identity;
    detail::two_opt(d, from_identity);
    if (cyclic_cost(d, from_identity) < cyclic_cost(d, tour)) tour = std::move(from_identity);
    if (n <= std::min<std::size_t>(opts.exact_limit, 20)) {
      auto exact = detail::held_karp(d);
      if (cyclic_cost(d, exact) < cyclic_cost(d, tour)) tour = std::move(exact);
    }
  }
  if (cyclic_cost(d, identity) < cyclic_cost(d, tour)) tour = identity;
  return detail::canonical_cycle(std::move(tour));
}

// Attribute vertices on the unit circle and the embedded sample positions.
struct LayoutModel {
  std::vector<std::size_t> order;     // order[rank] = attribute index
  std::vector<double> vertex_angles;  // indexed by attribute, radians
  std::vector<Vec2> points;           // one per sample

  Vec2 vertex(std::size_t attribute) const { return unit_at(vertex_angles[attribute]); }
  std::vector<Vec2> vertices() const {
    std::vector<Vec2> v(vertex_angles.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = vertex(i);
    return v;
  }
};

// Attribute order[k] sits at angle 2*pi*k/n.
inline std::vector<double> vertex_angles_for(std::span<const std::size_t> order) {
  const std::size_t n = order.size();
  std::vector<double> angles(n, 0.0);
  for (std::size_t rank = 0; rank < n; ++rank)
    angles[order[rank]] = kTwoPi * static_cast<double>(rank) / static_cast<double>(n);
  return angles;
}

// Generalized barycentric (RadViz) position of one weight row. Zero-sum rows
// sit at the origin; a row with a single nonzero weight sits exactly on that
// vertex (w * v / w can be off by an ulp). Summation runs in attribute order,
// so results do not depend on how rows are scheduled.
inline Vec2 barycenter(std::span<const double> weights, std::span<const Vec2> vertices) {
  Vec2 acc{};
  double total = 0.0;
  std::size_t support = 0, last = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] == 0.0) continue;
    acc += weights[i] * vertices[i];
    total += weights[i];
    ++support;
    last = i;
  }
  if (total <= 0.0) return {};
  if (support == 1) return vertices[last];
  return {acc.x / total, acc.y / total};
}

inline LayoutModel gbc_embed(const NormalizedTable& norm, std::span<const std::size_t> order) {
  const std::size_t n = norm.attribute_count();
  if (order.size() != n) throw Error(ErrorCode::LengthMismatch, "order length must equal attribute count");
  std::vector<bool> seen(n, false);
  for (std::size_t a : order) {
    if (a >= n || seen[a]) throw Error(ErrorCode::InvalidArgument, "order is not a permutation");
    seen[a] = true;
  }
  LayoutModel model;
  model.order.assign(order.begin(), order.end());
  model.vertex_angles = vertex_angles_for(order);
  const auto vertices = model.vertices();
  model.points.resize(norm.sample_count());
  for (std::size_t j = 0; j < norm.sample_count(); ++j)
    model.points[j] = barycenter(norm.norm_values.row(j), vertices);
  return model;
}

}  // namespace gbc_chroma
