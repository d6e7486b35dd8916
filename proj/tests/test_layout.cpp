#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gbc_chroma/layout.hpp"
#include "test_support.hpp"

using namespace gbc_chroma;

namespace {

NormalizedTable table_of(const Matrix& values) {
  NormalizedTable t;
  t.norm_values = values;
  t.sample_weights.assign(values.rows(), 0.0);
  return t;
}

// Exhaustive minimum over cyclic orders with attribute 0 fixed first.
double brute_force_min_cycle(const Matrix& d) {
  std::vector<std::size_t> perm(d.rows());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  double best = std::numeric_limits<double>::infinity();
  do best = std::min(best, cyclic_cost(d, perm));
  while (std::next_permutation(perm.begin() + 1, perm.end()));
  return best;
}

// Textbook Pearson in long double, two passes over the raw columns.
long double oracle_pearson(const std::vector<double>& a, const std::vector<double>& b) {
  long double ma = 0, mb = 0;
  for (std::size_t j = 0; j < a.size(); ++j) ma += a[j], mb += b[j];
  ma /= a.size();
  mb /= b.size();
  long double num = 0, da = 0, db = 0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    num += (a[j] - ma) * (b[j] - mb);
    da += (a[j] - ma) * (a[j] - ma);
    db += (b[j] - mb) * (b[j] - mb);
  }
  return num / std::sqrt(da * db);
}

bool is_permutation_of_n(const std::vector<std::size_t>& order, std::size_t n) {
  std::vector<std::size_t> sorted = order;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < n; ++i)
    if (sorted[i] != i) return false;
  return sorted.size() == n;
}

}  // namespace

TEST(AttributeDistances, IdenticalAndNegatedColumns) {
  Matrix v(5, 3);
  const double a[] = {0.1, 0.4, 0.2, 0.9, 0.5};
  for (std::size_t j = 0; j < 5; ++j) {
    v(j, 0) = a[j];
    v(j, 1) = a[j];
    v(j, 2) = 1.0 - a[j];
  }
  const auto d = attribute_distances(table_of(v));
  EXPECT_NEAR(d(0, 1), 0.0, 1e-15);
  EXPECT_NEAR(d(0, 2), 0.0, 1e-15);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(d(i, i), 0.0);
}

TEST(AttributeDistances, ConstantColumnHasZeroCorrelation) {
  Matrix v(3, 3);
  for (std::size_t j = 0; j < 3; ++j) v(j, 0) = 0.5, v(j, 1) = j, v(j, 2) = 2.0 - j;
  const auto d = attribute_distances(table_of(v));
  EXPECT_EQ(d(0, 1), 1.0);
  EXPECT_EQ(d(0, 2), 1.0);
}

TEST(AttributeDistances, MatchesPerPairPearsonOracle) {
  // b follows a, c is noise, d mirrors c.
  auto g = gbc_test::rng(3);
  Matrix v(40, 4);
  for (std::size_t j = 0; j < 40; ++j) {
    const double a = gbc_test::uniform(g), c = gbc_test::uniform(g);
    v(j, 0) = a;
    v(j, 1) = 0.8 * a + 0.2 * gbc_test::uniform(g);
    v(j, 2) = c;
    v(j, 3) = 1.0 - c + 0.1 * gbc_test::uniform(g);
  }
  const auto d = attribute_distances(table_of(v));
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t k = 0; k < 4; ++k) {
      const double expected = i == k ? 0.0 : static_cast<double>(1.0L - std::abs(oracle_pearson(v.column(i), v.column(k))));
      EXPECT_NEAR(d(i, k), expected, 1e-12) << i << "," << k;
      EXPECT_EQ(d(i, k), d(k, i));
    }
  EXPECT_LT(d(0, 1), 0.1);
  EXPECT_LT(d(2, 3), 0.1);
}

TEST(AttributeDistances, ColumnEuclideanScaledToUnit) {
  auto g = gbc_test::rng(8);
  Matrix v(10, 5);
  for (double& x : v.data()) x = gbc_test::uniform(g);
  const auto d = attribute_distances(table_of(v), DistanceMetric::column_euclidean);
  EXPECT_EQ(*std::max_element(d.data().begin(), d.data().end()), 1.0);
  for (double x : d.data()) EXPECT_GE(x, 0.0);
}

TEST(AttributeDistances, CorrelationNeedsTwoRows) {
  try {
    attribute_distances(table_of(Matrix(1, 3, 0.5)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooFewRows);
  }
}

TEST(OrderAttributes, ThreeAttributesCostIsTheTriangle) {
  auto g = gbc_test::rng(1);
  const auto d = gbc_test::random_distances(g, 3);
  const auto order = order_attributes(d);
  EXPECT_TRUE(is_permutation_of_n(order, 3));
  EXPECT_DOUBLE_EQ(cyclic_cost(d, order), d(0, 1) + d(1, 2) + d(2, 0));
}

TEST(OrderAttributes, RefinedOrderIsExhaustiveOptimumForSmallN) {
  auto g = gbc_test::rng(2024);
  for (std::size_t n = 3; n <= 7; ++n) {
    for (int trial = 0; trial < 50; ++trial) {
      const auto d = gbc_test::random_distances(g, n);
      const auto order = order_attributes(d);
      ASSERT_TRUE(is_permutation_of_n(order, n));
      EXPECT_NEAR(cyclic_cost(d, order), brute_force_min_cycle(d), 1e-12) << "n=" << n << " trial=" << trial;
    }
  }
}

TEST(OrderAttributes, TwoOptAloneNeverWorseThanGreedyOrIdentity) {
  // Without the exact pass the result is a 2-opt local optimum: bounded
  // below by the optimum and above by the identity order.
  auto g = gbc_test::rng(99);
  std::vector<std::size_t> identity(9);
  std::iota(identity.begin(), identity.end(), std::size_t{0});
  for (int trial = 0; trial < 50; ++trial) {
    const auto d = gbc_test::random_distances(g, 9);
    const double opt = brute_force_min_cycle(d);
    for (bool refine : {false, true}) {
      const auto order = order_attributes(d, {.refine = refine, .exact_limit = 0});
      const double cost = cyclic_cost(d, order);
      EXPECT_GE(cost, opt - 1e-12);
      EXPECT_LE(cost, cyclic_cost(d, identity) + 1e-12);
    }
  }
}

TEST(OrderAttributes, BlockStructureKeepsPairsAdjacent) {
  // A=0, B=1 similar; C=2, D=3 similar; cross-block distance 1.
  Matrix d(4, 4, 1.0);
  for (std::size_t i = 0; i < 4; ++i) d(i, i) = 0.0;
  d(0, 1) = d(1, 0) = 0.1;
  d(2, 3) = d(3, 2) = 0.2;
  EXPECT_DOUBLE_EQ(brute_force_min_cycle(d), 2.3);
  const auto order = order_attributes(d);
  const auto adjacent = [&](std::size_t a, std::size_t b) {
    for (std::size_t k = 0; k < 4; ++k) {
      const std::size_t x = order[k], y = order[(k + 1) % 4];
      if ((x == a && y == b) || (x == b && y == a)) return true;
    }
    return false;
  };
  EXPECT_TRUE(adjacent(0, 1));
  EXPECT_TRUE(adjacent(2, 3));
}

TEST(OrderAttributes, LargerNIsDeterministicAndNotWorseThanIdentity) {
  auto g = gbc_test::rng(5);
  const auto d = gbc_test::random_distances(g, 25);
  const auto a = order_attributes(d);
  const auto b = order_attributes(d);
  EXPECT_EQ(a, b);
  EXPECT_TRUE(is_permutation_of_n(a, 25));
  std::vector<std::size_t> identity(25);
  std::iota(identity.begin(), identity.end(), std::size_t{0});
  EXPECT_LE(cyclic_cost(d, a), cyclic_cost(d, identity));
}

TEST(GbcEmbed, VertexCases) {
  Matrix v(4, 3, 0.0);
  v(0, 0) = 1.0;                           // one-hot
  v(1, 0) = v(1, 1) = v(1, 2) = 0.7;       // all equal
  v(2, 0) = v(2, 1) = 1.0;                 // two-point barycenter
  // row 3 stays all-zero
  const std::vector<std::size_t> order{0, 1, 2};
  const auto layout = gbc_embed(table_of(v), order);
  EXPECT_EQ(layout.points[0], layout.vertex(0));
  EXPECT_EQ(layout.points[0], (Vec2{1.0, 0.0}));
  EXPECT_NEAR(norm(layout.points[1]), 0.0, 1e-12);
  const Vec2 mid = 0.5 * (layout.vertex(0) + layout.vertex(1));
  EXPECT_NEAR(layout.points[2].x, mid.x, 1e-15);
  EXPECT_NEAR(layout.points[2].y, mid.y, 1e-15);
  EXPECT_EQ(layout.points[3], (Vec2{0.0, 0.0}));
}

TEST(GbcEmbed, VerticesEquallySpacedInOrder) {
  const std::vector<std::size_t> order{2, 0, 3, 1};
  const auto layout = gbc_embed(table_of(Matrix(1, 4, 0.5)), order);
  for (std::size_t rank = 0; rank < 4; ++rank) {
    EXPECT_DOUBLE_EQ(layout.vertex_angles[order[rank]], kTwoPi * rank / 4.0);
    EXPECT_NEAR(norm(layout.vertex(order[rank])), 1.0, 1e-15);
  }
}

TEST(GbcEmbed, MatchesExtendedPrecisionOracle) {
  auto g = gbc_test::rng(20);
  Matrix v(20, 6);
  for (std::size_t j = 0; j < 20; ++j)
    for (std::size_t i = 0; i < 6; ++i) v(j, i) = gbc_test::uniform(g);
  const std::vector<std::size_t> order{3, 1, 5, 0, 2, 4};
  const auto layout = gbc_embed(table_of(v), order);
  for (std::size_t j = 0; j < 20; ++j) {
    long double sx = 0, sy = 0, sw = 0;
    for (std::size_t rank = 0; rank < 6; ++rank) {
      const long double angle = 2.0L * 3.141592653589793238462643383279L * rank / 6.0L;
      const long double w = v(j, order[rank]);
      sx += w * std::cos(angle);
      sy += w * std::sin(angle);
      sw += w;
    }
    EXPECT_NEAR(layout.points[j].x, static_cast<double>(sx / sw), 1e-12);
    EXPECT_NEAR(layout.points[j].y, static_cast<double>(sy / sw), 1e-12);
  }
}

TEST(GbcEmbed, ContainmentAndRotationEquivariance) {
  auto g = gbc_test::rng(77);
  for (std::size_t n = 3; n <= 10; ++n) {
    Matrix v(50, n);
    for (double& x : v.data()) x = gbc_test::uniform(g);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), g);
    const auto base = gbc_embed(table_of(v), order);
    std::vector<std::size_t> rotated(n);
    for (std::size_t k = 0; k < n; ++k) rotated[k] = order[(k + 1) % n];
    const auto turned = gbc_embed(table_of(v), rotated);
    for (std::size_t j = 0; j < 50; ++j) {
      EXPECT_LE(norm(base.points[j]), 1.0 + 1e-12);
      // Every attribute moved back one slot, i.e. by -2*pi/n.
      const Vec2 back = rotate(turned.points[j], kTwoPi / static_cast<double>(n));
      EXPECT_NEAR(back.x, base.points[j].x, 1e-12);
      EXPECT_NEAR(back.y, base.points[j].y, 1e-12);
    }
  }
}

TEST(GbcEmbed, SimilarRowsLandClose) {
  auto g = gbc_test::rng(31);
  const std::size_t n = 7;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int trial = 0; trial < 200; ++trial) {
    const double eps = gbc_test::uniform(g, 1e-6, 0.05);
    Matrix v(2, n);
    double sum0 = 0, sum1 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      v(0, i) = gbc_test::uniform(g, 0.1, 0.9);
      v(1, i) = std::clamp(v(0, i) + gbc_test::uniform(g, -eps, eps), 0.0, 1.0);
      sum0 += v(0, i);
      sum1 += v(1, i);
    }
    ASSERT_GE(std::min(sum0, sum1), 0.5);
    const auto layout = gbc_embed(table_of(v), order);
    EXPECT_LE(norm(layout.points[0] - layout.points[1]), static_cast<double>(n) * eps);
  }
}

TEST(GbcEmbed, RejectsBadOrder) {
  EXPECT_THROW(gbc_embed(table_of(Matrix(1, 3, 0.5)), std::vector<std::size_t>{0, 1}), Error);
  EXPECT_THROW(gbc_embed(table_of(Matrix(1, 3, 0.5)), std::vector<std::size_t>{0, 1, 1}), Error);
}

TEST(GbcEmbed, SingleNonzeroWeightLandsExactlyOnVertex) {
  auto g = gbc_test::rng(77);
  for (std::size_t n = 3; n <= 10; ++n) {
    Matrix v(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) v(i, i) = gbc_test::uniform(g, 1e-3, 1.0);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto layout = gbc_embed(table_of(v), order);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_EQ(layout.points[i].x, layout.vertex(i).x);
      EXPECT_EQ(layout.points[i].y, layout.vertex(i).y);
    }
  }
}
