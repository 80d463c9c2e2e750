#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "hypertree/poincare.hpp"
#include "hypertree/rng.hpp"
#include "hypertree/spherical_code.hpp"

using namespace hypertree;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

Vec random_ball_point(Rng& rng, int k, double rmax) {
  Vec d(k);
  for (int i = 0; i < k; ++i) d(i) = standard_normal(rng);
  d.normalize();
  return d * (rmax * std::pow(uniform01(rng), 1.0 / k));
}

}  // namespace

TEST(Poincare, DistanceBasics) {
  const auto x = BallPoint::cartesian(v2(0.2, -0.1));
  EXPECT_EQ(hyp_distance(x, x, 1.0), 0.0);
  for (double kappa : {0.5, 1.0, 4.0})
    for (double tau : {0.1, 1.0, 3.0}) {
      const auto y = BallPoint::cartesian(v2(std::tanh(tau * std::sqrt(kappa) / 2), 0.0));
      EXPECT_NEAR(hyp_distance(BallPoint::origin(2), y, kappa), tau, 1e-12 * tau);
    }
}

TEST(Poincare, HighPrecisionOracle) {
  // 50-digit evaluation of 2 atanh(|(-x) (+) y|) for x = 0.3 e1, y = -0.3 e1.
  const double oracle = 1.2380784168124468618962693962442777503363664303567;
  const double d = hyp_distance(BallPoint::cartesian(v2(0.3, 0)), BallPoint::cartesian(v2(-0.3, 0)), 1.0);
  EXPECT_NEAR(d, oracle, 4e-16);
}

TEST(Poincare, PolarAndCartesianAgree) {
  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    Vec d1 = random_ball_point(rng, 3, 1.0).normalized(), d2 = random_ball_point(rng, 3, 1.0).normalized();
    const double r1 = 3.0 * uniform01(rng), r2 = 3.0 * uniform01(rng);
    const auto a = BallPoint::from_polar(d1, r1), b = BallPoint::from_polar(d2, r2);
    ASSERT_FALSE(a.is_polar());
    const double cart = hyp_distance(a, b, 1.0);
    const double polar = unit_polar_distance(r1, d1, r2, d2);
    EXPECT_NEAR(cart, polar, 1e-10 * std::max(1.0, cart));
  }
  // Deep points: radius 200 is far past double resolution of the boundary.
  const auto deep1 = BallPoint::from_polar(v2(1, 0), 200.0), deep2 = BallPoint::from_polar(v2(0, 1), 200.0);
  ASSERT_TRUE(deep1.is_polar());
  // sinh(d/2) = sinh(200) sin(pi/4)
  EXPECT_NEAR(hyp_distance(deep1, deep2, 1.0), 2 * (200 + std::log(std::sqrt(0.5))), 1e-10);
  EXPECT_NEAR(hyp_distance(BallPoint::origin(2), deep1, 4.0), 100.0, 1e-12);
}

TEST(Poincare, MobiusTranslationIsIsometry) {
  Rng rng(11);
  const auto h0 = mobius_to_origin(BallPoint::origin(3));
  const Vec y = random_ball_point(rng, 3, 0.9);
  EXPECT_EQ((h0.apply(y) - y).norm(), 0.0);
  EXPECT_EQ((mobius_back(h0, y) - y).norm(), 0.0);
  double worst = 0.0, worst_rt = 0.0;
  for (int t = 0; t < 10000; ++t) {
    const auto h = mobius_to_origin(BallPoint::cartesian(random_ball_point(rng, 3, 0.8)));
    const Vec a = random_ball_point(rng, 3, 0.8), b = random_ball_point(rng, 3, 0.8);
    const double d0 = hyp_distance(BallPoint::cartesian(a), BallPoint::cartesian(b), 1.0);
    const double d1 = hyp_distance(BallPoint::cartesian(h.apply(a)), BallPoint::cartesian(h.apply(b)), 1.0);
    worst = std::max(worst, std::abs(d0 - d1));
    worst_rt = std::max(worst_rt, (mobius_back(h, h.apply(a)) - a).norm());
    EXPECT_LT(h.apply(h.p).norm(), 1e-15);
  }
  EXPECT_LE(worst, 1e-9);
  EXPECT_LE(worst_rt, 1e-12);
}

TEST(Poincare, AlignIsRotation) {
  Rng rng(2);
  for (int k : {2, 3, 5})
    for (int t = 0; t < 50; ++t) {
      const Vec a = random_ball_point(rng, k, 1.0).normalized();
      Vec b = random_ball_point(rng, k, 1.0).normalized();
      if (t == 0) b = -a;
      const Mat Q = align(a, b);
      EXPECT_LE((Q * a - b).norm(), 1e-12);
      EXPECT_LE((Q.transpose() * Q - Mat::Identity(k, k)).norm(), 1e-12);
      EXPECT_NEAR(Q.determinant(), 1.0, 1e-12);
    }
}

TEST(SphericalCode, SmallCases) {
  for (int k : {2, 3, 4}) {
    const auto c = spherical_code(2, k);
    ASSERT_EQ(c.vectors.size(), 2u);
    EXPECT_NEAR(c.vectors[0].dot(c.vectors[1]), -1.0, 1e-15);
  }
  const auto sq = spherical_code(4, 2);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(sq.vectors[i].dot(sq.vectors[(i + 1) % 4]), 0.0, 1e-15);
  EXPECT_NEAR(sq.achieved_angle, std::numbers::pi / 2, 1e-15);
}

TEST(SphericalCode, OctahedronByDotProducts) {
  const auto c = spherical_code(6, 3, std::numbers::pi / 3);
  ASSERT_EQ(c.vectors.size(), 6u);
  EXPECT_TRUE(c.ok);
  double worst = std::numbers::pi;
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_NEAR(c.vectors[i].norm(), 1.0, 1e-12);
    for (std::size_t j = i + 1; j < 6; ++j) worst = std::min(worst, std::acos(std::clamp(c.vectors[i].dot(c.vectors[j]), -1.0, 1.0)));
  }
  EXPECT_GE(worst, std::numbers::pi / 3);
  // The optimum for six points on S^2 is the octahedron, angle pi/2.
  EXPECT_NEAR(worst, std::numbers::pi / 2, 1e-3);
  EXPECT_NEAR(c.achieved_angle, worst, 1e-9);
}

TEST(SphericalCode, ParentSlotReservesMinusE1) {
  for (int k : {2, 3}) {
    for (int n : {1, 2, 3, 5}) {
      const auto c = parent_slot_code(n, k);
      ASSERT_EQ(static_cast<int>(c.vectors.size()), n);
      Vec pe = Vec::Zero(k);
      pe(0) = -1.0;
      for (const auto& v : c.vectors) EXPECT_LT(v.dot(pe), 1.0 - 1e-6);
      if (k == 2)
        for (int j = 0; j < n; ++j) {
          const double a = std::numbers::pi + 2 * std::numbers::pi * (j + 1) / (n + 1);
          EXPECT_NEAR(c.vectors[j](0), std::cos(a), 1e-14);
          EXPECT_NEAR(c.vectors[j](1), std::sin(a), 1e-14);
        }
    }
  }
}

TEST(SphericalCode, Deterministic) {
  const auto a = spherical_code(9, 3), b = spherical_code(9, 3);
  for (int i = 0; i < 9; ++i) EXPECT_EQ((a.vectors[i] - b.vectors[i]).norm(), 0.0);
}
