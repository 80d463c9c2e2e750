#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "hypertree/calibration.hpp"
#include "hypertree/distortion.hpp"
#include "hypertree/galton_watson.hpp"
#include "hypertree/margin.hpp"
#include "hypertree/sarkar.hpp"

using namespace hypertree;

namespace {

SarkarOptions opts(int k, double kappa, double tau = 1.0) {
  SarkarOptions o;
  o.k = k;
  o.kappa = kappa;
  o.tau = tau;
  return o;
}

double ref_dist(const Vec& x, const Vec& y, double kappa) {
  const double num = (x - y).squaredNorm();
  const double den = (1 - x.squaredNorm()) * (1 - y.squaredNorm());
  return std::acosh(1 + 2 * num / den) / std::sqrt(kappa);
}

std::complex<double> mob(std::complex<double> a, std::complex<double> z) { return (a + z) / (1.0 + std::conj(a) * z); }

// Complex-plane Sarkar construction by Möbius maps: translate v to 0, read
// off the parent's angle there, put the n children at that angle plus
// 2 pi j/(n+1), j = 1..n, at radius tanh(tau sqrt(kappa)/2), translate back.
std::vector<std::complex<double>> literal_k2(const WeightedTree& t, double kappa, double tau) {
  const double rho = std::tanh(tau * std::sqrt(kappa) / 2);
  std::vector<std::complex<double>> z(t.size(), 0.0);
  for (NodeId v = 0; v < static_cast<NodeId>(t.size()); ++v) {
    const auto n = static_cast<int>(t.child_count(v));
    if (!n) continue;
    int j = 0;
    for (NodeId c : t.children(v)) {
      double ang;
      if (v == t.root()) {
        ang = 2 * std::numbers::pi * j / n;
      } else {
        const auto p = mob(-z[v], z[t.parent(v)]);
        ang = std::arg(p) + 2 * std::numbers::pi * (j + 1) / (n + 1);
      }
      z[c] = mob(z[v], std::polar(rho, ang));
      ++j;
    }
  }
  return z;
}

// Fixed-metric embedding for hand computations.
struct TableEmbedding {
  std::map<std::pair<NodeId, NodeId>, double> d;
  double distance(NodeId u, NodeId v) const { return d.at({std::min(u, v), std::max(u, v)}); }
};

}  // namespace

TEST(Sarkar, SingleEdgeAndAntipodalPair) {
  const auto edge = build_weighted({kNoParent, 0}, {0, 1.0}, 1);
  const auto e = sarkar_embed(edge, opts(2, 1.0, 1.3));
  EXPECT_NEAR(e.distance(0, 1), 1.3, 1e-14);
  EXPECT_NEAR(hyp_distance(BallPoint::origin(2), e.point(1), 1.0), 1.3, 1e-14);

  const auto t = build_mary(2, 1, 1.0);
  const auto e2 = sarkar_embed(t, opts(2, 1.0));
  EXPECT_NEAR(e2.distance(1, 2), 2.0, 1e-14);
  EXPECT_NEAR(distortion(t, e2, 100).distortion, 1.0, 1e-14);
}

TEST(Sarkar, MatchesLiteralMobiusConstruction) {
  for (auto [m, R, kappa] : {std::tuple{2, 4, 1.0}, std::tuple{3, 3, 0.7}, std::tuple{4, 3, 0.4}}) {
    const auto t = build_mary(m, R, 1.0);
    const auto e = sarkar_embed(t, opts(2, kappa));
    const auto z = literal_k2(t, kappa, 1.0);
    double worst = 0.0;
    for (NodeId u = 0; u < static_cast<NodeId>(t.size()); ++u) {
      Vec pu(2);
      pu << z[u].real(), z[u].imag();
      EXPECT_LE((e.point(u).coords - pu).norm(), 1e-12) << "node " << u;
      for (NodeId v = u + 1; v < static_cast<NodeId>(t.size()); ++v) {
        Vec pv(2);
        pv << z[v].real(), z[v].imag();
        worst = std::max(worst, std::abs(e.distance(u, v) - ref_dist(pu, pv, kappa)));
      }
    }
    EXPECT_LE(worst, 1e-9) << m << " " << R;
  }
}

TEST(Sarkar, EdgeLengthsAtHighCurvature) {
  const auto t = build_mary(3, 6, 1.0);
  const auto e = sarkar_embed(t, opts(2, 47.3));
  for (NodeId v = 1; v < static_cast<NodeId>(t.size()); ++v) EXPECT_NEAR(e.distance(v, t.parent(v)), 1.0, 1e-12);
}

TEST(Sarkar, HeterogeneousWeightsScaleSteps) {
  const auto t = build_weighted({kNoParent, 0, 0, 1}, {0, 0.5, 1.0, 2.0}, 2);
  const auto e = sarkar_embed(t, opts(3, 2.0, 0.5));
  EXPECT_NEAR(e.distance(0, 1), 0.5, 1e-14);
  EXPECT_NEAR(e.distance(0, 2), 1.0, 1e-14);
  EXPECT_NEAR(e.distance(1, 3), 2.0, 1e-14);
}

TEST(Distortion, ThreeNodeHandComputation) {
  const auto path = build_weighted({kNoParent, 0, 1}, {0, 1, 1}, 2);
  TableEmbedding E;
  E.d[{0, 1}] = 2.0;
  E.d[{1, 2}] = 1.0;
  E.d[{0, 2}] = 1.5;
  const auto r = distortion(path, E, 10);
  EXPECT_EQ(r.pairs, 3u);
  EXPECT_DOUBLE_EQ(r.worst_expansion, 2.0);
  EXPECT_DOUBLE_EQ(r.worst_contraction, 0.75);
  EXPECT_DOUBLE_EQ(r.distortion, 2.0);
  EXPECT_DOUBLE_EQ(r.scale_free, 2.0 / 0.75);
  E.d[{0, 1}] = 1.0;
  E.d[{0, 2}] = 0.25;
  EXPECT_DOUBLE_EQ(distortion(path, E, 10).distortion, 8.0);
}

TEST(Distortion, SampledModeIsSeededAndBounded) {
  const auto t = build_mary(3, 4, 1.0);
  const auto e = sarkar_embed(t, opts(2, 9.0));
  const auto exact = distortion(t, e, 1u << 30);
  const auto s1 = distortion(t, e, 5000, 42), s2 = distortion(t, e, 5000, 42);
  EXPECT_EQ(exact.mode, PairMode::exact);
  EXPECT_EQ(s1.mode, PairMode::sampled);
  EXPECT_EQ(s1.distortion, s2.distortion);
  EXPECT_LE(s1.distortion, exact.distortion);
}

TEST(Calibration, DistortionTargetAndMonotone) {
  const auto t = build_mary(3, 4, 1.0);
  CalibrationOptions co;
  co.k = 2;
  co.epsilon = 0.1;
  const auto cal = calibrate_curvature(t, co);
  EXPECT_LE(cal.report.distortion, 1.1);
  const auto e = sarkar_embed(t, opts(2, cal.kappa));
  EXPECT_LE(distortion(t, e, 1u << 30).distortion, 1.1);
  // Increasing curvature at fixed tau never worsens distortion.
  double prev = std::numeric_limits<double>::infinity();
  for (double sk : {1.0, 2.0, 4.0, 8.0, 16.0}) {
    const double d = distortion(t, sarkar_embed(t, opts(2, sk * sk)), 1u << 30).distortion;
    EXPECT_LE(d, prev * (1 + 1e-12));
    prev = d;
  }
}

TEST(Margin, SingleLevelClosedForm) {
  const auto t = build_mary(2, 1, 1.0);
  const auto e = sarkar_embed(t, opts(2, 1.0));
  const auto h = GeodesicHyperplane::through(BallPoint::origin(2), e.direction(1), 1.0);
  const double rho = std::tanh(0.5);
  const double closed = std::asinh(2 * rho / (1 - rho * rho));
  EXPECT_NEAR(closed, 1.0, 1e-15);
  EXPECT_NEAR(h.signed_distance(e.point(1)), 1.0, 1e-14);
  EXPECT_NEAR(h.signed_distance(e.point(2)), -1.0, 1e-14);
  const auto c1 = cone_margin(e, 0, 1), c2 = cone_margin(e, 0, 2);
  EXPECT_NEAR(c1.gamma, 1.0, 1e-14);
  EXPECT_NEAR(c1.gamma, c2.gamma, 1e-9);
  EXPECT_TRUE(c1.sides_ok && c2.sides_ok);
}

TEST(Margin, AllPositiveAtCalibratedCurvature) {
  const auto t = build_mary(3, 5, 1.0);
  CalibrationOptions co;
  co.k = 2;
  co.epsilon = 0.1;
  const auto e = sarkar_embed(t, opts(2, calibrate_curvature(t, co).kappa));
  for (NodeId a = 0; a < static_cast<NodeId>(t.size()); ++a) {
    if (t.is_leaf(a)) continue;
    for (NodeId c : t.children(a)) {
      const auto cm = cone_margin(e, a, c);
      ASSERT_GT(cm.gamma, 0.0);
      ASSERT_TRUE(cm.sides_ok);
      for (NodeId s : t.children(a))
        if (s != c) EXPECT_TRUE(cone_margin(e, a, c, s).sides_ok);
    }
    for (NodeId x : terminal_descendants(t, a)) EXPECT_EQ(decode_child(e, a, x), t.ancestor_at_depth(x, t.depth(a) + 1));
  }
}

TEST(Margin, LocalSignedDistanceMatchesCartesianHyperplane) {
  // At moderate curvature every point is Cartesian, so the hyperplane can be
  // evaluated by the Möbius route with the frame rotation.
  const auto t = build_mary(3, 3, 1.0);
  const auto e = sarkar_embed(t, opts(2, 0.8));
  for (NodeId a : {0, 1, 5}) {
    for (NodeId c : t.children(a)) {
      const auto cm = cone_margin(e, a, c);
      for (NodeId x : terminal_descendants(t, c))
        EXPECT_NEAR(cm.hyperplane.signed_distance(e.point(x)), e.signed_distance(a, cm.local_normal, x), 1e-9);
    }
  }
}

TEST(Margin, ClassifierClipAndLipschitz) {
  Rng rng(4);
  Vec base(2), n(2);
  base << 0.2, -0.3;
  n << 0.6, 0.8;
  const auto h = GeodesicHyperplane::through(BallPoint::cartesian(base), n, 1.0);
  const auto g = margin_classifier(h, 0.5);
  EXPECT_EQ(g(BallPoint::cartesian(base)), 0.0);
  EXPECT_EQ(g.from_signed_distance(0.5), 1.0);
  EXPECT_EQ(g.from_signed_distance(7.0), 1.0);
  EXPECT_EQ(g.from_signed_distance(-0.9), -1.0);
  EXPECT_THROW(margin_classifier(h, 0.0), std::invalid_argument);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    Vec a(2), b(2);
    do a << 2 * uniform01(rng) - 1, 2 * uniform01(rng) - 1; while (a.norm() >= 0.95);
    do b << 2 * uniform01(rng) - 1, 2 * uniform01(rng) - 1; while (b.norm() >= 0.95);
    const auto A = BallPoint::cartesian(a), B = BallPoint::cartesian(b);
    const double d = hyp_distance(A, B, 1.0);
    if (d > 0) worst = std::max(worst, std::abs(g(A) - g(B)) / d);
  }
  EXPECT_LE(worst, g.lipschitz_bound() + 1e-6);
}

TEST(Margin, PushforwardLipschitz) {
  const auto t = build_mary(2, 4, 1.0);
  const auto e = sarkar_embed(t, opts(2, 1.0));
  std::vector<NodeId> nodes(t.size());
  std::iota(nodes.begin(), nodes.end(), 0);
  const std::vector<double> flat(t.size(), 0.3);
  EXPECT_EQ(lipschitz_pushforward(e, flat, nodes).ratio, 0.0);

  struct Iso {
    const WeightedTree* t;
    double distance(NodeId u, NodeId v) const { return t->d_corr(u, v); }
  } iso{&t};
  std::vector<double> g(t.size());
  for (NodeId v = 0; v < static_cast<NodeId>(t.size()); ++v) g[v] = t.d_corr(0, v) / 8.0;
  EXPECT_LE(lipschitz_pushforward(iso, g, nodes).ratio, 1.0 / 8.0 + 1e-15);
}

TEST(Margin, PackingConverseArithmetic) {
  RegularGrowthReport g;
  g.m = 2.0;
  g.eta = 0.1;
  const auto p = packing_converse_check(g, 1, 1, 1, 2, 1.0);
  EXPECT_NEAR(p.leading_sqrt_kappa, std::log(2.0) - 0.1, 1e-15);
  EXPECT_NEAR(p.leading_sqrt_kappa, 0.5931, 1e-4);
  EXPECT_EQ(packing_converse_check(g, 1, std::numeric_limits<double>::infinity(), 1, 2, 1.0).leading_sqrt_kappa, 0.0);
  const auto t = build_mary(3, 6, 1.0);
  const auto growth = check_regular_growth(t, {0.1, 6, std::nullopt});
  EXPECT_TRUE(packing_converse_check(growth, 1, 1.1, 1, 2, 6.88 * 6.88).consistent);
}
