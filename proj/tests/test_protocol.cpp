#include <gtest/gtest.h>

#include <cmath>

#include "hypertree/galton_watson.hpp"
#include "hypertree/lazy_embedding.hpp"
#include "hypertree/protocol.hpp"
#include "hypertree/sarkar.hpp"

using namespace hypertree;

namespace {

ProtocolConfig config(int m, int R, double rho, ProtocolMode mode = ProtocolMode::oracle) {
  ProtocolConfig c;
  c.m = m;
  c.R = R;
  c.rho = rho;
  c.mode = mode;
  return c;
}

NodeId node_of(const WeightedTree& t, int m, std::span<const int> path) {
  std::size_t off = 0;
  for (int d : path) off = off * m + (d - 1);
  return t.level_begin(static_cast<int>(path.size())) + static_cast<NodeId>(off);
}

}  // namespace

TEST(Protocol, NearNoiselessChannel) {
  const auto cfg = config(3, 5, 1e-9);
  Rng rng(1);
  Rng trng(2);
  const auto theta = PathParam::random(3, 5, trng);
  std::size_t flips = 0;
  const std::size_t n = 1000000;
  for (std::size_t s = 0; s < n; ++s) {
    const auto o = sample(cfg, theta, rng);
    flips += o.y != o.y_star;
  }
  EXPECT_LE(static_cast<double>(flips) / n, 1e-6);
}

TEST(Protocol, OracleChildUniform) {
  const auto cfg = config(4, 3, 0.1);
  Rng rng(9);
  const auto theta = PathParam{{1, 2, 3}};
  std::array<std::size_t, 4> cnt{};
  const std::size_t n = 1000000;
  for (std::size_t s = 0; s < n; ++s) ++cnt[sample(cfg, theta, rng).child - 1];
  const double sigma = std::sqrt(0.25 * 0.75 / n);
  for (auto c : cnt) EXPECT_NEAR(static_cast<double>(c) / n, 0.25, 3 * sigma);
}

TEST(Protocol, ProtocolModeMatchesCombinatorics) {
  const int m = 3, R = 4;
  const auto t = build_mary(m, R, 1.0);
  // Exactly m^(R-i) of the m^(R-i+1) admissible leaves lie below theta_i.
  for (NodeId u = 0; u < static_cast<NodeId>(t.size()); ++u)
    if (t.depth(u) < R)
      for (double p : child_index_marginals(t, u)) EXPECT_EQ(p, 1.0 / m);
  EXPECT_EQ(max_child_marginal_deviation(t), 0.0);
  const auto cfg = config(m, R, 0.2, ProtocolMode::protocol);
  const PathParam theta{{2, 3, 1, 2}};
  Rng rng(4);
  std::vector<std::size_t> hit(R, 0), tot(R, 0);
  for (int s = 0; s < 300000; ++s) {
    const auto o = sample(cfg, theta, rng);
    for (int d = 0; d < o.depth - 1; ++d) ASSERT_EQ(o.leaf[d], theta.theta[d]);
    ++tot[o.depth - 1];
    hit[o.depth - 1] += o.child == theta.theta[o.depth - 1];
  }
  for (int i = 0; i < R; ++i) {
    const double p = static_cast<double>(hit[i]) / tot[i];
    EXPECT_NEAR(p, 1.0 / m, 4 * std::sqrt((1.0 / m) * (1 - 1.0 / m) / tot[i]));
  }
}

TEST(Protocol, GaltonWatsonMarginalsMeasured) {
  const auto r = build_galton_watson(OffspringDistribution::uniform(1, 3), 6, 1.0, 5);
  ASSERT_TRUE(r.survived());
  const auto& t = *r.tree;
  double worst = 0.0;
  for (NodeId u = 0; u < static_cast<NodeId>(t.size()); ++u) {
    if (t.depth(u) >= 6 || t.subtree_leaf_count(u) == 0) continue;
    double tot = 0;
    for (NodeId c : t.children(u)) tot += static_cast<double>(t.subtree_leaf_count(c));
    for (NodeId c : t.children(u))
      worst = std::max(worst, std::abs(t.subtree_leaf_count(c) / tot - 1.0 / t.child_count(u)));
  }
  EXPECT_DOUBLE_EQ(max_child_marginal_deviation(t), worst);
}

TEST(Estimator, NoiselessOnePerCell) {
  const int m = 5, R = 4;
  const auto cfg = config(m, R, 0.1);
  const PathParam theta{{3, 1, 5, 2}};
  std::vector<Observation> obs;
  for (int i = 1; i <= R; ++i)
    for (int c = 1; c <= m; ++c) {
      Observation o;
      o.depth = i;
      o.child = c;
      o.y = o.y_star = c == theta.theta[i - 1];
      obs.push_back(o);
    }
  const auto est = depthwise_estimate(cfg, obs);
  EXPECT_EQ(est.theta_hat, theta.theta);
  EXPECT_EQ(risk(cfg, est.theta_hat, theta, est.starved).average, 0.0);
}

TEST(Estimator, TieBreaksToSmallestAndStarvedDepths) {
  const auto cfg = config(4, 2, 0.1);
  std::vector<Observation> obs;
  for (int c : {3, 2, 4}) {
    Observation o;
    o.depth = 1;
    o.child = c;
    o.y = c != 4;
    obs.push_back(o);
  }
  const auto est = depthwise_estimate(cfg, obs);
  EXPECT_EQ(est.theta_hat[0], 2);
  EXPECT_FALSE(est.starved[0]);
  EXPECT_TRUE(est.starved[1]);
  const PathParam theta{{2, 1}};
  EXPECT_NEAR(risk(cfg, est.theta_hat, theta, est.starved).average, 0.5 * (2.0 / 4), 1e-15);
}

TEST(Risk, EnumeratedConditionalError) {
  const int m = 6, R = 3;
  const auto cfg = config(m, R, 0.1);
  const PathParam theta{{1, 4, 6}};
  EXPECT_EQ(risk(cfg, theta.theta, theta).average, 0.0);
  std::vector<int> hat = theta.theta;
  hat[1] = 2;
  int wrong = 0;
  for (int c = 1; c <= m; ++c) wrong += (c == hat[1]) != (c == theta.theta[1]);
  const auto r = risk(cfg, hat, theta);
  EXPECT_DOUBLE_EQ(r.per_depth[1], static_cast<double>(wrong) / m);
  EXPECT_DOUBLE_EQ(r.per_depth[1], 2.0 / m);
  EXPECT_EQ(r.hamming, 1);
  const auto c2 = config(2, 3, 0.1);
  const PathParam t2{{1, 1, 2}};
  const std::vector<int> all_wrong{2, 2, 1};
  for (double e : risk(c2, all_wrong, t2).per_depth) EXPECT_EQ(e, 1.0);
}

TEST(Trials, PrefixConsistentAndThreadIndependent) {
  const auto cfg = config(4, 5, 0.15);
  const auto a = success_rate(cfg, 300, 64, 0.0, 17, 1), b = success_rate(cfg, 300, 64, 0.0, 17, 4);
  EXPECT_EQ(a.rate, b.rate);
  // First n draws of a trial are the same whatever n is.
  Rng r1(derive_seed(17, 3)), r2(derive_seed(17, 3));
  const auto th1 = PathParam::random(4, 5, r1), th2 = PathParam::random(4, 5, r2);
  EXPECT_EQ(th1.theta, th2.theta);
}

TEST(Trials, NStarReachesTarget) {
  const auto cfg = config(4, 4, 0.1);
  NStarOptions o;
  o.trials = 200;
  o.seed = 5;
  const auto r = find_n_star(cfg, o);
  ASSERT_TRUE(r.found);
  EXPECT_GE(r.success, 0.9);
  EXPECT_GE(success_rate(cfg, r.n_star, 200, 0.0, 5, 1).rate, 0.9);
  if (r.n_star > r.lo) EXPECT_LT(success_rate(cfg, r.n_star - 1, 200, 0.0, 5, 1).rate, 0.9);
}

TEST(Fano, BetaAndLimits) {
  EXPECT_NEAR(bsc_beta(0.25), 0.5 * std::log(3.0), 1e-15);
  EXPECT_NEAR(bsc_beta(0.25), 0.549306, 1e-6);
  const auto f = fano_constants(4, 3, 0.5 - 1e-14);
  EXPECT_TRUE(f.n_lower_infinite);
  EXPECT_THROW(bsc_beta(0.5), std::invalid_argument);
}

TEST(Fano, EmpiricalKlAgainstClosedForm) {
  const int m = 4, R = 5;
  const double rho = 0.1;
  const auto cfg = config(m, R, rho);
  const PathParam a{{1, 2, 3, 4, 1}};
  PathParam b = a;
  b.theta[2] = 1;
  const auto kl = empirical_kl(cfg, a, b, 1000000, 8);
  const auto f = fano_constants(m, R, rho);
  // Observations differ only at depth 3 with C in {theta_3, theta'_3}; there
  // the KL between the two flipped labels is (1 - 2 rho) log((1 - rho)/rho).
  const double exact = (1.0 / R) * (2.0 / m) * (1 - 2 * rho) * std::log((1 - rho) / rho);
  EXPECT_NEAR(f.adjacent_kl_cap, exact, 1e-15);
  EXPECT_LE(kl.estimate, f.adjacent_kl_cap + 3 * kl.stderr_);
  EXPECT_NEAR(kl.estimate, exact, 4 * kl.stderr_);
}

TEST(Packing, VarshamovGilbert) {
  const auto cb = vg_packing(2, 8, 1);
  EXPECT_EQ(cb.min_distance, 1);
  for (std::size_t i = 0; i < cb.words.size(); ++i)
    for (std::size_t j = i + 1; j < cb.words.size(); ++j) EXPECT_GE(hamming(cb.words[i], cb.words[j]), 1);
  const auto c1 = vg_packing(2, 16, 1), c2 = vg_packing(2, 16, 2);
  EXPECT_GE(c1.log_size, 0.5 * c2.log_size);
  for (std::size_t i = 0; i < c1.words.size(); ++i)
    for (std::size_t j = i + 1; j < c1.words.size(); ++j) ASSERT_GE(hamming(c1.words[i], c1.words[j]), c1.min_distance);
}

TEST(LazyEmbedding, AgreesWithFullEmbedding) {
  const int m = 3, R = 4;
  SarkarOptions so;
  so.k = 2;
  so.kappa = 6.0;
  const LazyMaryEmbedding lazy(m, R, so);
  const auto t = build_mary(m, R, 1.0);
  const auto full = sarkar_embed(t, so);
  Rng rng(6);
  for (int s = 0; s < 300; ++s) {
    const auto a = PathParam::random(m, R, rng).theta;
    auto b = PathParam::random(m, R, rng).theta;
    b.resize(1 + uniform_index(rng, R));
    EXPECT_NEAR(lazy.distance_between(a, b), full.distance(node_of(t, m, a), node_of(t, m, b)), 1e-10);
    for (int i = 1; i <= R; ++i) EXPECT_EQ(lazy.decode_child(a, i), a[i - 1]);
  }
}

TEST(LazyEmbedding, RepresentationRules) {
  auto cfg = config(3, 3, 0.1, ProtocolMode::protocol);
  cfg.representation = Representation::euclidean;
  Rng rng(1);
  const PathParam theta{{1, 2, 3}};
  const auto o = sample(cfg, theta, rng);
  EXPECT_THROW(observed_child(cfg, o), std::invalid_argument);
  cfg.representation = Representation::hyperbolic;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}
