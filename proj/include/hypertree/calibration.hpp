#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "hypertree/distortion.hpp"
#include "hypertree/sarkar.hpp"

namespace hypertree {

struct CurvatureCalibration {
  double kappa = 0.0;
  double sqrt_kappa = 0.0;
  double tau = 0.0;
  double implied_c_k = 0.0;  // sqrt(kappa) lambda epsilon / log(Delta)
  DistortionReport report;
  int probes = 0;
};

struct CalibrationOptions {
  int k = 2;
  double epsilon = 0.1;
  std::size_t pair_budget = 2'000'000;
  std::uint64_t seed = 0;
  double rel_tol = 1e-4;
  SphericalCodeOptions code{};
};

/// Smallest kappa (to rel_tol in sqrt(kappa)) whose embedding with tau = lambda
/// has distortion <= 1 + epsilon, by doubling then geometric bisection.
inline CurvatureCalibration calibrate_curvature(const WeightedTree& tree, const CalibrationOptions& opt) {
  const double lambda = tree.homogeneous_weight().value_or(tree.min_weight());
  if (!(lambda > 0.0)) throw std::invalid_argument("calibrate_curvature: tree needs positive weights");
  CurvatureCalibration out;
  out.tau = lambda;
  auto probe = [&](double sk) {
    ++out.probes;
    SarkarOptions so;
    so.k = opt.k;
    so.kappa = sk * sk;
    so.tau = lambda;
    so.epsilon = opt.epsilon;
    so.code = opt.code;
    return distortion(tree, sarkar_embed(tree, so), opt.pair_budget, opt.seed);
  };
  const double target = 1.0 + opt.epsilon;
  // unit-curvature step lambda*sqrt(kappa) is kept below ~600/R so boosts stay finite
  const double sk_max = 600.0 / (lambda * std::max(1, tree.max_depth()));
  double hi = 1.0 / lambda, lo = 0.0;
  DistortionReport hi_rep = probe(hi);
  if (hi_rep.distortion <= target) {
    lo = hi;
    for (;;) {
      lo *= 0.5;
      const auto rep = probe(lo);
      if (rep.distortion > target) break;
      hi = lo;
      hi_rep = rep;
      if (lo < 1e-9) throw std::runtime_error("calibrate_curvature: no lower bracket");
    }
  } else {
    for (;;) {
      lo = hi;
      hi *= 2.0;
      if (hi > sk_max) throw std::runtime_error("calibrate_curvature: target distortion not reached");
      hi_rep = probe(hi);
      if (hi_rep.distortion <= target) break;
    }
  }
  while (hi / lo - 1.0 > opt.rel_tol) {
    const double mid = std::sqrt(lo * hi);
    const auto rep = probe(mid);
    if (rep.distortion <= target) {
      hi = mid;
      hi_rep = rep;
    } else {
      lo = mid;
    }
  }
  out.sqrt_kappa = hi;
  out.kappa = hi * hi;
  out.report = hi_rep;
  const double delta = static_cast<double>(tree.max_children());
  out.implied_c_k = delta > 1.0 ? hi * lambda * opt.epsilon / std::log(delta) : 0.0;
  return out;
}

}  // namespace hypertree
