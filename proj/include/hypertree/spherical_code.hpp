#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "hypertree/poincare.hpp"
#include "hypertree/rng.hpp"

namespace hypertree {

struct SphericalCode {
  std::vector<Vec> vectors;
  double achieved_angle = std::numbers::pi;  // min pairwise angle (pi for n = 1)
  double min_angle = 0.0;                    // requested
  bool ok = true;
};

struct SphericalCodeOptions {
  std::uint64_t seed = 0x9e3779b97f4a7c15ULL;
  int iterations = 4000;
  int restarts = 4;
  double riesz_exponent = 12.0;
};

namespace detail {

inline Vec unit_axis(int k, int i, double sign = 1.0) {
  Vec e = Vec::Zero(k);
  e(i) = sign;
  return e;
}

inline double min_pairwise_angle(const std::vector<Vec>& pts) {
  double best = std::numbers::pi;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j)
      best = std::min(best, std::acos(std::clamp(pts[i].dot(pts[j]), -1.0, 1.0)));
  return best;
}

inline Vec angle_vec(double a) {
  Vec v(2);
  v << std::cos(a), std::sin(a);
  return v;
}

/// Riesz-energy repulsion on S^{k-1}; the first `pinned` points stay fixed.
inline std::vector<Vec> riesz_descent(std::vector<Vec> pts, std::size_t pinned,
                                      const SphericalCodeOptions& opt) {
  const std::size_t n = pts.size();
  const double s = opt.riesz_exponent;
  std::vector<Vec> force(n);
  for (int it = 0; it < opt.iterations; ++it) {
    double max_f = 0.0;
    for (std::size_t i = pinned; i < n; ++i) {
      Vec f = Vec::Zero(pts[i].size());
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const Vec diff = pts[i] - pts[j];
        const double d = std::max(diff.norm(), 1e-12);
        f += diff / std::pow(d, s + 2.0);
      }
      f -= f.dot(pts[i]) * pts[i];
      force[i] = f;
      max_f = std::max(max_f, f.norm());
    }
    if (max_f == 0.0) break;
    const double frac = static_cast<double>(it) / opt.iterations;
    const double step = 0.2 * (1.0 - frac) + 1e-4;
    for (std::size_t i = pinned; i < n; ++i) {
      pts[i] += (step / max_f) * force[i];
      pts[i].normalize();
    }
  }
  return pts;
}

inline std::vector<Vec> random_sphere_points(int k, std::size_t n, Rng& rng) {
  std::vector<Vec> pts;
  for (std::size_t i = 0; i < n; ++i) {
    Vec v(k);
    do {
      for (int d = 0; d < k; ++d) v(d) = standard_normal(rng);
    } while (v.norm() < 1e-9);
    pts.push_back(v.normalized());
  }
  return pts;
}

inline SphericalCode finish_code(std::vector<Vec> vectors, double achieved, double min_angle) {
  SphericalCode c;
  c.vectors = std::move(vectors);
  c.achieved_angle = achieved;
  c.min_angle = min_angle;
  c.ok = achieved >= min_angle - 1e-12;
  return c;
}

}  // namespace detail

/// n unit vectors in R^k with large pairwise angles, first vector e1.
/// k = 2 is exact equal spacing; k >= 3 runs seeded Riesz repulsion and keeps
/// the best of several restarts. `ok` is false when min_angle is not reached.
inline SphericalCode spherical_code(int n, int k, double min_angle = 0.0,
                                    const SphericalCodeOptions& opt = {}) {
  if (n < 1) throw std::invalid_argument("spherical_code: n must be >= 1");
  if (k < 2) throw std::invalid_argument("spherical_code: k must be >= 2");
  std::vector<Vec> pts;
  if (n == 1) return detail::finish_code({detail::unit_axis(k, 0)}, std::numbers::pi, min_angle);
  if (n == 2)
    return detail::finish_code({detail::unit_axis(k, 0), detail::unit_axis(k, 0, -1.0)},
                               std::numbers::pi, min_angle);
  if (k == 2) {
    for (int j = 0; j < n; ++j) pts.push_back(detail::angle_vec(2.0 * std::numbers::pi * j / n));
    return detail::finish_code(std::move(pts), 2.0 * std::numbers::pi / n, min_angle);
  }
  Rng rng(opt.seed);
  double best_angle = -1.0;
  for (int r = 0; r < std::max(1, opt.restarts); ++r) {
    auto cand = detail::riesz_descent(detail::random_sphere_points(k, n, rng), 0, opt);
    const double a = detail::min_pairwise_angle(cand);
    if (a > best_angle) {
      best_angle = a;
      pts = std::move(cand);
    }
  }
  const Mat Q = align(pts[0], detail::unit_axis(k, 0));
  for (auto& p : pts) p = (Q * p).normalized();
  pts[0] = detail::unit_axis(k, 0);
  return detail::finish_code(std::move(pts), detail::min_pairwise_angle(pts), min_angle);
}

/// n child directions for a non-root node: a code of n + 1 points with one
/// point pinned at -e1 (toward the parent) and the n free points returned.
/// The achieved angle includes the separation from the parent slot.
inline SphericalCode parent_slot_code(int n, int k, double min_angle = 0.0,
                                      const SphericalCodeOptions& opt = {}) {
  if (n < 1) throw std::invalid_argument("parent_slot_code: n must be >= 1");
  if (k < 2) throw std::invalid_argument("parent_slot_code: k must be >= 2");
  std::vector<Vec> pts;
  if (n == 1) return detail::finish_code({detail::unit_axis(k, 0)}, std::numbers::pi, min_angle);
  if (k == 2) {
    for (int j = 1; j <= n; ++j)
      pts.push_back(detail::angle_vec(std::numbers::pi + 2.0 * std::numbers::pi * j / (n + 1)));
    return detail::finish_code(std::move(pts), 2.0 * std::numbers::pi / (n + 1), min_angle);
  }
  Rng rng(opt.seed);
  double best_angle = -1.0;
  std::vector<Vec> best;
  for (int r = 0; r < std::max(1, opt.restarts); ++r) {
    std::vector<Vec> init{detail::unit_axis(k, 0, -1.0)};
    for (auto& p : detail::random_sphere_points(k, n, rng)) init.push_back(p);
    auto cand = detail::riesz_descent(std::move(init), 1, opt);
    const double a = detail::min_pairwise_angle(cand);
    if (a > best_angle) {
      best_angle = a;
      best = std::move(cand);
    }
  }
  pts.assign(best.begin() + 1, best.end());
  return detail::finish_code(std::move(pts), best_angle, min_angle);
}

}  // namespace hypertree
