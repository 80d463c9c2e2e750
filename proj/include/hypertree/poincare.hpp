#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

namespace hypertree {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

namespace detail {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b), lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

/// log(sinh(x)) for x >= 0, finite for large x.
inline double log_sinh(double x) {
  if (x <= 0.0) return kNegInf;
  if (x < 20.0) return std::log(std::sinh(x));
  return x - std::log(2.0) + std::log1p(-std::exp(-2.0 * x));
}

/// asinh(exp(L)) without overflow.
inline double asinh_exp(double L) {
  if (L == kNegInf) return 0.0;
  if (L < 20.0) return std::asinh(std::exp(L));
  return L + std::log1p(std::sqrt(1.0 + std::exp(-2.0 * L)));
}

}  // namespace detail

/// Distance at unit curvature between points given in polar form about a
/// common origin: radii r1, r2 and unit directions d1, d2. Uses
///   sinh^2(d/2) = sinh^2((r1-r2)/2) + sinh(r1) sinh(r2) sin^2(theta/2)
/// in the log domain, with sin(theta/2) = |d1 - d2| / 2 read off the chord,
/// so neither small angles nor large radii lose precision.
template <class A, class B>
double unit_polar_distance(double r1, const A& d1, double r2, const B& d2) {
  using detail::kNegInf;
  const double half_chord = std::min(1.0, 0.5 * (d1 - d2).norm());
  const double dr = 0.5 * std::abs(r1 - r2);
  const double radial = dr > 0.0 ? 2.0 * detail::log_sinh(dr) : kNegInf;
  const double angular = (half_chord > 0.0 && r1 > 0.0 && r2 > 0.0)
                             ? detail::log_sinh(r1) + detail::log_sinh(r2) + 2.0 * std::log(half_chord)
                             : kNegInf;
  const double log_q = detail::log_add_exp(radial, angular);
  return 2.0 * detail::asinh_exp(0.5 * log_q);
}

/// Polar description of a deep point: unit direction and the hyperbolic
/// radius at unit curvature (divide by sqrt(kappa) for curvature -kappa).
struct PolarForm {
  Vec direction;
  double unit_radius = 0.0;
};

/// Point of the Poincare ball. `coords` always holds the Cartesian rendering;
/// points closer than 1e-12 to the boundary also carry `polar`, which is then
/// authoritative (the Cartesian norm may have rounded to 1).
struct BallPoint {
  Vec coords;
  std::optional<PolarForm> polar;

  static constexpr double kPolarThreshold = 1e-12;

  int dim() const { return static_cast<int>(coords.size()); }
  bool is_polar() const { return polar.has_value(); }

  static BallPoint cartesian(Vec x) {
    if (!(x.norm() < 1.0)) throw std::domain_error("BallPoint: point on or outside the boundary");
    return BallPoint{std::move(x), std::nullopt};
  }

  static BallPoint origin(int k) { return BallPoint{Vec::Zero(k), std::nullopt}; }

  /// From polar data; keeps the polar form only when the Cartesian norm is
  /// within kPolarThreshold of 1.
  static BallPoint from_polar(const Vec& direction, double unit_radius) {
    if (unit_radius < 0.0) throw std::domain_error("BallPoint: negative radius");
    const double rho = std::tanh(0.5 * unit_radius);
    BallPoint p;
    p.coords = rho * direction;
    // 1 - tanh(r/2) = 2 / (1 + e^r)
    const double gap = 2.0 / (1.0 + std::exp(unit_radius));
    if (gap < kPolarThreshold) p.polar = PolarForm{direction, unit_radius};
    return p;
  }

  /// Polar form, derived from the Cartesian coordinates when not stored.
  PolarForm to_polar() const {
    if (polar) return *polar;
    const double n = coords.norm();
    if (n == 0.0) {
      Vec e = Vec::Zero(coords.size());
      e(0) = 1.0;
      return {e, 0.0};
    }
    return {coords / n, 2.0 * std::atanh(n)};
  }
};

/// Möbius addition x ⊕ y in the unit ball.
inline Vec mobius_add(const Vec& x, const Vec& y) {
  const double xy = x.dot(y), xx = x.squaredNorm(), yy = y.squaredNorm();
  const double den = 1.0 + 2.0 * xy + xx * yy;
  return ((1.0 + 2.0 * xy + yy) * x + (1.0 - xx) * y) / den;
}

/// ‖(−x) ⊕ y‖ via the closed form ‖x − y‖ / sqrt(1 − 2⟨x,y⟩ + ‖x‖²‖y‖²).
inline double mobius_diff_norm(const Vec& x, const Vec& y) {
  const double den = 1.0 - 2.0 * x.dot(y) + x.squaredNorm() * y.squaredNorm();
  return (x - y).norm() / std::sqrt(den);
}

/// Hyperbolic distance at curvature −kappa, scaled so that the point of norm
/// tanh(tau·sqrt(kappa)/2) sits at distance tau from the origin.
inline double hyp_distance(const BallPoint& x, const BallPoint& y, double kappa) {
  if (!(kappa > 0.0)) throw std::domain_error("hyp_distance: kappa must be positive");
  if (x.dim() != y.dim()) throw std::invalid_argument("hyp_distance: dimension mismatch");
  const double scale = 1.0 / std::sqrt(kappa);
  if (x.is_polar() || y.is_polar()) {
    const PolarForm px = x.to_polar(), py = y.to_polar();
    return scale * unit_polar_distance(px.unit_radius, px.direction, py.unit_radius, py.direction);
  }
  if (!(x.coords.norm() < 1.0) || !(y.coords.norm() < 1.0))
    throw std::domain_error("hyp_distance: point on or outside the boundary");
  const double z = std::min(mobius_diff_norm(x.coords, y.coords), 1.0);
  if (z >= 1.0) throw std::domain_error("hyp_distance: Möbius difference reached the boundary");
  return 2.0 * scale * std::atanh(z);
}

/// The isometry x ↦ (−p) ⊕ x taking p to the origin; `back` is its inverse.
struct MobiusTranslation {
  Vec p;
  Vec apply(const Vec& x) const { return mobius_add(-p, x); }
  Vec back(const Vec& y) const { return mobius_add(p, y); }
};

inline MobiusTranslation mobius_to_origin(const BallPoint& p) {
  if (p.is_polar()) throw std::domain_error("mobius_to_origin: point too deep for Cartesian maps");
  if (!(p.coords.norm() < 1.0)) throw std::domain_error("mobius_to_origin: point outside the ball");
  return {p.coords};
}

inline Vec mobius_back(const MobiusTranslation& h, const Vec& y) { return h.back(y); }

/// Rotation taking unit vector `from` onto unit vector `to`: the minimal
/// rotation in their common plane. Antipodal inputs get a half turn, in the
/// plane spanned by `from` and the first coordinate axis not parallel to it.
inline Mat align(const Vec& from, const Vec& to) {
  const auto k = from.size();
  if (to.size() != k) throw std::invalid_argument("align: dimension mismatch");
  const double c = from.dot(to);
  Mat I = Mat::Identity(k, k);
  if (c > -1.0 + 1e-12) {
    const Mat W = to * from.transpose() - from * to.transpose();
    return I + W + (W * W) / (1.0 + c);
  }
  // Half turn: reflect twice, fixing the complement of span{from, w}.
  Vec w = Vec::Zero(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    Vec e = Vec::Zero(k);
    e(i) = 1.0;
    w = e - e.dot(from) * from;
    if (w.norm() > 1e-6) break;
  }
  w.normalize();
  return I - 2.0 * from * from.transpose() - 2.0 * w * w.transpose();
}

}  // namespace hypertree
