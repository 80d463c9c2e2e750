#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "hypertree/sarkar.hpp"

namespace hypertree {

/// The recursive construction on a complete m-ary tree, evaluated on demand
/// along a single root-to-leaf path (digits 1..m). Agrees with sarkar_embed
/// on build_mary(m, R, tau) with the same options.
class LazyMaryEmbedding {
 public:
  LazyMaryEmbedding(int m, int R, const SarkarOptions& opt) : m_(m), R_(R), opt_(opt) {
    if (m < 2) throw std::invalid_argument("LazyMaryEmbedding: m must be >= 2");
    if (R < 1) throw std::invalid_argument("LazyMaryEmbedding: R must be >= 1");
    CodeBook book(opt.k, opt.code);
    root_ = book.root(m).vectors;
    inner_ = book.inner(m);
    ell_ = std::sqrt(opt.kappa) * opt.tau;
  }

  int m() const { return m_; }
  int R() const { return R_; }
  int dim() const { return opt_.k; }
  double kappa() const { return opt_.kappa; }
  double tau() const { return opt_.tau; }

  /// Placement directions u_1..u_L of the nodes on `path` (each in its
  /// parent's frame).
  std::vector<Vec> directions(std::span<const int> path) const {
    std::vector<Vec> out;
    out.reserve(path.size());
    for (std::size_t d = 0; d < path.size(); ++d) {
      const int digit = path[d];
      if (digit < 1 || digit > m_) throw std::invalid_argument("LazyMaryEmbedding: digit out of range");
      if (d == 0) out.push_back(root_[digit - 1]);
      else out.push_back(child_directions_of(out.back())[digit - 1]);
    }
    return out;
  }

  /// Child directions, in the frame of the depth-t node on `path`.
  std::vector<Vec> child_directions_at(std::span<const int> path, int t) const {
    if (t == 0) return root_;
    const auto dirs = directions(path.first(static_cast<std::size_t>(t)));
    return child_directions_of(dirs.back());
  }

  /// The node named by the full `path` in the frame of its depth-t ancestor.
  PolarForm polar_in_frame(std::span<const int> path, int t) const {
    const auto dirs = directions(path);
    auto y = ScaledHyperboloid::origin(opt_.k);
    for (int d = static_cast<int>(path.size()); d > t; --d) y.boost(dirs[d - 1], ell_);
    return {y.direction(), y.unit_radius()};
  }

  /// Which child (1..m) of the depth-(i-1) path node contains the point of
  /// `path`, read from its direction in that node's frame.
  int decode_child(std::span<const int> path, int i) const {
    if (i < 1 || i > static_cast<int>(path.size())) throw std::invalid_argument("decode_child: depth out of range");
    const auto dirs = directions(path);
    auto y = ScaledHyperboloid::origin(opt_.k);
    for (int d = static_cast<int>(path.size()); d > i - 1; --d) y.boost(dirs[d - 1], ell_);
    const Vec x = y.direction();
    const auto kids = i == 1 ? root_ : child_directions_of(dirs[i - 2]);
    int best = 1;
    double best_dot = -2.0;
    for (int c = 0; c < m_; ++c) {
      const double v = x.dot(kids[c]);
      if (v > best_dot) {
        best_dot = v;
        best = c + 1;
      }
    }
    return best;
  }

  double distance_between(std::span<const int> a, std::span<const int> b) const {
    std::size_t t = 0;
    while (t < a.size() && t < b.size() && a[t] == b[t]) ++t;
    const auto pa = polar_in_frame(a, static_cast<int>(t));
    const auto pb = polar_in_frame(b, static_cast<int>(t));
    return unit_polar_distance(pa.unit_radius, pa.direction, pb.unit_radius, pb.direction) / std::sqrt(opt_.kappa);
  }

 private:
  std::vector<Vec> child_directions_of(const Vec& u_self) const { return child_directions(inner_, u_self); }

  int m_, R_;
  SarkarOptions opt_;
  std::vector<Vec> root_;
  SphericalCode inner_;
  double ell_ = 1.0;
};

}  // namespace hypertree
