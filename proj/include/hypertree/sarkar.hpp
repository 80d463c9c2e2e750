#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "hypertree/poincare.hpp"
#include "hypertree/spherical_code.hpp"
#include "hypertree/tree.hpp"

namespace hypertree {

// Points are tracked on the unit-curvature hyperboloid as e^L (1, w) with
// ||w|| < 1, so the radius asinh(e^L ||w||) stays exact at any depth.
struct ScaledHyperboloid {
  double log_scale = 0.0;
  Vec w;

  static ScaledHyperboloid origin(int k) { return {0.0, Vec::Zero(k)}; }

  /// Apply the pure boost carrying the origin to distance `ell` along unit `u`.
  void boost(const Vec& u, double ell) {
    if (ell == 0.0) return;
    const double c = std::cosh(ell), s = std::sinh(ell);
    const double p = u.dot(w);
    const double x0 = c + s * p;
    w = (w + (s + (c - 1.0) * p) * u) / x0;
    log_scale += std::log(x0);
  }

  double unit_radius() const {
    const double n = w.norm();
    if (n == 0.0) return 0.0;
    return detail::asinh_exp(log_scale + std::log(n));
  }

  Vec direction() const {
    const double n = w.norm();
    if (n == 0.0) return detail::unit_axis(static_cast<int>(w.size()), 0);
    return w / n;
  }
};

struct SarkarOptions {
  int k = 2;
  double kappa = 1.0;
  double tau = 1.0;
  double epsilon = 0.1;
  std::optional<double> c_k;
  SphericalCodeOptions code{};
};

/// sqrt(kappa) >= C_k log(Delta) / (lambda epsilon)
struct CurvatureCondition {
  double c_k = 0.0;
  double required_sqrt_kappa = 0.0;
  double sqrt_kappa = 0.0;
  bool holds = false;
};

/// Caches one code per child count (root codes and parent-slot codes).
class CodeBook {
 public:
  CodeBook(int k, SphericalCodeOptions opt) : k_(k), opt_(opt) {}

  const SphericalCode& root(int n) {
    auto it = root_.find(n);
    if (it == root_.end()) it = root_.emplace(n, spherical_code(n, k_, 0.0, opt_)).first;
    return it->second;
  }
  const SphericalCode& inner(int n) {
    auto it = inner_.find(n);
    if (it == inner_.end()) it = inner_.emplace(n, parent_slot_code(n, k_, 0.0, opt_)).first;
    return it->second;
  }
  int dim() const { return k_; }

 private:
  int k_;
  SphericalCodeOptions opt_;
  std::map<int, SphericalCode> root_, inner_;
};

/// Directions for the children of a node whose own placement direction (in
/// its parent's frame) is `u_self`; the code's e1 is sent to u_self so that
/// the reserved slot -e1 lands on the parent.
inline std::vector<Vec> child_directions(const SphericalCode& code, const Vec& u_self) {
  const Mat Q = align(detail::unit_axis(static_cast<int>(u_self.size()), 0), u_self);
  std::vector<Vec> out;
  out.reserve(code.vectors.size());
  for (const auto& v : code.vectors) out.push_back((Q * v).normalized());
  return out;
}

/// Node -> Poincare ball map built by the recursive construction. Each node
/// owns a local frame in which it sits at the origin; the frame of a child is
/// reached from its parent's by a pure boost of length sqrt(kappa)*step along
/// the child's code direction. Distances are evaluated in the frame of the
/// lowest common ancestor.
class HyperbolicEmbedding {
 public:
  const WeightedTree& tree() const { return *tree_; }
  int dim() const { return k_; }
  double kappa() const { return kappa_; }
  double tau() const { return tau_; }
  double epsilon() const { return epsilon_; }
  const std::optional<CurvatureCondition>& curvature_condition() const { return condition_; }
  double min_code_angle() const { return min_code_angle_; }

  /// Hyperbolic length (curvature -kappa) of the edge above v.
  double step(NodeId v) const { return unit_step_[v] / std::sqrt(kappa_); }
  /// Placement direction of v in its parent's frame.
  const Vec& direction(NodeId v) const { return dir_[v]; }

  /// v in the frame of its ancestor `a` (unit-curvature radius).
  PolarForm polar_in_frame(NodeId v, NodeId a) const {
    tree_->require(v);
    if (v == a) return {detail::unit_axis(k_, 0), 0.0};
    if (!tree_->is_ancestor(a, v)) throw std::invalid_argument("polar_in_frame: not an ancestor");
    const std::size_t idx = offset_[v] + static_cast<std::size_t>(tree_->depth(a));
    return {Eigen::Map<const Vec>(&table_dir_[idx * k_], k_), table_r_[idx]};
  }

  BallPoint point(NodeId v) const {
    const auto p = polar_in_frame(v, tree_->root());
    return BallPoint::from_polar(p.direction, p.unit_radius);
  }

  double unit_distance(NodeId u, NodeId v) const {
    if (u == v) return 0.0;
    const NodeId a = tree_->lca(u, v);
    if (a == u) return polar_r(v, a);
    if (a == v) return polar_r(u, a);
    const std::size_t iu = offset_[u] + tree_->depth(a), iv = offset_[v] + tree_->depth(a);
    return unit_polar_distance(table_r_[iu], Eigen::Map<const Vec>(&table_dir_[iu * k_], k_),
                               table_r_[iv], Eigen::Map<const Vec>(&table_dir_[iv * k_], k_));
  }

  double distance(NodeId u, NodeId v) const { return unit_distance(u, v) / std::sqrt(kappa_); }

  /// Signed distance (curvature -kappa) of node x to the totally geodesic
  /// hyperplane through a with unit normal n in a's frame; x must be a or a
  /// descendant of a.
  double signed_distance(NodeId a, const Vec& n, NodeId x) const {
    const auto p = polar_in_frame(x, a);
    if (p.unit_radius == 0.0) return 0.0;
    const double c = p.direction.dot(n);
    if (c == 0.0) return 0.0;
    // asinh(sinh(r) * c)
    const double mag = detail::asinh_exp(detail::log_sinh(p.unit_radius) + std::log(std::abs(c)));
    return std::copysign(mag, c) / std::sqrt(kappa_);
  }

  /// Rotation taking vectors of a's local frame to the frame at emb(a)
  /// obtained by the Möbius translation of emb(a) to the origin. Exact for
  /// the root; for deep nodes it is limited by the conditioning of the
  /// boost product.
  Mat frame_rotation(NodeId a) const {
    Mat M = Mat::Identity(k_ + 1, k_ + 1);
    std::vector<NodeId> chain;
    for (NodeId x = a; x != tree_->root(); x = tree_->parent(x)) chain.push_back(x);
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) M = M * boost_matrix(dir_[*it], unit_step_[*it]);
    const Vec xs = M.block(1, 0, k_, 1);
    const double r = std::asinh(xs.norm());
    Mat S = Mat::Identity(k_, k_);
    if (xs.norm() > 0.0) {
      const Vec u = xs.normalized();
      S -= (1.0 - 1.0 / std::cosh(r)) * u * u.transpose();
    }
    return S * M.block(1, 1, k_, k_);
  }

 private:
  friend HyperbolicEmbedding sarkar_embed(const WeightedTree&, const SarkarOptions&);

  double polar_r(NodeId v, NodeId a) const {
    return table_r_[offset_[v] + static_cast<std::size_t>(tree_->depth(a))];
  }

  static Mat boost_matrix(const Vec& u, double ell) {
    const auto k = u.size();
    Mat B = Mat::Identity(k + 1, k + 1);
    const double c = std::cosh(ell), s = std::sinh(ell);
    B(0, 0) = c;
    B.block(0, 1, 1, k) = s * u.transpose();
    B.block(1, 0, k, 1) = s * u;
    B.block(1, 1, k, k) += (c - 1.0) * u * u.transpose();
    return B;
  }

  std::shared_ptr<const WeightedTree> tree_;
  int k_ = 2;
  double kappa_ = 1.0, tau_ = 1.0, epsilon_ = 0.1;
  double min_code_angle_ = 0.0;
  std::optional<CurvatureCondition> condition_;
  std::vector<Vec> dir_;
  std::vector<double> unit_step_;
  std::vector<std::size_t> offset_;
  std::vector<double> table_r_, table_dir_;
};

inline HyperbolicEmbedding sarkar_embed(const WeightedTree& tree, const SarkarOptions& opt) {
  if (opt.k < 2) throw std::invalid_argument("sarkar_embed: k must be >= 2");
  if (!(opt.kappa > 0.0)) throw std::invalid_argument("sarkar_embed: kappa must be positive");
  if (!(opt.tau > 0.0)) throw std::invalid_argument("sarkar_embed: tau must be positive");
  const int k = opt.k;
  const std::size_t n = tree.size();
  HyperbolicEmbedding e;
  e.tree_ = std::make_shared<const WeightedTree>(tree);
  e.k_ = k;
  e.kappa_ = opt.kappa;
  e.tau_ = opt.tau;
  e.epsilon_ = opt.epsilon;
  e.dir_.assign(n, detail::unit_axis(k, 0));
  e.unit_step_.assign(n, 0.0);
  e.min_code_angle_ = std::numbers::pi;

  const double sk = std::sqrt(opt.kappa);
  const double lambda_ref = tree.min_weight() > 0.0 ? tree.min_weight() : tree.max_weight();
  CodeBook book(k, opt.code);
  for (std::size_t a = 0; a < n; ++a) {
    const auto v = static_cast<NodeId>(a);
    const int nc = static_cast<int>(tree.child_count(v));
    if (nc == 0) continue;
    const SphericalCode& code = v == tree.root() ? book.root(nc) : book.inner(nc);
    e.min_code_angle_ = std::min(e.min_code_angle_, code.achieved_angle);
    const auto dirs = v == tree.root() ? code.vectors : child_directions(code, e.dir_[v]);
    int j = 0;
    for (NodeId c : tree.children(v)) {
      e.dir_[c] = dirs[j++];
      const double tau_e = lambda_ref > 0.0 ? opt.tau * tree.weight(c) / lambda_ref : opt.tau;
      e.unit_step_[c] = sk * tau_e;
    }
  }

  e.offset_.assign(n, 0);
  std::size_t total = 0;
  for (std::size_t v = 0; v < n; ++v) {
    e.offset_[v] = total;
    total += static_cast<std::size_t>(tree.depth(static_cast<NodeId>(v)));
  }
  e.table_r_.assign(total, 0.0);
  e.table_dir_.assign(total * k, 0.0);
  for (std::size_t v = 1; v < n; ++v) {
    auto y = ScaledHyperboloid::origin(k);
    for (NodeId c = static_cast<NodeId>(v); c != tree.root(); c = tree.parent(c)) {
      y.boost(e.dir_[c], e.unit_step_[c]);
      const std::size_t idx = e.offset_[v] + static_cast<std::size_t>(tree.depth(c) - 1);
      e.table_r_[idx] = y.unit_radius();
      const Vec d = y.direction();
      for (int i = 0; i < k; ++i) e.table_dir_[idx * k + i] = d(i);
    }
  }

  if (opt.c_k) {
    CurvatureCondition cc;
    cc.c_k = *opt.c_k;
    const double delta = static_cast<double>(std::max<std::size_t>(tree.max_children(), 1));
    cc.required_sqrt_kappa = cc.c_k * std::log(delta) / (lambda_ref * opt.epsilon);
    cc.sqrt_kappa = sk;
    cc.holds = sk >= cc.required_sqrt_kappa;
    e.condition_ = cc;
  }
  return e;
}

}  // namespace hypertree
