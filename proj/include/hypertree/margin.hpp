#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "hypertree/galton_watson.hpp"
#include "hypertree/poincare.hpp"
#include "hypertree/sarkar.hpp"

namespace hypertree {

/// Childless nodes of the subtree rooted at v (the depth-R leaves on a
/// complete tree), in id order.
inline std::vector<NodeId> terminal_descendants(const WeightedTree& tree, NodeId v) {
  std::vector<NodeId> out, stack{v};
  while (!stack.empty()) {
    const NodeId x = stack.back();
    stack.pop_back();
    if (tree.is_leaf(x)) out.push_back(x);
    for (NodeId c : tree.children(x)) stack.push_back(c);
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Totally geodesic hypersurface through `base` with unit normal `normal`
/// given in a tangent frame at the base point; `frame` rotates that frame to
/// the one obtained by Möbius-translating the base point to the origin.
struct GeodesicHyperplane {
  BallPoint base;
  Vec normal;
  Mat frame;
  double kappa = 1.0;

  static GeodesicHyperplane through(BallPoint base, Vec normal, double kappa) {
    const auto k = normal.size();
    if (std::abs(normal.norm() - 1.0) > 1e-12) normal.normalize();
    return {std::move(base), std::move(normal), Mat::Identity(k, k), kappa};
  }

  /// Signed distance, positive on the side the normal points to.
  double signed_distance(const BallPoint& x) const {
    const Vec n = frame * normal;
    const double scale = 1.0 / std::sqrt(kappa);
    if (base.coords.norm() == 0.0 && !base.is_polar()) {
      const PolarForm p = x.to_polar();
      const double c = p.direction.dot(n);
      if (c == 0.0 || p.unit_radius == 0.0) return 0.0;
      return std::copysign(detail::asinh_exp(detail::log_sinh(p.unit_radius) + std::log(std::abs(c))), c) *
             scale;
    }
    if (x.is_polar()) throw std::domain_error("signed_distance: point too deep for Cartesian evaluation");
    const Vec y = mobius_to_origin(base).apply(x.coords);
    return std::asinh(2.0 * y.dot(n) / (1.0 - y.squaredNorm())) * scale;
  }
};

struct ConeMargin {
  NodeId anchor = 0, child = 0;
  NodeId sibling = kNoParent;  // kNoParent when `child` is an only child
  GeodesicHyperplane hyperplane;
  Vec local_normal;            // normal in the anchor's construction frame
  double gamma = std::numeric_limits<double>::infinity();
  bool no_sibling = false;
  bool sides_ok = true;        // child leaves strictly positive, sibling leaves strictly negative
};

/// Sibling of c whose direction is closest to c's (ties: lowest id).
inline NodeId nearest_sibling(const HyperbolicEmbedding& emb, NodeId c) {
  const auto& tree = emb.tree();
  const NodeId a = tree.parent(c);
  NodeId best = kNoParent;
  double best_dot = -2.0;
  for (NodeId s : tree.children(a)) {
    if (s == c) continue;
    const double d = emb.direction(c).dot(emb.direction(s));
    if (d > best_dot + 1e-12) {
      best_dot = d;
      best = s;
    }
  }
  return best;
}

/// Bisector between the cones of children c and `sibling` at anchor a, and
/// the smallest |signed distance| of their leaves to it.
inline ConeMargin cone_margin(const HyperbolicEmbedding& emb, NodeId a, NodeId c,
                              std::optional<NodeId> sibling = std::nullopt) {
  const auto& tree = emb.tree();
  tree.require(a);
  tree.require(c);
  if (tree.parent(c) != a) throw std::invalid_argument("cone_margin: c is not a child of a");
  ConeMargin out;
  out.anchor = a;
  out.child = c;
  const NodeId s = sibling.value_or(nearest_sibling(emb, c));
  if (s == kNoParent) {
    out.no_sibling = true;
    out.local_normal = emb.direction(c);
    out.hyperplane = GeodesicHyperplane{emb.point(a), out.local_normal, emb.frame_rotation(a), emb.kappa()};
    return out;
  }
  if (tree.parent(s) != a || s == c) throw std::invalid_argument("cone_margin: invalid sibling");
  out.sibling = s;
  out.local_normal = (emb.direction(c) - emb.direction(s)).normalized();
  out.hyperplane = GeodesicHyperplane{emb.point(a), out.local_normal, emb.frame_rotation(a), emb.kappa()};
  double gamma = std::numeric_limits<double>::infinity();
  for (NodeId x : terminal_descendants(tree, c)) {
    const double sd = emb.signed_distance(a, out.local_normal, x);
    out.sides_ok = out.sides_ok && sd > 0.0;
    gamma = std::min(gamma, std::abs(sd));
  }
  for (NodeId x : terminal_descendants(tree, s)) {
    const double sd = emb.signed_distance(a, out.local_normal, x);
    out.sides_ok = out.sides_ok && sd < 0.0;
    gamma = std::min(gamma, std::abs(sd));
  }
  out.gamma = gamma;
  return out;
}

/// Child of a whose cone contains x: the child direction with the largest
/// inner product with x's direction in a's frame. This agrees with every
/// pairwise bisector test.
inline NodeId decode_child(const HyperbolicEmbedding& emb, NodeId a, NodeId x) {
  const auto& tree = emb.tree();
  if (tree.child_count(a) == 0) throw std::invalid_argument("decode_child: a has no children");
  const Vec d = emb.polar_in_frame(x, a).direction;
  NodeId best = kNoParent;
  double best_dot = -2.0;
  for (NodeId c : tree.children(a)) {
    const double v = d.dot(emb.direction(c));
    if (v > best_dot) {
      best_dot = v;
      best = c;
    }
  }
  return best;
}

/// g(x) = clip(sdist(x, H) / gamma, -1, 1)
struct MarginClassifier {
  GeodesicHyperplane hyperplane;
  double gamma = 1.0;

  double from_signed_distance(double sd) const { return std::clamp(sd / gamma, -1.0, 1.0); }
  double operator()(const BallPoint& x) const { return from_signed_distance(hyperplane.signed_distance(x)); }
  double lipschitz_bound() const { return 1.0 / gamma; }
};

inline MarginClassifier margin_classifier(GeodesicHyperplane h, double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma))
    throw std::invalid_argument("margin_classifier: gamma must be positive and finite");
  return {std::move(h), gamma};
}

struct LipschitzReport {
  double ratio = 0.0;  // max |g(u) - g(v)| / d_X(u, v)
  std::size_t pairs = 0;
  NodeId u = 0, v = 0;
};

/// Empirical Lipschitz constant of node values `g` (indexed by node id) read
/// through the embedding's metric, over all pairs of `nodes`.
template <class Embedding>
LipschitzReport lipschitz_pushforward(const Embedding& emb, std::span<const double> g,
                                      std::span<const NodeId> nodes) {
  LipschitzReport r;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    for (std::size_t j = i + 1; j < nodes.size(); ++j) {
      const NodeId u = nodes[i], v = nodes[j];
      const double dg = std::abs(g[u] - g[v]);
      ++r.pairs;
      if (dg == 0.0) continue;
      const double dx = emb.distance(u, v);
      const double ratio = dx > 0.0 ? dg / dx : std::numeric_limits<double>::infinity();
      if (ratio > r.ratio) {
        r.ratio = ratio;
        r.u = u;
        r.v = v;
      }
    }
  return r;
}

struct PackingConverse {
  double leading_sqrt_kappa = 0.0;        // (log m - eta) / ((k-1) s D lambda)
  double kappa_required_lower_bound = 0.0;
  double kappa_used = 0.0;
  bool growth_ok = false;
  bool consistent = false;
};

inline PackingConverse packing_converse_check(const RegularGrowthReport& growth, double s, double D,
                                              double lambda, int k, double kappa_used) {
  if (k < 2) throw std::invalid_argument("packing_converse_check: k must be >= 2");
  if (!(s > 0.0) || !(D > 0.0) || !(lambda > 0.0))
    throw std::invalid_argument("packing_converse_check: s, D, lambda must be positive");
  PackingConverse p;
  p.leading_sqrt_kappa =
      std::isinf(D) ? 0.0 : std::max(0.0, (std::log(growth.m) - growth.eta) / ((k - 1) * s * D * lambda));
  p.kappa_required_lower_bound = p.leading_sqrt_kappa * p.leading_sqrt_kappa;
  p.kappa_used = kappa_used;
  p.growth_ok = growth.holds();
  p.consistent = std::sqrt(kappa_used) >= p.leading_sqrt_kappa;
  return p;
}

}  // namespace hypertree
