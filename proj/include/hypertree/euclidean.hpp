#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hypertree/poincare.hpp"
#include "hypertree/rng.hpp"
#include "hypertree/tree.hpp"

namespace hypertree {

enum class EuclideanStrategy { random_uniform, stress_min };

inline std::string to_string(EuclideanStrategy s) {
  return s == EuclideanStrategy::random_uniform ? "random_uniform" : "stress_min";
}

inline EuclideanStrategy euclidean_strategy_from_string(const std::string& s) {
  if (s == "random_uniform") return EuclideanStrategy::random_uniform;
  if (s == "stress_min") return EuclideanStrategy::stress_min;
  throw std::invalid_argument("unknown Euclidean strategy '" + s + "'");
}

/// Leaf -> point of the closed radius-B ball in R^k. Column i of `points`
/// holds leaf i (node id level_begin(R) + i).
class EuclideanEmbedding {
 public:
  EuclideanEmbedding(NodeId first_leaf, Mat points, double B)
      : first_leaf_(first_leaf), points_(std::move(points)), B_(B) {
    if (!(B > 0.0)) throw std::invalid_argument("EuclideanEmbedding: B must be positive");
    for (Eigen::Index i = 0; i < points_.cols(); ++i)
      if (points_.col(i).norm() > B_ * (1.0 + 1e-12))
        throw std::invalid_argument("EuclideanEmbedding: point outside radius B");
  }

  int dim() const { return static_cast<int>(points_.rows()); }
  double radius() const { return B_; }
  std::size_t size() const { return static_cast<std::size_t>(points_.cols()); }
  const Mat& points() const { return points_; }
  NodeId first_leaf() const { return first_leaf_; }

  bool covers(NodeId v) const { return v >= first_leaf_ && static_cast<std::size_t>(v - first_leaf_) < size(); }
  Eigen::Ref<const Vec> point(NodeId v) const {
    if (!covers(v)) throw std::out_of_range("EuclideanEmbedding: node is not an embedded leaf");
    return points_.col(v - first_leaf_);
  }
  double distance(NodeId u, NodeId v) const { return (point(u) - point(v)).norm(); }

  std::vector<NodeId> nodes() const {
    std::vector<NodeId> out(size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = first_leaf_ + static_cast<NodeId>(i);
    return out;
  }

 private:
  NodeId first_leaf_;
  Mat points_;
  double B_;
};

inline void project_to_ball(Eigen::Ref<Vec> x, double B) {
  const double n = x.norm();
  if (n > B) x *= B / n;
}

struct StressOptions {
  int iterations = 500;
  double step = 0.1;  // step at iteration t is step / sqrt(t)
};

/// random_uniform: i.i.d. uniform in the ball. stress_min: projected gradient
/// descent on sum over leaf pairs of (|x_u - x_v| - d_corr(u, v))^2, with each
/// point's gradient averaged over its n - 1 partners; O(n^2) per iteration.
inline EuclideanEmbedding embed_euclidean(const WeightedTree& tree, int k, double B,
                                          EuclideanStrategy strategy, std::uint64_t seed,
                                          const StressOptions& stress = {}) {
  if (k < 1) throw std::invalid_argument("embed_euclidean: k must be >= 1");
  if (!(B > 0.0)) throw std::invalid_argument("embed_euclidean: B must be positive");
  const auto leaves = tree.leaves();
  const auto n = static_cast<Eigen::Index>(leaves.size());
  Mat X(k, n);
  Rng rng(seed);
  if (strategy == EuclideanStrategy::random_uniform) {
    for (Eigen::Index i = 0; i < n; ++i) {
      Vec dir(k);
      do {
        for (int d = 0; d < k; ++d) dir(d) = standard_normal(rng);
      } while (dir.norm() == 0.0);
      dir.normalize();
      X.col(i) = dir * (B * std::pow(uniform01(rng), 1.0 / k));
    }
    return {leaves.empty() ? 0 : leaves.front(), std::move(X), B};
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int d = 0; d < k; ++d) X(d, i) = standard_normal(rng) * (0.5 * B);
    project_to_ball(X.col(i), B);
  }
  Mat D(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) D(i, j) = tree.d_corr(leaves[i], leaves[j]);
  Mat G(k, n);
  for (int t = 1; t <= stress.iterations && n > 1; ++t) {
    G.setZero();
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i == j) continue;
        const Vec diff = X.col(i) - X.col(j);
        const double r = diff.norm();
        if (r == 0.0) continue;
        G.col(i) += 2.0 * (r - D(i, j)) / r * diff;
      }
    G /= static_cast<double>(n - 1);
    X -= (stress.step / std::sqrt(static_cast<double>(t))) * G;
    for (Eigen::Index i = 0; i < n; ++i) project_to_ball(X.col(i), B);
  }
  return {leaves.empty() ? 0 : leaves.front(), std::move(X), B};
}

/// delta = c B exp(-(log m - 4 eta) R / (2k))
inline double collision_scale(double m, int R, int k, double B, double eta, double c = 1.0) {
  return c * B * std::exp(-(std::log(m) - 4.0 * eta) * R / (2.0 * k));
}

struct CollisionResult {
  NodeId u = 0, v = 0;           // u < v
  double euclid_dist = 0.0;
  double corr_dist = 0.0;
  double bound = 0.0;            // delta scale with the supplied constant
  double initial_cell = 0.0;     // delta / sqrt(k)
  double final_cell = 0.0;
  int coarsenings = 0;
  bool corr_ok = false;          // corr_dist >= lambda R
};

namespace detail {

struct CellHash {
  std::size_t operator()(const std::vector<std::int64_t>& key) const {
    std::uint64_t h = 0x84222325cbf29ce4ULL;
    for (auto x : key) {
      std::uint64_t s = h ^ static_cast<std::uint64_t>(x);
      h = splitmix64(s);
    }
    return static_cast<std::size_t>(h);
  }
};

}  // namespace detail

/// Closest pair of embedded leaves whose depth-floor(R/2) ancestors differ.
/// Leaves are hashed into cubes of side delta/sqrt(k) and every pair in the
/// same or a neighbouring cube (all 3^k offsets) is compared exactly. A best
/// distance <= the side proves optimality; otherwise the side is doubled.
/// Ties go to the lexicographically smallest (u, v).
inline CollisionResult find_collision(const WeightedTree& tree, const EuclideanEmbedding& emb,
                                      double eta, double c = 1.0) {
  const int R = tree.depth_R();
  if (R < 2) throw std::invalid_argument("find_collision: tree too shallow (R < 2)");
  const int t_mid = R / 2;
  const auto leaves = tree.leaves();
  if (emb.size() != leaves.size() || (!leaves.empty() && emb.first_leaf() != leaves.front()))
    throw std::invalid_argument("find_collision: embedding does not match the tree's leaves");
  const int k = emb.dim();
  const std::size_t n = leaves.size();
  std::vector<NodeId> group(n);
  for (std::size_t i = 0; i < n; ++i) group[i] = tree.ancestor_at_depth(leaves[i], t_mid);
  if (n < 2 || group.front() == group.back())
    throw std::invalid_argument("find_collision: fewer than two mid-depth subtrees");

  CollisionResult res;
  res.bound = collision_scale(std::max(tree.growth_rate(), 1.0 + 1e-12), R, k, emb.radius(), eta, c);
  double side = res.bound / std::sqrt(static_cast<double>(k));
  res.initial_cell = side;
  const Mat& P = emb.points();

  std::vector<std::int64_t> offsets_base(k, -1);
  for (;;) {
    std::unordered_map<std::vector<std::int64_t>, std::vector<std::size_t>, detail::CellHash> cells;
    cells.reserve(n * 2);
    std::vector<std::vector<std::int64_t>> key_of(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::int64_t> key(k);
      for (int d = 0; d < k; ++d) key[d] = static_cast<std::int64_t>(std::floor(P(d, i) / side));
      key_of[i] = key;
      cells[key].push_back(i);
    }
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    std::vector<std::int64_t> probe(k);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<int> off(k, -1);
      for (;;) {
        for (int d = 0; d < k; ++d) probe[d] = key_of[i][d] + off[d];
        if (auto it = cells.find(probe); it != cells.end()) {
          for (std::size_t j : it->second) {
            if (j <= i || group[j] == group[i]) continue;
            const double dist = (P.col(i) - P.col(j)).norm();
            if (dist < best || (dist == best && std::make_pair(i, j) < std::make_pair(bi, bj))) {
              best = dist;
              bi = i;
              bj = j;
            }
          }
        }
        int d = 0;
        while (d < k && off[d] == 1) off[d++] = -1;
        if (d == k) break;
        ++off[d];
      }
    }
    if (best <= side) {
      res.u = leaves[bi];
      res.v = leaves[bj];
      res.euclid_dist = best;
      break;
    }
    side *= 2.0;
    ++res.coarsenings;
  }
  res.final_cell = side;
  res.corr_dist = tree.d_corr(res.u, res.v);
  res.corr_ok = res.corr_dist >= tree.min_weight() * R * (1.0 - 1e-12);
  return res;
}

/// Smallest c making collision_scale an upper envelope of the given
/// (R, found distance) observations.
inline double calibrate_collision_constant(std::span<const std::pair<int, double>> observations, double m,
                                           int k, double B, double eta) {
  double c = 0.0;
  for (const auto& [R, dist] : observations) c = std::max(c, dist / collision_scale(m, R, k, B, eta, 1.0));
  return c;
}

struct CanonicalCut {
  NodeId u = 0, v = 0;
  NodeId anchor = 0, c_u = 0, c_v = 0;
  NodeId first_leaf = 0;
  std::vector<std::int8_t> labels;  // per leaf offset
  double lipschitz_budget = 0.0;    // 2 / (lambda R)

  int label(NodeId leaf) const { return labels.at(static_cast<std::size_t>(leaf - first_leaf)); }
};

inline CanonicalCut canonical_cut(const WeightedTree& tree, NodeId u, NodeId v) {
  tree.require(u);
  tree.require(v);
  const int R = tree.depth_R();
  if (tree.depth(u) != R || tree.depth(v) != R) throw std::invalid_argument("canonical_cut: u, v must be leaves");
  if (u == v) throw std::invalid_argument("canonical_cut: u and v coincide");
  CanonicalCut cut;
  cut.u = u;
  cut.v = v;
  cut.anchor = tree.lca(u, v);
  if (2 * tree.depth(cut.anchor) > R)
    throw std::invalid_argument("canonical_cut: LCA deeper than R/2, not a collision witness");
  cut.c_u = tree.ancestor_at_depth(u, tree.depth(cut.anchor) + 1);
  cut.c_v = tree.ancestor_at_depth(v, tree.depth(cut.anchor) + 1);
  cut.first_leaf = tree.level_begin(R);
  cut.labels.assign(tree.leaf_count(), 0);
  const auto [ub, ue] = tree.leaf_range(cut.c_u);
  for (NodeId i = ub; i < ue; ++i) cut.labels[i] = 1;
  const auto [vb, ve] = tree.leaf_range(cut.c_v);
  for (NodeId i = vb; i < ve; ++i) cut.labels[i] = -1;
  cut.lipschitz_budget = 2.0 / (tree.min_weight() * R);
  return cut;
}

/// max over leaf pairs of |g(x) - g(y)| / d_corr(x, y), exhaustive.
inline double cut_lipschitz(const WeightedTree& tree, const CanonicalCut& cut) {
  double best = 0.0;
  const std::size_t n = cut.labels.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      if (cut.labels[i] == cut.labels[j]) continue;
      const double dg = std::abs(cut.labels[i] - cut.labels[j]);
      best = std::max(best, dg / tree.d_corr(tree.leaf_node(static_cast<NodeId>(i)),
                                             tree.leaf_node(static_cast<NodeId>(j))));
    }
  return best;
}

struct McShaneResult {
  bool accepted = false;
  std::size_t witness_a = 0, witness_b = 0;  // violating pair of A when rejected
  double witness_ratio = 0.0;
  std::vector<double> values;                // extension on the whole space when accepted
};

/// g(x) = clip(min over a in A of g_A(a) + L d(x, a), -1, 1) on the points
/// 0..n-1 of a finite metric space. `dist(i, j)` is the metric.
inline McShaneResult mcshane_extend(std::size_t n, std::span<const std::size_t> A,
                                    std::span<const double> gA, double L,
                                    const std::function<double(std::size_t, std::size_t)>& dist) {
  if (A.size() != gA.size()) throw std::invalid_argument("mcshane_extend: A and g_A sizes differ");
  if (A.empty()) throw std::invalid_argument("mcshane_extend: empty domain");
  if (!(L >= 0.0)) throw std::invalid_argument("mcshane_extend: L must be >= 0");
  McShaneResult r;
  for (std::size_t i = 0; i < A.size(); ++i)
    for (std::size_t j = i + 1; j < A.size(); ++j) {
      const double dg = std::abs(gA[i] - gA[j]);
      const double d = dist(A[i], A[j]);
      if (dg > L * d * (1.0 + 1e-12) + 1e-15) {
        r.witness_a = A[i];
        r.witness_b = A[j];
        r.witness_ratio = d > 0.0 ? dg / d : std::numeric_limits<double>::infinity();
        return r;
      }
    }
  r.accepted = true;
  r.values.resize(n);
  for (std::size_t x = 0; x < n; ++x) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < A.size(); ++i) best = std::min(best, gA[i] + L * dist(x, A[i]));
    r.values[x] = std::clamp(best, -1.0, 1.0);
  }
  // exact on A; the min above can undershoot by an ulp
  for (std::size_t i = 0; i < A.size(); ++i) r.values[A[i]] = std::clamp(gA[i], -1.0, 1.0);
  return r;
}

struct ReadoutBound {
  double euclid_dist = 0.0;
  double bound = 0.0;     // 1 / |phi(u) - phi(v)|
  bool infinite = false;  // coincident images
};

/// Any h with |h(phi(u)) - 1| + |h(phi(v)) + 1| <= 1 has Lip(h) >= 1 / |phi(u) - phi(v)|.
inline ReadoutBound required_readout_lipschitz(const CanonicalCut& cut, const EuclideanEmbedding& emb,
                                               NodeId u, NodeId v) {
  if (cut.label(u) != 1 || cut.label(v) != -1)
    throw std::invalid_argument("required_readout_lipschitz: need g(u) = +1 and g(v) = -1");
  ReadoutBound b;
  b.euclid_dist = emb.distance(u, v);
  if (b.euclid_dist == 0.0) {
    b.infinite = true;
    b.bound = std::numeric_limits<double>::infinity();
  } else {
    b.bound = 1.0 / b.euclid_dist;
  }
  return b;
}

/// Indices of a greedy delta-packing: scan in order, keep a point when it is
/// at least delta from all kept points.
inline std::vector<std::size_t> greedy_packing(const Mat& points, double delta) {
  std::vector<std::size_t> kept;
  for (Eigen::Index i = 0; i < points.cols(); ++i) {
    bool ok = true;
    for (std::size_t j : kept)
      if ((points.col(i) - points.col(static_cast<Eigen::Index>(j))).norm() < delta) {
        ok = false;
        break;
      }
    if (ok) kept.push_back(static_cast<std::size_t>(i));
  }
  return kept;
}

struct FatShatteringReport {
  std::size_t packing_size = 0;
  std::size_t fat_dimension_lower_bound = 0;
  std::size_t sample_lower_bound = 0;  // Omega(M); constants unspecified
  bool regime = false;                 // Lambda >= 2 eps / delta
};

inline FatShatteringReport fat_shattering_accounting(std::size_t M, double delta, double eps, double Lambda) {
  if (!(delta > 0.0) || !(eps > 0.0) || !(Lambda > 0.0))
    throw std::invalid_argument("fat_shattering_accounting: delta, eps, Lambda must be positive");
  FatShatteringReport r;
  r.packing_size = M;
  r.fat_dimension_lower_bound = M;
  r.sample_lower_bound = M;
  r.regime = 2.0 * eps / Lambda <= delta * (1.0 + 1e-12);
  return r;
}

}  // namespace hypertree
