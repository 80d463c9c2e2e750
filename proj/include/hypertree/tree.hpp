#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hypertree {

using NodeId = std::int32_t;
inline constexpr NodeId kNoParent = -1;

enum class TreeMode { mary, galton_watson, ising, custom };

inline std::string_view to_string(TreeMode mode) {
  switch (mode) {
    case TreeMode::mary: return "mary";
    case TreeMode::galton_watson: return "gw";
    case TreeMode::ising: return "ising";
    case TreeMode::custom: return "custom";
  }
  return "custom";
}

inline TreeMode tree_mode_from_string(std::string_view s) {
  if (s == "mary") return TreeMode::mary;
  if (s == "gw") return TreeMode::galton_watson;
  if (s == "ising") return TreeMode::ising;
  if (s == "custom") return TreeMode::custom;
  throw std::invalid_argument("unknown tree mode '" + std::string(s) + "'");
}

/// Guards against exponential blow-up of |L_R|.
struct TreeLimits {
  std::size_t leaf_cap = std::size_t{1} << 24;
};

/// m^R, or nullopt when it exceeds `cap`.
inline std::optional<std::size_t> checked_power(std::size_t m, int R, std::size_t cap) {
  std::size_t p = 1;
  for (int i = 0; i < R; ++i) {
    if (m != 0 && p > cap / m) return std::nullopt;
    p *= m;
  }
  if (p > cap) return std::nullopt;
  return p;
}

/// Rooted tree with positive edge weights, stored in BFS order.
///
/// Node ids are dense, the root is 0, and the children of every node occupy
/// a contiguous id range in construction order. Consequently the depth-t
/// descendants of any node are contiguous too, which is what makes subtree
/// leaf sets cheap ranges rather than lists. Immutable once built.
class WeightedTree {
 public:
  /// Builds from a parent array in BFS order. `weight[v]` is the weight of
  /// the edge (v, parent(v)); `weight[0]` is ignored. `depth_R` is the
  /// target depth: L_R is the set of nodes at exactly that depth.
  static WeightedTree from_parents(std::vector<NodeId> parent, std::vector<double> weight,
                                   int depth_R, TreeMode mode, double growth_rate) {
    const std::size_t n = parent.size();
    if (n == 0) throw std::invalid_argument("tree must have a root");
    if (weight.size() != n) throw std::invalid_argument("weight/parent size mismatch");
    if (parent[0] != kNoParent) throw std::invalid_argument("node 0 must be the root");
    if (depth_R < 0) throw std::invalid_argument("depth must be nonnegative");

    WeightedTree t;
    t.parent_ = std::move(parent);
    t.weight_ = std::move(weight);
    t.weight_[0] = 0.0;
    t.R_ = depth_R;
    t.mode_ = mode;
    t.growth_rate_ = growth_rate;
    t.depth_.assign(n, 0);
    t.first_child_.assign(n, 0);
    t.child_count_.assign(n, 0);
    t.root_dist_.assign(n, 0.0);

    for (std::size_t v = 1; v < n; ++v) {
      const NodeId p = t.parent_[v];
      if (p < 0 || static_cast<std::size_t>(p) >= v)
        throw std::invalid_argument("parents must precede children (BFS order), node " +
                                    std::to_string(v));
      if (!(t.weight_[v] >= 0.0) || !std::isfinite(t.weight_[v]))
        throw std::invalid_argument("edge weight must be finite and nonnegative, node " +
                                    std::to_string(v));
      if (v > 1 && t.parent_[v] < t.parent_[v - 1])
        throw std::invalid_argument("children must be grouped by parent in BFS order");
      if (t.child_count_[p] == 0) t.first_child_[p] = static_cast<NodeId>(v);
      else if (t.first_child_[p] + t.child_count_[p] != static_cast<NodeId>(v))
        throw std::invalid_argument("children of a node must be contiguous");
      ++t.child_count_[p];
      t.depth_[v] = t.depth_[p] + 1;
      if (v > 1 && t.depth_[v] < t.depth_[v - 1])
        throw std::invalid_argument("nodes must be in nondecreasing depth order");
      t.root_dist_[v] = t.root_dist_[p] + t.weight_[v];
    }

    const int max_depth = t.depth_.back();
    t.level_start_.assign(static_cast<std::size_t>(max_depth) + 2, static_cast<NodeId>(n));
    for (std::size_t v = n; v-- > 0;) t.level_start_[t.depth_[v]] = static_cast<NodeId>(v);
    for (int d = max_depth; d >= 0; --d)
      t.level_start_[d] = std::min(t.level_start_[d], t.level_start_[d + 1]);

    // Leaf ranges at depth R, aggregated bottom-up.
    t.leaf_begin_.assign(n, 0);
    t.leaf_end_.assign(n, 0);
    const NodeId lr_begin = t.level_begin(depth_R);
    for (std::size_t v = n; v-- > 0;) {
      if (t.depth_[v] == depth_R) {
        t.leaf_begin_[v] = static_cast<NodeId>(v) - lr_begin;
        t.leaf_end_[v] = t.leaf_begin_[v] + 1;
      } else if (t.depth_[v] < depth_R) {
        NodeId b = std::numeric_limits<NodeId>::max(), e = 0;
        for (NodeId c : t.children(static_cast<NodeId>(v))) {
          if (t.leaf_end_[c] > t.leaf_begin_[c]) {
            b = std::min(b, t.leaf_begin_[c]);
            e = std::max(e, t.leaf_end_[c]);
          }
        }
        if (e > 0) {
          t.leaf_begin_[v] = b;
          t.leaf_end_[v] = e;
        }
      }
    }

    double wmin = std::numeric_limits<double>::infinity(), wmax = 0.0;
    for (std::size_t v = 1; v < n; ++v) {
      wmin = std::min(wmin, t.weight_[v]);
      wmax = std::max(wmax, t.weight_[v]);
    }
    t.min_weight_ = n > 1 ? wmin : 0.0;
    t.max_weight_ = wmax;
    return t;
  }

  std::size_t size() const { return parent_.size(); }
  NodeId root() const { return 0; }
  int depth_R() const { return R_; }
  TreeMode mode() const { return mode_; }
  /// m for m-ary trees, E[offspring] for Galton-Watson trees.
  double growth_rate() const { return growth_rate_; }

  bool contains(NodeId v) const { return v >= 0 && static_cast<std::size_t>(v) < size(); }
  void require(NodeId v) const {
    if (!contains(v)) throw std::out_of_range("unknown node id " + std::to_string(v));
  }

  NodeId parent(NodeId v) const { return parent_[v]; }
  int depth(NodeId v) const { return depth_[v]; }
  /// Weight of the edge from v to its parent (0 for the root).
  double weight(NodeId v) const { return weight_[v]; }
  std::span<const double> weights() const { return weight_; }
  std::span<const NodeId> parents() const { return parent_; }

  struct ChildRange {
    NodeId first, count;
    struct iterator {
      NodeId v;
      NodeId operator*() const { return v; }
      iterator& operator++() { ++v; return *this; }
      bool operator!=(const iterator& o) const { return v != o.v; }
      bool operator==(const iterator& o) const { return v == o.v; }
    };
    iterator begin() const { return {first}; }
    iterator end() const { return {first + count}; }
    std::size_t size() const { return static_cast<std::size_t>(count); }
    bool empty() const { return count == 0; }
    NodeId operator[](std::size_t i) const { return first + static_cast<NodeId>(i); }
  };
  ChildRange children(NodeId v) const { return {first_child_[v], child_count_[v]}; }
  std::size_t child_count(NodeId v) const { return static_cast<std::size_t>(child_count_[v]); }
  /// Position of v among its siblings (0-based).
  std::size_t child_index(NodeId v) const {
    return static_cast<std::size_t>(v - first_child_[parent_[v]]);
  }
  std::size_t max_children() const {
    NodeId best = 0;
    for (NodeId c : child_count_) best = std::max(best, c);
    return static_cast<std::size_t>(best);
  }
  /// Largest graph degree (children plus parent edge).
  std::size_t max_degree() const {
    std::size_t best = 0;
    for (std::size_t v = 0; v < size(); ++v)
      best = std::max(best, static_cast<std::size_t>(child_count_[v]) + (v == 0 ? 0 : 1));
    return best;
  }
  bool is_leaf(NodeId v) const { return child_count_[v] == 0; }
  int max_depth() const { return depth_.back(); }

  NodeId level_begin(int t) const {
    if (t < 0 || t >= static_cast<int>(level_start_.size())) return static_cast<NodeId>(size());
    return level_start_[t];
  }
  NodeId level_end(int t) const { return level_begin(t + 1); }
  std::size_t level_size(int t) const {
    return static_cast<std::size_t>(level_end(t) - level_begin(t));
  }
  /// L_t as a contiguous id range.
  std::vector<NodeId> nodes_at_depth(int t) const {
    std::vector<NodeId> out;
    for (NodeId v = level_begin(t); v < level_end(t); ++v) out.push_back(v);
    return out;
  }
  std::vector<NodeId> leaves() const { return nodes_at_depth(R_); }
  std::size_t leaf_count() const { return level_size(R_); }

  /// L_R^{(v)} as [begin, end) offsets into leaves().
  std::pair<NodeId, NodeId> leaf_range(NodeId v) const { return {leaf_begin_[v], leaf_end_[v]}; }
  std::size_t subtree_leaf_count(NodeId v) const {
    return static_cast<std::size_t>(leaf_end_[v] - leaf_begin_[v]);
  }
  NodeId leaf_node(NodeId leaf_offset) const { return level_begin(R_) + leaf_offset; }

  /// Ancestor of v at depth t (v itself when t == depth(v)).
  NodeId ancestor_at_depth(NodeId v, int t) const {
    if (t > depth_[v] || t < 0) throw std::invalid_argument("ancestor depth out of range");
    while (depth_[v] > t) v = parent_[v];
    return v;
  }
  bool is_ancestor(NodeId a, NodeId v) const {
    if (depth_[a] > depth_[v]) return false;
    return ancestor_at_depth(v, depth_[a]) == a;
  }

  NodeId lca(NodeId u, NodeId v) const {
    require(u);
    require(v);
    while (depth_[u] > depth_[v]) u = parent_[u];
    while (depth_[v] > depth_[u]) v = parent_[v];
    while (u != v) {
      u = parent_[u];
      v = parent_[v];
    }
    return u;
  }

  /// Unweighted path length (edge count) d_T.
  int hop_distance(NodeId u, NodeId v) const {
    const NodeId a = lca(u, v);
    return depth_[u] + depth_[v] - 2 * depth_[a];
  }

  /// Weighted length of the unique u-v path: sum of w_e over the path.
  double d_corr(NodeId u, NodeId v) const {
    require(u);
    require(v);
    double su = 0.0, sv = 0.0;
    while (depth_[u] > depth_[v]) { su += weight_[u]; u = parent_[u]; }
    while (depth_[v] > depth_[u]) { sv += weight_[v]; v = parent_[v]; }
    while (u != v) {
      su += weight_[u];
      sv += weight_[v];
      u = parent_[u];
      v = parent_[v];
    }
    return su + sv;
  }

  /// Weighted distance from the root, accumulated at construction.
  double root_distance(NodeId v) const { return root_dist_[v]; }

  double min_weight() const { return min_weight_; }
  double max_weight() const { return max_weight_; }
  /// The common weight when every edge carries the same λ.
  std::optional<double> homogeneous_weight() const {
    if (size() < 2 || min_weight_ != max_weight_) return std::nullopt;
    return min_weight_;
  }

  /// Same shape and bit-identical weights (mode and growth rate ignored).
  bool same_structure(const WeightedTree& o) const {
    return parent_ == o.parent_ && weight_ == o.weight_ && R_ == o.R_;
  }

 private:
  WeightedTree() = default;

  std::vector<NodeId> parent_;
  std::vector<double> weight_;
  std::vector<int> depth_;
  std::vector<NodeId> first_child_;
  std::vector<NodeId> child_count_;
  std::vector<double> root_dist_;
  std::vector<NodeId> level_start_;
  std::vector<NodeId> leaf_begin_, leaf_end_;
  int R_ = 0;
  TreeMode mode_ = TreeMode::custom;
  double growth_rate_ = 0.0;
  double min_weight_ = 0.0, max_weight_ = 0.0;
};

/// Complete m-ary tree of depth R with every edge weight λ.
inline WeightedTree build_mary(int m, int R, double lambda, TreeLimits limits = {}) {
  if (m < 2) throw std::invalid_argument("build_mary: m must be >= 2");
  if (R < 1) throw std::invalid_argument("build_mary: R must be >= 1");
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw std::invalid_argument("build_mary: lambda must be positive");
  if (!checked_power(static_cast<std::size_t>(m), R, limits.leaf_cap))
    throw std::length_error("build_mary: m^R exceeds the leaf cap");

  std::vector<NodeId> parent{kNoParent};
  std::size_t level_begin = 0, level_end = 1;
  for (int d = 0; d < R; ++d) {
    for (std::size_t v = level_begin; v < level_end; ++v)
      for (int c = 0; c < m; ++c) parent.push_back(static_cast<NodeId>(v));
    level_begin = level_end;
    level_end = parent.size();
  }
  std::vector<double> weight(parent.size(), lambda);
  return WeightedTree::from_parents(std::move(parent), std::move(weight), R, TreeMode::mary,
                                    static_cast<double>(m));
}

/// Tree from an arbitrary BFS-ordered parent array with per-edge weights;
/// every weight must be strictly positive. The recorded growth rate is the
/// mean child count over nodes above depth R.
inline WeightedTree build_weighted(std::vector<NodeId> parent, std::vector<double> weight,
                                   int R) {
  for (std::size_t v = 1; v < weight.size(); ++v)
    if (!(weight[v] > 0.0))
      throw std::invalid_argument("edge weights must be strictly positive");
  std::vector<int> depth(parent.size(), 0);
  std::vector<int> kids(parent.size(), 0);
  for (std::size_t v = 1; v < parent.size(); ++v) {
    if (parent[v] < 0 || static_cast<std::size_t>(parent[v]) >= v)
      throw std::invalid_argument("parents must precede children (BFS order)");
    depth[v] = depth[parent[v]] + 1;
    ++kids[parent[v]];
  }
  double internal = 0.0, count = 0.0;
  for (std::size_t v = 0; v < parent.size(); ++v)
    if (depth[v] < R) {
      internal += kids[v];
      count += 1.0;
    }
  return WeightedTree::from_parents(std::move(parent), std::move(weight), R, TreeMode::custom,
                                    count > 0 ? internal / count : 0.0);
}

}  // namespace hypertree
