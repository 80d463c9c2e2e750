#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "hypertree/rng.hpp"
#include "hypertree/tree.hpp"

namespace hypertree {

enum class PairMode { exact, sampled };

inline std::string to_string(PairMode m) { return m == PairMode::exact ? "exact" : "sampled"; }

struct DistortionReport {
  double worst_expansion = 0.0;  // max d_X / d_corr
  double worst_contraction = std::numeric_limits<double>::infinity();  // min d_X / d_corr
  double distortion = 1.0;       // D with s = 1
  double scale_free = 1.0;       // expansion / contraction (best s)
  std::size_t pairs = 0;
  PairMode mode = PairMode::exact;
  std::uint64_t seed = 0;
  NodeId expansion_u = 0, expansion_v = 0;
  NodeId contraction_u = 0, contraction_v = 0;
};

namespace detail {

template <class Embedding>
void accumulate_pair(const WeightedTree& tree, const Embedding& emb, NodeId u, NodeId v,
                     DistortionReport& r) {
  const double dt = tree.d_corr(u, v);
  if (dt <= 0.0) return;
  const double ratio = emb.distance(u, v) / dt;
  ++r.pairs;
  if (ratio > r.worst_expansion) {
    r.worst_expansion = ratio;
    r.expansion_u = u;
    r.expansion_v = v;
  }
  if (ratio < r.worst_contraction) {
    r.worst_contraction = ratio;
    r.contraction_u = u;
    r.contraction_v = v;
  }
}

}  // namespace detail

/// (1/D) d_corr <= d_X <= D d_corr over pairs of `nodes`: exhaustive when the
/// pair count fits in `pair_budget`, otherwise `pair_budget` seeded uniform
/// draws of distinct pairs.
template <class Embedding>
DistortionReport distortion(const WeightedTree& tree, const Embedding& emb,
                            std::span<const NodeId> nodes, std::size_t pair_budget,
                            std::uint64_t seed = 0) {
  DistortionReport r;
  r.seed = seed;
  const std::size_t n = nodes.size();
  const std::size_t all = n < 2 ? 0 : n * (n - 1) / 2;
  if (all <= pair_budget) {
    r.mode = PairMode::exact;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) detail::accumulate_pair(tree, emb, nodes[i], nodes[j], r);
  } else {
    r.mode = PairMode::sampled;
    Rng rng(seed);
    for (std::size_t t = 0; t < pair_budget; ++t) {
      const auto i = uniform_index(rng, n);
      auto j = uniform_index(rng, n - 1);
      if (j >= i) ++j;
      detail::accumulate_pair(tree, emb, nodes[i], nodes[j], r);
    }
  }
  if (r.pairs == 0) {
    r.worst_expansion = r.worst_contraction = 1.0;
    return r;
  }
  if (r.worst_contraction <= 0.0) {
    r.distortion = r.scale_free = std::numeric_limits<double>::infinity();
  } else {
    r.distortion = std::max(r.worst_expansion, 1.0 / r.worst_contraction);
    r.scale_free = r.worst_expansion / r.worst_contraction;
  }
  return r;
}

/// All nodes of the tree.
template <class Embedding>
DistortionReport distortion(const WeightedTree& tree, const Embedding& emb, std::size_t pair_budget,
                            std::uint64_t seed = 0) {
  std::vector<NodeId> nodes(tree.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) nodes[i] = static_cast<NodeId>(i);
  return distortion(tree, emb, std::span<const NodeId>(nodes), pair_budget, seed);
}

}  // namespace hypertree
