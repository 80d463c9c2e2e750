#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "hypertree/rng.hpp"
#include "hypertree/tree.hpp"

namespace hypertree {

/// Offspring law on {0, ..., K_max}; probs[k] = P(xi = k).
class OffspringDistribution {
 public:
  explicit OffspringDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.empty()) throw std::invalid_argument("offspring distribution is empty");
    double total = 0.0;
    for (double p : probs_) {
      if (!(p >= 0.0)) throw std::invalid_argument("offspring probabilities must be >= 0");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9)
      throw std::invalid_argument("offspring probabilities must sum to 1");
    for (double& p : probs_) p /= total;
  }

  /// Uniform on {lo, ..., hi}.
  static OffspringDistribution uniform(int lo, int hi) {
    if (lo < 0 || hi < lo) throw std::invalid_argument("bad uniform offspring range");
    std::vector<double> p(static_cast<std::size_t>(hi) + 1, 0.0);
    for (int k = lo; k <= hi; ++k) p[k] = 1.0 / (hi - lo + 1);
    return OffspringDistribution(std::move(p));
  }
  static OffspringDistribution point_mass(int k) {
    std::vector<double> p(static_cast<std::size_t>(k) + 1, 0.0);
    p[k] = 1.0;
    return OffspringDistribution(std::move(p));
  }

  const std::vector<double>& probs() const { return probs_; }
  int max_offspring() const { return static_cast<int>(probs_.size()) - 1; }
  double mean() const {
    double m = 0.0;
    for (std::size_t k = 0; k < probs_.size(); ++k) m += static_cast<double>(k) * probs_[k];
    return m;
  }
  /// Probability generating function f(s) = E[s^xi].
  double pgf(double s) const {
    double acc = 0.0;
    for (std::size_t k = probs_.size(); k-- > 0;) acc = acc * s + probs_[k];
    return acc;
  }
  int sample(Rng& rng) const { return static_cast<int>(categorical(rng, probs_)); }

 private:
  std::vector<double> probs_;
};

/// Outcome of a truncated Galton-Watson draw. Extinction before depth R is a
/// regular outcome: `tree` is empty and `extinction_depth` records the first
/// empty generation.
struct GaltonWatsonResult {
  std::optional<WeightedTree> tree;
  std::optional<int> extinction_depth;
  bool survived() const { return tree.has_value(); }
};

/// Grows generation by generation to depth R. Draw order: one offspring count
/// per frontier node, frontier in BFS order, from mt19937_64(seed).
inline GaltonWatsonResult build_galton_watson(const OffspringDistribution& offspring, int R,
                                              double lambda, std::uint64_t seed,
                                              TreeLimits limits = {}) {
  if (R < 1) throw std::invalid_argument("build_galton_watson: R must be >= 1");
  if (!(lambda > 0.0)) throw std::invalid_argument("build_galton_watson: lambda must be positive");
  Rng rng(seed);
  std::vector<NodeId> parent{kNoParent};
  std::size_t begin = 0, end = 1;
  for (int d = 0; d < R; ++d) {
    for (std::size_t v = begin; v < end; ++v) {
      const int kids = offspring.sample(rng);
      for (int c = 0; c < kids; ++c) parent.push_back(static_cast<NodeId>(v));
    }
    begin = end;
    end = parent.size();
    if (end - begin > limits.leaf_cap)
      throw std::length_error("build_galton_watson: generation size exceeds the leaf cap");
    if (begin == end) return {std::nullopt, d + 1};
  }
  std::vector<double> weight(parent.size(), lambda);
  return {WeightedTree::from_parents(std::move(parent), std::move(weight), R,
                                     TreeMode::galton_watson, offspring.mean()),
          std::nullopt};
}

/// Slack eta and target depth for the regular growth event. `m` overrides
/// the tree's own growth rate (e.g. to test a path against m = 2).
struct GrowthConfig {
  double eta = 0.1;
  int R = 0;
  std::optional<double> m;
};

struct RegularGrowthReport {
  double m = 0.0;
  double eta = 0.0;
  int mid_depth = 0;
  std::size_t leaves_mid = 0, leaves_full = 0;
  std::size_t max_mid_subtree = 0;
  bool size_ok_mid = false, size_ok_full = false;
  bool dominance_ok = false;
  /// eta < (1/4) log m, the standing assumption for the collapse results.
  bool standing_assumption = false;
  bool size_ok() const { return size_ok_mid && size_ok_full; }
  bool holds() const { return size_ok() && dominance_ok; }
};

/// Checks the global-size and subtree-dominance conditions. The dominance
/// bound uses the subtree depth R - floor(R/2), which is R/2 for even R.
inline RegularGrowthReport check_regular_growth(const WeightedTree& tree, const GrowthConfig& cfg) {
  if (tree.max_depth() < cfg.R)
    throw std::invalid_argument("check_regular_growth: tree shallower than R");
  RegularGrowthReport rep;
  rep.m = cfg.m.value_or(tree.growth_rate());
  rep.eta = cfg.eta;
  if (!(rep.m > 1.0)) rep.m = std::max(rep.m, 1.0);
  const double logm = std::log(rep.m);
  if (!(cfg.eta > 0.0)) throw std::invalid_argument("check_regular_growth: eta must be > 0");
  rep.standing_assumption = cfg.eta < 0.25 * logm;

  const int R = cfg.R;
  const int t_mid = R / 2;
  rep.mid_depth = t_mid;
  auto size_ok = [&](int t, std::size_t count) {
    const double lo = std::exp((logm - cfg.eta) * t);
    const double hi = std::exp((logm + cfg.eta) * t);
    const double c = static_cast<double>(count);
    return lo <= c && c <= hi;
  };
  rep.leaves_mid = tree.level_size(t_mid);
  rep.leaves_full = tree.level_size(R);
  rep.size_ok_mid = size_ok(t_mid, rep.leaves_mid);
  rep.size_ok_full = size_ok(R, rep.leaves_full);

  // Subtree sizes at depth R under each depth-t_mid node: count by ascent.
  std::vector<std::size_t> sub(tree.level_size(t_mid), 0);
  const NodeId mid_begin = tree.level_begin(t_mid);
  for (NodeId v = tree.level_begin(R); v < tree.level_end(R); ++v)
    ++sub[tree.ancestor_at_depth(v, t_mid) - mid_begin];
  for (std::size_t s : sub) rep.max_mid_subtree = std::max(rep.max_mid_subtree, s);
  const double dom_bound = std::exp((logm + cfg.eta) * (R - t_mid));
  rep.dominance_ok = static_cast<double>(rep.max_mid_subtree) <= dom_bound;
  return rep;
}

}  // namespace hypertree
