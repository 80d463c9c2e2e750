#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "hypertree/tree.hpp"

namespace hypertree {

/// Ferromagnetic couplings and the derived high-temperature quantities.
struct IsingParams {
  std::vector<double> couplings;  // J_e >= 0
  std::vector<double> t;          // tanh(J_e)
  double t_min = 0.0, t_max = 0.0;
  int max_degree = 0;             // Delta
  double alpha = 0.0;             // (Delta - 1) * t_max
  bool high_temperature = false;  // alpha < 1

  static IsingParams from_couplings(std::vector<double> J, int max_degree) {
    if (J.empty()) throw std::invalid_argument("IsingParams: no couplings");
    if (max_degree < 1) throw std::invalid_argument("IsingParams: degree bound must be >= 1");
    IsingParams p;
    p.couplings = std::move(J);
    p.t.reserve(p.couplings.size());
    for (double j : p.couplings) {
      if (!(j >= 0.0)) throw std::invalid_argument("IsingParams: couplings must be >= 0");
      p.t.push_back(std::tanh(j));
    }
    p.t_min = *std::min_element(p.t.begin(), p.t.end());
    p.t_max = *std::max_element(p.t.begin(), p.t.end());
    p.max_degree = max_degree;
    p.alpha = (max_degree - 1) * p.t_max;
    p.high_temperature = p.alpha < 1.0;
    return p;
  }

  /// C_{Delta,alpha} = Delta / ((Delta - 1)(1 - alpha)); nullopt unless alpha < 1.
  std::optional<double> saw_constant() const {
    if (!high_temperature || max_degree < 2) return std::nullopt;
    return max_degree / ((max_degree - 1.0) * (1.0 - alpha));
  }
};

/// Tree whose weights are w_e = -log tanh(J_e). `coupling_by_edge[i]` is the
/// coupling on the edge between node i+1 and its parent. Couplings large
/// enough that tanh rounds to 1 give w_e = 0 (perfect correlation).
inline WeightedTree ising_weights(const WeightedTree& tree, std::span<const double> coupling_by_edge) {
  if (coupling_by_edge.size() + 1 != tree.size())
    throw std::invalid_argument("ising_weights: need one coupling per edge");
  std::vector<double> w(tree.size(), 0.0);
  for (std::size_t i = 0; i < coupling_by_edge.size(); ++i) {
    const double J = coupling_by_edge[i];
    if (!(J > 0.0)) throw std::invalid_argument("ising_weights: couplings must be > 0");
    w[i + 1] = std::isinf(J) ? 0.0 : std::max(0.0, -std::log(std::tanh(J)));
  }
  return WeightedTree::from_parents(
      std::vector<NodeId>(tree.parents().begin(), tree.parents().end()), std::move(w),
      tree.depth_R(), TreeMode::ising, tree.growth_rate());
}

/// Spin correlation <X_u X_v> = exp(-d_corr(u, v)) on an Ising-weighted tree.
inline double ising_correlation(const WeightedTree& tree, NodeId u, NodeId v) {
  return std::exp(-tree.d_corr(u, v));
}

struct CorrelationBounds {
  double lower = 1.0;
  std::optional<double> upper;  // absent when alpha >= 1
};

/// t_min^d <= <X_u X_v>_G <= C_{Delta,alpha} alpha^d for graph distance d.
inline CorrelationBounds saw_correlation_bounds(const IsingParams& params, int graph_distance) {
  if (graph_distance < 0) throw std::invalid_argument("graph distance must be >= 0");
  CorrelationBounds b;
  b.lower = std::pow(params.t_min, graph_distance);
  if (auto c = params.saw_constant()) b.upper = *c * std::pow(params.alpha, graph_distance);
  return b;
}

}  // namespace hypertree
