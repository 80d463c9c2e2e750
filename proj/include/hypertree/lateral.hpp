#pragma once

#include <algorithm>
#include <deque>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hypertree/tree.hpp"

namespace hypertree {

struct LateralEdge {
  NodeId u = 0, v = 0;
};

/// A tree plus lateral edges whose endpoints are at most K hops apart in the
/// tree. Graph distances are unweighted BFS distances on the union graph.
class LateralGraph {
 public:
  LateralGraph(WeightedTree base, std::vector<LateralEdge> lateral, int K)
      : base_(std::move(base)), lateral_(std::move(lateral)), K_(K) {
    if (K < 1) throw std::invalid_argument("LateralGraph: K must be >= 1");
    adj_.assign(base_.size(), {});
    for (std::size_t v = 1; v < base_.size(); ++v) {
      const NodeId p = base_.parent(static_cast<NodeId>(v));
      adj_[v].push_back(p);
      adj_[p].push_back(static_cast<NodeId>(v));
    }
    for (const auto& e : lateral_) {
      base_.require(e.u);
      base_.require(e.v);
      if (e.u == e.v) throw std::invalid_argument("LateralGraph: self-loop");
      const int d = base_.hop_distance(e.u, e.v);
      if (d > K_)
        throw std::invalid_argument("lateral edge (" + std::to_string(e.u) + "," +
                                    std::to_string(e.v) + ") spans tree distance " +
                                    std::to_string(d) + " > K=" + std::to_string(K_));
      adj_[e.u].push_back(e.v);
      adj_[e.v].push_back(e.u);
    }
  }

  const WeightedTree& tree() const { return base_; }
  const std::vector<LateralEdge>& lateral_edges() const { return lateral_; }
  int locality() const { return K_; }

  /// BFS distances from `source` to every node.
  std::vector<int> distances_from(NodeId source) const {
    base_.require(source);
    std::vector<int> dist(base_.size(), -1);
    std::deque<NodeId> queue{source};
    dist[source] = 0;
    while (!queue.empty()) {
      const NodeId x = queue.front();
      queue.pop_front();
      for (NodeId y : adj_[x])
        if (dist[y] < 0) {
          dist[y] = dist[x] + 1;
          queue.push_back(y);
        }
    }
    return dist;
  }

  int d_graph(NodeId u, NodeId v) const {
    base_.require(v);
    return distances_from(u)[v];
  }

 private:
  WeightedTree base_;
  std::vector<LateralEdge> lateral_;
  int K_;
  std::vector<std::vector<NodeId>> adj_;
};

inline LateralGraph extend_lateral(const WeightedTree& tree, std::vector<LateralEdge> edges, int K) {
  return LateralGraph(tree, std::move(edges), K);
}

}  // namespace hypertree
