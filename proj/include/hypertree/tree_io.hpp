#pragma once

#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hypertree/format.hpp"
#include "hypertree/tree.hpp"

namespace hypertree {

// Text format:
//   m R lambda mode
//   child_id parent_id weight      (one line per edge, child ids 1..n-1)
// lambda is the common weight of a homogeneous tree, otherwise the minimum.

inline void write_tree(std::ostream& out, const WeightedTree& tree) {
  const double lambda = tree.homogeneous_weight().value_or(tree.min_weight());
  out << fmt17(tree.growth_rate()) << ' ' << tree.depth_R() << ' ' << fmt17(lambda) << ' '
      << to_string(tree.mode()) << '\n';
  for (std::size_t v = 1; v < tree.size(); ++v) {
    const auto id = static_cast<NodeId>(v);
    out << v << ' ' << tree.parent(id) << ' ' << fmt17(tree.weight(id)) << '\n';
  }
}

struct TreeHeader {
  double m = 0.0;
  int R = 0;
  double lambda = 0.0;
  TreeMode mode = TreeMode::custom;
};

inline WeightedTree read_tree(std::istream& in, TreeHeader* header_out = nullptr) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("tree file: missing header");
  TreeHeader h;
  {
    std::istringstream hs(line);
    std::string m_s, lambda_s, mode_s;
    if (!(hs >> m_s >> h.R >> lambda_s >> mode_s))
      throw std::runtime_error("tree file: header must be 'm R lambda mode'");
    h.m = std::stod(m_s);
    h.lambda = std::stod(lambda_s);
    h.mode = tree_mode_from_string(mode_s);
  }
  std::vector<NodeId> parent{kNoParent};
  std::vector<double> weight{0.0};
  std::vector<bool> seen{true};
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    long long child = 0, par = 0;
    std::string w_s;
    if (!(ls >> child >> par >> w_s))
      throw std::runtime_error("tree file line " + std::to_string(line_no) +
                               ": expected 'child parent weight'");
    if (child < 1) throw std::runtime_error("tree file line " + std::to_string(line_no) +
                                            ": child id must be >= 1");
    const auto c = static_cast<std::size_t>(child);
    if (c >= parent.size()) {
      parent.resize(c + 1, kNoParent);
      weight.resize(c + 1, 0.0);
      seen.resize(c + 1, false);
    }
    if (seen[c]) throw std::runtime_error("tree file line " + std::to_string(line_no) +
                                          ": duplicate child id");
    seen[c] = true;
    parent[c] = static_cast<NodeId>(par);
    weight[c] = std::stod(w_s);
  }
  for (std::size_t v = 0; v < seen.size(); ++v)
    if (!seen[v]) throw std::runtime_error("tree file: missing node " + std::to_string(v));
  if (header_out) *header_out = h;
  return WeightedTree::from_parents(std::move(parent), std::move(weight), h.R, h.mode, h.m);
}

}  // namespace hypertree
