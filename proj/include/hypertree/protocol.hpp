#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hypertree/lazy_embedding.hpp"
#include "hypertree/parallel.hpp"
#include "hypertree/rng.hpp"
#include "hypertree/tree.hpp"

namespace hypertree {

/// theta in [m]^R, 1-based digits.
struct PathParam {
  std::vector<int> theta;

  void validate(int m, int R) const {
    if (static_cast<int>(theta.size()) != R) throw std::invalid_argument("PathParam: length must equal R");
    for (int t : theta)
      if (t < 1 || t > m) throw std::invalid_argument("PathParam: digit outside 1..m");
  }

  static PathParam random(int m, int R, Rng& rng) {
    PathParam p;
    p.theta.resize(R);
    for (auto& t : p.theta) t = 1 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(m)));
    return p;
  }
};

enum class ProtocolMode { protocol, oracle };
enum class Representation { none, hyperbolic, euclidean };

inline std::string to_string(ProtocolMode m) { return m == ProtocolMode::oracle ? "oracle" : "protocol"; }
inline std::string to_string(Representation r) {
  switch (r) {
    case Representation::hyperbolic: return "hyperbolic";
    case Representation::euclidean: return "euclidean";
    default: return "none";
  }
}

struct ProtocolConfig {
  int m = 2;
  int R = 1;
  double rho = 0.1;
  ProtocolMode mode = ProtocolMode::oracle;
  Representation representation = Representation::none;
  std::shared_ptr<const LazyMaryEmbedding> embedding;  // for Representation::hyperbolic

  void validate() const {
    if (m < 2) throw std::invalid_argument("ProtocolConfig: m must be >= 2");
    if (R < 1) throw std::invalid_argument("ProtocolConfig: R must be >= 1");
    if (!(rho > 0.0 && rho < 0.5)) throw std::invalid_argument("ProtocolConfig: rho must lie in (0, 1/2)");
    if (representation == Representation::hyperbolic) {
      if (!embedding) throw std::invalid_argument("ProtocolConfig: hyperbolic representation needs an embedding");
      if (embedding->m() != m || embedding->R() != R)
        throw std::invalid_argument("ProtocolConfig: embedding shape differs from (m, R)");
    }
  }
};

/// One draw. Oracle mode fills `child`; protocol mode fills `leaf` (the
/// digits of V, i.e. the handle through which phi(V) is evaluated) and
/// `child` with the true ch_I(V).
struct Observation {
  int depth = 1;  // I
  int child = 1;  // C, or ch_I(V)
  std::vector<int> leaf;
  int y = 0;
  int y_star = 0;
};

inline Observation sample(const ProtocolConfig& cfg, const PathParam& theta, Rng& rng) {
  Observation o;
  o.depth = 1 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(cfg.R)));
  if (cfg.mode == ProtocolMode::oracle) {
    o.child = 1 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(cfg.m)));
  } else {
    o.leaf.resize(cfg.R);
    for (int d = 0; d < cfg.R; ++d)
      o.leaf[d] = d < o.depth - 1 ? theta.theta[d]
                                  : 1 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(cfg.m)));
    o.child = o.leaf[o.depth - 1];
  }
  o.y_star = o.child == theta.theta[o.depth - 1] ? 1 : 0;
  o.y = bernoulli(rng, cfg.rho) ? 1 - o.y_star : o.y_star;
  return o;
}

/// Child index the learner attributes to an observation.
inline int observed_child(const ProtocolConfig& cfg, const Observation& o) {
  if (cfg.mode == ProtocolMode::oracle) return o.child;
  switch (cfg.representation) {
    case Representation::hyperbolic: return cfg.embedding->decode_child(o.leaf, o.depth);
    case Representation::none: return o.child;
    default:
      throw std::invalid_argument("depthwise_estimate: a Euclidean representation exposes no child membership");
  }
}

struct PathEstimate {
  std::vector<int> theta_hat;
  std::vector<bool> starved;  // depth had no samples
  std::size_t decode_errors = 0;
};

/// Depth-wise argmax of mean Y over child groups; ties to the smallest
/// child, empty depths to child 1 with the starved flag.
inline PathEstimate depthwise_estimate(const ProtocolConfig& cfg, std::span<const Observation> samples) {
  const int m = cfg.m, R = cfg.R;
  std::vector<double> sum(static_cast<std::size_t>(m) * R, 0.0);
  std::vector<std::size_t> cnt(static_cast<std::size_t>(m) * R, 0);
  PathEstimate est;
  for (const auto& o : samples) {
    const int c = observed_child(cfg, o);
    if (c != o.child) ++est.decode_errors;
    const std::size_t cell = static_cast<std::size_t>(o.depth - 1) * m + (c - 1);
    sum[cell] += o.y;
    ++cnt[cell];
  }
  est.theta_hat.assign(R, 1);
  est.starved.assign(R, true);
  for (int i = 0; i < R; ++i) {
    double best = -1.0;
    for (int c = 0; c < m; ++c) {
      const std::size_t cell = static_cast<std::size_t>(i) * m + c;
      if (cnt[cell] == 0) continue;
      est.starved[i] = false;
      const double mean = sum[cell] / static_cast<double>(cnt[cell]);
      if (mean > best) {
        best = mean;
        est.theta_hat[i] = c + 1;
      }
    }
  }
  return est;
}

struct RiskReport {
  std::vector<double> per_depth;  // P_C(h(i, C) != Y*(i, C)) with C uniform on [m]
  double average = 0.0;
  int hamming = 0;

  bool success(double eps) const { return average <= eps + 1e-15; }
};

/// h(i, c) = 1{c = theta_hat_i} against Y*(i, c) = 1{c = theta_i}: a wrong
/// coordinate errs on exactly two of the m children. Starved depths count as
/// wrong.
inline RiskReport risk(const ProtocolConfig& cfg, std::span<const int> theta_hat, const PathParam& theta,
                       const std::vector<bool>& starved = {}) {
  if (static_cast<int>(theta_hat.size()) != cfg.R) throw std::invalid_argument("risk: theta_hat has wrong length");
  RiskReport r;
  r.per_depth.resize(cfg.R);
  double total = 0.0;
  for (int i = 0; i < cfg.R; ++i) {
    const bool starve = !starved.empty() && starved[i];
    const bool wrong = theta_hat[i] != theta.theta[i];
    if (wrong) ++r.hamming;
    r.per_depth[i] = (wrong || starve) ? std::min(1.0, 2.0 / cfg.m) : 0.0;
    total += r.per_depth[i];
  }
  r.average = total / cfg.R;
  return r;
}

struct TrialOutcome {
  bool success = false;
  double risk = 0.0;
  std::size_t decode_errors = 0;
};

/// Trial t draws theta and then n samples from one stream seeded by
/// derive_seed(master, t), so the first n samples do not depend on n.
inline TrialOutcome run_trial(const ProtocolConfig& cfg, std::size_t n, double eps, std::uint64_t master,
                              std::uint64_t t) {
  Rng rng(derive_seed(master, t));
  const PathParam theta = PathParam::random(cfg.m, cfg.R, rng);
  std::vector<Observation> obs;
  obs.reserve(n);
  for (std::size_t s = 0; s < n; ++s) obs.push_back(sample(cfg, theta, rng));
  const auto est = depthwise_estimate(cfg, obs);
  const auto rep = risk(cfg, est.theta_hat, theta, est.starved);
  return {rep.success(eps), rep.average, est.decode_errors};
}

struct SuccessRate {
  std::size_t n = 0;
  double rate = 0.0;
  std::size_t decode_errors = 0;
};

inline SuccessRate success_rate(const ProtocolConfig& cfg, std::size_t n, std::size_t trials, double eps,
                                std::uint64_t master, int threads = 1) {
  const auto out = parallel_map(trials, threads, [&](std::size_t t) { return run_trial(cfg, n, eps, master, t); });
  SuccessRate s;
  s.n = n;
  std::size_t ok = 0;
  for (const auto& o : out) {
    ok += o.success ? 1 : 0;
    s.decode_errors += o.decode_errors;
  }
  s.rate = trials ? static_cast<double>(ok) / static_cast<double>(trials) : 0.0;
  return s;
}

struct NStarOptions {
  std::size_t trials = 500;
  double eps = 0.0;    // risk target; 0 means exact recovery
  double delta = 0.1;  // success threshold 1 - delta
  std::uint64_t seed = 0;
  int threads = 1;
  std::optional<std::size_t> lo, hi;  // default [mR, 64 mR log(mR)]
};

struct NStarResult {
  std::size_t n_star = 0;
  double success = 0.0;
  bool found = false;
  std::size_t lo = 0, hi = 0;
  std::vector<SuccessRate> probes;
};

/// Smallest n in the bracket whose success rate is >= 1 - delta, by binary
/// search (success is assumed monotone in n).
inline NStarResult find_n_star(const ProtocolConfig& cfg, const NStarOptions& opt) {
  cfg.validate();
  const double mR = static_cast<double>(cfg.m) * cfg.R;
  NStarResult r;
  r.lo = opt.lo.value_or(static_cast<std::size_t>(mR));
  r.hi = opt.hi.value_or(static_cast<std::size_t>(std::ceil(64.0 * mR * std::log(mR))));
  if (r.hi < r.lo) r.hi = r.lo;
  const double target = 1.0 - opt.delta;
  auto probe = [&](std::size_t n) {
    auto s = success_rate(cfg, n, opt.trials, opt.eps, opt.seed, opt.threads);
    r.probes.push_back(s);
    return s;
  };
  auto top = probe(r.hi);
  if (top.rate < target) {
    r.n_star = r.hi;
    r.success = top.rate;
    return r;
  }
  std::size_t lo = r.lo, hi = r.hi;
  double hi_rate = top.rate;
  if (auto bottom = probe(lo); bottom.rate >= target) {
    hi = lo;
    hi_rate = bottom.rate;
  } else {
    while (hi - lo > 1) {
      const std::size_t mid = lo + (hi - lo) / 2;
      const auto s = probe(mid);
      if (s.rate >= target) {
        hi = mid;
        hi_rate = s.rate;
      } else {
        lo = mid;
      }
    }
  }
  r.n_star = hi;
  r.success = hi_rate;
  r.found = true;
  return r;
}

struct FanoConstants {
  double beta = 0.0;               // (1 - 2 rho) log((1 - rho) / rho)
  double c = 1.0;
  double n_lower = 0.0;            // c (m / beta) R log m
  bool n_lower_infinite = false;
  double per_sample_kl_cap = 0.0;  // (2/m) beta, for Hamming distance R
  double adjacent_kl_cap = 0.0;    // (1/R)(2/m) beta, for Hamming distance 1
  double packing_log_target = 0.0; // R log m
};

inline double bsc_beta(double rho) {
  if (!(rho > 0.0 && rho < 0.5)) throw std::invalid_argument("beta: rho must lie in (0, 1/2)");
  return (1.0 - 2.0 * rho) * std::log((1.0 - rho) / rho);
}

inline FanoConstants fano_constants(int m, int R, double rho, double c = 1.0) {
  if (m < 2 || R < 1) throw std::invalid_argument("fano_constants: need m >= 2, R >= 1");
  FanoConstants f;
  f.beta = bsc_beta(rho);
  f.c = c;
  f.per_sample_kl_cap = 2.0 / m * f.beta;
  f.adjacent_kl_cap = f.per_sample_kl_cap / R;
  f.packing_log_target = R * std::log(static_cast<double>(m));
  if (f.beta < 1e-12) {
    f.n_lower_infinite = true;
    f.n_lower = std::numeric_limits<double>::infinity();
  } else {
    f.n_lower = c * (m / f.beta) * R * std::log(static_cast<double>(m));
  }
  return f;
}

struct KlEstimate {
  double estimate = 0.0;
  double stderr_ = 0.0;
  std::size_t samples = 0;
};

/// Monte Carlo mean of log P_theta(obs) / P_theta'(obs) over oracle-mode draws
/// from P_theta.
inline KlEstimate empirical_kl(const ProtocolConfig& cfg, const PathParam& theta, const PathParam& theta2,
                               std::size_t n, std::uint64_t seed) {
  ProtocolConfig oc = cfg;
  oc.mode = ProtocolMode::oracle;
  const double lr = std::log((1.0 - cfg.rho) / cfg.rho);
  Rng rng(seed);
  double sum = 0.0, sq = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    const auto o = sample(oc, theta, rng);
    const int ystar2 = o.child == theta2.theta[o.depth - 1] ? 1 : 0;
    double l = 0.0;
    if (ystar2 != o.y_star) l = (o.y == o.y_star) ? lr : -lr;
    sum += l;
    sq += l * l;
  }
  KlEstimate k;
  k.samples = n;
  k.estimate = sum / n;
  const double var = std::max(0.0, sq / n - k.estimate * k.estimate);
  k.stderr_ = std::sqrt(var / n);
  return k;
}

struct Codebook {
  std::vector<std::vector<int>> words;
  int min_distance = 1;
  double log_size = 0.0;     // natural log of |codebook|
  double log_target = 0.0;   // R log m
};

inline int hamming(std::span<const int> a, std::span<const int> b) {
  int d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
  return d;
}

/// Greedy randomized packing: draw `attempts` uniform words, keep those at
/// Hamming distance >= max(1, ceil(R/8)) from every kept word.
inline Codebook vg_packing(int m, int R, std::uint64_t seed, std::size_t attempts = 2000) {
  if (m < 2 || R < 1) throw std::invalid_argument("vg_packing: need m >= 2, R >= 1");
  Codebook cb;
  cb.min_distance = std::max(1, (R + 7) / 8);
  cb.log_target = R * std::log(static_cast<double>(m));
  Rng rng(seed);
  for (std::size_t t = 0; t < attempts; ++t) {
    const auto w = PathParam::random(m, R, rng).theta;
    bool ok = true;
    for (const auto& c : cb.words)
      if (hamming(w, c) < cb.min_distance) {
        ok = false;
        break;
      }
    if (ok) cb.words.push_back(w);
  }
  cb.log_size = std::log(static_cast<double>(cb.words.size()));
  return cb;
}

/// Exact law of ch(V) for V uniform on the depth-R leaves below u:
/// proportional to each child's leaf count.
inline std::vector<double> child_index_marginals(const WeightedTree& tree, NodeId u) {
  std::vector<double> p;
  const double total = static_cast<double>(tree.subtree_leaf_count(u));
  for (NodeId c : tree.children(u)) p.push_back(total > 0 ? tree.subtree_leaf_count(c) / total : 0.0);
  return p;
}

/// max over internal nodes above depth R (with depth-R leaves below) of
/// max_c |P(ch = c) - 1/#children|.
inline double max_child_marginal_deviation(const WeightedTree& tree) {
  double worst = 0.0;
  for (NodeId u = 0; u < static_cast<NodeId>(tree.size()); ++u) {
    if (tree.depth(u) >= tree.depth_R() || tree.child_count(u) == 0 || tree.subtree_leaf_count(u) == 0) continue;
    const double uni = 1.0 / static_cast<double>(tree.child_count(u));
    for (double p : child_index_marginals(tree, u)) worst = std::max(worst, std::abs(p - uni));
  }
  return worst;
}

}  // namespace hypertree
