#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hypertree/calibration.hpp"
#include "hypertree/distortion.hpp"
#include "hypertree/euclidean.hpp"
#include "hypertree/format.hpp"
#include "hypertree/galton_watson.hpp"
#include "hypertree/lazy_embedding.hpp"
#include "hypertree/margin.hpp"
#include "hypertree/parallel.hpp"
#include "hypertree/protocol.hpp"
#include "hypertree/sarkar.hpp"
#include "hypertree/spec.hpp"
#include "hypertree/stats.hpp"
#include "hypertree/wavelet.hpp"

namespace hypertree {

inline constexpr const char* kVersion = "0.1.0";

struct Check {
  std::string name;
  bool pass = true;
  ojson value;
  ojson threshold;
};

struct SuiteResult {
  std::vector<Check> checks;
  ojson metrics = ojson::object();
  bool pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
  }
};

/// Files written during a run, removed again if the run fails.
class OutputSet {
 public:
  explicit OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) {}

  std::ofstream open(const std::string& name) {
    const auto p = dir_ / name;
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    written_.push_back(p);
    return f;
  }

  void remove_all() noexcept {
    std::error_code ec;
    for (const auto& p : written_) std::filesystem::remove(p, ec);
    written_.clear();
  }

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::filesystem::path> written_;
};

namespace detail {

inline std::string csv_join(const std::vector<std::string>& cells) {
  std::string s;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) s += ',';
    s += cells[i];
  }
  return s + '\n';
}

inline std::string S(double x) { return fmt17(x); }
inline std::string S(long long x) { return std::to_string(x); }
inline std::string S(std::size_t x) { return std::to_string(x); }
inline std::string S(int x) { return std::to_string(x); }
inline std::string S(bool b) { return b ? "true" : "false"; }

inline ojson jnum(double x) {
  if (std::isfinite(x)) return x;
  return x > 0 ? ojson("inf") : (x < 0 ? ojson("-inf") : ojson(nullptr));
}

inline Check make_check(std::string name, bool pass, double value, double threshold) {
  return {std::move(name), pass, jnum(value), jnum(threshold)};
}

inline std::uint64_t combine(std::uint64_t seed, std::initializer_list<long long> parts) {
  std::uint64_t s = seed;
  for (long long p : parts) s = derive_seed(s, static_cast<std::uint64_t>(p));
  return s;
}

}  // namespace detail

/// Closest pair of leaves in distinct depth-floor(R/2) subtrees by scanning
/// all cross pairs; reference for find_collision.
inline std::pair<std::size_t, std::size_t> closest_cross_pair_bruteforce(const WeightedTree& tree,
                                                                         const EuclideanEmbedding& emb,
                                                                         double* dist_out = nullptr) {
  const int R = tree.depth_R();
  const std::size_t n = emb.size();
  const std::size_t block = tree.subtree_leaf_count(tree.level_begin(R / 2));
  const Mat& P = emb.points();
  double best = std::numeric_limits<double>::infinity();
  std::size_t bi = 0, bj = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t start = (i / block + 1) * block;
    for (std::size_t j = start; j < n; ++j) {
      const double d = (P.col(static_cast<Eigen::Index>(i)) - P.col(static_cast<Eigen::Index>(j))).norm();
      if (d < best) {
        best = d;
        bi = i;
        bj = j;
      }
    }
  }
  if (dist_out) *dist_out = best;
  return {bi, bj};
}

// ---------------------------------------------------------------- collapse

inline SuiteResult suite_collapse(const ExperimentSpec& spec, OutputSet& out, int threads) {
  using namespace detail;
  const auto ms = spec.ints("m"), Rs = spec.ints("R");
  const int k = static_cast<int>(spec.integer("k"));
  const double B = spec.real("B"), eta = spec.real("eta");
  const auto trials = static_cast<std::size_t>(spec.integer("trials"));
  const auto strategy = euclidean_strategy_from_string(spec.text("strategy"));
  const auto oracle_max = static_cast<std::size_t>(spec.integer("oracle_max_leaves"));
  const TreeLimits limits{spec.leaf_cap};

  struct Job {
    long long m, R;
    std::size_t t;
  };
  struct Row {
    long long m, R;
    std::uint64_t seed;
    double euclid, corr, lip;
    bool corr_ok, oracle_checked, oracle_match;
  };
  std::vector<Job> jobs;
  std::map<std::pair<long long, long long>, std::shared_ptr<const WeightedTree>> trees;
  for (long long m : ms)
    for (long long R : Rs) {
      trees[{m, R}] = std::make_shared<const WeightedTree>(build_mary(static_cast<int>(m), static_cast<int>(R), 1.0, limits));
      for (std::size_t t = 0; t < trials; ++t) jobs.push_back({m, R, t});
    }
  const auto rows = parallel_map(jobs.size(), threads, [&](std::size_t i) {
    const Job& j = jobs[i];
    const auto& tree = *trees.at({j.m, j.R});
    const std::uint64_t seed = derive_seed(spec.seed, j.t);
    const auto emb = embed_euclidean(tree, k, B, strategy, seed);
    const auto col = find_collision(tree, emb, eta, 1.0);
    const auto cut = canonical_cut(tree, col.u, col.v);
    const auto lip = required_readout_lipschitz(cut, emb, col.u, col.v);
    Row r{j.m, j.R, seed, col.euclid_dist, col.corr_dist, lip.bound, col.corr_ok, false, true};
    if (emb.size() <= oracle_max) {
      double d = 0.0;
      const auto [a, b] = closest_cross_pair_bruteforce(tree, emb, &d);
      r.oracle_checked = true;
      r.oracle_match = emb.first_leaf() + static_cast<NodeId>(a) == col.u &&
                       emb.first_leaf() + static_cast<NodeId>(b) == col.v && d == col.euclid_dist;
    }
    return r;
  });

  SuiteResult res;
  auto csv = out.open("collapse.csv");
  csv << csv_join({"m", "R", "k", "B", "eta", "seed", "strategy", "euclid_dist", "bound", "corr_dist", "lip_lower_bound"});
  std::map<long long, double> c_of;
  const auto c_fixed = spec.optional_real("c");
  for (long long m : ms) {
    std::vector<std::pair<int, double>> obs;
    for (const auto& r : rows)
      if (r.m == m) obs.emplace_back(static_cast<int>(r.R), r.euclid);
    c_of[m] = c_fixed ? *c_fixed : calibrate_collision_constant(obs, static_cast<double>(m), k, B, eta);
  }
  std::size_t oracle_checked = 0, oracle_bad = 0, corr_bad = 0, above_bound = 0;
  for (const auto& r : rows) {
    const double bound = collision_scale(static_cast<double>(r.m), static_cast<int>(r.R), k, B, eta, c_of[r.m]);
    csv << csv_join({S(r.m), S(r.R), S(k), S(B), S(eta), std::to_string(r.seed), to_string(strategy), S(r.euclid),
                     S(bound), S(r.corr), S(r.lip)});
    oracle_checked += r.oracle_checked;
    oracle_bad += r.oracle_checked && !r.oracle_match;
    corr_bad += !r.corr_ok;
    above_bound += r.euclid > bound * (1.0 + 1e-12);
  }
  res.checks.push_back(make_check("grid_matches_oracle", oracle_bad == 0, static_cast<double>(oracle_bad), 0));
  res.checks.push_back(make_check("corr_dist_at_least_lambda_R", corr_bad == 0, static_cast<double>(corr_bad), 0));
  res.checks.push_back(make_check("distance_within_bound", above_bound == 0, static_cast<double>(above_bound), 0));
  res.metrics["oracle_instances"] = oracle_checked;
  ojson per_m = ojson::array();
  for (long long m : ms) {
    std::vector<double> x, yd, yl;
    for (const auto& r : rows)
      if (r.m == m && r.euclid > 0.0) {
        x.push_back(static_cast<double>(r.R));
        yd.push_back(std::log(r.euclid));
        yl.push_back(std::log(r.lip));
      }
    const double expo = (std::log(static_cast<double>(m)) - 4.0 * eta) / (2.0 * k);
    const auto fd = linear_fit(x, yd), fl = linear_fit(x, yl);
    ojson e;
    e["m"] = m;
    e["c_calibrated"] = jnum(c_of[m]);
    e["exponent"] = expo;
    e["slope_log_distance"] = jnum(fd.slope);
    e["slope_log_lipschitz"] = jnum(fl.slope);
    per_m.push_back(e);
    if (fd.valid()) {
      res.checks.push_back(make_check("distance_slope_m" + std::to_string(m), fd.slope <= -expo + 0.1, fd.slope, -expo + 0.1));
      res.checks.push_back(make_check("lipschitz_slope_m" + std::to_string(m), fl.slope >= expo - 0.1, fl.slope, expo - 0.1));
    }
  }
  res.metrics["per_m"] = per_m;
  return res;
}

// ---------------------------------------------------------------- wavelet

inline SuiteResult suite_wavelet(const ExperimentSpec& spec, OutputSet& out, int threads) {
  using namespace detail;
  const auto ms = spec.ints("m"), Rs = spec.ints("R"), ks = spec.ints("k");
  const auto count = static_cast<std::size_t>(spec.integer("subspaces"));
  const double eps = spec.real("eps");
  const TreeLimits limits{spec.leaf_cap};
  SuiteResult res;
  auto wcsv = out.open("wavelets.csv");
  wcsv << csv_join({"m", "R", "index", "node", "depth", "j", "support_begin", "support_end", "norm", "sum"});
  auto acsv = out.open("alignment.csv");
  acsv << csv_join({"m", "R", "k", "seed", "avg_alignment", "bound", "fraction_eps", "implied_k_bound"});
  double worst_gram = 0.0, worst_trace_gap = 0.0, worst_excess = -1.0, worst_witness = 0.0;
  std::size_t count_bad = 0, bound_bad = 0, implied_bad = 0;
  ojson grams = ojson::array();
  for (long long m : ms)
    for (long long R : Rs) {
      const auto basis = build_wavelets(static_cast<int>(m), static_cast<int>(R), ContrastKind::gram_schmidt, limits);
      const std::size_t N = basis.leaf_count();
      count_bad += basis.size() != N - 1;
      for (std::size_t i = 0; i < basis.size(); ++i) {
        const Vec v = basis.dense(i);
        const auto& w = basis[i];
        wcsv << csv_join({S(m), S(R), S(i), S(static_cast<long long>(w.node)), S(w.depth), S(w.j + 1), S(w.begin),
                          S(w.end), S(v.norm()), S(v.sum())});
      }
      if (N <= 4096) {
        const auto g = gram_check(basis);
        worst_gram = std::max(worst_gram, g.max_deviation);
        ojson e;
        e["m"] = m;
        e["R"] = R;
        e["wavelets"] = basis.size();
        e["gram_deviation"] = g.max_deviation;
        e["same_node"] = g.same_node;
        e["disjoint"] = g.disjoint;
        e["nested"] = g.nested;
        grams.push_back(e);
      }
      for (long long k : ks) {
        if (k < 1 || static_cast<std::size_t>(k) > N - 1) continue;
        const auto reports = parallel_map(count, threads, [&](std::size_t s) {
          const std::uint64_t seed = combine(spec.seed, {m, R, k, static_cast<long long>(s)});
          Rng rng(seed);
          const auto S = Subspace::random(N, static_cast<int>(k), rng);
          const auto a = alignment(basis, S);
          const auto f = fraction_approximated(basis, S, eps);
          return std::tuple<std::uint64_t, AlignmentReport, FractionReport, double>{seed, a, f, projector_trace_average(S)};
        });
        for (const auto& [seed, a, f, tr] : reports) {
          acsv << csv_join({S(m), S(R), S(k), std::to_string(seed), S(a.average), S(a.bound), S(f.fraction),
                            S(f.implied_k_bound)});
          worst_excess = std::max(worst_excess, a.average - a.bound);
          bound_bad += a.average > a.bound + 1e-10;
          implied_bad += f.implied_k_bound > static_cast<double>(k) + 1e-9;
          worst_trace_gap = std::max(worst_trace_gap, std::abs(a.average - tr));
        }
        Mat span(static_cast<Eigen::Index>(N), k);
        for (long long i = 0; i < k; ++i) span.col(i) = basis.dense(static_cast<std::size_t>(i));
        const auto wa = alignment(basis, Subspace::from_columns(span));
        worst_witness = std::max(worst_witness, std::abs(wa.average - wa.bound));
      }
    }
  res.metrics["gram"] = grams;
  res.metrics["max_alignment_excess"] = jnum(worst_excess);
  res.checks.push_back(make_check("wavelet_count", count_bad == 0, static_cast<double>(count_bad), 0));
  res.checks.push_back(make_check("gram_deviation", worst_gram <= 1e-10, worst_gram, 1e-10));
  res.checks.push_back(make_check("alignment_bound", bound_bad == 0, static_cast<double>(bound_bad), 0));
  res.checks.push_back(make_check("trace_identity", worst_trace_gap <= 1e-10, worst_trace_gap, 1e-10));
  res.checks.push_back(make_check("bound_attained_by_wavelet_span", worst_witness <= 1e-10, worst_witness, 1e-10));
  res.checks.push_back(make_check("implied_k_at_most_k", implied_bad == 0, static_cast<double>(implied_bad), 0));
  return res;
}

// ---------------------------------------------------------------- embed

struct EmbedSummary {
  double kappa = 0.0, implied_c_k = 0.0;
  DistortionReport dist;
  double edge_err = 0.0;
  double min_gamma = std::numeric_limits<double>::infinity();
  bool margins_ok = true;
  std::size_t decode_errors = 0;
  PackingConverse packing;
};

/// Margin scan over every (internal node, child) plus child decoding of every
/// leaf below each internal node.
inline void scan_margins(const HyperbolicEmbedding& emb, EmbedSummary& s) {
  const auto& tree = emb.tree();
  for (NodeId a = 0; a < static_cast<NodeId>(tree.size()); ++a) {
    if (tree.child_count(a) == 0) continue;
    for (NodeId c : tree.children(a)) {
      const auto cm = cone_margin(emb, a, c);
      if (cm.no_sibling) continue;
      s.min_gamma = std::min(s.min_gamma, cm.gamma);
      s.margins_ok = s.margins_ok && cm.sides_ok && cm.gamma > 0.0;
    }
    for (NodeId x : terminal_descendants(tree, a))
      if (decode_child(emb, a, x) != tree.ancestor_at_depth(x, tree.depth(a) + 1)) ++s.decode_errors;
  }
}

inline SuiteResult suite_embed(const ExperimentSpec& spec, OutputSet& out, int threads) {
  using namespace detail;
  const auto ms = spec.ints("m"), Rs = spec.ints("R"), ks = spec.ints("k");
  const double epsilon = spec.real("epsilon"), eta = spec.real("eta");
  const auto budget = static_cast<std::size_t>(spec.integer("pair_budget"));
  const auto kappa_fixed = spec.optional_real("kappa");
  const auto c_k = spec.optional_real("c_k");
  const bool dump = spec.flag("dump");
  const TreeLimits limits{spec.leaf_cap};

  struct Job {
    long long m, R, k;
  };
  std::vector<Job> jobs;
  for (long long m : ms)
    for (long long R : Rs)
      for (long long k : ks) jobs.push_back({m, R, k});
  struct Result {
    EmbedSummary s;
    std::shared_ptr<HyperbolicEmbedding> emb;
    std::optional<CurvatureCondition> cond;
  };
  const auto results = parallel_map(jobs.size(), threads, [&](std::size_t i) {
    const auto& j = jobs[i];
    const auto tree = build_mary(static_cast<int>(j.m), static_cast<int>(j.R), 1.0, limits);
    Result r;
    if (kappa_fixed) {
      r.s.kappa = *kappa_fixed;
    } else {
      CalibrationOptions co;
      co.k = static_cast<int>(j.k);
      co.epsilon = epsilon;
      co.pair_budget = budget;
      co.seed = spec.seed;
      r.s.kappa = calibrate_curvature(tree, co).kappa;
    }
    SarkarOptions so;
    so.k = static_cast<int>(j.k);
    so.kappa = r.s.kappa;
    so.tau = 1.0;
    so.epsilon = epsilon;
    so.c_k = c_k;
    r.emb = std::make_shared<HyperbolicEmbedding>(sarkar_embed(tree, so));
    r.cond = r.emb->curvature_condition();
    r.s.dist = distortion(tree, *r.emb, budget, spec.seed);
    r.s.implied_c_k = std::sqrt(r.s.kappa) * epsilon / std::log(static_cast<double>(j.m));
    for (NodeId v = 1; v < static_cast<NodeId>(tree.size()); ++v)
      r.s.edge_err = std::max(r.s.edge_err, std::abs(r.emb->distance(v, tree.parent(v)) - 1.0));
    scan_margins(*r.emb, r.s);
    const auto growth = check_regular_growth(tree, {eta, static_cast<int>(j.R), std::nullopt});
    r.s.packing = packing_converse_check(growth, 1.0, r.s.dist.distortion, 1.0, static_cast<int>(j.k), r.s.kappa);
    return r;
  });

  SuiteResult res;
  auto csv = out.open("embed.csv");
  csv << csv_join({"m", "R", "k", "epsilon", "kappa", "tau", "distortion", "worst_expansion", "worst_contraction",
                   "pairs", "pair_mode", "edge_max_rel_err", "min_gamma", "margin_ok", "decode_errors", "implied_c_k",
                   "curvature_condition", "packing_sqrt_kappa_bound", "packing_consistent"});
  bool dist_ok = true, edge_ok = true, margin_ok = true, pack_ok = true;
  double worst_d = 1.0;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& j = jobs[i];
    const auto& r = results[i];
    const std::string cond = r.cond ? S(r.cond->holds) : "";
    csv << csv_join({S(j.m), S(j.R), S(j.k), S(epsilon), S(r.s.kappa), S(1.0), S(r.s.dist.distortion),
                     S(r.s.dist.worst_expansion), S(r.s.dist.worst_contraction), S(r.s.dist.pairs),
                     to_string(r.s.dist.mode), S(r.s.edge_err), S(r.s.min_gamma),
                     S(r.s.margins_ok && r.s.decode_errors == 0), S(r.s.decode_errors), S(r.s.implied_c_k), cond,
                     S(r.s.packing.leading_sqrt_kappa), S(r.s.packing.consistent)});
    worst_d = std::max(worst_d, r.s.dist.distortion);
    dist_ok = dist_ok && r.s.dist.distortion <= 1.0 + epsilon + 1e-12;
    edge_ok = edge_ok && r.s.edge_err <= 1e-6;
    margin_ok = margin_ok && r.s.margins_ok && r.s.decode_errors == 0;
    pack_ok = pack_ok && r.s.packing.consistent;
    if (dump) {
      const std::string stem = "embedding_m" + S(j.m) + "_R" + S(j.R) + "_k" + S(j.k);
      auto f = out.open(stem + ".csv");
      std::vector<std::string> head{"node_id"};
      for (long long c = 0; c < j.k; ++c) head.push_back("coord_" + std::to_string(c));
      head.push_back("polar_radius");
      f << csv_join(head);
      const auto& tree = r.emb->tree();
      for (NodeId v = 0; v < static_cast<NodeId>(tree.size()); ++v) {
        const auto p = r.emb->polar_in_frame(v, tree.root());
        const BallPoint b = BallPoint::from_polar(p.direction, p.unit_radius);
        std::vector<std::string> cells{std::to_string(v)};
        for (long long c = 0; c < j.k; ++c) cells.push_back(S(b.coords(c)));
        cells.push_back(S(p.unit_radius / std::sqrt(r.s.kappa)));
        f << csv_join(cells);
      }
      ojson side;
      side["kappa"] = r.s.kappa;
      side["tau"] = 1.0;
      side["k"] = j.k;
      side["epsilon"] = epsilon;
      side["distortion"] = {{"worst_expansion", jnum(r.s.dist.worst_expansion)},
                            {"worst_contraction", jnum(r.s.dist.worst_contraction)},
                            {"D", jnum(r.s.dist.distortion)},
                            {"scale_free", jnum(r.s.dist.scale_free)},
                            {"pairs", r.s.dist.pairs},
                            {"mode", to_string(r.s.dist.mode)},
                            {"seed", r.s.dist.seed}};
      auto jf = out.open(stem + ".json");
      jf << side.dump(2) << '\n';
    }
  }
  res.metrics["max_distortion"] = worst_d;
  res.checks.push_back(make_check("distortion", dist_ok, worst_d, 1.0 + epsilon));
  res.checks.push_back(make_check("edge_length", edge_ok, 0, 1e-6));
  res.checks.push_back({"cone_margins", margin_ok, margin_ok, true});
  res.checks.push_back({"packing_converse_consistent", pack_ok, pack_ok, true});
  return res;
}

// ---------------------------------------------------------------- protocol

/// Curvature for lazy protocol embeddings: calibrated on a shallow complete
/// tree (the required curvature depends on the branching, not the depth).
inline double protocol_kappa(int m, int k, double epsilon, std::optional<double> fixed, std::uint64_t seed) {
  if (fixed) return *fixed;
  CalibrationOptions co;
  co.k = k;
  co.epsilon = epsilon;
  co.seed = seed;
  return calibrate_curvature(build_mary(m, m <= 4 ? 4 : 3, 1.0), co).kappa;
}

inline SuiteResult suite_protocol(const ExperimentSpec& spec, OutputSet& out, int threads) {
  using namespace detail;
  const auto ms = spec.ints("m"), Rs = spec.ints("R");
  const auto rhos = spec.reals("rho");
  const double eps = spec.real("eps"), delta = spec.real("delta");
  const auto trials = static_cast<std::size_t>(spec.integer("trials"));
  const auto mode = spec.text("mode") == "protocol" ? ProtocolMode::protocol : ProtocolMode::oracle;
  const auto rep_name = spec.text("representation");
  const auto rep = rep_name == "hyperbolic" ? Representation::hyperbolic
                                            : (rep_name == "euclidean" ? Representation::euclidean : Representation::none);
  const int k = static_cast<int>(spec.integer("k"));
  const auto kl_samples = static_cast<std::size_t>(spec.integer("kl_samples"));

  SuiteResult res;
  auto csv = out.open("protocol.csv");
  csv << csv_join({"m", "R", "rho", "mode", "representation", "seed", "trials", "n_star", "found", "success",
                   "n_star_over_R_log_mR", "beta", "fano_n_lower_c1", "decode_errors", "kl_estimate", "kl_stderr",
                   "kl_cap"});
  bool all_found = true, kl_ok = true, decode_ok = true;
  ojson shapes = ojson::array();
  for (long long m : ms) {
    std::optional<double> kappa;
    if (rep == Representation::hyperbolic) kappa = protocol_kappa(static_cast<int>(m), k, 0.1, spec.optional_real("kappa"), spec.seed);
    for (double rho : rhos) {
      std::vector<double> ratios;
      for (long long R : Rs) {
        ProtocolConfig cfg;
        cfg.m = static_cast<int>(m);
        cfg.R = static_cast<int>(R);
        cfg.rho = rho;
        cfg.mode = mode;
        cfg.representation = rep;
        if (kappa) {
          SarkarOptions so;
          so.k = k;
          so.kappa = *kappa;
          so.tau = 1.0;
          cfg.embedding = std::make_shared<LazyMaryEmbedding>(cfg.m, cfg.R, so);
        }
        NStarOptions no;
        no.trials = trials;
        no.eps = eps;
        no.delta = delta;
        no.seed = spec.seed;
        no.threads = threads;
        const auto ns = find_n_star(cfg, no);
        std::size_t dec = 0;
        for (const auto& p : ns.probes) dec += p.decode_errors;
        const double ratio = static_cast<double>(ns.n_star) / (R * std::log(static_cast<double>(m * R)));
        ratios.push_back(ratio);
        const auto fano = fano_constants(cfg.m, cfg.R, rho, 1.0);
        std::string kl_e, kl_s, kl_c;
        if (kl_samples > 0) {
          Rng rng(combine(spec.seed, {m, R, 0x4b4c}));
          const auto theta = PathParam::random(cfg.m, cfg.R, rng);
          auto theta2 = theta;
          theta2.theta[0] = theta.theta[0] % cfg.m + 1;
          const auto kl = empirical_kl(cfg, theta, theta2, kl_samples, combine(spec.seed, {m, R, 0x4b4d}));
          kl_e = S(kl.estimate);
          kl_s = S(kl.stderr_);
          kl_c = S(fano.adjacent_kl_cap);
          kl_ok = kl_ok && kl.estimate <= fano.adjacent_kl_cap + 3.0 * kl.stderr_;
        }
        all_found = all_found && ns.found && ns.success >= 1.0 - delta;
        decode_ok = decode_ok && dec == 0;
        csv << csv_join({S(m), S(R), S(rho), to_string(mode), to_string(rep), std::to_string(spec.seed), S(trials),
                         S(ns.n_star), S(ns.found), S(ns.success), S(ratio), S(fano.beta), S(fano.n_lower), S(dec), kl_e,
                         kl_s, kl_c});
      }
      if (ratios.size() >= 2) {
        const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
        const double spread = *hi / *lo;
        shapes.push_back({{"m", m}, {"rho", rho}, {"ratio_spread", spread}});
        res.checks.push_back(make_check("rate_shape_m" + std::to_string(m) + "_rho" + fmt17(rho), spread < 2.0, spread, 2.0));
      }
    }
  }
  res.metrics["rate_shape"] = shapes;
  res.checks.push_back({"success_at_n_star", all_found, all_found, true});
  res.checks.push_back({"child_decoding", decode_ok, decode_ok, true});
  if (kl_samples > 0) res.checks.push_back({"kl_within_cap", kl_ok, kl_ok, true});
  return res;
}

// ---------------------------------------------------------------- separation

inline SuiteResult suite_separation(const ExperimentSpec& spec, OutputSet& out, int threads) {
  using namespace detail;
  const int m = static_cast<int>(spec.integer("m"));
  const auto Rs = spec.ints("R");
  const int k = static_cast<int>(spec.integer("k"));
  const double B = spec.real("B"), rho = spec.real("rho"), eps = spec.real("eps"), delta = spec.real("delta");
  const double eta = spec.real("eta"), epsilon = spec.real("epsilon");
  const auto trials = static_cast<std::size_t>(spec.integer("trials"));
  const auto etrials = static_cast<std::size_t>(spec.integer("euclid_trials"));
  const TreeLimits limits{spec.leaf_cap};

  SuiteResult res;
  auto csv = out.open("separation.csv");
  csv << csv_join({"R", "m", "k", "B", "rho", "eta", "seed", "kappa", "n_star", "success", "decode_errors",
                   "euclid_dist_median", "bound_shape", "lip_required_median"});
  if (Rs.empty()) return res;
  const double kappa = protocol_kappa(m, k, epsilon, std::nullopt, spec.seed);
  std::vector<double> xs, ns, xr, ylip;
  bool found = true;
  std::size_t decode_errors = 0;
  for (long long R : Rs) {
    ProtocolConfig cfg;
    cfg.m = m;
    cfg.R = static_cast<int>(R);
    cfg.rho = rho;
    cfg.mode = ProtocolMode::protocol;
    cfg.representation = Representation::hyperbolic;
    SarkarOptions so;
    so.k = k;
    so.kappa = kappa;
    so.tau = 1.0;
    cfg.embedding = std::make_shared<LazyMaryEmbedding>(m, cfg.R, so);
    NStarOptions no;
    no.trials = trials;
    no.eps = eps;
    no.delta = delta;
    no.seed = spec.seed;
    no.threads = threads;
    const auto nsr = find_n_star(cfg, no);
    std::size_t dec = 0;
    for (const auto& p : nsr.probes) dec += p.decode_errors;
    decode_errors += dec;
    found = found && nsr.found;

    const auto tree = build_mary(m, static_cast<int>(R), 1.0, limits);
    const auto eu = parallel_map(etrials, threads, [&](std::size_t t) {
      const auto emb = embed_euclidean(tree, k, B, EuclideanStrategy::random_uniform, derive_seed(spec.seed, t));
      const auto col = find_collision(tree, emb, eta, 1.0);
      const auto cut = canonical_cut(tree, col.u, col.v);
      return std::pair<double, double>{col.euclid_dist, required_readout_lipschitz(cut, emb, col.u, col.v).bound};
    });
    std::vector<double> d, l;
    for (const auto& [a, b] : eu) {
      d.push_back(a);
      l.push_back(b);
      if (a > 0.0) {
        xr.push_back(static_cast<double>(R));
        ylip.push_back(std::log(b));
      }
    }
    xs.push_back(R * std::log(static_cast<double>(m * R)));
    ns.push_back(static_cast<double>(nsr.n_star));
    csv << csv_join({S(R), S(m), S(k), S(B), S(rho), S(eta), std::to_string(spec.seed), S(kappa), S(nsr.n_star),
                     S(nsr.success), S(dec), S(median(d)), S(collision_scale(m, static_cast<int>(R), k, B, eta, 1.0)),
                     S(median(l))});
  }
  const auto fit_n = linear_fit(xs, ns);
  const auto fit_l = linear_fit(xr, ylip);
  const double expo = (std::log(static_cast<double>(m)) - 4.0 * eta) / (2.0 * k);
  res.metrics["kappa"] = kappa;
  res.metrics["n_star_fit"] = {{"a", jnum(fit_n.slope)}, {"b", jnum(fit_n.intercept)}, {"r2", jnum(fit_n.r2)}};
  res.metrics["lipschitz_slope"] = jnum(fit_l.slope);
  res.checks.push_back({"n_star_found", found, found, true});
  res.checks.push_back(make_check("decode_errors", decode_errors == 0, static_cast<double>(decode_errors), 0));
  if (fit_n.valid()) res.checks.push_back(make_check("n_star_fit_r2", fit_n.r2 >= 0.9, fit_n.r2, 0.9));
  if (fit_l.valid()) res.checks.push_back(make_check("lipschitz_slope", fit_l.slope >= expo - 0.1, fit_l.slope, expo - 0.1));
  return res;
}

// ---------------------------------------------------------------- driver

struct RunOptions {
  std::filesystem::path out;
  int threads = 1;
  std::optional<std::uint64_t> seed;
};

struct RunResult {
  int exit_code = 0;  // 0 ok, 1 spec error, 2 acceptance failure
  std::vector<Diagnostic> diagnostics;
  std::string error;
  SuiteResult suite;
};

inline SuiteResult run_suite(const ExperimentSpec& spec, OutputSet& out, int threads) {
  if (spec.suite == "collapse") return suite_collapse(spec, out, threads);
  if (spec.suite == "wavelet") return suite_wavelet(spec, out, threads);
  if (spec.suite == "embed") return suite_embed(spec, out, threads);
  if (spec.suite == "protocol") return suite_protocol(spec, out, threads);
  if (spec.suite == "separation") return suite_separation(spec, out, threads);
  throw std::invalid_argument("unknown suite '" + spec.suite + "'");
}

/// Parses, validates and runs one suite, writing spec.json, the suite CSVs
/// and summary.json into opt.out. Nothing is left behind on failure.
inline RunResult run(const std::string& suite, std::istream& spec_text, const RunOptions& opt) {
  RunResult rr;
  if (std::find(suite_names().begin(), suite_names().end(), suite) == suite_names().end()) {
    rr.exit_code = 1;
    rr.diagnostics.push_back({0, "", "unknown suite '" + suite + "'"});
    return rr;
  }
  ExperimentSpec spec = parse_spec(spec_text, suite, rr.diagnostics);
  if (const char* env = std::getenv("HYPERTREE_LEAF_CAP")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (*env && *end == '\0' && v > 0) spec.leaf_cap = static_cast<std::size_t>(v);
    else rr.diagnostics.push_back({0, "HYPERTREE_LEAF_CAP", "expected a positive integer"});
  }
  if (opt.seed) spec.seed = *opt.seed;
  if (rr.diagnostics.empty()) rr.diagnostics = validate(spec);
  if (!rr.diagnostics.empty()) {
    rr.exit_code = 1;
    return rr;
  }
  std::error_code ec;
  std::filesystem::create_directories(opt.out, ec);
  if (ec) {
    rr.exit_code = 1;
    rr.error = "cannot create output directory " + opt.out.string() + ": " + ec.message();
    return rr;
  }
  OutputSet out(opt.out);
  try {
    {
      auto f = out.open("spec.json");
      f << spec.to_json(kVersion).dump(2) << '\n';
    }
    rr.suite = run_suite(spec, out, std::max(1, opt.threads));
    ojson summary;
    summary["suite"] = suite;
    summary["version"] = kVersion;
    summary["pass"] = rr.suite.pass();
    ojson checks = ojson::array();
    for (const auto& c : rr.suite.checks)
      checks.push_back({{"name", c.name}, {"pass", c.pass}, {"value", c.value}, {"threshold", c.threshold}});
    summary["checks"] = checks;
    summary["metrics"] = rr.suite.metrics;
    auto f = out.open("summary.json");
    f << summary.dump(2) << '\n';
  } catch (const std::exception& e) {
    out.remove_all();
    rr.exit_code = 1;
    rr.error = e.what();
    return rr;
  }
  rr.exit_code = rr.suite.pass() ? 0 : 2;
  return rr;
}

}  // namespace hypertree
