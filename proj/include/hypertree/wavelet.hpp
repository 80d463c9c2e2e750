#pragma once

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "hypertree/poincare.hpp"
#include "hypertree/rng.hpp"
#include "hypertree/tree.hpp"

namespace hypertree {

enum class ContrastKind { gram_schmidt, fourier };

/// m x (m-1) matrix with orthonormal columns orthogonal to the all-ones vector.
inline Mat contrast_basis(int m, ContrastKind kind = ContrastKind::gram_schmidt) {
  if (m < 2) throw std::invalid_argument("contrast_basis: m must be >= 2");
  Mat A(m, m - 1);
  if (kind == ContrastKind::gram_schmidt) {
    // e_i - e_{i+1}, orthonormalized against 1 and the previous columns
    const Vec one = Vec::Ones(m) / std::sqrt(static_cast<double>(m));
    for (int i = 0; i < m - 1; ++i) {
      Vec v = Vec::Zero(m);
      v(i) = 1.0;
      v(i + 1) = -1.0;
      for (int pass = 0; pass < 2; ++pass) {
        v -= one.dot(v) * one;
        for (int j = 0; j < i; ++j) v -= A.col(j).dot(v) * A.col(j);
      }
      A.col(i) = v.normalized();
    }
    return A;
  }
  int col = 0;
  for (int f = 1; 2 * f < m; ++f) {
    Vec c(m), s(m);
    for (int i = 0; i < m; ++i) {
      c(i) = std::cos(2.0 * std::numbers::pi * f * i / m);
      s(i) = std::sin(2.0 * std::numbers::pi * f * i / m);
    }
    A.col(col++) = c.normalized();
    A.col(col++) = s.normalized();
  }
  if (m % 2 == 0) {
    Vec alt(m);
    for (int i = 0; i < m; ++i) alt(i) = (i % 2 == 0) ? 1.0 : -1.0;
    A.col(col++) = alt.normalized();
  }
  return A;
}

/// psi_{v,j}: supported on the leaf block S_v = [begin, end), constant
/// a^{(j)}_i / sqrt(|S_v| / m) on the i-th child block.
struct Wavelet {
  NodeId node = 0;
  int depth = 0;
  int j = 0;
  std::size_t begin = 0, end = 0;
};

class WaveletBasis {
 public:
  WaveletBasis(int m, int R, Mat contrast, std::size_t N) : m_(m), R_(R), N_(N), a_(std::move(contrast)) {
    std::size_t level_first = 0, count = 1;
    for (int d = 0; d < R; ++d) {
      const std::size_t block = N / count;
      for (std::size_t t = 0; t < count; ++t)
        for (int j = 0; j < m - 1; ++j)
          items_.push_back({static_cast<NodeId>(level_first + t), d, j, t * block, (t + 1) * block});
      level_first += count;
      count *= static_cast<std::size_t>(m);
    }
  }

  int m() const { return m_; }
  int R() const { return R_; }
  std::size_t leaf_count() const { return N_; }
  std::size_t size() const { return items_.size(); }
  const Mat& contrast() const { return a_; }
  const Wavelet& operator[](std::size_t i) const { return items_[i]; }
  const std::vector<Wavelet>& items() const { return items_; }

  double value(std::size_t idx, std::size_t leaf) const {
    const Wavelet& w = items_[idx];
    if (leaf < w.begin || leaf >= w.end) return 0.0;
    const std::size_t child_block = (w.end - w.begin) / static_cast<std::size_t>(m_);
    const auto i = static_cast<Eigen::Index>((leaf - w.begin) / child_block);
    return a_(i, w.j) / std::sqrt(static_cast<double>(child_block));
  }

  Vec dense(std::size_t idx) const {
    const Wavelet& w = items_[idx];
    Vec v = Vec::Zero(static_cast<Eigen::Index>(N_));
    const std::size_t child_block = (w.end - w.begin) / static_cast<std::size_t>(m_);
    const double scale = 1.0 / std::sqrt(static_cast<double>(child_block));
    for (int i = 0; i < m_; ++i)
      v.segment(static_cast<Eigen::Index>(w.begin + i * child_block), static_cast<Eigen::Index>(child_block))
          .setConstant(a_(i, w.j) * scale);
    return v;
  }

  /// N x (N-1) matrix of all wavelets.
  Mat matrix() const {
    Mat W(static_cast<Eigen::Index>(N_), static_cast<Eigen::Index>(size()));
    for (std::size_t i = 0; i < size(); ++i) W.col(static_cast<Eigen::Index>(i)) = dense(i);
    return W;
  }

 private:
  int m_, R_;
  std::size_t N_;
  Mat a_;
  std::vector<Wavelet> items_;
};

inline WaveletBasis build_wavelets(int m, int R, ContrastKind kind = ContrastKind::gram_schmidt,
                                   TreeLimits limits = {}) {
  if (m < 2) throw std::invalid_argument("build_wavelets: m must be >= 2");
  if (R < 1) throw std::invalid_argument("build_wavelets: R must be >= 1");
  const auto N = checked_power(static_cast<std::size_t>(m), R, limits.leaf_cap);
  if (!N) throw std::length_error("build_wavelets: m^R exceeds the leaf cap");
  return WaveletBasis(m, R, contrast_basis(m, kind), *N);
}

struct GramReport {
  double max_deviation = 0.0;     // max |G - I|
  double norm_deviation = 0.0;    // max |<psi, psi> - 1|
  double same_node = 0.0;         // max |<psi_{v,j}, psi_{v,j'}>|, j != j'
  double disjoint = 0.0;          // disjoint supports
  double nested = 0.0;            // ancestor / descendant supports
  double max_sum = 0.0;           // max |sum of entries|
};

inline GramReport gram_check(const WaveletBasis& basis, std::size_t dense_limit = 4096) {
  if (basis.leaf_count() > dense_limit) throw std::length_error("gram_check: basis too large for a dense Gram");
  const Mat W = basis.matrix();
  const Mat G = W.transpose() * W;
  GramReport r;
  const auto n = basis.size();
  for (std::size_t i = 0; i < n; ++i) {
    r.max_sum = std::max(r.max_sum, std::abs(W.col(static_cast<Eigen::Index>(i)).sum()));
    for (std::size_t j = 0; j < n; ++j) {
      const double g = G(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      const double dev = std::abs(g - (i == j ? 1.0 : 0.0));
      r.max_deviation = std::max(r.max_deviation, dev);
      if (i == j) {
        r.norm_deviation = std::max(r.norm_deviation, dev);
        continue;
      }
      const Wavelet &a = basis[i], &b = basis[j];
      if (a.node == b.node) r.same_node = std::max(r.same_node, dev);
      else if (a.end <= b.begin || b.end <= a.begin) r.disjoint = std::max(r.disjoint, dev);
      else r.nested = std::max(r.nested, dev);
    }
  }
  return r;
}

/// k-dimensional subspace of R^N held by an orthonormal basis.
struct Subspace {
  Mat Q;

  int dim() const { return static_cast<int>(Q.cols()); }
  std::size_t ambient() const { return static_cast<std::size_t>(Q.rows()); }

  /// Orthonormalizes the columns of `spanning` (must have full column rank).
  static Subspace from_columns(const Mat& spanning) {
    if (spanning.cols() == 0) return {Mat(spanning.rows(), 0)};
    Eigen::ColPivHouseholderQR<Mat> qr(spanning);
    if (qr.rank() < spanning.cols()) throw std::invalid_argument("Subspace: columns are linearly dependent");
    Eigen::HouseholderQR<Mat> hq(spanning);
    Mat Q = hq.householderQ() * Mat::Identity(spanning.rows(), spanning.cols());
    return {std::move(Q)};
  }

  /// Gaussian N x k matrix, orthonormalized.
  static Subspace random(std::size_t N, int k, Rng& rng) {
    Mat G(static_cast<Eigen::Index>(N), k);
    for (int c = 0; c < k; ++c)
      for (Eigen::Index r = 0; r < G.rows(); ++r) G(r, c) = standard_normal(rng);
    return from_columns(G);
  }

  double orthonormality_error() const {
    return (Q.transpose() * Q - Mat::Identity(Q.cols(), Q.cols())).cwiseAbs().maxCoeff();
  }
};

struct AlignmentReport {
  std::vector<double> per_wavelet;  // |P_S psi|^2
  double average = 0.0;
  double bound = 0.0;               // k / (N - 1)
};

/// |Q^T psi|^2 for every wavelet, using block sums of Q's rows.
inline AlignmentReport alignment(const WaveletBasis& basis, const Subspace& S) {
  const auto N = basis.leaf_count();
  if (S.ambient() != N) throw std::invalid_argument("alignment: dimension mismatch");
  const auto k = S.Q.cols();
  Mat prefix = Mat::Zero(static_cast<Eigen::Index>(N) + 1, k);
  for (Eigen::Index r = 0; r < static_cast<Eigen::Index>(N); ++r) prefix.row(r + 1) = prefix.row(r) + S.Q.row(r);
  AlignmentReport rep;
  rep.per_wavelet.resize(basis.size());
  const int m = basis.m();
  double sum = 0.0;
  for (std::size_t idx = 0; idx < basis.size(); ++idx) {
    const Wavelet& w = basis[idx];
    const std::size_t b = (w.end - w.begin) / static_cast<std::size_t>(m);
    Eigen::RowVectorXd proj = Eigen::RowVectorXd::Zero(k);
    for (int i = 0; i < m; ++i) {
      const auto lo = static_cast<Eigen::Index>(w.begin + i * b), hi = static_cast<Eigen::Index>(w.begin + (i + 1) * b);
      proj += basis.contrast()(i, w.j) * (prefix.row(hi) - prefix.row(lo));
    }
    proj /= std::sqrt(static_cast<double>(b));
    const double a = std::clamp(proj.squaredNorm(), 0.0, 1.0);
    rep.per_wavelet[idx] = a;
    sum += a;
  }
  rep.average = basis.size() ? sum / static_cast<double>(basis.size()) : 0.0;
  rep.bound = static_cast<double>(k) / static_cast<double>(N - 1);
  return rep;
}

/// Tr(P_S P_{1-perp}) / (N - 1) = (k - |Q^T 1|^2 / N) / (N - 1).
inline double projector_trace_average(const Subspace& S) {
  const auto N = static_cast<double>(S.ambient());
  const Vec q1 = S.Q.transpose() * Vec::Ones(S.Q.rows());
  return (S.dim() - q1.squaredNorm() / N) / (N - 1.0);
}

struct FractionReport {
  std::size_t count = 0;       // wavelets with alignment >= 1 - eps
  double fraction = 0.0;
  double eta = 1.0;            // 1 - fraction
  double implied_k_bound = 0.0;  // (1 - eta)(1 - eps)(N - 1)
};

inline FractionReport fraction_approximated(const WaveletBasis& basis, const Subspace& S, double eps) {
  if (!(eps >= 0.0 && eps <= 1.0)) throw std::invalid_argument("fraction_approximated: eps must be in [0, 1]");
  const auto rep = alignment(basis, S);
  FractionReport f;
  for (double a : rep.per_wavelet)
    if (a >= 1.0 - eps - 1e-12) ++f.count;
  const double W = static_cast<double>(basis.size());
  f.fraction = W > 0 ? f.count / W : 0.0;
  f.eta = 1.0 - f.fraction;
  f.implied_k_bound = f.fraction * (1.0 - eps) * W;
  return f;
}

struct EdgeCut {
  NodeId node = 0;
  std::size_t wavelet = 0;
  std::size_t support = 0;     // |S_v|
  std::vector<std::int8_t> y;  // per leaf: +1 left child, -1 right child, 0 outside
};

struct EdgeCutReport {
  std::vector<EdgeCut> cuts;
  double max_deviation = 0.0;  // max |psi_v - y_v / sqrt(|S_v|)|
};

inline EdgeCutReport edge_cut_labels(const WaveletBasis& basis) {
  if (basis.m() != 2) throw std::invalid_argument("edge_cut_labels: binary trees only (m = 2)");
  EdgeCutReport rep;
  const auto N = basis.leaf_count();
  for (std::size_t idx = 0; idx < basis.size(); ++idx) {
    const Wavelet& w = basis[idx];
    EdgeCut cut;
    cut.node = w.node;
    cut.wavelet = idx;
    cut.support = w.end - w.begin;
    cut.y.assign(N, 0);
    const std::size_t mid = w.begin + cut.support / 2;
    for (std::size_t x = w.begin; x < w.end; ++x) cut.y[x] = x < mid ? 1 : -1;
    const double s = 1.0 / std::sqrt(static_cast<double>(cut.support));
    for (std::size_t x = 0; x < N; ++x)
      rep.max_deviation = std::max(rep.max_deviation, std::abs(basis.value(idx, x) - cut.y[x] * s));
    rep.cuts.push_back(std::move(cut));
  }
  return rep;
}

}  // namespace hypertree
