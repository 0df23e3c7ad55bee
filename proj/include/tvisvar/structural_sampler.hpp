#pragma once

// Row-wise update of the structural matrices. For row n of B_m with pattern k
// the conditional kernel of the free coefficients b is
//
//   |b' w|^{T_m} exp(-b' S b / 2),   S = I / gamma + V (sum_t e_t e_t' / sigma2_nt) V'
//
// where w = V c and c is the cofactor vector of row n. The pattern indicator is
// drawn with b integrated out, then b is drawn exactly given the pattern.

#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "tvisvar/core_model.hpp"
#include "tvisvar/errors.hpp"
#include "tvisvar/random.hpp"

namespace tvisvar::structural {

/// w such that det(B with row n replaced by b V) = b' w.
inline VectorXd cofactor_vector(const MatrixXd& B, std::size_t n, const MatrixXd& V) {
  const auto N = B.rows();
  require(B.cols() == N && V.cols() == N, "cofactor_vector: dimension mismatch");
  require(B.allFinite(), "cofactor_vector: B must be finite");
  const auto row = static_cast<Eigen::Index>(n);
  VectorXd c(N);
  MatrixXd work = B;
  for (Eigen::Index j = 0; j < N; ++j) {
    work.row(row).setZero();
    work(row, j) = 1.0;
    c(j) = work.determinant();
  }
  return V * c;
}

/// Lower Cholesky factor of S; on failure retries once with
/// 1e-10 * trace(S) / r added to the diagonal.
inline Eigen::LLT<MatrixXd> robust_cholesky(const MatrixXd& S) {
  Eigen::LLT<MatrixXd> llt(S);
  if (llt.info() == Eigen::Success) return llt;
  const double jitter = 1e-10 * S.trace() / static_cast<double>(S.rows());
  MatrixXd Sj = S;
  Sj.diagonal().array() += std::abs(jitter);
  llt.compute(Sj);
  if (llt.info() != Eigen::Success) throw NumericalError("Cholesky failed after jitter");
  return llt;
}

/// Scatter of the reduced-form residuals of one regime weighted by the
/// structural variances of equation n: sum_t e_t e_t' / sigma2_nt.
/// `residuals` is T x N, `variances` is the length-T row of sigma2 for
/// equation n, `members` lists the periods of the regime.
inline MatrixXd weighted_scatter(const MatrixXd& residuals, const RowVectorXd& variances,
                                 std::span<const int> members) {
  const auto N = residuals.cols();
  MatrixXd scatter = MatrixXd::Zero(N, N);
  for (int t : members) {
    const double v = variances(t);
    scatter.selfadjointView<Eigen::Lower>().rankUpdate(residuals.row(t).transpose(), 1.0 / v);
  }
  return scatter.selfadjointView<Eigen::Lower>();
}

/// S = I / gamma + V scatter V'.
inline MatrixXd row_posterior_precision(const MatrixXd& scatter, const MatrixXd& V, double gamma) {
  require(gamma > 0.0, "row_posterior_precision: gamma must be positive");
  if (!scatter.allFinite()) throw ValidationError("row_posterior_precision: non-finite residuals");
  MatrixXd S = V * scatter * V.transpose();
  S.diagonal().array() += 1.0 / gamma;
  return 0.5 * (S + S.transpose());
}

/// Convenience form taking the regime's residuals and variances directly.
inline MatrixXd row_posterior_precision(const MatrixXd& residuals, const VectorXd& variances,
                                        const MatrixXd& V, double gamma) {
  require(residuals.rows() == variances.size(), "one variance per residual row");
  require((variances.array() > 0.0).all(), "variances must be positive");
  if (!residuals.allFinite()) throw ValidationError("row_posterior_precision: non-finite residuals");
  std::vector<int> members(static_cast<std::size_t>(residuals.rows()));
  for (std::size_t i = 0; i < members.size(); ++i) members[i] = static_cast<int>(i);
  return row_posterior_precision(weighted_scatter(residuals, variances.transpose(), members), V, gamma);
}

/// log of (2 pi gamma)^{-r/2} * integral of |b' w|^{T_m} exp(-b' S b / 2) db.
inline double pattern_log_marginal(const MatrixXd& S, const VectorXd& w, double gamma,
                                   std::size_t T_m) {
  const auto r = static_cast<double>(S.rows());
  require(S.rows() == w.size() && S.rows() >= 1, "pattern_log_marginal: dimension mismatch");
  const auto llt = robust_cholesky(S);
  const MatrixXd& L = llt.matrixLLT();
  const double log_det_S = 2.0 * L.diagonal().array().log().sum();
  constexpr double log_two_pi = 1.8378770664093454836;
  double value = -0.5 * r * (log_two_pi + std::log(gamma)) + 0.5 * r * log_two_pi - 0.5 * log_det_S;
  if (T_m > 0) {
    const VectorXd u = llt.matrixL().solve(w);
    const double tau2 = u.squaredNorm();
    if (!(tau2 > 0.0)) return -std::numeric_limits<double>::infinity();
    const double T = static_cast<double>(T_m);
    value += 0.5 * T * std::log(tau2) + 0.5 * T * std::numbers::ln2 + std::lgamma(0.5 * (T + 1.0)) -
             0.5 * std::log(std::numbers::pi);
  }
  return value;
}

/// Categorical draw with probabilities softmax(log_weights).
inline std::size_t draw_tvi_indicator(std::span<const double> log_weights, Rng& rng) {
  require(!log_weights.empty(), "draw_tvi_indicator: no weights");
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : log_weights) {
    require(!std::isnan(v) && v != std::numeric_limits<double>::infinity(),
            "draw_tvi_indicator: weights must be finite or -inf");
    mx = std::max(mx, v);
  }
  if (mx == -std::numeric_limits<double>::infinity())
    throw NumericalError("draw_tvi_indicator: every pattern has zero weight");
  if (log_weights.size() == 1) return 0;
  std::vector<double> cum(log_weights.size());
  double total = 0.0;
  for (std::size_t k = 0; k < log_weights.size(); ++k) {
    total += std::exp(log_weights[k] - mx);
    cum[k] = total;
  }
  const double u = rng.uniform() * total;
  for (std::size_t k = 0; k < cum.size(); ++k)
    if (u < cum[k]) return k;
  return cum.size() - 1;
}

/// Exact draw from |b' w|^{T_m} exp(-b' S b / 2). In z = L' b (S = L L') the
/// kernel is |z' u|^{T_m} exp(-|z|^2 / 2) with u = L^{-1} w; the coordinate
/// along u is +-sqrt(Gamma((T_m + 1) / 2, scale 2)), the rest standard normal.
inline VectorXd draw_row_coefficients(const MatrixXd& S, const VectorXd& w, std::size_t T_m,
                                      Rng& rng) {
  const auto r = S.rows();
  require(r >= 1 && w.size() == r, "draw_row_coefficients: dimension mismatch");
  const auto llt = robust_cholesky(S);
  VectorXd z(r);
  for (Eigen::Index i = 0; i < r; ++i) z(i) = rng.normal();
  if (T_m > 0) {
    const VectorXd u = llt.matrixL().solve(w);
    const double tau = u.norm();
    if (!(tau > 0.0)) throw NumericalError("draw_row_coefficients: w = 0 with observations");
    const VectorXd direction = u / tau;
    const double radial = std::sqrt(rng.gamma(0.5 * (static_cast<double>(T_m) + 1.0), 2.0));
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    z -= direction * direction.dot(z);
    z += sign * radial * direction;
  }
  return llt.matrixU().solve(z);
}

/// Log marginals of every pattern for row n of B_m; `scatter` is the weighted
/// residual scatter of the regime for equation n.
inline std::vector<double> pattern_log_marginals(const MatrixXd& Bm, std::size_t n,
                                                 std::span<const Pattern> patterns,
                                                 const MatrixXd& scatter, double gamma,
                                                 std::size_t T_m) {
  std::vector<double> out;
  out.reserve(patterns.size());
  for (const auto& pat : patterns) {
    const MatrixXd S = row_posterior_precision(scatter, pat.V, gamma);
    const VectorXd w = cofactor_vector(Bm, n, pat.V);
    out.push_back(pattern_log_marginal(S, w, gamma, T_m));
  }
  return out;
}

struct RowUpdate {
  std::size_t pattern = 0;
  VectorXd b;
};

/// Partially collapsed update of row n of B_m: pattern with b integrated out,
/// then b given the pattern. Writes the new row into Bm.
inline RowUpdate update_structural_row(MatrixXd& Bm, std::size_t n,
                                       std::span<const Pattern> patterns, const MatrixXd& scatter,
                                       double gamma, std::size_t T_m, Rng& rng) {
  RowUpdate out;
  if (patterns.size() > 1) {
    const auto logm = pattern_log_marginals(Bm, n, patterns, scatter, gamma, T_m);
    out.pattern = draw_tvi_indicator(logm, rng);
  }
  const auto& pat = patterns[out.pattern];
  const MatrixXd S = row_posterior_precision(scatter, pat.V, gamma);
  const VectorXd w = cofactor_vector(Bm, n, pat.V);
  out.b = draw_row_coefficients(S, w, T_m, rng);
  Bm.row(static_cast<Eigen::Index>(n)) = apply_pattern(out.b, pat.V);
  return out;
}

}  // namespace tvisvar::structural
