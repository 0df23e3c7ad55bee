#pragma once

// Hidden Markov regime path: per-period likelihoods, log-space forward
// filter, backward sampling, smoothing, and the Dirichlet updates of P and pi0.

#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "tvisvar/core_model.hpp"
#include "tvisvar/errors.hpp"
#include "tvisvar/priors.hpp"
#include "tvisvar/random.hpp"

namespace tvisvar::regime {

/// Entry (t, m) = log|det B_m| + sum_n log N(u_{n,t}; 0, exp(omega_n(m) h_{n,t}))
/// with u_t = B_m e_t. `residuals` is T x N (reduced form), h is N x T.
inline MatrixXd regime_loglik_matrix(const MatrixXd& residuals, std::span<const MatrixXd> B,
                                     const MatrixXd& omega, const MatrixXd& h) {
  const auto T = residuals.rows();
  const auto N = residuals.cols();
  const auto M = static_cast<Eigen::Index>(B.size());
  require(h.rows() == N && h.cols() == T, "regime_loglik_matrix: h must be N x T");
  require(omega.rows() == N && omega.cols() == M, "regime_loglik_matrix: omega must be N x M");
  constexpr double half_log_two_pi = 0.91893853320467274178;
  MatrixXd out(T, M);
  for (Eigen::Index m = 0; m < M; ++m) {
    const auto& Bm = B[static_cast<std::size_t>(m)];
    Eigen::PartialPivLU<MatrixXd> lu(Bm);
    const double det = lu.determinant();
    if (!(std::abs(det) > 0.0) || !std::isfinite(det))
      throw NumericalError("regime_loglik_matrix: B_" + std::to_string(m + 1) + " is singular");
    const double log_det = std::log(std::abs(det));
    const MatrixXd u = Bm * residuals.transpose();  // N x T
    for (Eigen::Index t = 0; t < T; ++t) {
      double acc = log_det;
      for (Eigen::Index n = 0; n < N; ++n) {
        const double lv = omega(n, m) * h(n, t);
        acc -= half_log_two_pi + 0.5 * lv + 0.5 * u(n, t) * u(n, t) * std::exp(-lv);
      }
      out(t, m) = acc;
    }
  }
  return out;
}

struct FilterResult {
  MatrixXd filtered;   // T x M, p(s_t | y_1..t)
  MatrixXd predicted;  // T x M, p(s_t | y_1..t-1)
  double log_likelihood = 0.0;
};

inline void require_stochastic(const MatrixXd& P, const VectorXd& pi0) {
  const auto M = P.rows();
  require(P.cols() == M && pi0.size() == M, "transition matrix and initial probabilities disagree");
  for (Eigen::Index m = 0; m < M; ++m) {
    require((P.row(m).array() >= 0.0).all() && std::abs(P.row(m).sum() - 1.0) <= 1e-10,
            "rows of P must be probability vectors");
  }
  require((pi0.array() >= 0.0).all() && std::abs(pi0.sum() - 1.0) <= 1e-10,
          "pi0 must be a probability vector");
}

/// s_1 ~ pi0, s_t | s_{t-1} ~ P(s_{t-1}, .).
inline FilterResult forward_filter(const MatrixXd& loglik, const MatrixXd& P, const VectorXd& pi0) {
  require_stochastic(P, pi0);
  const auto T = loglik.rows();
  const auto M = loglik.cols();
  require(M == P.rows(), "forward_filter: loglik columns must equal M");
  FilterResult out{MatrixXd(T, M), MatrixXd(T, M), 0.0};
  RowVectorXd pred = pi0.transpose();
  RowVectorXd post(M);
  for (Eigen::Index t = 0; t < T; ++t) {
    out.predicted.row(t) = pred;
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index m = 0; m < M; ++m)
      if (pred(m) > 0.0) mx = std::max(mx, loglik(t, m));
    if (!std::isfinite(mx))
      throw NumericalError("forward_filter: zero likelihood at period " + std::to_string(t + 1));
    for (Eigen::Index m = 0; m < M; ++m)
      post(m) = pred(m) > 0.0 ? pred(m) * std::exp(loglik(t, m) - mx) : 0.0;
    const double total = post.sum();
    if (!(total > 0.0))
      throw NumericalError("forward_filter: zero likelihood at period " + std::to_string(t + 1));
    post /= total;
    out.filtered.row(t) = post;
    out.log_likelihood += mx + std::log(total);
    pred = post * P;
  }
  return out;
}

/// Draws s_T from the last filtered row, then s_t | s_{t+1} proportional to
/// filtered_t(i) P(i, s_{t+1}).
inline std::vector<int> backward_sample(const MatrixXd& filtered, const MatrixXd& P, Rng& rng) {
  const auto T = filtered.rows();
  const auto M = filtered.cols();
  std::vector<int> s(static_cast<std::size_t>(T));
  if (T == 0) return s;
  auto pick = [&](const RowVectorXd& w) {
    const double total = w.sum();
    if (!(total > 0.0)) throw NumericalError("backward_sample: zero conditional mass");
    double u = rng.uniform() * total;
    for (Eigen::Index m = 0; m < M; ++m) {
      if (u < w(m)) return static_cast<int>(m);
      u -= w(m);
    }
    for (Eigen::Index m = M - 1; m >= 0; --m)
      if (w(m) > 0.0) return static_cast<int>(m);
    return static_cast<int>(M - 1);
  };
  s[static_cast<std::size_t>(T - 1)] = pick(filtered.row(T - 1));
  for (Eigen::Index t = T - 2; t >= 0; --t) {
    const int next = s[static_cast<std::size_t>(t + 1)];
    const RowVectorXd w = filtered.row(t).cwiseProduct(P.col(next).transpose());
    s[static_cast<std::size_t>(t)] = pick(w);
  }
  return s;
}

/// p(s_t | y_1..T) from the filter output.
inline MatrixXd smoothed_probabilities(const FilterResult& fr, const MatrixXd& P) {
  const auto T = fr.filtered.rows();
  const auto M = fr.filtered.cols();
  MatrixXd out(T, M);
  if (T == 0) return out;
  out.row(T - 1) = fr.filtered.row(T - 1);
  for (Eigen::Index t = T - 2; t >= 0; --t) {
    RowVectorXd ratio(M);
    for (Eigen::Index j = 0; j < M; ++j) {
      const double pr = fr.predicted(t + 1, j);
      ratio(j) = pr > 0.0 ? out(t + 1, j) / pr : 0.0;
    }
    RowVectorXd row = fr.filtered.row(t).cwiseProduct((P * ratio.transpose()).transpose());
    out.row(t) = row / row.sum();
  }
  return out;
}

/// Transition counts n(i, j) of a path.
inline MatrixXd transition_counts(std::span<const int> s, std::size_t M) {
  const auto Mi = static_cast<Eigen::Index>(M);
  MatrixXd counts = MatrixXd::Zero(Mi, Mi);
  for (std::size_t t = 1; t < s.size(); ++t) counts(s[t - 1], s[t]) += 1.0;
  return counts;
}

/// Row m ~ Dirichlet(1 + d_m e_m + counts from m).
inline MatrixXd draw_transition_matrix(std::span<const int> s, std::size_t M, double d_m, Rng& rng) {
  require(M >= 1, "draw_transition_matrix: M must be positive");
  require(d_m >= 0.0, "d_m must be nonnegative");
  const auto Mi = static_cast<Eigen::Index>(M);
  if (M == 1) return MatrixXd::Ones(1, 1);
  const MatrixXd counts = transition_counts(s, M);
  MatrixXd P(Mi, Mi);
  for (Eigen::Index m = 0; m < Mi; ++m) {
    VectorXd alpha = VectorXd::Ones(Mi) + counts.row(m).transpose();
    alpha(m) += d_m;
    P.row(m) = priors::sample_dirichlet(alpha, rng).transpose();
  }
  return P;
}

/// pi0 ~ Dirichlet(1 + e_{s_1}); with an empty path the prior Dirichlet(1).
inline VectorXd draw_initial_probs(std::span<const int> s, std::size_t M, Rng& rng) {
  const auto Mi = static_cast<Eigen::Index>(M);
  if (M == 1) return VectorXd::Ones(1);
  VectorXd alpha = VectorXd::Ones(Mi);
  if (!s.empty()) alpha(s.front()) += 1.0;
  return priors::sample_dirichlet(alpha, rng);
}

/// Prior mean of P: rows (1 + d_m e_m) / (M + d_m).
inline MatrixXd transition_prior_mean(std::size_t M, double d_m) {
  const auto Mi = static_cast<Eigen::Index>(M);
  MatrixXd P = MatrixXd::Ones(Mi, Mi);
  P.diagonal().array() += d_m;
  return P / (static_cast<double>(M) + d_m);
}

/// Solves pi P = pi with sum(pi) = 1. Throws when P has more than one
/// eigenvalue on the unit circle (reducible or periodic).
inline VectorXd stationary_distribution(const MatrixXd& P) {
  const auto M = P.rows();
  require(P.cols() == M && M >= 1, "stationary_distribution: P must be square");
  require_stochastic(P, VectorXd::Constant(M, 1.0 / static_cast<double>(M)));
  if (M == 1) return VectorXd::Ones(1);
  Eigen::EigenSolver<MatrixXd> es(P, false);
  int on_circle = 0;
  for (Eigen::Index i = 0; i < M; ++i)
    if (std::abs(std::abs(es.eigenvalues()(i)) - 1.0) < 1e-10) ++on_circle;
  if (on_circle > 1)
    throw ValidationError("transition matrix is reducible or periodic; no unique stationary law");
  MatrixXd system(M + 1, M);
  system.topRows(M) = P.transpose() - MatrixXd::Identity(M, M);
  system.row(M).setOnes();
  VectorXd rhs = VectorXd::Zero(M + 1);
  rhs(M) = 1.0;
  VectorXd pi = system.colPivHouseholderQr().solve(rhs);
  pi = pi.cwiseMax(0.0);
  return pi / pi.sum();
}

}  // namespace tvisvar::regime
