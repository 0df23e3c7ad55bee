#pragma once

// Gaussian full conditional of the autoregressive block A (N x k). The
// coefficients are stacked by rows, a = (A_1., ..., A_N.)', so that
// A x_t = (I_N kron x_t') a and the likelihood precision is
// sum_t Omega_t kron x_t x_t' with Omega_t = B_{s_t}' D_t^{-1} B_{s_t}.

#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "tvisvar/core_model.hpp"
#include "tvisvar/errors.hpp"
#include "tvisvar/priors.hpp"
#include "tvisvar/random.hpp"

namespace tvisvar::var {

struct MinnesotaMoments {
  MatrixXd mean;    // N x k, row n is the prior mean of A_n.
  VectorXd omega;   // length k, prior scale diagonal shared by all rows
};

inline MinnesotaMoments minnesota_moments(std::size_t N, std::size_t p, std::size_t d_dim) {
  require(N >= 1 && p >= 1, "minnesota_moments: N and p must be positive");
  const auto n = static_cast<Eigen::Index>(N);
  const auto k = static_cast<Eigen::Index>(N * p + d_dim);
  MinnesotaMoments mm;
  mm.mean = MatrixXd::Zero(n, k);
  mm.mean.leftCols(n).setIdentity();
  mm.omega.resize(k);
  for (std::size_t l = 1; l <= p; ++l) {
    mm.omega.segment(static_cast<Eigen::Index>((l - 1) * N), n)
        .setConstant(1.0 / static_cast<double>(l * l));
  }
  mm.omega.tail(static_cast<Eigen::Index>(d_dim)).setConstant(100.0);
  return mm;
}

/// Reduced-form residuals y_t - A x_t, T x N.
inline MatrixXd reduced_residuals(const Dataset& data, const MatrixXd& A) {
  return data.y - data.x * A.transpose();
}

/// Structural residuals u_t = B_{s_t} (y_t - A x_t), returned N x T.
inline MatrixXd structural_residuals(const MatrixXd& residuals, std::span<const MatrixXd> B,
                                     std::span<const int> s) {
  const auto T = residuals.rows();
  require(static_cast<Eigen::Index>(s.size()) == T, "structural_residuals: one regime per period");
  MatrixXd u(residuals.cols(), T);
  for (Eigen::Index t = 0; t < T; ++t)
    u.col(t) = B[static_cast<std::size_t>(s[static_cast<std::size_t>(t)])] * residuals.row(t).transpose();
  return u;
}

/// Quadratic form (a_n - m_n)' Omega_A^{-1} (a_n - m_n) per row, for the
/// A-side shrinkage update.
inline std::vector<priors::ShrinkageEvidence> shrinkage_evidence(const MatrixXd& A,
                                                                 const MinnesotaMoments& mm) {
  std::vector<priors::ShrinkageEvidence> ev(static_cast<std::size_t>(A.rows()));
  const VectorXd inv = mm.omega.cwiseInverse();
  for (Eigen::Index n = 0; n < A.rows(); ++n) {
    const RowVectorXd dev = A.row(n) - mm.mean.row(n);
    ev[static_cast<std::size_t>(n)] = {dev.cwiseProduct(dev).dot(inv.transpose()),
                                       static_cast<double>(A.cols())};
  }
  return ev;
}

/// Precision Q and linear term c of the Gaussian conditional of the
/// row-stacked vec(A). `variances` is N x T (sigma2_{n,t}).
struct AutoregressiveSystem {
  MatrixXd Q;
  VectorXd c;
};

inline AutoregressiveSystem autoregressive_system(const Dataset& data, std::span<const MatrixXd> B,
                                                  std::span<const int> s, const MatrixXd& variances,
                                                  const VectorXd& gamma_A,
                                                  const MinnesotaMoments& mm) {
  const auto N = static_cast<Eigen::Index>(data.N());
  const auto k = static_cast<Eigen::Index>(data.k());
  const auto T = static_cast<Eigen::Index>(data.T());
  require(mm.mean.rows() == N && mm.mean.cols() == k, "autoregressive block: prior dimension mismatch");
  require(gamma_A.size() == N && (gamma_A.array() > 0.0).all(), "gamma_A must be positive");
  require(static_cast<Eigen::Index>(s.size()) == T, "autoregressive block: one regime per period");
  require(variances.rows() == N && variances.cols() == T, "variances must be N x T");
  if (T > 0 && (!(variances.array() > 0.0).all() || !variances.allFinite()))
    throw ValidationError("autoregressive block: variances must be positive and finite");
  const auto dim = N * k;
  AutoregressiveSystem sys{MatrixXd::Zero(dim, dim), VectorXd::Zero(dim)};
  const VectorXd inv_omega = mm.omega.cwiseInverse();
  for (Eigen::Index n = 0; n < N; ++n) {
    sys.Q.block(n * k, n * k, k, k).diagonal() = inv_omega / gamma_A(n);
    sys.c.segment(n * k, k) = inv_omega.cwiseProduct(mm.mean.row(n).transpose()) / gamma_A(n);
  }
  if (T == 0) return sys;
  // W(t, i N + j) = Omega_t(i, j), Z(t, i) = (Omega_t y_t)_i
  MatrixXd W(T, N * N);
  MatrixXd Z(T, N);
  for (Eigen::Index t = 0; t < T; ++t) {
    const auto& Bm = B[static_cast<std::size_t>(s[static_cast<std::size_t>(t)])];
    const MatrixXd omega_t = Bm.transpose() * variances.col(t).cwiseInverse().asDiagonal() * Bm;
    for (Eigen::Index i = 0; i < N; ++i)
      for (Eigen::Index j = 0; j < N; ++j) W(t, i * N + j) = omega_t(i, j);
    Z.row(t) = (omega_t * data.y.row(t).transpose()).transpose();
  }
  for (Eigen::Index i = 0; i < N; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const MatrixXd block = data.x.transpose() * W.col(i * N + j).asDiagonal() * data.x;
      sys.Q.block(i * k, j * k, k, k) += block;
      if (i != j) sys.Q.block(j * k, i * k, k, k) += block.transpose();
    }
    sys.c.segment(i * k, k) += data.x.transpose() * Z.col(i);
  }
  return sys;
}

inline MatrixXd unstack_rows(const VectorXd& a, Eigen::Index N, Eigen::Index k) {
  MatrixXd A(N, k);
  for (Eigen::Index n = 0; n < N; ++n) A.row(n) = a.segment(n * k, k).transpose();
  return A;
}

inline Eigen::LLT<MatrixXd> factor_precision(MatrixXd Q) {
  Eigen::LLT<MatrixXd> llt(Q);
  if (llt.info() == Eigen::Success) return llt;
  Q.diagonal().array() += 1e-10 * Q.trace() / static_cast<double>(Q.rows());
  llt.compute(Q);
  if (llt.info() != Eigen::Success) throw NumericalError("A precision factorization failed");
  return llt;
}

/// One draw of A from its Gaussian full conditional; with T = 0 the draw is
/// from the prior.
inline MatrixXd draw_autoregressive(const Dataset& data, std::span<const MatrixXd> B,
                                    std::span<const int> s, const MatrixXd& variances,
                                    const VectorXd& gamma_A, const MinnesotaMoments& mm, Rng& rng) {
  const auto sys = autoregressive_system(data, B, s, variances, gamma_A, mm);
  const auto llt = factor_precision(sys.Q);
  VectorXd z(sys.c.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  const VectorXd a = llt.solve(sys.c) + llt.matrixU().solve(z);
  return unstack_rows(a, static_cast<Eigen::Index>(data.N()), static_cast<Eigen::Index>(data.k()));
}

/// Conditional mean of A under the same system.
inline MatrixXd autoregressive_mean(const Dataset& data, std::span<const MatrixXd> B,
                                    std::span<const int> s, const MatrixXd& variances,
                                    const VectorXd& gamma_A, const MinnesotaMoments& mm) {
  const auto sys = autoregressive_system(data, B, s, variances, gamma_A, mm);
  return unstack_rows(factor_precision(sys.Q).solve(sys.c), static_cast<Eigen::Index>(data.N()),
                      static_cast<Eigen::Index>(data.k()));
}

}  // namespace tvisvar::var
