#pragma once

// Non-centered stochastic volatility with a regime-dependent loading:
// log sigma2_{n,t} = omega_n(s_t) h_{n,t}, h_{n,t} = rho_n h_{n,t-1} + eta, h_{n,0} = 0.
// The observation log u^2 is linearized with the 10-component normal mixture
// approximation of log chi^2_1.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <span>

#include <Eigen/Dense>

#include "tvisvar/core_model.hpp"
#include "tvisvar/errors.hpp"
#include "tvisvar/priors.hpp"
#include "tvisvar/random.hpp"

namespace tvisvar::sv {

inline constexpr double kResidualFloor = 1e-10;

struct MixtureTable {
  std::array<double, 10> prob{0.00609, 0.04775, 0.13057, 0.20674, 0.22715,
                              0.18842, 0.12047, 0.05591, 0.01575, 0.00115};
  std::array<double, 10> mean{1.92677,  1.34744,  0.73504,  0.02266,  -0.85173,
                              -1.97278, -3.46788, -5.55246, -8.68384, -14.65};
  std::array<double, 10> var{0.11265, 0.17788, 0.26768, 0.40611, 0.62699,
                             0.98583, 1.57469, 2.54498, 4.16591, 7.33342};
  static constexpr std::size_t size() { return 10; }
};

inline const MixtureTable& mixture_table() {
  static const MixtureTable table;
  return table;
}

/// sigma2_{n,t} = exp(omega_n(s_t) h_{n,t}), N x T.
inline MatrixXd conditional_variances(const MatrixXd& omega, const MatrixXd& h,
                                      std::span<const int> s) {
  const auto N = h.rows();
  const auto T = h.cols();
  require(omega.rows() == N, "conditional_variances: omega must have N rows");
  require(static_cast<Eigen::Index>(s.size()) == T, "conditional_variances: one regime per period");
  MatrixXd out(N, T);
  for (Eigen::Index t = 0; t < T; ++t) {
    const auto m = static_cast<Eigen::Index>(s[static_cast<std::size_t>(t)]);
    out.col(t) = (omega.col(m).array() * h.col(t).array()).exp();
  }
  return out;
}

/// log(max(u^2, floor)) elementwise.
inline MatrixXd log_squared(const MatrixXd& u) {
  return u.array().square().max(kResidualFloor).log().matrix();
}

/// Indicator (n, t) drawn with probability proportional to
/// prob_j N(ystar - omega h; mean_j, var_j).
inline MatrixXi draw_mixture_indicators(const MatrixXd& ystar, const MatrixXd& omega,
                                        const MatrixXd& h, std::span<const int> s,
                                        const MixtureTable& table, Rng& rng) {
  const auto N = ystar.rows();
  const auto T = ystar.cols();
  require(h.rows() == N && h.cols() == T, "draw_mixture_indicators: h shape mismatch");
  std::array<double, 10> log_norm{};
  for (std::size_t j = 0; j < 10; ++j)
    log_norm[j] = std::log(table.prob[j]) - 0.5 * std::log(table.var[j]);
  MatrixXi out(N, T);
  std::array<double, 10> w{};
  for (Eigen::Index t = 0; t < T; ++t) {
    const auto m = static_cast<Eigen::Index>(s[static_cast<std::size_t>(t)]);
    for (Eigen::Index n = 0; n < N; ++n) {
      const double r = ystar(n, t) - omega(n, m) * h(n, t);
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < 10; ++j) {
        const double d = r - table.mean[j];
        w[j] = log_norm[j] - 0.5 * d * d / table.var[j];
        mx = std::max(mx, w[j]);
      }
      double total = 0.0;
      for (std::size_t j = 0; j < 10; ++j) {
        w[j] = std::exp(w[j] - mx);
        total += w[j];
      }
      double u = rng.uniform() * total;
      int pick = 9;
      for (std::size_t j = 0; j < 10; ++j) {
        if (u < w[j]) {
          pick = static_cast<int>(j);
          break;
        }
        u -= w[j];
      }
      out(n, t) = pick;
    }
  }
  return out;
}

/// Symmetric tridiagonal matrix; off(t) couples t-1 and t, off(0) is unused.
struct Tridiagonal {
  VectorXd diag;
  VectorXd off;
};

/// Posterior precision and linear term of one h row.
inline std::pair<Tridiagonal, VectorXd> log_volatility_system(const RowVectorXd& ystar,
                                                              const Eigen::RowVectorXi& mixture,
                                                              const RowVectorXd& omega_row,
                                                              double rho, std::span<const int> s,
                                                              const MixtureTable& table) {
  const auto T = ystar.size();
  Tridiagonal Q{VectorXd::Constant(T, 1.0 + rho * rho), VectorXd::Constant(T, -rho)};
  if (T > 0) Q.diag(T - 1) = 1.0;
  VectorXd c(T);
  for (Eigen::Index t = 0; t < T; ++t) {
    const double w = omega_row(s[static_cast<std::size_t>(t)]);
    const auto j = static_cast<std::size_t>(mixture(t));
    Q.diag(t) += w * w / table.var[j];
    c(t) = w * (ystar(t) - table.mean[j]) / table.var[j];
  }
  return {Q, c};
}

/// Banded Cholesky Q = L L' with L lower bidiagonal (diag l, subdiag g).
struct BandedCholesky {
  VectorXd l;
  VectorXd g;

  explicit BandedCholesky(const Tridiagonal& Q) : l(Q.diag.size()), g(Q.diag.size()) {
    const auto T = Q.diag.size();
    for (Eigen::Index t = 0; t < T; ++t) {
      double d = Q.diag(t);
      if (t > 0) {
        g(t) = Q.off(t) / l(t - 1);
        d -= g(t) * g(t);
      } else {
        g(t) = 0.0;
      }
      if (!(d > 0.0)) throw NumericalError("tridiagonal precision is not positive definite");
      l(t) = std::sqrt(d);
    }
  }

  /// Solves L v = b.
  VectorXd forward(const VectorXd& b) const {
    VectorXd v(b.size());
    for (Eigen::Index t = 0; t < b.size(); ++t)
      v(t) = (b(t) - (t > 0 ? g(t) * v(t - 1) : 0.0)) / l(t);
    return v;
  }

  /// Solves L' x = b.
  VectorXd backward(const VectorXd& b) const {
    const auto T = b.size();
    VectorXd x(T);
    for (Eigen::Index t = T - 1; t >= 0; --t)
      x(t) = (b(t) - (t + 1 < T ? g(t + 1) * x(t + 1) : 0.0)) / l(t);
    return x;
  }

  VectorXd solve(const VectorXd& b) const { return backward(forward(b)); }
};

/// Exact draw of one h row from its Gaussian conditional.
inline RowVectorXd draw_log_volatilities(const RowVectorXd& ystar, const Eigen::RowVectorXi& mixture,
                                         const RowVectorXd& omega_row, double rho,
                                         std::span<const int> s, const MixtureTable& table,
                                         Rng& rng) {
  require(std::abs(rho) < 1.0, "draw_log_volatilities: |rho| must be below one");
  const auto T = ystar.size();
  if (T == 0) return RowVectorXd(0);
  const auto [Q, c] = log_volatility_system(ystar, mixture, omega_row, rho, s, table);
  const BandedCholesky chol(Q);
  VectorXd z(T);
  for (Eigen::Index t = 0; t < T; ++t) z(t) = rng.normal();
  return chol.backward(chol.forward(c) + z).transpose();
}

/// Conditional moments of omega_n(m) and the draw.
struct OmegaDraw {
  RowVectorXd value;
  RowVectorXd post_mean;
  RowVectorXd post_var;
};

/// For each regime m: regression of ystar - mean_j on h over {t : s_t = m}
/// with noise variances var_j and prior N(0, sigma2). `variance_multiplier`
/// inflates the sampling variance and exists only for harness mutation tests.
inline OmegaDraw draw_omega(const RowVectorXd& h, std::span<const int> s,
                            const Eigen::RowVectorXi& mixture, const RowVectorXd& ystar,
                            double sigma2, std::size_t M, const MixtureTable& table, Rng& rng,
                            double variance_multiplier = 1.0) {
  require(sigma2 > 0.0, "draw_omega: prior variance must be positive");
  const auto Mi = static_cast<Eigen::Index>(M);
  VectorXd precision = VectorXd::Constant(Mi, 1.0 / sigma2);
  VectorXd linear = VectorXd::Zero(Mi);
  for (Eigen::Index t = 0; t < h.size(); ++t) {
    const auto m = static_cast<Eigen::Index>(s[static_cast<std::size_t>(t)]);
    const auto j = static_cast<std::size_t>(mixture(t));
    precision(m) += h(t) * h(t) / table.var[j];
    linear(m) += h(t) * (ystar(t) - table.mean[j]) / table.var[j];
  }
  OmegaDraw out{RowVectorXd(Mi), RowVectorXd(Mi), RowVectorXd(Mi)};
  for (Eigen::Index m = 0; m < Mi; ++m) {
    out.post_var(m) = 1.0 / precision(m);
    out.post_mean(m) = linear(m) * out.post_var(m);
    out.value(m) = out.post_mean(m) + std::sqrt(variance_multiplier * out.post_var(m)) * rng.normal();
  }
  return out;
}

/// sigma2_omega | omega ~ GIG(shape - M/2, sum omega^2, 2/scale).
inline double draw_omega_variance(const RowVectorXd& omega_row, double shape, double scale, Rng& rng) {
  require(shape > 0.0 && scale > 0.0, "draw_omega_variance: prior shape and scale must be positive");
  const double lambda = shape - 0.5 * static_cast<double>(omega_row.size());
  return priors::sample_gig(lambda, omega_row.squaredNorm(), 2.0 / scale, rng);
}

/// rho | h from the AR(1) likelihood over t = 2..T with a uniform prior on (-1, 1).
inline double draw_rho(const RowVectorXd& h, Rng& rng) {
  double sxx = 0.0;
  double sxy = 0.0;
  for (Eigen::Index t = 1; t < h.size(); ++t) {
    sxx += h(t - 1) * h(t - 1);
    sxy += h(t) * h(t - 1);
  }
  if (!(sxx > 0.0)) return rng.uniform(-1.0, 1.0);
  double draw = priors::sample_truncated_normal(sxy / sxx, 1.0 / sxx, -1.0, 1.0, rng);
  // keep strictly inside the open interval
  const double edge = std::nextafter(1.0, 0.0);
  return std::clamp(draw, -edge, edge);
}

}  // namespace tvisvar::sv
