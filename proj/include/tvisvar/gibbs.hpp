#pragma once

// Initialization, prior simulation and the Gibbs sweep.

#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "tvisvar/core_model.hpp"
#include "tvisvar/errors.hpp"
#include "tvisvar/priors.hpp"
#include "tvisvar/random.hpp"
#include "tvisvar/regime_sampler.hpp"
#include "tvisvar/structural_sampler.hpp"
#include "tvisvar/sv_sampler.hpp"
#include "tvisvar/var_sampler.hpp"

namespace tvisvar::gibbs {

/// Fixed inputs shared by every sweep of a chain.
struct SamplerContext {
  const ModelConfig* config = nullptr;
  var::MinnesotaMoments minnesota;
  const sv::MixtureTable* table = &sv::mixture_table();
  double omega_variance_multiplier = 1.0;  // mutation hook for the joint-distribution harness

  explicit SamplerContext(const ModelConfig& cfg)
      : config(&cfg), minnesota(var::minnesota_moments(cfg.N, cfg.p, cfg.d_dim)) {
    cfg.validate();
  }
};

/// Dataset with the shape of the model and no observations.
inline Dataset empty_dataset(std::size_t N, std::size_t p, std::size_t d_dim) {
  Dataset ds;
  ds.p = p;
  const auto n = static_cast<Eigen::Index>(N);
  ds.y.resize(0, n);
  ds.d.resize(0, static_cast<Eigen::Index>(d_dim));
  ds.x.resize(0, static_cast<Eigen::Index>(N * p + d_dim));
  for (std::size_t i = 0; i < N; ++i) ds.names.push_back("y" + std::to_string(i + 1));
  return ds;
}

inline void check_dataset(const ModelConfig& cfg, const Dataset& data) {
  require(data.N() == cfg.N, "dataset has " + std::to_string(data.N()) + " series, model expects " +
                                 std::to_string(cfg.N));
  require(data.p == cfg.p, "dataset lag order does not match the model");
  require(data.d_dim() == cfg.d_dim, "dataset deterministic terms do not match the model");
}

inline std::vector<std::vector<int>> regime_members(std::span<const int> s, std::size_t M) {
  std::vector<std::vector<int>> members(M);
  for (std::size_t t = 0; t < s.size(); ++t) members[static_cast<std::size_t>(s[t])].push_back(static_cast<int>(t));
  return members;
}

/// log p(Y | parameters) with the regime path summed out.
inline double log_likelihood(const ParameterState& st, const Dataset& data) {
  if (data.T() == 0) return 0.0;
  const MatrixXd E = var::reduced_residuals(data, st.A);
  const MatrixXd ll = regime::regime_loglik_matrix(E, st.B, st.omega, st.h);
  if (st.M() == 1) return ll.sum();
  return regime::forward_filter(ll, st.P, st.pi0).log_likelihood;
}

/// Draws the free coefficients of every row of B_m from the prior, masking
/// to the current pattern, until the matrix is nonsingular.
inline MatrixXd draw_structural_prior(const PatternSet& patterns, const std::vector<int>& kappa_m,
                                      const VectorXd& gamma, Rng& rng) {
  const auto N = static_cast<Eigen::Index>(patterns.N);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    MatrixXd Bm = MatrixXd::Zero(N, N);
    for (Eigen::Index n = 0; n < N; ++n) {
      const auto& pat = patterns.at(static_cast<std::size_t>(n), static_cast<std::size_t>(kappa_m[static_cast<std::size_t>(n)]));
      VectorXd b(static_cast<Eigen::Index>(pat.r()));
      for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = std::sqrt(gamma(n)) * rng.normal();
      Bm.row(n) = apply_pattern(b, pat.V);
    }
    if (Bm.determinant() != 0.0) return Bm;
  }
  throw NumericalError("could not draw a nonsingular structural matrix");
}

/// Complete draw from the prior, with latent paths of length T.
inline ParameterState draw_from_prior(const ModelConfig& cfg, std::size_t T, Rng& rng) {
  cfg.validate();
  const auto N = static_cast<Eigen::Index>(cfg.N);
  const auto M = static_cast<Eigen::Index>(cfg.M);
  const auto mm = var::minnesota_moments(cfg.N, cfg.p, cfg.d_dim);
  ParameterState st;
  st.shrink_A = priors::sample_shrinkage_prior(cfg.priors.A, cfg.N, rng);
  st.shrink_B = priors::sample_shrinkage_prior(cfg.priors.B, cfg.N, rng);
  st.A.resize(N, static_cast<Eigen::Index>(cfg.k()));
  for (Eigen::Index n = 0; n < N; ++n)
    for (Eigen::Index j = 0; j < st.A.cols(); ++j)
      st.A(n, j) = mm.mean(n, j) + std::sqrt(st.shrink_A.gamma(n) * mm.omega(j)) * rng.normal();
  st.kappa.assign(cfg.N, std::vector<int>(cfg.M, 0));
  for (std::size_t m = 0; m < cfg.M; ++m) {
    std::vector<int> kappa_m(cfg.N);
    for (std::size_t n = 0; n < cfg.N; ++n) {
      const auto K = cfg.patterns.K(n);
      kappa_m[n] = K > 1 ? static_cast<int>(std::min<std::size_t>(K - 1, static_cast<std::size_t>(rng.uniform() * static_cast<double>(K)))) : 0;
      st.kappa[n][m] = kappa_m[n];
    }
    st.B.push_back(draw_structural_prior(cfg.patterns, kappa_m, st.shrink_B.gamma, rng));
  }
  if (M == 1) {
    st.P = MatrixXd::Ones(1, 1);
    st.pi0 = VectorXd::Ones(1);
  } else {
    st.P.resize(M, M);
    for (Eigen::Index m = 0; m < M; ++m) {
      VectorXd alpha = VectorXd::Ones(M);
      alpha(m) += cfg.priors.d_m;
      st.P.row(m) = priors::sample_dirichlet(alpha, rng).transpose();
    }
    st.pi0 = priors::sample_dirichlet(VectorXd::Ones(M), rng);
  }
  st.s.resize(T);
  auto pick = [&](const RowVectorXd& w) {
    double u = rng.uniform();
    for (Eigen::Index m = 0; m < w.size(); ++m) {
      if (u < w(m)) return static_cast<int>(m);
      u -= w(m);
    }
    return static_cast<int>(w.size() - 1);
  };
  for (std::size_t t = 0; t < T; ++t)
    st.s[t] = M == 1 ? 0 : pick(t == 0 ? RowVectorXd(st.pi0.transpose()) : RowVectorXd(st.P.row(st.s[t - 1])));
  st.sigma2_omega.resize(N);
  st.omega = MatrixXd::Zero(N, M);
  st.rho.resize(N);
  st.h = MatrixXd::Zero(N, static_cast<Eigen::Index>(T));
  for (Eigen::Index n = 0; n < N; ++n) {
    st.sigma2_omega(n) = rng.gamma(cfg.priors.omega_shape, cfg.priors.omega_scale);
    if (!cfg.homoskedastic)
      for (Eigen::Index m = 0; m < M; ++m) st.omega(n, m) = std::sqrt(st.sigma2_omega(n)) * rng.normal();
    st.rho(n) = rng.uniform(-1.0, 1.0);
    if (!cfg.homoskedastic) {
      double prev = 0.0;
      for (Eigen::Index t = 0; t < st.h.cols(); ++t) {
        prev = st.rho(n) * prev + rng.normal();
        st.h(n, t) = prev;
      }
    }
  }
  st.mixture = MatrixXi::Zero(N, static_cast<Eigen::Index>(T));
  st.omega_post_mean = MatrixXd::Zero(N, M);
  st.omega_post_var = MatrixXd::Ones(N, M);
  return st;
}

/// Starting point: least-squares A, B from the inverse Cholesky factor of the
/// residual covariance masked to each equation's first pattern, h = 0,
/// omega = 0.1, rho = 0.5, uniform random s, prior means elsewhere.
inline ParameterState initialize_state(const ModelConfig& cfg, const Dataset& data, Rng& rng) {
  cfg.validate();
  check_dataset(cfg, data);
  if (data.T() == 0) return draw_from_prior(cfg, 0, rng);
  data.validate();
  const auto N = static_cast<Eigen::Index>(cfg.N);
  const auto M = static_cast<Eigen::Index>(cfg.M);
  const auto T = static_cast<Eigen::Index>(data.T());
  ParameterState st;
  Eigen::ColPivHouseholderQR<MatrixXd> qr(data.x);
  if (qr.rank() < data.x.cols()) throw ValidationError("design matrix is rank deficient");
  st.A = qr.solve(data.y).transpose();
  const MatrixXd E = data.y - data.x * st.A.transpose();
  const double dof = static_cast<double>(T - data.x.cols());
  const MatrixXd sigma = E.transpose() * E / dof;
  Eigen::LLT<MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) throw NumericalError("residual covariance is not positive definite");
  const MatrixXd L = llt.matrixL();
  const MatrixXd B0 = L.triangularView<Eigen::Lower>().solve(MatrixXd::Identity(N, N));
  MatrixXd Bm = MatrixXd::Zero(N, N);
  for (Eigen::Index n = 0; n < N; ++n) {
    const auto& V = cfg.patterns.at(static_cast<std::size_t>(n), 0).V;
    Bm.row(n) = (V.transpose() * V * B0.row(n).transpose()).transpose();
  }
  if (!(std::abs(Bm.determinant()) > 1e-12 * std::pow(B0.cwiseAbs().maxCoeff(), static_cast<double>(N)))) {
    // masking destroyed invertibility: perturb the free entries
    const VectorXd scale = B0.diagonal().cwiseAbs();
    for (int attempt = 0; attempt < 1000; ++attempt) {
      for (Eigen::Index n = 0; n < N; ++n) {
        const auto& pat = cfg.patterns.at(static_cast<std::size_t>(n), 0);
        for (int c : pat.free_columns) Bm(n, c) = B0(n, c) + scale(n) * rng.normal();
      }
      if (Bm.determinant() != 0.0) break;
    }
    if (Bm.determinant() == 0.0) throw NumericalError("could not initialize a nonsingular B");
  }
  st.B.assign(static_cast<std::size_t>(M), Bm);
  st.kappa.assign(cfg.N, std::vector<int>(cfg.M, 0));
  st.s.resize(data.T());
  for (auto& v : st.s) v = static_cast<int>(std::min<Eigen::Index>(M - 1, static_cast<Eigen::Index>(rng.uniform() * static_cast<double>(M))));
  st.P = regime::transition_prior_mean(cfg.M, cfg.priors.d_m);
  st.pi0 = VectorXd::Constant(M, 1.0 / static_cast<double>(M));
  st.h = MatrixXd::Zero(N, T);
  st.omega = MatrixXd::Constant(N, M, cfg.homoskedastic ? 0.0 : 0.1);
  st.rho = VectorXd::Constant(N, 0.5);
  st.sigma2_omega = VectorXd::Constant(N, cfg.priors.omega_shape * cfg.priors.omega_scale);
  st.mixture = MatrixXi::Zero(N, T);
  st.shrink_B = priors::shrinkage_prior_center(cfg.priors.B, cfg.N);
  st.shrink_A = priors::shrinkage_prior_center(cfg.priors.A, cfg.N);
  // no conditional moments of omega when it is pinned at zero
  const double undefined = cfg.homoskedastic ? std::numeric_limits<double>::quiet_NaN() : 1.0;
  st.omega_post_mean = MatrixXd::Constant(N, M, cfg.homoskedastic ? undefined : 0.0);
  st.omega_post_var = MatrixXd::Constant(N, M, undefined);
  st.log_likelihood = log_likelihood(st, data);
  return st;
}

/// One full sweep; the blocks are visited in the fixed order
/// s, (P, pi0), mixture, h, (omega, sigma2_omega, rho), (kappa, b) per regime
/// and row, B-side shrinkage, A, A-side shrinkage.
inline void gibbs_sweep(ParameterState& st, const Dataset& data, const SamplerContext& ctx, Rng& rng) {
  const ModelConfig& cfg = *ctx.config;
  const auto N = static_cast<Eigen::Index>(cfg.N);
  const std::size_t M = cfg.M;
  const auto T = static_cast<Eigen::Index>(data.T());
  require(static_cast<Eigen::Index>(st.s.size()) == T, "state and dataset lengths differ");

  MatrixXd E = var::reduced_residuals(data, st.A);

  // regime path and chain parameters
  if (M > 1) {
    if (T > 0) {
      const MatrixXd ll = regime::regime_loglik_matrix(E, st.B, st.omega, st.h);
      const auto fr = regime::forward_filter(ll, st.P, st.pi0);
      st.s = regime::backward_sample(fr.filtered, st.P, rng);
    }
    st.P = regime::draw_transition_matrix(st.s, M, cfg.priors.d_m, rng);
    st.pi0 = regime::draw_initial_probs(st.s, M, rng);
  }

  // stochastic volatility
  if (!cfg.homoskedastic) {
    const MatrixXd U = var::structural_residuals(E, st.B, st.s);
    const MatrixXd ystar = sv::log_squared(U);
    st.mixture = sv::draw_mixture_indicators(ystar, st.omega, st.h, st.s, *ctx.table, rng);
    for (Eigen::Index n = 0; n < N; ++n) {
      st.h.row(n) = sv::draw_log_volatilities(ystar.row(n), st.mixture.row(n), st.omega.row(n),
                                              st.rho(n), st.s, *ctx.table, rng);
      const auto om = sv::draw_omega(st.h.row(n), st.s, st.mixture.row(n), ystar.row(n),
                                     st.sigma2_omega(n), M, *ctx.table, rng,
                                     ctx.omega_variance_multiplier);
      st.omega.row(n) = om.value;
      st.omega_post_mean.row(n) = om.post_mean;
      st.omega_post_var.row(n) = om.post_var;
      st.sigma2_omega(n) = sv::draw_omega_variance(st.omega.row(n), cfg.priors.omega_shape,
                                                   cfg.priors.omega_scale, rng);
      st.rho(n) = sv::draw_rho(st.h.row(n), rng);
    }
  }

  // structural rows, pattern then coefficients
  const MatrixXd variances = sv::conditional_variances(st.omega, st.h, st.s);
  const auto members = regime_members(st.s, M);
  for (std::size_t m = 0; m < M; ++m) {
    const auto T_m = members[m].size();
    for (Eigen::Index n = 0; n < N; ++n) {
      const auto& pats = cfg.patterns.equations[static_cast<std::size_t>(n)];
      const MatrixXd scatter = structural::weighted_scatter(E, variances.row(n), members[m]);
      const auto upd = structural::update_structural_row(st.B[m], static_cast<std::size_t>(n), pats,
                                                         scatter, st.shrink_B.gamma(n), T_m, rng);
      st.kappa[static_cast<std::size_t>(n)][m] = static_cast<int>(upd.pattern);
    }
  }
  {
    std::vector<priors::ShrinkageEvidence> ev(cfg.N);
    for (Eigen::Index n = 0; n < N; ++n) {
      auto& e = ev[static_cast<std::size_t>(n)];
      for (std::size_t m = 0; m < M; ++m) {
        e.quadratic += st.B[m].row(n).squaredNorm();
        e.dimension += static_cast<double>(
            cfg.patterns.at(static_cast<std::size_t>(n), static_cast<std::size_t>(st.kappa[static_cast<std::size_t>(n)][m])).r());
      }
    }
    st.shrink_B = priors::update_shrinkage_chain(st.shrink_B, cfg.priors.B, ev, rng);
  }

  // autoregressive block
  st.A = var::draw_autoregressive(data, st.B, st.s, variances, st.shrink_A.gamma, ctx.minnesota, rng);
  st.shrink_A = priors::update_shrinkage_chain(st.shrink_A, cfg.priors.A,
                                               var::shrinkage_evidence(st.A, ctx.minnesota), rng);

  st.log_likelihood = log_likelihood(st, data);
}

}  // namespace tvisvar::gibbs
