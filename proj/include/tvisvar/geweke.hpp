#pragma once

// Joint-distribution test of the sampler. Marginal-conditional draws come
// straight from the prior; successive-conditional draws alternate a data
// simulation given the parameters with Gibbs sweeps given the data. Both
// target p(theta), so monitored moments must agree up to Monte Carlo error.

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <string>
#include <vector>

#include "tvisvar/core_model.hpp"
#include "tvisvar/gibbs.hpp"
#include "tvisvar/random.hpp"
#include "tvisvar/simulator.hpp"

namespace tvisvar::geweke {

struct Options {
  std::size_t T = 30;
  std::size_t iterations = 20000;
  std::size_t sweeps_per_cycle = 5;  // Gibbs sweeps between data regenerations
  double omega_variance_multiplier = 1.0;
};

struct Statistic {
  std::string name;
  double mean_marginal = 0.0;
  double mean_successive = 0.0;
  double std_error = 0.0;
  double z = 0.0;
};

struct Report {
  std::vector<Statistic> stats;
  bool diverged = false;
  std::string failure;

  double max_abs_z() const {
    double out = 0.0;
    for (const auto& s : stats) out = std::max(out, std::abs(s.z));
    return out;
  }
  const Statistic& at(const std::string& name) const {
    for (const auto& s : stats)
      if (s.name == name) return s;
    throw ValidationError("no statistic named '" + name + "'");
  }
};

/// Monitored functionals; bounded or log-transformed so that both samples
/// have finite variance.
inline std::vector<std::string> statistic_names(const ModelConfig& cfg) {
  std::vector<std::string> names;
  const auto N = cfg.N, M = cfg.M;
  for (std::size_t n = 0; n < N; ++n) {
    const auto e = std::to_string(n + 1);
    for (std::size_t m = 0; m < M; ++m) {
      const auto r = std::to_string(m + 1);
      names.push_back("omega2[" + e + "," + r + "]");
      names.push_back("abs_omega[" + e + "," + r + "]");
    }
    names.push_back("log_sigma2_omega[" + e + "]");
    names.push_back("log_gamma_B[" + e + "]");
    names.push_back("log_gamma_A[" + e + "]");
    names.push_back("rho[" + e + "]");
    names.push_back("rho2[" + e + "]");
    for (std::size_t j = 0; j < cfg.k(); ++j) names.push_back("A[" + e + "," + std::to_string(j + 1) + "]");
    for (std::size_t m = 0; m < M; ++m)
      for (std::size_t k = 0; k + 1 < cfg.patterns.K(n); ++k)
        names.push_back("kappa[" + e + "," + std::to_string(m + 1) + "]==" + std::to_string(k + 1));
    for (std::size_t m = 0; m < M; ++m)
      for (std::size_t j = 0; j < N; ++j)
        names.push_back("abs_B" + std::to_string(m + 1) + "[" + e + "," + std::to_string(j + 1) + "]");
  }
  if (M > 1) {
    names.push_back("P[1,1]");
    names.push_back("pi0[1]");
    names.push_back("share_s1");
  }
  for (std::size_t n = 0; n < N; ++n) names.push_back("h2_first[" + std::to_string(n + 1) + "]");
  return names;
}

inline std::vector<double> statistics(const ParameterState& st, const ModelConfig& cfg) {
  std::vector<double> v;
  const auto N = static_cast<Eigen::Index>(cfg.N);
  const auto M = static_cast<Eigen::Index>(cfg.M);
  for (Eigen::Index n = 0; n < N; ++n) {
    for (Eigen::Index m = 0; m < M; ++m) {
      v.push_back(st.omega(n, m) * st.omega(n, m));
      v.push_back(std::abs(st.omega(n, m)));
    }
    v.push_back(std::log(st.sigma2_omega(n)));
    v.push_back(std::log(st.shrink_B.gamma(n)));
    v.push_back(std::log(st.shrink_A.gamma(n)));
    v.push_back(st.rho(n));
    v.push_back(st.rho(n) * st.rho(n));
    for (Eigen::Index j = 0; j < st.A.cols(); ++j) v.push_back(st.A(n, j));
    for (Eigen::Index m = 0; m < M; ++m)
      for (std::size_t k = 0; k + 1 < cfg.patterns.K(static_cast<std::size_t>(n)); ++k)
        v.push_back(st.kappa[static_cast<std::size_t>(n)][static_cast<std::size_t>(m)] == static_cast<int>(k) ? 1.0 : 0.0);
    for (Eigen::Index m = 0; m < M; ++m)
      for (Eigen::Index j = 0; j < N; ++j) v.push_back(std::abs(st.B[static_cast<std::size_t>(m)](n, j)));
  }
  if (M > 1) {
    v.push_back(st.P(0, 0));
    v.push_back(st.pi0(0));
    double share = 0.0;
    for (int s : st.s) share += s == 0 ? 1.0 : 0.0;
    v.push_back(st.s.empty() ? 0.0 : share / static_cast<double>(st.s.size()));
  }
  for (Eigen::Index n = 0; n < N; ++n) v.push_back(st.h.cols() > 0 ? st.h(n, 0) * st.h(n, 0) : 0.0);
  return v;
}

/// Data set drawn from p(y | theta) with a zero presample.
inline Dataset simulate_data(const ParameterState& st, const ModelConfig& cfg, Rng& rng) {
  const auto T = static_cast<Eigen::Index>(st.s.size());
  const MatrixXd series = sim::simulate_observations(
      st.A, cfg.p, st.B, st.s, st.h, st.omega, MatrixXd::Zero(static_cast<Eigen::Index>(cfg.p), st.A.rows()),
      MatrixXd::Ones(T, static_cast<Eigen::Index>(cfg.d_dim)), rng);
  return Dataset::from_series(series, cfg.p, MatrixXd::Ones(series.rows(), static_cast<Eigen::Index>(cfg.d_dim)));
}

/// Standard error of the mean of a correlated sequence from the initial
/// positive sequence estimate of the integrated autocorrelation time.
inline double mcmc_standard_error(const std::vector<double>& x) {
  const std::size_t n = x.size();
  if (n < 4) return 0.0;
  double mu = 0.0;
  for (double v : x) mu += v;
  mu /= static_cast<double>(n);
  auto autocov = [&](std::size_t lag) {
    double acc = 0.0;
    for (std::size_t i = lag; i < n; ++i) acc += (x[i] - mu) * (x[i - lag] - mu);
    return acc / static_cast<double>(n);
  };
  const double c0 = autocov(0);
  if (!(c0 > 0.0)) return 0.0;
  double sum = -c0;  // tau * c0 = -c0 + 2 * sum of paired sums
  for (std::size_t lag = 0; lag + 1 < n / 2; lag += 2) {
    const double pair = autocov(lag) + autocov(lag + 1);
    if (!(pair > 0.0)) break;
    sum += 2.0 * pair;
  }
  return std::sqrt(std::max(sum, c0) / static_cast<double>(n));
}

inline Report joint_distribution_test(const ModelConfig& cfg, const Options& opts, Rng& rng) {
  require(cfg.d_dim == 1, "the joint-distribution test uses an intercept only");
  require(!cfg.prior_only, "the joint-distribution test needs the likelihood");
  const auto names = statistic_names(cfg);
  const std::size_t n = opts.iterations;
  std::vector<std::vector<double>> marginal(names.size()), successive(names.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = statistics(gibbs::draw_from_prior(cfg, opts.T, rng), cfg);
    for (std::size_t j = 0; j < v.size(); ++j) marginal[j].push_back(v[j]);
  }
  gibbs::SamplerContext ctx(cfg);
  ctx.omega_variance_multiplier = opts.omega_variance_multiplier;
  ParameterState st = gibbs::draw_from_prior(cfg, opts.T, rng);
  Report rep;
  try {
    for (std::size_t i = 0; i < n; ++i) {
      const Dataset data = simulate_data(st, cfg, rng);
      for (std::size_t k = 0; k < opts.sweeps_per_cycle; ++k) gibbs::gibbs_sweep(st, data, ctx, rng);
      const auto v = statistics(st, cfg);
      for (std::size_t j = 0; j < v.size(); ++j) successive[j].push_back(v[j]);
    }
  } catch (const std::exception& e) {
    // a broken sampler can leave the numerically valid region
    rep.diverged = true;
    rep.failure = e.what();
    for (const auto& name : names) {
      Statistic s;
      s.name = name;
      s.z = std::numeric_limits<double>::infinity();
      rep.stats.push_back(s);
    }
    return rep;
  }
  for (std::size_t j = 0; j < names.size(); ++j) {
    Statistic s;
    s.name = names[j];
    double m1 = 0.0, m2 = 0.0, v1 = 0.0;
    for (double x : marginal[j]) m1 += x;
    m1 /= static_cast<double>(n);
    for (double x : marginal[j]) v1 += (x - m1) * (x - m1);
    v1 /= static_cast<double>(n - 1);
    for (double x : successive[j]) m2 += x;
    m2 /= static_cast<double>(n);
    const double se2 = mcmc_standard_error(successive[j]);
    s.mean_marginal = m1;
    s.mean_successive = m2;
    s.std_error = std::sqrt(v1 / static_cast<double>(n) + se2 * se2);
    s.z = s.std_error > 0.0 ? (m1 - m2) / s.std_error : (m1 == m2 ? 0.0 : std::copysign(1e300, m1 - m2));
    rep.stats.push_back(s);
  }
  return rep;
}

/// The small configuration the harness is calibrated for: N = 2, p = 1,
/// M = 2, two patterns in the second equation and a tight autoregressive prior.
inline ModelConfig default_test_config() {
  ModelConfig cfg = default_config(2, 1, 2, {{1, {{"full", "**"}, {"excl", "0*"}}}});
  cfg.priors.B = ShrinkageHyper{10.0, 10.0, 10.0, 10.0};
  cfg.priors.A = ShrinkageHyper{10.0, 10.0, 0.001, 10.0};
  return cfg;
}

}  // namespace tvisvar::geweke
