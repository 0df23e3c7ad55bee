#pragma once

// Brute-force reference computations used by the test suite and the
// selfcheck subcommand: direct quadrature, exhaustive path enumeration and
// one-sample Kolmogorov-Smirnov tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <Eigen/Dense>

#include "tvisvar/core_model.hpp"
#include "tvisvar/errors.hpp"

namespace tvisvar::oracle {

namespace detail {

inline double integrate_line(const std::function<double(double)>& f, double lo, double hi, double tol = 1e-10) {
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, lo, hi, 15, tol);
}

/// Integral of |a'z|^T exp(-|z|^2 / 2) over the cube [-c, c]^d (|a| = 1),
/// nested adaptive quadrature. The innermost line is split at the kink
/// a'z = 0. With c = sqrt(T) + 12 the omitted mass is below 1e-25 relative.
inline double kinked_gaussian_integral(const VectorXd& a, double T, Eigen::Index dim, VectorXd& z) {
  const double inf = std::sqrt(T) + 12.0;
  if (dim == a.size() - 1) {
    double c = 0.0;
    for (Eigen::Index j = 0; j < dim; ++j) c += a(j) * z(j);
    const double ar = a(dim);
    auto f = [&](double x) {
      const double v = std::abs(c + ar * x);
      return (T == 0.0 ? 1.0 : std::pow(v, T)) * std::exp(-0.5 * x * x);
    };
    const double kink = ar == 0.0 ? inf : -c / ar;
    if (T == 0.0 || kink <= -inf || kink >= inf) return integrate_line(f, -inf, inf);
    return integrate_line(f, -inf, kink) + integrate_line(f, kink, inf);
  }
  auto g = [&](double x) {
    z(dim) = x;
    return std::exp(-0.5 * x * x) * kinked_gaussian_integral(a, T, dim + 1, z);
  };
  return integrate_line(g, -inf, inf, 1e-9);
}

}  // namespace detail

/// log of (2 pi gamma)^{-r/2} * integral |b'w|^T exp(-b'Sb/2) db by direct
/// quadrature after the linear substitution b = L^{-T} z with S = L L'.
inline double pattern_marginal_quadrature(const MatrixXd& S, const VectorXd& w, double gamma, std::size_t T) {
  const auto r = S.rows();
  Eigen::LLT<MatrixXd> llt(S);
  require(llt.info() == Eigen::Success, "S must be positive definite");
  // b'w = z' L^{-1} w
  const VectorXd a = llt.matrixL().solve(w);
  const double na = a.norm();
  double log_scale = 0.0;
  VectorXd unit = a;
  if (T > 0) {
    if (!(na > 0.0)) return -std::numeric_limits<double>::infinity();
    unit = a / na;
    log_scale = static_cast<double>(T) * std::log(na);
  }
  double log_det_L = 0.0;
  for (Eigen::Index i = 0; i < r; ++i) log_det_L += std::log(llt.matrixL()(i, i));
  VectorXd z = VectorXd::Zero(r);
  const double integral = detail::kinked_gaussian_integral(unit, static_cast<double>(T), 0, z);
  return -0.5 * static_cast<double>(r) * std::log(2.0 * M_PI * gamma) + log_scale + std::log(integral) - log_det_L;
}

struct Enumeration {
  MatrixXd filtered;  // T x M
  MatrixXd smoothed;  // T x M
  double log_likelihood = 0.0;
  std::vector<std::vector<int>> paths;
  std::vector<double> path_probability;  // posterior probability of each path
};

/// Exhaustive enumeration of all M^T regime paths with s_1 ~ pi0.
inline Enumeration enumerate_regime_paths(const MatrixXd& loglik, const MatrixXd& P, const VectorXd& pi0) {
  const auto T = loglik.rows(), M = loglik.cols();
  require(T >= 1 && T <= 16 && std::pow(static_cast<double>(M), static_cast<double>(T)) <= 1.1e6,
          "enumeration is limited to small T and M");
  Enumeration out;
  out.filtered = MatrixXd::Zero(T, M);
  out.smoothed = MatrixXd::Zero(T, M);
  std::size_t count = 1;
  for (Eigen::Index t = 0; t < T; ++t) count *= static_cast<std::size_t>(M);
  std::vector<int> path(static_cast<std::size_t>(T));
  // prefix weights: for each t, unnormalized p(s_1..t, y_1..t) summed by s_t
  std::vector<double> joint(count);
  MatrixXd prefix = MatrixXd::Zero(T, M);
  for (std::size_t code = 0; code < count; ++code) {
    std::size_t c = code;
    for (Eigen::Index t = 0; t < T; ++t) {
      path[static_cast<std::size_t>(t)] = static_cast<int>(c % static_cast<std::size_t>(M));
      c /= static_cast<std::size_t>(M);
    }
    double lw = 0.0;
    for (Eigen::Index t = 0; t < T; ++t) {
      const int s = path[static_cast<std::size_t>(t)];
      lw += std::log(t == 0 ? pi0(s) : P(path[static_cast<std::size_t>(t - 1)], s)) + loglik(t, s);
    }
    joint[code] = lw;
    out.paths.push_back(path);
  }
  const double mx = *std::max_element(joint.begin(), joint.end());
  double total = 0.0;
  for (double& j : joint) {
    j = std::exp(j - mx);
    total += j;
  }
  out.log_likelihood = mx + std::log(total);
  for (std::size_t code = 0; code < count; ++code) {
    const double p = joint[code] / total;
    out.path_probability.push_back(p);
    for (Eigen::Index t = 0; t < T; ++t) out.smoothed(t, out.paths[code][static_cast<std::size_t>(t)]) += p;
  }
  // filtered: enumerate prefixes of length t+1 directly
  for (Eigen::Index t = 0; t < T; ++t) {
    std::size_t n = 1;
    for (Eigen::Index j = 0; j <= t; ++j) n *= static_cast<std::size_t>(M);
    std::vector<double> lw(n);
    std::vector<int> last(n);
    for (std::size_t code = 0; code < n; ++code) {
      std::size_t c = code;
      double acc = 0.0;
      int prev = -1;
      for (Eigen::Index j = 0; j <= t; ++j) {
        const int s = static_cast<int>(c % static_cast<std::size_t>(M));
        c /= static_cast<std::size_t>(M);
        acc += std::log(j == 0 ? pi0(s) : P(prev, s)) + loglik(j, s);
        prev = s;
      }
      lw[code] = acc;
      last[code] = prev;
    }
    const double m = *std::max_element(lw.begin(), lw.end());
    double tot = 0.0;
    for (std::size_t code = 0; code < n; ++code) {
      const double v = std::exp(lw[code] - m);
      prefix(t, last[code]) += v;
      tot += v;
    }
    out.filtered.row(t) = prefix.row(t) / tot;
  }
  return out;
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Asymptotic Kolmogorov tail probability with Stephens' small-sample
/// correction.
inline double kolmogorov_p_value(double D, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  const double lambda = (sn + 0.12 + 0.11 / sn) * D;
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? 1.0 : -1.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

inline KsResult ks_test(std::vector<double> x, const std::function<double(double)>& cdf) {
  require(!x.empty(), "KS test needs samples");
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double D = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double F = cdf(x[i]);
    D = std::max({D, F - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - F});
  }
  return {D, kolmogorov_p_value(D, x.size())};
}

/// Numerical CDF of an unnormalized density on (lo, hi) by quadrature; the
/// returned function evaluates the normalized CDF.
inline std::function<double(double)> cdf_from_density(std::function<double(double)> density, double lo, double hi) {
  const double total = detail::integrate_line(density, lo, hi);
  require(total > 0.0 && std::isfinite(total), "density does not integrate");
  return [density, lo, total](double x) {
    if (x <= lo) return 0.0;
    return std::clamp(detail::integrate_line(density, lo, x) / total, 0.0, 1.0);
  };
}

}  // namespace tvisvar::oracle
