#pragma once

// Distribution primitives used by the sampler and the hierarchical shrinkage
// updates.
//
// Parameterizations:
//   IG2(s, nu):      density proportional to x^{-(nu+2)/2} exp(-s / (2x)),
//                    equivalently s / x ~ chi^2_nu.
//   Gamma(a, scale): shape a, mean a * scale.
//   GIG(lambda, chi, psi): density proportional to
//                    x^{lambda-1} exp(-(chi / x + psi x) / 2).

#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tvisvar/core_model.hpp"
#include "tvisvar/errors.hpp"
#include "tvisvar/random.hpp"

namespace tvisvar::priors {

inline constexpr double kLogTwoPi = 1.8378770664093454836;

inline double log_normal_density(double x, double mean, double var) {
  const double z = x - mean;
  return -0.5 * (kLogTwoPi + std::log(var) + z * z / var);
}

// ---------------------------------------------------------------------------
// IG2 and Gamma
// ---------------------------------------------------------------------------

inline double sample_ig2(double s, double nu, Rng& rng) {
  if (!(s > 0.0) || !(nu > 0.0)) throw ValidationError("IG2 needs s > 0 and nu > 0");
  // s / x ~ chi^2_nu = Gamma(nu / 2, scale 2)
  return s / rng.gamma(0.5 * nu, 2.0);
}

inline double ig2_log_density(double x, double s, double nu) {
  if (!(x > 0.0) || !(s > 0.0) || !(nu > 0.0))
    throw ValidationError("IG2 density needs x, s, nu > 0");
  return 0.5 * nu * std::log(0.5 * s) - std::lgamma(0.5 * nu) - 0.5 * (nu + 2.0) * std::log(x) -
         0.5 * s / x;
}

/// Mean if it exists (nu > 2), otherwise the mode.
inline double ig2_center(double s, double nu) { return nu > 2.0 ? s / (nu - 2.0) : s / (nu + 2.0); }

inline double sample_gamma(double shape, double scale, Rng& rng) {
  if (!(shape > 0.0) || !(scale > 0.0)) throw ValidationError("Gamma needs shape, scale > 0");
  return rng.gamma(shape, scale);
}

inline double gamma_log_density(double x, double shape, double scale) {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  return (shape - 1.0) * std::log(x) - x / scale - std::lgamma(shape) - shape * std::log(scale);
}

// ---------------------------------------------------------------------------
// Three-level shrinkage hierarchy
// ---------------------------------------------------------------------------

/// Sufficient statistics of the coefficients shrunk by gamma[n]:
/// `quadratic` = sum of c' Omega^{-1} c over the coefficient vectors,
/// `dimension` = total number of coefficients.
struct ShrinkageEvidence {
  double quadratic = 0.0;
  double dimension = 0.0;
};

/// Prior center of the hierarchy (used for initialization).
inline ShrinkageState shrinkage_prior_center(const ShrinkageHyper& hyper, std::size_t N) {
  ShrinkageState st;
  st.global_scale = ig2_center(hyper.s_s, hyper.nu_s);
  const double scale = hyper.nu_gamma * st.global_scale;
  st.scale = VectorXd::Constant(static_cast<Eigen::Index>(N), scale);
  st.gamma = VectorXd::Constant(static_cast<Eigen::Index>(N), ig2_center(scale, hyper.nu));
  return st;
}

inline ShrinkageState sample_shrinkage_prior(const ShrinkageHyper& hyper, std::size_t N, Rng& rng) {
  ShrinkageState st;
  st.global_scale = sample_ig2(hyper.s_s, hyper.nu_s, rng);
  st.scale.resize(static_cast<Eigen::Index>(N));
  st.gamma.resize(static_cast<Eigen::Index>(N));
  for (Eigen::Index n = 0; n < static_cast<Eigen::Index>(N); ++n) {
    st.scale(n) = sample_gamma(hyper.nu_gamma, st.global_scale, rng);
    st.gamma(n) = sample_ig2(st.scale(n), hyper.nu, rng);
  }
  return st;
}

/// Conjugate updates of gamma[n], scale[n] and the global scale, in that order.
inline ShrinkageState update_shrinkage_chain(const ShrinkageState& state,
                                             const ShrinkageHyper& hyper,
                                             std::span<const ShrinkageEvidence> evidence,
                                             Rng& rng) {
  const auto N = state.gamma.size();
  require(static_cast<Eigen::Index>(evidence.size()) == N, "one evidence entry per equation");
  ShrinkageState out = state;
  for (Eigen::Index n = 0; n < N; ++n) {
    const auto& ev = evidence[static_cast<std::size_t>(n)];
    require(std::isfinite(ev.quadratic) && ev.quadratic >= 0.0, "coefficients must be finite");
    out.gamma(n) = sample_ig2(out.scale(n) + ev.quadratic, hyper.nu + ev.dimension, rng);
  }
  for (Eigen::Index n = 0; n < N; ++n) {
    const double rate = 1.0 / out.global_scale + 0.5 / out.gamma(n);
    out.scale(n) = sample_gamma(hyper.nu_gamma + 0.5 * hyper.nu, 1.0 / rate, rng);
  }
  out.global_scale = sample_ig2(hyper.s_s + 2.0 * out.scale.sum(),
                                hyper.nu_s + 2.0 * static_cast<double>(N) * hyper.nu_gamma, rng);
  return out;
}

// ---------------------------------------------------------------------------
// Pattern-implied spike-and-slab
// ---------------------------------------------------------------------------

/// Marginal prior of one structural element when K_R of K equiprobable
/// patterns exclude it: (slab weight, spike weight).
inline std::pair<double, double> spike_slab_weights(std::size_t K, std::size_t K_R) {
  require(K >= 1, "K must be at least 1");
  require(K_R <= K, "K_R cannot exceed K");
  const double spike = static_cast<double>(K_R) / static_cast<double>(K);
  return {1.0 - spike, spike};
}

/// Prior density of omega at zero when omega ~ N(0, sigma2) and
/// sigma2 ~ Gamma(shape, scale): (2 pi)^{-1/2} E[sigma^{-1}].
inline double omega_prior_density_at_zero(double shape, double scale) {
  if (!(scale > 0.0)) throw ValidationError("omega prior scale must be positive");
  if (!(shape > 0.5)) throw ValidationError("omega prior shape must exceed 1/2");
  const double log_moment = std::lgamma(shape - 0.5) - std::lgamma(shape) - 0.5 * std::log(scale);
  return std::exp(log_moment - 0.5 * kLogTwoPi);
}

// ---------------------------------------------------------------------------
// Dirichlet, truncated normal, GIG
// ---------------------------------------------------------------------------

inline VectorXd sample_dirichlet(const VectorXd& alpha, Rng& rng) {
  require(alpha.size() >= 1, "Dirichlet needs at least one component");
  require((alpha.array() > 0.0).all() && alpha.allFinite(), "Dirichlet weights must be positive");
  VectorXd g(alpha.size());
  for (Eigen::Index i = 0; i < alpha.size(); ++i) g(i) = rng.gamma(alpha(i), 1.0);
  double total = g.sum();
  if (!(total > 0.0)) {
    // every gamma underflowed; fall back to the largest weight
    Eigen::Index imax;
    alpha.maxCoeff(&imax);
    g.setZero();
    g(imax) = 1.0;
    total = 1.0;
  }
  return g / total;
}

namespace detail {

// Exponential-proposal rejection on [a, b] with 0 <= a < b.
inline double truncated_tail(double a, double b, Rng& rng) {
  const double width = b - a;
  if (width < 1.0 / std::max(a, 1.0)) {
    // uniform proposal; acceptance exp((a^2 - x^2) / 2) >= exp(-1.5)
    for (;;) {
      const double x = a + width * rng.uniform();
      if (std::log(rng.uniform()) <= 0.5 * (a * a - x * x)) return x;
    }
  }
  const double alpha = 0.5 * (a + std::sqrt(a * a + 4.0));
  for (;;) {
    const double x = a + rng.exponential(alpha);
    if (x > b) continue;
    const double d = x - alpha;
    if (std::log(rng.uniform()) <= -0.5 * d * d) return x;
  }
}

inline double truncated_standard(double a, double b, Rng& rng) {
  if (a <= 0.0 && b >= 0.0) {
    const double width = b - a;
    if (width >= 2.5066282746310002) {
      for (;;) {
        const double z = rng.normal();
        if (z >= a && z <= b) return z;
      }
    }
    for (;;) {
      const double x = a + width * rng.uniform();
      if (std::log(rng.uniform()) <= -0.5 * x * x) return x;
    }
  }
  if (a > 0.0) return truncated_tail(a, b, rng);
  return -truncated_tail(-b, -a, rng);
}

}  // namespace detail

/// Normal(mean, var) restricted to [lo, hi]. Infinite bounds are allowed.
inline double sample_truncated_normal(double mean, double var, double lo, double hi, Rng& rng) {
  if (!(var > 0.0) || !(lo < hi) || std::isnan(mean))
    throw ValidationError("truncated normal needs var > 0 and lo < hi");
  const double sd = std::sqrt(var);
  const double a = (lo - mean) / sd;
  const double b = (hi - mean) / sd;
  return mean + sd * detail::truncated_standard(a, b, rng);
}

namespace detail {

inline double gig_mode(double lambda, double beta) {
  if (lambda >= 1.0) return (std::sqrt((lambda - 1.0) * (lambda - 1.0) + beta * beta) + (lambda - 1.0)) / beta;
  return beta / (std::sqrt((1.0 - lambda) * (1.0 - lambda) + beta * beta) + (1.0 - lambda));
}

// Ratio-of-uniforms without mode shift; density x^{lambda-1} exp(-beta/2 (x + 1/x)).
inline double gig_rou_noshift(double lambda, double beta, Rng& rng) {
  const double t = 0.5 * (lambda - 1.0);
  const double s = 0.25 * beta;
  const double xm = gig_mode(lambda, beta);
  const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);
  const double ym = ((lambda + 1.0) + std::sqrt((lambda + 1.0) * (lambda + 1.0) + beta * beta)) / beta;
  const double um = std::exp(0.5 * (lambda + 1.0) * std::log(ym) - s * (ym + 1.0 / ym) - nc);
  for (;;) {
    const double u = um * rng.uniform();
    const double v = rng.uniform();
    const double x = u / v;
    if (std::log(v) <= t * std::log(x) - s * (x + 1.0 / x) - nc) return x;
  }
}

// Ratio-of-uniforms with mode shift (large lambda or beta).
inline double gig_rou_shift(double lambda, double beta, Rng& rng) {
  const double t = 0.5 * (lambda - 1.0);
  const double s = 0.25 * beta;
  const double xm = gig_mode(lambda, beta);
  const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);

  const double a = -(2.0 * (lambda + 1.0) / beta + xm);
  const double b = 2.0 * (lambda - 1.0) * xm / beta - 1.0;
  const double c = xm;
  const double p = b - a * a / 3.0;
  const double q = (2.0 * a * a * a) / 27.0 - (a * b) / 3.0 + c;
  const double fi = std::acos(-q / (2.0 * std::sqrt(-(p * p * p) / 27.0)));
  const double fak = 2.0 * std::sqrt(-p / 3.0);
  const double y1 = fak * std::cos(fi / 3.0) - a / 3.0;
  const double y2 = fak * std::cos(fi / 3.0 + 4.0 / 3.0 * std::numbers::pi) - a / 3.0;
  const double uplus = (y1 - xm) * std::exp(t * std::log(y1) - s * (y1 + 1.0 / y1) - nc);
  const double uminus = (y2 - xm) * std::exp(t * std::log(y2) - s * (y2 + 1.0 / y2) - nc);

  for (;;) {
    const double u = uminus + rng.uniform() * (uplus - uminus);
    const double v = rng.uniform();
    const double x = u / v + xm;
    if (x <= 0.0) continue;
    if (std::log(v) <= t * std::log(x) - s * (x + 1.0 / x) - nc) return x;
  }
}

// Hat built from a constant, power and exponential piece; for 0 <= lambda < 1
// and small beta where the density is not T-concave.
inline double gig_concave_hat(double lambda, double beta, Rng& rng) {
  const double xm = gig_mode(lambda, beta);
  const double x0 = beta / (1.0 - lambda);
  const double k0 = std::exp((lambda - 1.0) * std::log(xm) - 0.5 * beta * (xm + 1.0 / xm));
  double A[3];
  double k1, k2;
  A[0] = k0 * x0;
  if (x0 >= 2.0 / beta) {
    k1 = 0.0;
    A[1] = 0.0;
    k2 = std::pow(x0, lambda - 1.0);
    A[2] = k2 * 2.0 * std::exp(-beta * x0 / 2.0) / beta;
  } else {
    k1 = std::exp(-beta);
    A[1] = lambda == 0.0 ? k1 * std::log(2.0 / (beta * beta))
                         : k1 / lambda * (std::pow(2.0 / beta, lambda) - std::pow(x0, lambda));
    k2 = std::pow(2.0 / beta, lambda - 1.0);
    A[2] = k2 * 2.0 * std::exp(-1.0) / beta;
  }
  const double total = A[0] + A[1] + A[2];
  for (;;) {
    double v = total * rng.uniform();
    double x, hx;
    if (v <= A[0]) {
      x = x0 * v / A[0];
      hx = k0;
    } else if ((v -= A[0]) <= A[1]) {
      if (lambda == 0.0) {
        x = beta * std::exp(std::exp(beta) * v);
        hx = k1 / x;
      } else {
        x = std::pow(std::pow(x0, lambda) + lambda / k1 * v, 1.0 / lambda);
        hx = k1 * std::pow(x, lambda - 1.0);
      }
    } else {
      v -= A[1];
      const double a = std::max(x0, 2.0 / beta);
      x = -2.0 / beta * std::log(std::exp(-beta / 2.0 * a) - beta / (2.0 * k2) * v);
      hx = k2 * std::exp(-beta / 2.0 * x);
    }
    const double u = rng.uniform() * hx;
    if (std::log(u) <= (lambda - 1.0) * std::log(x) - beta / 2.0 * (x + 1.0 / x)) return x;
  }
}

}  // namespace detail

/// Generalized inverse Gaussian draw (Hormann-Leydold ratio-of-uniforms
/// family). chi = 0 or psi = 0 reduce to Gamma / inverse-Gamma laws.
inline double sample_gig(double lambda, double chi, double psi, Rng& rng) {
  if (!std::isfinite(lambda) || !(chi >= 0.0) || !(psi >= 0.0) || !std::isfinite(chi) ||
      !std::isfinite(psi)) {
    throw ValidationError("GIG parameters must be finite with chi, psi >= 0");
  }
  if (chi == 0.0) {
    if (!(lambda > 0.0) || !(psi > 0.0)) throw ValidationError("GIG with chi = 0 needs lambda > 0, psi > 0");
    return rng.gamma(lambda, 2.0 / psi);
  }
  if (psi == 0.0) {
    if (!(lambda < 0.0)) throw ValidationError("GIG with psi = 0 needs lambda < 0");
    return 1.0 / rng.gamma(-lambda, 2.0 / chi);
  }
  const double beta = std::sqrt(chi * psi);
  const double eta = std::sqrt(chi / psi);
  const double lam = std::abs(lambda);
  double x;
  if (beta < 1e-12) {
    // chi * psi underflows: the Gamma / inverse-Gamma limits
    if (lambda > 0.0) return rng.gamma(lambda, 2.0 / psi);
    if (lambda < 0.0) return 1.0 / rng.gamma(-lambda, 2.0 / chi);
    throw NumericalError("GIG with lambda = 0 and chi * psi ~ 0 is improper");
  }
  if (lam > 2.0 || beta > 3.0) {
    x = detail::gig_rou_shift(lam, beta, rng);
  } else if (lam >= 1.0 - 2.25 * beta * beta || beta > 0.2) {
    x = detail::gig_rou_noshift(lam, beta, rng);
  } else {
    x = detail::gig_concave_hat(lam, beta, rng);
  }
  return lambda < 0.0 ? eta / x : eta * x;
}

}  // namespace tvisvar::priors
