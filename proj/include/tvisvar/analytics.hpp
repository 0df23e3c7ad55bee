#pragma once

// Posterior post-processing over a DrawStore: normalization, indicator
// frequencies, impulse responses, Savage-Dickey ratios, interval summaries
// and regime-specific data moments.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tvisvar/core_model.hpp"
#include "tvisvar/draw_store.hpp"
#include "tvisvar/errors.hpp"
#include "tvisvar/priors.hpp"
#include "tvisvar/simulator.hpp"

namespace tvisvar::analytics {

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

enum class Policy { None, SignDiag, Labels };

inline Policy parse_policy(const std::string& s) {
  if (s == "none") return Policy::None;
  if (s == "sign-diag") return Policy::SignDiag;
  if (s == "labels") return Policy::Labels;
  throw ValidationError("unknown normalization policy '" + s + "' (none|sign-diag|labels)");
}

struct Normalized {
  DrawStore store;
  std::size_t skipped_flips = 0;  // rows left alone because the diagonal is exactly zero
};

/// Reference draw for label alignment: the highest stored log-likelihood.
inline std::size_t reference_draw(const DrawStore& store) {
  require(store.draws() > 0, "store has no draws");
  const auto& ll = store.block("log_likelihood").data;
  return static_cast<std::size_t>(std::max_element(ll.begin(), ll.end()) - ll.begin());
}

/// Permutation perm (old label -> new label) minimizing the Hamming distance
/// between perm(s) and ref.
inline std::vector<int> best_relabeling(std::span<const double> s, std::span<const double> ref, std::size_t M) {
  std::vector<int> perm(M), best;
  std::iota(perm.begin(), perm.end(), 0);
  // agreement[i][j]: periods where s == i and ref == j
  std::vector<std::vector<std::size_t>> agree(M, std::vector<std::size_t>(M, 0));
  for (std::size_t t = 0; t < s.size(); ++t)
    ++agree[static_cast<std::size_t>(s[t])][static_cast<std::size_t>(ref[t])];
  std::size_t best_score = 0;
  bool first = true;
  do {
    std::size_t score = 0;
    for (std::size_t i = 0; i < M; ++i) score += agree[i][static_cast<std::size_t>(perm[i])];
    if (first || score > best_score) {
      best_score = score;
      best = perm;
      first = false;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

namespace detail {

/// Reorders the regime axis of one draw of a block stored as [lead..., M, trail...].
inline void permute_axis(std::span<double> v, std::size_t outer, std::size_t M, std::size_t inner,
                         const std::vector<int>& perm) {
  std::vector<double> tmp(v.begin(), v.end());
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t m = 0; m < M; ++m)
      for (std::size_t i = 0; i < inner; ++i)
        v[(o * M + static_cast<std::size_t>(perm[m])) * inner + i] = tmp[(o * M + m) * inner + i];
}

inline std::span<double> mutable_view(DrawStore& store, const std::string& name, std::size_t draw) {
  auto& b = store.blocks.at(name);
  const auto n = b.per_draw();
  return {b.data.data() + draw * n, n};
}

}  // namespace detail

inline Normalized normalize_draws(const DrawStore& store, Policy policy) {
  Normalized out{store, 0};
  DrawStore& st = out.store;
  const std::size_t N = st.meta.N, M = st.meta.M;
  if (policy == Policy::SignDiag) {
    for (std::size_t i = 0; i < st.draws(); ++i) {
      auto B = detail::mutable_view(st, "B", i);
      for (std::size_t m = 0; m < M; ++m)
        for (std::size_t n = 0; n < N; ++n) {
          double* row = B.data() + (m * N + n) * N;
          if (row[n] == 0.0) {
            ++out.skipped_flips;
          } else if (row[n] < 0.0) {
            for (std::size_t j = 0; j < N; ++j) row[j] = -row[j];
          }
        }
    }
  } else if (policy == Policy::Labels && M > 1) {
    const std::size_t r = reference_draw(store);
    const auto ref_s = store.view("s", r);
    for (std::size_t i = 0; i < st.draws(); ++i) {
      const auto perm = best_relabeling(store.view("s", i), ref_s, M);
      bool identity = true;
      for (std::size_t m = 0; m < M; ++m) identity = identity && perm[m] == static_cast<int>(m);
      if (identity) continue;
      detail::permute_axis(detail::mutable_view(st, "B", i), 1, M, N * N, perm);
      detail::permute_axis(detail::mutable_view(st, "kappa", i), N, M, 1, perm);
      detail::permute_axis(detail::mutable_view(st, "omega", i), N, M, 1, perm);
      detail::permute_axis(detail::mutable_view(st, "omega_post_mean", i), N, M, 1, perm);
      detail::permute_axis(detail::mutable_view(st, "omega_post_var", i), N, M, 1, perm);
      detail::permute_axis(detail::mutable_view(st, "pi0", i), 1, M, 1, perm);
      auto P = detail::mutable_view(st, "P", i);
      detail::permute_axis(P, 1, M, M, perm);  // rows
      detail::permute_axis(P, M, M, 1, perm);  // columns
      for (double& v : detail::mutable_view(st, "s", i)) v = perm[static_cast<std::size_t>(v)];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Indicator frequencies
// ---------------------------------------------------------------------------

/// M x K frequencies of the pattern indicator of equation n (0-based).
inline MatrixXd tvi_probabilities(const DrawStore& store, std::size_t n) {
  require(n < store.meta.N, "equation index out of range");
  require(store.draws() > 0, "store has no draws");
  const auto M = store.meta.M, K = store.meta.K[n];
  MatrixXd counts = MatrixXd::Zero(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(K));
  for (std::size_t i = 0; i < store.draws(); ++i) {
    const auto kv = store.view("kappa", i);
    for (std::size_t m = 0; m < M; ++m) counts(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(kv[n * M + m])) += 1.0;
  }
  return counts / static_cast<double>(store.draws());
}

/// T x M posterior frequencies of the regime indicators.
inline MatrixXd regime_probabilities(const DrawStore& store) {
  require(store.draws() > 0, "store has no draws");
  const auto T = store.meta.T, M = store.meta.M;
  MatrixXd out = MatrixXd::Zero(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(M));
  for (std::size_t i = 0; i < store.draws(); ++i) {
    const auto s = store.view("s", i);
    for (std::size_t t = 0; t < T; ++t) out(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(s[t])) += 1.0;
  }
  return out / static_cast<double>(store.draws());
}

/// Fraction of draws in which some monitored equation uses different patterns
/// across regimes. By default every equation with more than one pattern.
inline double joint_tvi_change_probability(const DrawStore& store, std::vector<std::size_t> equations = {}) {
  require(store.meta.M >= 2, "pattern change needs at least two regimes");
  require(store.draws() > 0, "store has no draws");
  const auto M = store.meta.M;
  if (equations.empty())
    for (std::size_t n = 0; n < store.meta.N; ++n)
      if (store.meta.K[n] > 1) equations.push_back(n);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < store.draws(); ++i) {
    const auto kv = store.view("kappa", i);
    bool change = false;
    for (auto n : equations) {
      require(n < store.meta.N, "equation index out of range");
      for (std::size_t m = 1; m < M; ++m) change = change || kv[n * M + m] != kv[n * M];
    }
    hits += change ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(store.draws());
}

// ---------------------------------------------------------------------------
// Impulse responses
// ---------------------------------------------------------------------------

struct IrfSpec {
  std::size_t horizon = 60;
  std::size_t shock = 0;                     // structural shock (column of B^{-1})
  std::optional<std::size_t> normalize_on;   // variable whose impact response is fixed
  double value = 1.0;                        // impact response of that variable
  bool cumulate = false;
};

/// (H+1) x N responses of all variables to the chosen shock.
inline MatrixXd impulse_responses(const MatrixXd& A, std::size_t p, const MatrixXd& Bm, const IrfSpec& spec) {
  const auto N = Bm.rows();
  require(Bm.cols() == N && A.rows() == N, "impulse_responses: dimension mismatch");
  require(spec.shock < static_cast<std::size_t>(N), "shock index out of range");
  Eigen::FullPivLU<MatrixXd> lu(Bm);
  if (!lu.isInvertible()) throw NumericalError("impulse_responses: B is singular");
  VectorXd impact = lu.inverse().col(static_cast<Eigen::Index>(spec.shock));
  if (spec.normalize_on) {
    require(*spec.normalize_on < static_cast<std::size_t>(N), "normalization variable out of range");
    const double base = impact(static_cast<Eigen::Index>(*spec.normalize_on));
    if (base == 0.0) throw NumericalError("impulse_responses: zero impact response on the normalization variable");
    impact *= spec.value / base;
    impact(static_cast<Eigen::Index>(*spec.normalize_on)) = spec.value;
  }
  const MatrixXd F = sim::companion_matrix(A, p);
  const auto Np = F.rows();
  MatrixXd out(static_cast<Eigen::Index>(spec.horizon + 1), N);
  VectorXd state = VectorXd::Zero(Np);
  state.head(N) = impact;
  out.row(0) = impact.transpose();
  for (std::size_t h = 1; h <= spec.horizon; ++h) {
    state = F * state;
    out.row(static_cast<Eigen::Index>(h)) = state.head(N).transpose();
  }
  if (spec.cumulate)
    for (Eigen::Index h = 1; h < out.rows(); ++h) out.row(h) += out.row(h - 1);
  return out;
}

/// Responses for every stored draw in regime m.
inline std::vector<MatrixXd> irf_draws(const DrawStore& store, std::size_t m, const IrfSpec& spec) {
  require(m < store.meta.M, "regime index out of range");
  std::vector<MatrixXd> out;
  out.reserve(store.draws());
  for (std::size_t i = 0; i < store.draws(); ++i)
    out.push_back(impulse_responses(store.matrix("A", i), store.meta.p, store.matrix("B", i, m), spec));
  return out;
}

// ---------------------------------------------------------------------------
// Savage-Dickey ratio for homoskedasticity
// ---------------------------------------------------------------------------

/// log of the draw-averaged conditional posterior density of omega_n(m) at
/// zero minus the log prior density at zero. Negative values favor omega != 0.
inline double heteroskedasticity_sddr(const DrawStore& store, std::size_t n, std::size_t m, double shape,
                                      double scale) {
  require(n < store.meta.N && m < store.meta.M, "index out of range");
  require(store.draws() > 0, "store has no draws");
  if (!store.has("omega_post_mean") || !store.has("omega_post_var"))
    throw StoreError("store lacks the conditional moments of omega");
  const auto M = store.meta.M;
  std::vector<double> logs(store.draws());
  for (std::size_t i = 0; i < store.draws(); ++i) {
    const double mu = store.view("omega_post_mean", i)[n * M + m];
    const double v = store.view("omega_post_var", i)[n * M + m];
    if (!(v > 0.0) || !std::isfinite(v) || !std::isfinite(mu))
      throw StoreError("conditional moments of omega are missing (homoskedastic run?)");
    logs[i] = priors::log_normal_density(0.0, mu, v);
  }
  const double mx = *std::max_element(logs.begin(), logs.end());
  double acc = 0.0;
  for (double l : logs) acc += std::exp(l - mx);
  const double log_post = mx + std::log(acc / static_cast<double>(logs.size()));
  return log_post - std::log(priors::omega_prior_density_at_zero(shape, scale));
}

// ---------------------------------------------------------------------------
// Summaries
// ---------------------------------------------------------------------------

struct Summary {
  double mean = 0.0;
  double median = 0.0;
  double lower = 0.0;  // equal-tailed interval
  double upper = 0.0;
  double hdi_lower = 0.0;
  double hdi_upper = 0.0;
};

/// Linear-interpolation quantile of sorted values.
inline double quantile_sorted(const std::vector<double>& x, double q) {
  require(!x.empty(), "quantile of an empty sample");
  const double pos = q * static_cast<double>(x.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (pos - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

inline Summary summarize(std::vector<double> x, double mass = 0.68) {
  require(!x.empty(), "cannot summarize an empty sample");
  require(mass > 0.0 && mass < 1.0, "interval mass must lie in (0, 1)");
  std::sort(x.begin(), x.end());
  Summary s;
  s.mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  s.median = quantile_sorted(x, 0.5);
  s.lower = quantile_sorted(x, 0.5 * (1.0 - mass));
  s.upper = quantile_sorted(x, 0.5 * (1.0 + mass));
  // shortest window holding ceil(mass * n) points
  const std::size_t n = x.size();
  const std::size_t w = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(mass * static_cast<double>(n))));
  std::size_t best = 0;
  for (std::size_t i = 0; i + w <= n; ++i)
    if (x[i + w - 1] - x[i] < x[best + w - 1] - x[best]) best = i;
  s.hdi_lower = x[best];
  s.hdi_upper = x[best + w - 1];
  return s;
}

/// Pointwise summaries of equally shaped matrices.
inline std::vector<std::vector<Summary>> summarize_pointwise(const std::vector<MatrixXd>& draws, double mass = 0.68) {
  require(!draws.empty(), "no draws to summarize");
  const auto R = draws.front().rows(), C = draws.front().cols();
  std::vector<std::vector<Summary>> out(static_cast<std::size_t>(R), std::vector<Summary>(static_cast<std::size_t>(C)));
  std::vector<double> buf(draws.size());
  for (Eigen::Index r = 0; r < R; ++r)
    for (Eigen::Index c = 0; c < C; ++c) {
      for (std::size_t i = 0; i < draws.size(); ++i) buf[i] = draws[i](r, c);
      out[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = summarize(buf, mass);
    }
  return out;
}

// ---------------------------------------------------------------------------
// Regime-specific data moments
// ---------------------------------------------------------------------------

enum class Assignment { Hard, Weighted };

struct RegimeMoments {
  double weight = 0.0;  // observation count (hard) or probability mass (weighted)
  bool defined = false;
  VectorXd mean;        // NaN when undefined
  VectorXd sd;
  MatrixXd cov;
};

/// Moments of y (T x N) per regime given T x M regime probabilities. Hard
/// assignment uses the argmax regime; the weighted variant uses the
/// probabilities as frequency weights with the unbiased correction, so
/// uniform probabilities reproduce the full-sample moments.
inline std::vector<RegimeMoments> regime_moments(const MatrixXd& y, const MatrixXd& probs,
                                                 Assignment rule = Assignment::Hard) {
  require(y.rows() == probs.rows(), "regime_moments: probabilities must have one row per observation");
  const auto T = y.rows(), N = y.cols(), M = probs.cols();
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  MatrixXd w = MatrixXd::Zero(T, M);
  if (rule == Assignment::Hard) {
    for (Eigen::Index t = 0; t < T; ++t) {
      Eigen::Index arg;
      probs.row(t).maxCoeff(&arg);
      w(t, arg) = 1.0;
    }
  } else {
    w = probs;
  }
  std::vector<RegimeMoments> out(static_cast<std::size_t>(M));
  for (Eigen::Index m = 0; m < M; ++m) {
    auto& r = out[static_cast<std::size_t>(m)];
    const VectorXd wm = w.col(m);
    const double v1 = wm.sum(), v2 = wm.squaredNorm();
    r.weight = v1;
    r.mean = VectorXd::Constant(N, nan);
    r.sd = VectorXd::Constant(N, nan);
    r.cov = MatrixXd::Constant(N, N, nan);
    if (!(v1 > 0.0)) continue;
    r.mean = (y.transpose() * wm) / v1;
    const double denom = v1 - v2 / v1;
    if (!(denom > 0.0)) continue;
    const MatrixXd c = y.rowwise() - r.mean.transpose();
    r.cov = c.transpose() * wm.asDiagonal() * c / denom;
    r.sd = r.cov.diagonal().cwiseSqrt();
    r.defined = true;
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV tables
// ---------------------------------------------------------------------------

inline void put_number(std::ostream& out, double v) {
  if (std::isnan(v)) out << "NA";
  else out << v;
}

/// Columns: equation,regime,pattern,label,code,probability.
inline void write_tvi_csv(std::ostream& out, const DrawStore& store) {
  out.precision(10);
  out << "equation,regime,pattern,label,code,probability\n";
  std::size_t offset = 0;
  for (std::size_t n = 0; n < store.meta.N; ++n) {
    const MatrixXd prob = tvi_probabilities(store, n);
    for (std::size_t m = 0; m < store.meta.M; ++m)
      for (std::size_t k = 0; k < store.meta.K[n]; ++k) {
        std::string label, code;
        if (offset + k < store.meta.pattern_codes.size()) {
          const auto& pc = store.meta.pattern_codes[offset + k];
          const auto a = pc.find(':'), b = pc.rfind(':');
          label = pc.substr(a + 1, b - a - 1);
          code = pc.substr(b + 1);
        }
        out << n + 1 << ',' << m + 1 << ',' << k + 1 << ',' << label << ',' << code << ','
            << prob(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k)) << '\n';
      }
    offset += store.meta.K[n];
  }
}

/// Columns: date,regime_1..regime_M.
inline void write_regimes_csv(std::ostream& out, const MatrixXd& probs, const std::vector<std::string>& dates) {
  out.precision(10);
  out << "date";
  for (Eigen::Index m = 0; m < probs.cols(); ++m) out << ",regime_" << m + 1;
  out << '\n';
  for (Eigen::Index t = 0; t < probs.rows(); ++t) {
    out << (static_cast<std::size_t>(t) < dates.size() ? dates[static_cast<std::size_t>(t)] : std::to_string(t + 1));
    for (Eigen::Index m = 0; m < probs.cols(); ++m) out << ',' << probs(t, m);
    out << '\n';
  }
}

/// Columns: regime,horizon,variable,median,lower,upper,hdi_lower,hdi_upper.
inline void write_irf_csv(std::ostream& out, const std::vector<std::vector<std::vector<Summary>>>& by_regime,
                          const std::vector<std::string>& names) {
  out.precision(10);
  out << "regime,horizon,variable,median,lower,upper,hdi_lower,hdi_upper\n";
  for (std::size_t m = 0; m < by_regime.size(); ++m)
    for (std::size_t h = 0; h < by_regime[m].size(); ++h)
      for (std::size_t j = 0; j < by_regime[m][h].size(); ++j) {
        const auto& s = by_regime[m][h][j];
        out << m + 1 << ',' << h << ',' << (j < names.size() ? names[j] : std::to_string(j + 1)) << ','
            << s.median + 0.0 << ',' << s.lower + 0.0 << ',' << s.upper + 0.0 << ',' << s.hdi_lower + 0.0 << ',' << s.hdi_upper + 0.0 << '\n';
      }
}

struct SddrRow {
  std::size_t equation = 0, regime = 0;
  double log_sddr = 0.0;
};

/// Columns: equation,regime,log_sddr,favors.
inline void write_sddr_csv(std::ostream& out, const std::vector<SddrRow>& rows) {
  out.precision(10);
  out << "equation,regime,log_sddr,favors\n";
  for (const auto& r : rows)
    out << r.equation + 1 << ',' << r.regime + 1 << ',' << r.log_sddr << ','
        << (r.log_sddr > 0.0 ? "homoskedastic" : "heteroskedastic") << '\n';
}

/// Columns: regime,weight,variable,mean,sd, then one cov_<name> column per variable.
inline void write_moments_csv(std::ostream& out, const std::vector<RegimeMoments>& moments,
                              const std::vector<std::string>& names) {
  out.precision(10);
  out << "regime,weight,variable,mean,sd";
  for (const auto& n : names) out << ",cov_" << n;
  out << '\n';
  for (std::size_t m = 0; m < moments.size(); ++m) {
    const auto& r = moments[m];
    for (Eigen::Index j = 0; j < r.mean.size(); ++j) {
      out << m + 1 << ',' << r.weight << ','
          << (static_cast<std::size_t>(j) < names.size() ? names[static_cast<std::size_t>(j)] : std::to_string(j + 1)) << ',';
      put_number(out, r.mean(j));
      out << ',';
      put_number(out, r.sd(j));
      for (Eigen::Index c = 0; c < r.cov.cols(); ++c) {
        out << ',';
        put_number(out, r.cov(j, c));
      }
      out << '\n';
    }
  }
}

}  // namespace tvisvar::analytics
