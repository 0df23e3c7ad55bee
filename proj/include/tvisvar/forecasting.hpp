#pragma once

// Predictive simulation, predictive densities and the rolling-origin
// evaluation harness.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "tvisvar/chain.hpp"
#include "tvisvar/core_model.hpp"
#include "tvisvar/errors.hpp"
#include "tvisvar/priors.hpp"
#include "tvisvar/random.hpp"

namespace tvisvar::forecast {

namespace detail {

inline int pick(const RowVectorXd& probs, Rng& rng) {
  const double u = rng.uniform() * probs.sum();
  double acc = 0.0;
  for (Eigen::Index m = 0; m < probs.size(); ++m) {
    acc += probs(m);
    if (u < acc) return static_cast<int>(m);
  }
  return static_cast<int>(probs.size() - 1);
}

/// Deterministic rows for H future periods: `given` when supplied, otherwise
/// the last in-sample row repeated (an intercept if the sample is empty).
inline MatrixXd future_deterministic(const Dataset& data, std::size_t H, const MatrixXd& given) {
  const auto n = static_cast<Eigen::Index>(H);
  if (given.size() > 0) {
    require(given.rows() >= n && given.cols() == static_cast<Eigen::Index>(data.d_dim()),
            "future deterministic terms must have one row per horizon");
    return given.topRows(n);
  }
  if (data.T() == 0) return MatrixXd::Ones(n, static_cast<Eigen::Index>(data.d_dim()));
  return data.d.row(data.d.rows() - 1).replicate(n, 1);
}

/// Design vector of future step `step` (0-based) given simulated rows of
/// `future` for earlier steps. Falls back to a zero presample when the
/// sample is empty.
inline VectorXd design(const Dataset& data, const MatrixXd& future, std::size_t step, const VectorXd& det) {
  if (data.T() > 0) return data.next_design(future, step, det);
  const auto N = static_cast<Eigen::Index>(data.N());
  const auto lag = static_cast<Eigen::Index>(data.p);
  VectorXd x = VectorXd::Zero(N * lag + det.size());
  for (Eigen::Index l = 1; l <= lag; ++l) {
    const auto idx = static_cast<Eigen::Index>(step) - l;
    if (idx >= 0) x.segment((l - 1) * N, N) = future.row(idx).transpose();
  }
  x.tail(det.size()) = det;
  return x;
}

}  // namespace detail

/// Log density of y under N(mean, B^{-1} diag(var) B^{-T}), jointly or for a
/// subset of variables.
inline double gaussian_structural_log_density(const VectorXd& y, const VectorXd& mean, const MatrixXd& Bm,
                                              const VectorXd& var, std::span<const std::size_t> variables = {}) {
  const auto N = y.size();
  if (variables.empty()) {
    Eigen::PartialPivLU<MatrixXd> lu(Bm);
    const double det = lu.determinant();
    if (!(std::abs(det) > 0.0)) throw NumericalError("predictive density: B is singular");
    const VectorXd u = Bm * (y - mean);
    double out = std::log(std::abs(det)) - 0.5 * static_cast<double>(N) * priors::kLogTwoPi;
    for (Eigen::Index n = 0; n < N; ++n) out -= 0.5 * std::log(var(n)) + 0.5 * u(n) * u(n) / var(n);
    return out;
  }
  const MatrixXd Binv = Bm.fullPivLu().inverse();
  const MatrixXd cov = Binv * var.asDiagonal() * Binv.transpose();
  const auto k = static_cast<Eigen::Index>(variables.size());
  MatrixXd sub(k, k);
  VectorXd e(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto vi = static_cast<Eigen::Index>(variables[static_cast<std::size_t>(i)]);
    require(vi < N, "variable index out of range");
    e(i) = y(vi) - mean(vi);
    for (Eigen::Index j = 0; j < k; ++j) sub(i, j) = cov(vi, static_cast<Eigen::Index>(variables[static_cast<std::size_t>(j)]));
  }
  Eigen::LLT<MatrixXd> llt(sub);
  if (llt.info() != Eigen::Success) throw NumericalError("predictive density: covariance not positive definite");
  const VectorXd z = llt.matrixL().solve(e);
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) logdet += std::log(llt.matrixL()(i, i));
  return -logdet - 0.5 * static_cast<double>(k) * priors::kLogTwoPi - 0.5 * z.squaredNorm();
}

struct PredictiveSample {
  MatrixXd path;                     // H x N simulated future observations
  std::vector<double> log_density;   // per requested horizon, NaN if not requested
};

/// One ancestral draw of the future given a parameter draw. The regime
/// starts from the draw's last in-sample regime and h from its last
/// in-sample value (h_0 = 0 and s_1 ~ pi0 for an empty sample). When
/// `realized` (H x N) is given, the log density of realized row h-1 is
/// evaluated for every horizon h in `horizons`, conditional on the simulated
/// path up to h-1; the regime at h is integrated out exactly.
inline PredictiveSample predictive_sample(const ParameterState& draw, const Dataset& data, std::size_t H, Rng& rng,
                                          const MatrixXd& realized = MatrixXd(),
                                          std::span<const std::size_t> horizons = {},
                                          std::span<const std::size_t> variables = {},
                                          const MatrixXd& future_det = MatrixXd()) {
  require(H >= 1, "horizon must be at least 1");
  const auto N = static_cast<Eigen::Index>(draw.N());
  const auto M = static_cast<Eigen::Index>(draw.M());
  require(static_cast<std::size_t>(N) == data.N(), "draw and data disagree on N");
  const MatrixXd det = detail::future_deterministic(data, H, future_det);
  std::vector<Eigen::PartialPivLU<MatrixXd>> lus;
  for (const auto& Bm : draw.B) lus.emplace_back(Bm);
  const bool has_sample = !draw.s.empty();
  int s_prev = has_sample ? draw.s.back() : -1;
  VectorXd h = (draw.h.cols() > 0) ? VectorXd(draw.h.col(draw.h.cols() - 1)) : VectorXd::Zero(N);
  PredictiveSample out;
  out.path.resize(static_cast<Eigen::Index>(H), N);
  out.log_density.assign(H, std::numeric_limits<double>::quiet_NaN());
  std::vector<bool> wanted(H, false);
  for (auto hz : horizons) {
    require(hz >= 1 && hz <= H, "requested horizon out of range");
    wanted[hz - 1] = true;
  }
  if (!horizons.empty()) require(realized.rows() >= static_cast<Eigen::Index>(H) && realized.cols() == N,
                                 "realized values must be H x N");
  VectorXd u(N);
  for (std::size_t step = 0; step < H; ++step) {
    const VectorXd x = detail::design(data, out.path, step, det.row(static_cast<Eigen::Index>(step)).transpose());
    const VectorXd mean = draw.A * x;
    for (Eigen::Index n = 0; n < N; ++n) h(n) = draw.rho(n) * h(n) + rng.normal();
    const RowVectorXd trans = s_prev < 0 ? RowVectorXd(draw.pi0.transpose()) : RowVectorXd(draw.P.row(s_prev));
    if (wanted[step]) {
      const VectorXd y = realized.row(static_cast<Eigen::Index>(step)).transpose();
      double mx = -std::numeric_limits<double>::infinity();
      std::vector<double> terms(static_cast<std::size_t>(M), -std::numeric_limits<double>::infinity());
      for (Eigen::Index m = 0; m < M; ++m) {
        if (!(trans(m) > 0.0)) continue;
        VectorXd var(N);
        for (Eigen::Index n = 0; n < N; ++n) var(n) = std::exp(draw.omega(n, m) * h(n));
        terms[static_cast<std::size_t>(m)] =
            std::log(trans(m)) +
            gaussian_structural_log_density(y, mean, draw.B[static_cast<std::size_t>(m)], var, variables);
        mx = std::max(mx, terms[static_cast<std::size_t>(m)]);
      }
      double acc = 0.0;
      if (std::isfinite(mx))
        for (double t : terms) acc += std::exp(t - mx);
      out.log_density[step] = std::isfinite(mx) ? mx + std::log(acc) : mx;
    }
    const int s_now = detail::pick(trans, rng);
    for (Eigen::Index n = 0; n < N; ++n) u(n) = std::exp(0.5 * draw.omega(n, s_now) * h(n)) * rng.normal();
    out.path.row(static_cast<Eigen::Index>(step)) = (mean + lus[static_cast<std::size_t>(s_now)].solve(u)).transpose();
    s_prev = s_now;
  }
  return out;
}

/// H x N simulated future path for one parameter draw.
inline MatrixXd predictive_draws(const ParameterState& draw, const Dataset& data, std::size_t H, Rng& rng,
                                 const MatrixXd& future_det = MatrixXd()) {
  return predictive_sample(draw, data, H, rng, MatrixXd(), {}, {}, future_det).path;
}

/// log of the average of per-draw predictive densities, in log space.
inline double log_predictive_score(std::span<const double> log_densities) {
  require(!log_densities.empty(), "log score needs at least one draw");
  double mx = -std::numeric_limits<double>::infinity();
  for (double l : log_densities) {
    require(!std::isnan(l), "log density is NaN");
    mx = std::max(mx, l);
  }
  if (!std::isfinite(mx)) throw NumericalError("predictive density is zero for every draw");
  double acc = 0.0;
  for (double l : log_densities) acc += std::exp(l - mx);
  return mx + std::log(acc / static_cast<double>(log_densities.size()));
}

/// Root mean squared error per variable over aligned forecast/realization pairs.
inline VectorXd rmsfe(std::span<const VectorXd> forecasts, std::span<const VectorXd> realized) {
  require(!forecasts.empty(), "rmsfe needs at least one forecast");
  require(forecasts.size() == realized.size(), "forecasts and realizations are misaligned");
  const auto N = forecasts.front().size();
  VectorXd acc = VectorXd::Zero(N);
  for (std::size_t i = 0; i < forecasts.size(); ++i) {
    require(forecasts[i].size() == N && realized[i].size() == N, "forecast vectors differ in length");
    acc += (forecasts[i] - realized[i]).cwiseAbs2();
  }
  return (acc / static_cast<double>(forecasts.size())).cwiseSqrt();
}

// ---------------------------------------------------------------------------
// Draw-level evaluation
// ---------------------------------------------------------------------------

struct OriginResult {
  std::vector<std::size_t> horizons;
  std::vector<double> log_score;     // per horizon
  std::vector<VectorXd> point;       // posterior-mean forecast per horizon
};

/// Scores the realized future of one origin over all stored draws.
/// `data` is the estimation sample; `realized` holds the next Hmax rows.
inline OriginResult evaluate_origin(const DrawStore& store, const Dataset& data, const MatrixXd& realized,
                                    const MatrixXd& future_det, std::span<const std::size_t> horizons,
                                    std::span<const std::size_t> variables, Rng& rng) {
  require(!horizons.empty(), "no horizons requested");
  require(store.draws() > 0, "store has no draws");
  const std::size_t H = *std::max_element(horizons.begin(), horizons.end());
  std::vector<std::vector<double>> dens(horizons.size());
  OriginResult res;
  res.horizons.assign(horizons.begin(), horizons.end());
  res.point.assign(horizons.size(), VectorXd::Zero(static_cast<Eigen::Index>(data.N())));
  for (std::size_t i = 0; i < store.draws(); ++i) {
    const ParameterState st = store.state(i);
    const auto ps = predictive_sample(st, data, H, rng, realized, horizons, variables, future_det);
    for (std::size_t j = 0; j < horizons.size(); ++j) {
      dens[j].push_back(ps.log_density[horizons[j] - 1]);
      res.point[j] += ps.path.row(static_cast<Eigen::Index>(horizons[j] - 1)).transpose();
    }
  }
  for (std::size_t j = 0; j < horizons.size(); ++j) {
    res.log_score.push_back(log_predictive_score(dens[j]));
    res.point[j] /= static_cast<double>(store.draws());
  }
  return res;
}

// ---------------------------------------------------------------------------
// Rolling-origin harness
// ---------------------------------------------------------------------------

struct ModelSpec {
  std::string name;
  ModelConfig config;
};

struct EvaluationOptions {
  std::vector<std::size_t> horizons{1};
  std::vector<std::size_t> variables;  // empty: joint density over all variables
  std::size_t draws = 0;               // override of chain draws per origin (0 keeps the config)
  std::size_t burnin = 0;              // override of burn-in when draws is set
  std::uint64_t seed = 1;              // predictive simulation seed
  std::size_t threads = 1;
};

struct ForecastRecord {
  std::string model;
  std::size_t origin = 0;  // number of effective observations in the estimation sample
  std::string origin_date;
  std::size_t horizon = 0;
  double log_score = 0.0;
  double relative_log_score = 0.0;  // minus the benchmark's score at the same origin and horizon
  VectorXd point;
  VectorXd realized;
  VectorXd squared_error;
};

struct ForecastReport {
  std::vector<std::string> names;   // variables
  std::vector<std::string> models;  // first entry is the benchmark
  std::vector<ForecastRecord> records;

  std::vector<const ForecastRecord*> select(const std::string& model, std::size_t horizon) const {
    std::vector<const ForecastRecord*> out;
    for (const auto& r : records)
      if (r.model == model && r.horizon == horizon) out.push_back(&r);
    return out;
  }

  double mean_log_score(const std::string& model, std::size_t horizon) const {
    const auto rs = select(model, horizon);
    require(!rs.empty(), "no records for model '" + model + "'");
    double acc = 0.0;
    for (auto* r : rs) acc += r->log_score;
    return acc / static_cast<double>(rs.size());
  }

  VectorXd rmsfe_of(const std::string& model, std::size_t horizon) const {
    const auto rs = select(model, horizon);
    std::vector<VectorXd> f, y;
    for (auto* r : rs) {
      f.push_back(r->point);
      y.push_back(r->realized);
    }
    return rmsfe(f, y);
  }

  /// Average log-score difference and per-variable RMSFE ratio of `model`
  /// against `benchmark`.
  std::pair<double, VectorXd> relative(const std::string& model, const std::string& benchmark,
                                       std::size_t horizon) const {
    return {mean_log_score(model, horizon) - mean_log_score(benchmark, horizon),
            rmsfe_of(model, horizon).cwiseQuotient(rmsfe_of(benchmark, horizon))};
  }
};

/// Effective-sample sizes whose last date lies in the inclusive date range.
inline std::vector<std::size_t> origins_in_range(const Dataset& data, const std::string& first, const std::string& last) {
  require(!data.dates.empty(), "dataset has no dates");
  std::vector<std::size_t> out;
  for (std::size_t t = 0; t < data.T(); ++t)
    if (data.dates[t] >= first && data.dates[t] <= last) out.push_back(t + 1);
  require(!out.empty(), "no origins between " + first + " and " + last);
  return out;
}

/// Re-estimates every model on the sample up to each origin and scores the
/// realized values that follow. Origins count effective observations.
inline ForecastReport rolling_evaluation(const std::vector<ModelSpec>& models, const Dataset& data,
                                         const std::vector<std::size_t>& origins, const EvaluationOptions& opts) {
  require(!models.empty(), "no models to evaluate");
  require(!origins.empty(), "no forecast origins");
  require(!opts.horizons.empty(), "no horizons requested");
  const std::size_t H = *std::max_element(opts.horizons.begin(), opts.horizons.end());
  for (auto o : origins) {
    require(o >= 1 && o + H <= data.T(), "origin " + std::to_string(o) + " leaves no room for the horizon");
  }
  ForecastReport rep;
  rep.names = data.names;
  for (const auto& m : models) rep.models.push_back(m.name);
  const std::size_t jobs = models.size() * origins.size();
  std::vector<OriginResult> results(jobs);
  std::vector<std::exception_ptr> errors(jobs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs; j = next++) {
      try {
        const auto& spec = models[j / origins.size()];
        const std::size_t oi = j % origins.size();
        const std::size_t T0 = origins[oi];
        ModelConfig cfg = spec.config;
        if (opts.draws > 0) {
          cfg.chain.draws = opts.draws;
          cfg.chain.burnin = opts.burnin;
          cfg.chain.thin = 1;
        }
        const Dataset sample = data.head(T0);
        const DrawStore store = run_chain(cfg, sample);
        const auto n = static_cast<Eigen::Index>(H);
        const MatrixXd realized = data.y.middleRows(static_cast<Eigen::Index>(T0), n);
        const MatrixXd det = data.d.middleRows(static_cast<Eigen::Index>(T0), n);
        Rng rng = Rng::for_stream(opts.seed, oi);
        results[j] = evaluate_origin(store, sample, realized, det, opts.horizons, opts.variables, rng);
      } catch (...) {
        errors[j] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(opts.threads, jobs));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  for (std::size_t j = 0; j < jobs; ++j) {
    const std::size_t mi = j / origins.size(), oi = j % origins.size();
    const std::size_t T0 = origins[oi];
    for (std::size_t k = 0; k < opts.horizons.size(); ++k) {
      ForecastRecord r;
      r.model = models[mi].name;
      r.origin = T0;
      r.origin_date = data.dates.empty() ? std::to_string(T0) : data.dates[T0 - 1];
      r.horizon = opts.horizons[k];
      r.log_score = results[j].log_score[k];
      r.relative_log_score = r.log_score - results[oi].log_score[k];
      r.point = results[j].point[k];
      r.realized = data.y.row(static_cast<Eigen::Index>(T0 + r.horizon - 1)).transpose();
      r.squared_error = (r.point - r.realized).cwiseAbs2();
      rep.records.push_back(std::move(r));
    }
  }
  return rep;
}

/// Columns: model,origin_date,horizon,log_score,relative_log_score, then
/// se_<variable> per variable.
inline void write_report_csv(std::ostream& out, const ForecastReport& rep) {
  out.precision(10);
  out << "model,origin_date,horizon,log_score,relative_log_score";
  for (const auto& n : rep.names) out << ",se_" << n;
  out << '\n';
  for (const auto& r : rep.records) {
    out << r.model << ',' << r.origin_date << ',' << r.horizon << ',' << r.log_score << ',' << r.relative_log_score;
    for (Eigen::Index j = 0; j < r.squared_error.size(); ++j) out << ',' << r.squared_error(j);
    out << '\n';
  }
}

/// Columns: model,horizon,mean_log_score,relative_log_score, then
/// rmsfe_<variable> and rmsfe_ratio_<variable> per variable.
inline void write_summary_csv(std::ostream& out, const ForecastReport& rep) {
  out.precision(10);
  out << "model,horizon,mean_log_score,relative_log_score";
  for (const auto& n : rep.names) out << ",rmsfe_" << n;
  for (const auto& n : rep.names) out << ",rmsfe_ratio_" << n;
  out << '\n';
  std::vector<std::size_t> horizons;
  for (const auto& r : rep.records)
    if (std::find(horizons.begin(), horizons.end(), r.horizon) == horizons.end()) horizons.push_back(r.horizon);
  for (const auto& m : rep.models)
    for (auto h : horizons) {
      const auto [dls, ratio] = rep.relative(m, rep.models.front(), h);
      out << m << ',' << h << ',' << rep.mean_log_score(m, h) << ',' << dls;
      const VectorXd r = rep.rmsfe_of(m, h);
      for (Eigen::Index j = 0; j < r.size(); ++j) out << ',' << r(j);
      for (Eigen::Index j = 0; j < ratio.size(); ++j) out << ',' << ratio(j);
      out << '\n';
    }
}

}  // namespace tvisvar::forecast
