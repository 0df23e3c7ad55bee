#pragma once

// Forward simulation of the model: regimes, log-volatilities, structural
// shocks and observations.

#include <cmath>
#include <complex>
#include <fstream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "tvisvar/core_model.hpp"
#include "tvisvar/errors.hpp"
#include "tvisvar/random.hpp"
#include "tvisvar/regime_sampler.hpp"

namespace tvisvar::sim {

/// Np x Np companion matrix of the lag coefficients of A (N x k).
inline MatrixXd companion_matrix(const MatrixXd& A, std::size_t p) {
  const auto N = A.rows();
  const auto lag = static_cast<Eigen::Index>(p);
  require(A.cols() >= N * lag, "A has fewer columns than N * p");
  MatrixXd F = MatrixXd::Zero(N * lag, N * lag);
  F.topRows(N) = A.leftCols(N * lag);
  if (lag > 1) F.bottomLeftCorner(N * (lag - 1), N * (lag - 1)).setIdentity();
  return F;
}

inline double spectral_radius(const MatrixXd& F) {
  if (F.size() == 0) return 0.0;
  Eigen::EigenSolver<MatrixXd> es(F, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

struct Truth {
  std::size_t p = 1;
  MatrixXd A;               // N x (N p + d_dim)
  std::vector<MatrixXd> B;  // per regime
  MatrixXd P;
  VectorXd pi0;
  MatrixXd omega;           // N x M
  VectorXd rho;             // N
  std::vector<std::string> names;

  std::size_t N() const { return static_cast<std::size_t>(A.rows()); }
  std::size_t M() const { return B.size(); }
  std::size_t d_dim() const { return static_cast<std::size_t>(A.cols()) - N() * p; }

  void validate() const {
    const auto N = A.rows();
    require(N >= 1 && p >= 1, "truth needs N >= 1 and p >= 1");
    require(A.cols() > N * static_cast<Eigen::Index>(p), "A must include deterministic columns");
    require(!B.empty(), "truth needs at least one regime");
    for (const auto& Bm : B) {
      require(Bm.rows() == N && Bm.cols() == N, "B_m must be N x N");
      require(Bm.allFinite() && std::abs(Bm.determinant()) > 0.0, "B_m must be nonsingular");
    }
    regime::require_stochastic(P, pi0);
    require(P.rows() == static_cast<Eigen::Index>(B.size()), "P must be M x M");
    require(omega.rows() == N && omega.cols() == static_cast<Eigen::Index>(B.size()), "omega must be N x M");
    require(rho.size() == N && (rho.array().abs() < 1.0).all(), "rho must have |rho| < 1");
  }
};

struct Simulation {
  Dataset data;
  MatrixXd series;          // (p + T) x N, presample included
  std::vector<int> s;       // T
  MatrixXd h;               // N x T
  MatrixXd u;               // N x T structural shocks
  double spectral_radius = 0.0;
  bool explosive = false;
};

/// Markov path s_1 ~ pi0, s_t ~ P(s_{t-1}, .).
inline std::vector<int> simulate_regimes(const MatrixXd& P, const VectorXd& pi0, std::size_t T, Rng& rng) {
  std::vector<int> s(T);
  auto pick = [&](const RowVectorXd& w) {
    double u = rng.uniform();
    for (Eigen::Index m = 0; m < w.size(); ++m) {
      if (u < w(m)) return static_cast<int>(m);
      u -= w(m);
    }
    for (Eigen::Index m = w.size() - 1; m >= 0; --m)
      if (w(m) > 0.0) return static_cast<int>(m);
    return 0;
  };
  for (std::size_t t = 0; t < T; ++t)
    s[t] = pick(t == 0 ? RowVectorXd(pi0.transpose()) : RowVectorXd(P.row(s[t - 1])));
  return s;
}

/// AR(1) paths from h_0 = 0 with unit innovations, N x T.
inline MatrixXd simulate_log_volatilities(const VectorXd& rho, std::size_t T, Rng& rng) {
  MatrixXd h(rho.size(), static_cast<Eigen::Index>(T));
  for (Eigen::Index n = 0; n < rho.size(); ++n) {
    double prev = 0.0;
    for (Eigen::Index t = 0; t < h.cols(); ++t) {
      prev = rho(n) * prev + rng.normal();
      h(n, t) = prev;
    }
  }
  return h;
}

/// Observations given latent paths: y_t = A x_t + B_{s_t}^{-1} u_t with
/// u_{n,t} ~ N(0, exp(omega_n(s_t) h_{n,t})). `presample` holds the p rows
/// before the sample (most recent last); `deterministic` is T x d_dim.
/// Returns the (p + T) x N series and fills `shocks` (N x T).
inline MatrixXd simulate_observations(const MatrixXd& A, std::size_t p, std::span<const MatrixXd> B,
                                      std::span<const int> s, const MatrixXd& h, const MatrixXd& omega,
                                      const MatrixXd& presample, const MatrixXd& deterministic,
                                      Rng& rng, MatrixXd* shocks = nullptr) {
  const auto N = A.rows();
  const auto lag = static_cast<Eigen::Index>(p);
  const auto T = static_cast<Eigen::Index>(s.size());
  require(presample.rows() == lag && presample.cols() == N, "presample must be p x N");
  require(deterministic.rows() == T, "one deterministic row per period");
  std::vector<Eigen::PartialPivLU<MatrixXd>> lus;
  for (const auto& Bm : B) lus.emplace_back(Bm);
  MatrixXd series(lag + T, N);
  series.topRows(lag) = presample;
  if (shocks) shocks->resize(N, T);
  VectorXd x(A.cols());
  VectorXd u(N);
  for (Eigen::Index t = 0; t < T; ++t) {
    const auto row = lag + t;
    for (Eigen::Index l = 1; l <= lag; ++l) x.segment((l - 1) * N, N) = series.row(row - l).transpose();
    x.tail(deterministic.cols()) = deterministic.row(t).transpose();
    const auto m = static_cast<Eigen::Index>(s[static_cast<std::size_t>(t)]);
    for (Eigen::Index n = 0; n < N; ++n) u(n) = std::exp(0.5 * omega(n, m) * h(n, t)) * rng.normal();
    if (shocks) shocks->col(t) = u;
    series.row(row) = (A * x + lus[static_cast<std::size_t>(m)].solve(u)).transpose();
  }
  return series;
}

/// Simulates the model with an intercept as the only deterministic term.
/// The presample is zero and the first `burn` simulated periods are
/// discarded; s and h run through the burn-in.
inline Simulation generate_dgp(const Truth& truth, std::size_t T, Rng& rng, std::size_t burn = 100) {
  truth.validate();
  require(truth.d_dim() == 1, "generate_dgp supports an intercept as the only deterministic term");
  const auto N = static_cast<Eigen::Index>(truth.N());
  const auto lag = static_cast<Eigen::Index>(truth.p);
  const std::size_t total = burn + truth.p + T;
  Simulation sim;
  sim.spectral_radius = spectral_radius(companion_matrix(truth.A, truth.p));
  sim.explosive = sim.spectral_radius >= 1.0;
  const auto s_all = simulate_regimes(truth.P, truth.pi0, total, rng);
  const MatrixXd h_all = simulate_log_volatilities(truth.rho, total, rng);
  MatrixXd u_all;
  const MatrixXd full = simulate_observations(truth.A, truth.p, truth.B, s_all, h_all, truth.omega,
                                              MatrixXd::Zero(lag, N),
                                              MatrixXd::Ones(static_cast<Eigen::Index>(total), 1), rng, &u_all);
  // full has p + total rows; keep the last p + T
  const auto keep = lag + static_cast<Eigen::Index>(T);
  sim.series = full.bottomRows(keep);
  const auto first = static_cast<std::size_t>(total - T);
  sim.s.assign(s_all.begin() + static_cast<std::ptrdiff_t>(first), s_all.end());
  sim.h = h_all.rightCols(static_cast<Eigen::Index>(T));
  sim.u = u_all.rightCols(static_cast<Eigen::Index>(T));
  auto names = truth.names;
  if (names.empty())
    for (Eigen::Index n = 0; n < N; ++n) names.push_back("y" + std::to_string(n + 1));
  sim.data = Dataset::from_series(sim.series, truth.p, MatrixXd(), names,
                                  monthly_dates(2000, 1, static_cast<std::size_t>(keep)));
  return sim;
}

namespace detail {

inline MatrixXd json_matrix(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw ValidationError("'" + what + "' must be a nonempty matrix");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  MatrixXd out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (!j[static_cast<std::size_t>(i)].is_array() ||
        static_cast<Eigen::Index>(j[static_cast<std::size_t>(i)].size()) != cols)
      throw ValidationError("'" + what + "' has ragged rows");
    for (Eigen::Index c = 0; c < cols; ++c)
      out(i, c) = j[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)].get<double>();
  }
  return out;
}

inline VectorXd json_vector(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw ValidationError("'" + what + "' must be a nonempty array");
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

}  // namespace detail

/// Truth from JSON: {"p", "A", "B": [B_1, ...], "P", "pi0", "omega", "rho", "names"?}.
/// Omitted P/pi0 default to a single regime; omitted omega to zeros; omitted rho to 0.5.
inline Truth parse_truth(const nlohmann::json& j) {
  try {
    Truth tr;
    tr.p = j.value("p", std::size_t{1});
    tr.A = detail::json_matrix(j.at("A"), "A");
    for (const auto& b : j.at("B")) tr.B.push_back(detail::json_matrix(b, "B"));
    const auto N = tr.A.rows();
    const auto M = static_cast<Eigen::Index>(tr.B.size());
    tr.P = j.contains("P") ? detail::json_matrix(j["P"], "P") : MatrixXd(MatrixXd::Identity(M, M));
    tr.pi0 = j.contains("pi0") ? detail::json_vector(j["pi0"], "pi0")
                               : VectorXd(VectorXd::Constant(M, 1.0 / static_cast<double>(M)));
    tr.omega = j.contains("omega") ? detail::json_matrix(j["omega"], "omega") : MatrixXd(MatrixXd::Zero(N, M));
    tr.rho = j.contains("rho") ? detail::json_vector(j["rho"], "rho") : VectorXd(VectorXd::Constant(N, 0.5));
    if (j.contains("names")) tr.names = j["names"].get<std::vector<std::string>>();
    tr.validate();
    return tr;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("invalid truth specification: ") + e.what());
  }
}

inline Truth load_truth_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open truth file '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("truth file '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_truth(j);
}

/// Latent record: date, regime (1-based), h_n, u_n per period.
inline void write_latent_csv(std::ostream& out, const Simulation& sim) {
  const auto N = sim.h.rows();
  out << "date,regime";
  for (Eigen::Index n = 0; n < N; ++n) out << ",h_" << sim.data.names[static_cast<std::size_t>(n)];
  for (Eigen::Index n = 0; n < N; ++n) out << ",u_" << sim.data.names[static_cast<std::size_t>(n)];
  out << '\n';
  out.precision(17);
  for (std::size_t t = 0; t < sim.s.size(); ++t) {
    out << (t < sim.data.dates.size() ? sim.data.dates[t] : std::to_string(t + 1)) << ',' << sim.s[t] + 1;
    for (Eigen::Index n = 0; n < N; ++n) out << ',' << sim.h(n, static_cast<Eigen::Index>(t));
    for (Eigen::Index n = 0; n < N; ++n) out << ',' << sim.u(n, static_cast<Eigen::Index>(t));
    out << '\n';
  }
}

}  // namespace tvisvar::sim
