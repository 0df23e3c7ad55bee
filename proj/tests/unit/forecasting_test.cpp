#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "tvisvar/analytics.hpp"
#include "tvisvar/forecasting.hpp"
#include "tvisvar/testing/oracles.hpp"

using namespace tvisvar;

namespace {

constexpr double kLogPhi0 = -0.918938533204672742;

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

Dataset noise_series(std::size_t T, std::size_t N, std::uint64_t seed) {
  Rng rng(seed);
  MatrixXd series(static_cast<Eigen::Index>(T + 1), static_cast<Eigen::Index>(N));
  for (Eigen::Index i = 0; i < series.size(); ++i) series.data()[i] = rng.normal();
  return Dataset::from_series(series, 1);
}

// homoskedastic single-regime draw with p = 1 and an intercept
ParameterState fixed_draw(const MatrixXd& A, const MatrixXd& B, std::size_t T) {
  const auto N = A.rows();
  ParameterState st;
  st.A = A;
  st.B = {B};
  st.kappa.assign(static_cast<std::size_t>(N), std::vector<int>(1, 0));
  st.s.assign(T, 0);
  st.P = MatrixXd::Ones(1, 1);
  st.pi0 = VectorXd::Ones(1);
  st.h = MatrixXd::Zero(N, static_cast<Eigen::Index>(T));
  st.omega = MatrixXd::Zero(N, 1);
  st.rho = VectorXd::Constant(N, 0.5);
  st.sigma2_omega = VectorXd::Ones(N);
  return st;
}

DrawStore two_regime_store() {
  ModelConfig cfg = default_config(2, 1, 2, {{1, {{"full", "**"}, {"excl", "0*"}}}});
  cfg.chain.burnin = 50;
  cfg.chain.draws = 40;
  return run_chain(cfg, noise_series(60, 2, 5));
}

}  // namespace

TEST(Predictive, OneStepGaussianMoments) {
  const Dataset ds = noise_series(30, 2, 1);
  const MatrixXd A = (MatrixXd(2, 3) << 0.5, 0.1, 1.0, -0.2, 0.3, -0.5).finished();
  const MatrixXd B = (MatrixXd(2, 2) << 1.0, 0.0, -0.8, 2.0).finished();
  const ParameterState st = fixed_draw(A, B, ds.T());
  VectorXd x(3);
  x << ds.y(ds.T() - 1, 0), ds.y(ds.T() - 1, 1), 1.0;
  const VectorXd mean = A * x;
  const MatrixXd Binv = B.inverse();
  const MatrixXd cov = Binv * Binv.transpose();
  Rng rng(2);
  const int n = 100000;
  MatrixXd draws(n, 2);
  for (int i = 0; i < n; ++i) draws.row(i) = forecast::predictive_draws(st, ds, 1, rng).row(0);
  const VectorXd m = draws.colwise().mean();
  const MatrixXd c = draws.rowwise() - m.transpose();
  const MatrixXd S = c.transpose() * c / (n - 1.0);
  for (Eigen::Index j = 0; j < 2; ++j) EXPECT_NEAR(m(j), mean(j), 3.0 * std::sqrt(cov(j, j) / n));
  for (Eigen::Index i = 0; i < 2; ++i)
    for (Eigen::Index j = 0; j < 2; ++j)
      EXPECT_NEAR(S(i, j), cov(i, j), 3.0 * std::sqrt((cov(i, i) * cov(j, j) + cov(i, j) * cov(i, j)) / n));
}

TEST(Predictive, WhiteNoiseAtEveryHorizon) {
  const Dataset ds = noise_series(10, 2, 3);
  const ParameterState st = fixed_draw(MatrixXd::Zero(2, 3), MatrixXd::Identity(2, 2), ds.T());
  Rng rng(4);
  const int n = 20000;
  std::vector<std::vector<double>> by_h(4);
  double cross = 0.0;
  for (int i = 0; i < n; ++i) {
    const MatrixXd path = forecast::predictive_draws(st, ds, 4, rng);
    for (int h = 0; h < 4; ++h) by_h[static_cast<std::size_t>(h)].push_back(path(h, 0));
    cross += path(0, 0) * path(1, 0);
  }
  for (const auto& v : by_h) EXPECT_GT(oracle::ks_test(v, normal_cdf).p_value, 1e-3);
  EXPECT_NEAR(cross / n, 0.0, 4.0 / std::sqrt(static_cast<double>(n)));
}

TEST(Predictive, IdentityTransitionKeepsRegime) {
  const Dataset ds = noise_series(10, 1, 3);
  ParameterState st = fixed_draw(MatrixXd::Zero(1, 2), MatrixXd::Identity(1, 1), ds.T());
  st.B.push_back(MatrixXd::Constant(1, 1, 1e4));
  st.kappa[0].push_back(0);
  st.omega = MatrixXd::Zero(1, 2);
  st.P = MatrixXd::Identity(2, 2);
  st.pi0 = VectorXd::Constant(2, 0.5);
  st.s.back() = 1;
  Rng rng(6);
  for (int i = 0; i < 200; ++i) EXPECT_LT(forecast::predictive_draws(st, ds, 12, rng).cwiseAbs().maxCoeff(), 1e-2);
}

TEST(Predictive, EmptySampleStartsFromInitialProbabilities) {
  const Dataset ds = gibbs::empty_dataset(1, 1, 1);
  ParameterState st = fixed_draw(MatrixXd::Zero(1, 2), MatrixXd::Identity(1, 1), 0);
  Rng rng(1);
  const auto ps = forecast::predictive_sample(st, ds, 2, rng, MatrixXd::Zero(2, 1), std::vector<std::size_t>{1});
  EXPECT_NEAR(ps.log_density[0], kLogPhi0, 1e-12);
  EXPECT_TRUE(std::isnan(ps.log_density[1]));
}

TEST(LogScore, StandardNormalAtZero) {
  const Dataset ds = noise_series(10, 1, 7);
  const ParameterState st = fixed_draw(MatrixXd::Zero(1, 2), MatrixXd::Identity(1, 1), ds.T());
  Rng rng(1);
  const std::vector<std::size_t> hz{1};
  const auto ps = forecast::predictive_sample(st, ds, 1, rng, MatrixXd::Zero(1, 1), hz);
  EXPECT_NEAR(ps.log_density[0], kLogPhi0, 1e-14);
  const std::vector<double> one{ps.log_density[0]};
  EXPECT_NEAR(forecast::log_predictive_score(one), -0.91894, 5e-6);
  const std::vector<double> two{ps.log_density[0], ps.log_density[0]};
  EXPECT_NEAR(forecast::log_predictive_score(two), forecast::log_predictive_score(one), 1e-15);
}

TEST(LogScore, TwoDrawMixture) {
  const Dataset ds = noise_series(10, 1, 7);
  const ParameterState a = fixed_draw(MatrixXd::Zero(1, 2), MatrixXd::Identity(1, 1), ds.T());
  const ParameterState b = fixed_draw((MatrixXd(1, 2) << 0.0, 1.0).finished(), MatrixXd::Identity(1, 1), ds.T());
  Rng rng(1);
  const std::vector<std::size_t> hz{1};
  const MatrixXd y0 = MatrixXd::Zero(1, 1);
  const std::vector<double> dens{forecast::predictive_sample(a, ds, 1, rng, y0, hz).log_density[0],
                                 forecast::predictive_sample(b, ds, 1, rng, y0, hz).log_density[0]};
  const double phi0 = 1.0 / std::sqrt(2.0 * std::numbers::pi), phi1 = phi0 * std::exp(-0.5);
  EXPECT_NEAR(forecast::log_predictive_score(dens), std::log(0.5 * (phi0 + phi1)), 1e-14);
  EXPECT_NEAR(forecast::log_predictive_score(dens), -1.13801, 5e-6);
}

TEST(LogScore, Errors) {
  EXPECT_THROW(forecast::log_predictive_score(std::vector<double>{}), ValidationError);
  const double ninf = -std::numeric_limits<double>::infinity();
  EXPECT_THROW(forecast::log_predictive_score(std::vector<double>{ninf, ninf}), NumericalError);
  EXPECT_THROW(forecast::log_predictive_score(std::vector<double>{std::nan("")}), ValidationError);
  EXPECT_NEAR(forecast::log_predictive_score(std::vector<double>{-1000.0, -1000.0}), -1000.0, 1e-12);
}

TEST(LogScore, RegimeMixtureIsExactAtOneStep) {
  const Dataset ds = noise_series(10, 1, 3);
  ParameterState st = fixed_draw(MatrixXd::Zero(1, 2), MatrixXd::Identity(1, 1), ds.T());
  st.B.push_back(MatrixXd::Constant(1, 1, 0.5));
  st.kappa[0].push_back(0);
  st.omega = MatrixXd::Zero(1, 2);
  st.P = (MatrixXd(2, 2) << 0.9, 0.1, 0.3, 0.7).finished();
  st.pi0 = VectorXd::Constant(2, 0.5);
  st.s.back() = 1;
  Rng rng(1);
  const std::vector<std::size_t> hz{1};
  const double y = 0.7;
  const auto ps = forecast::predictive_sample(st, ds, 1, rng, MatrixXd::Constant(1, 1, y), hz);
  // N(0,1) with weight 0.3, N(0,4) with weight 0.7
  const double expect = std::log(0.3 * std::exp(-0.5 * y * y) / std::sqrt(2.0 * std::numbers::pi) +
                                 0.7 * std::exp(-0.125 * y * y) / std::sqrt(8.0 * std::numbers::pi));
  EXPECT_NEAR(ps.log_density[0], expect, 1e-13);
}

TEST(LogScore, MarginalSubsetMatchesDenseGaussian) {
  const MatrixXd B = (MatrixXd(3, 3) << 1.0, 0.2, 0.0, -0.5, 1.5, 0.3, 0.1, 0.0, 0.8).finished();
  const VectorXd var = (VectorXd(3) << 0.5, 2.0, 1.2).finished();
  const VectorXd y = (VectorXd(3) << 0.3, -1.0, 0.4).finished();
  const VectorXd mean = (VectorXd(3) << 0.1, 0.2, -0.3).finished();
  const MatrixXd Binv = B.inverse();
  const MatrixXd cov = Binv * var.asDiagonal() * Binv.transpose();
  auto dense = [&](const std::vector<Eigen::Index>& idx) {
    const auto k = static_cast<Eigen::Index>(idx.size());
    MatrixXd S(k, k);
    VectorXd e(k);
    for (Eigen::Index i = 0; i < k; ++i) {
      e(i) = y(idx[static_cast<std::size_t>(i)]) - mean(idx[static_cast<std::size_t>(i)]);
      for (Eigen::Index j = 0; j < k; ++j) S(i, j) = cov(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    return -0.5 * k * std::log(2.0 * std::numbers::pi) - 0.5 * std::log(S.determinant()) -
           0.5 * e.dot(S.inverse() * e);
  };
  EXPECT_NEAR(forecast::gaussian_structural_log_density(y, mean, B, var), dense({0, 1, 2}), 1e-12);
  const std::vector<std::size_t> sub{2, 0};
  EXPECT_NEAR(forecast::gaussian_structural_log_density(y, mean, B, var, sub), dense({2, 0}), 1e-12);
  EXPECT_THROW(forecast::gaussian_structural_log_density(y, mean, MatrixXd::Zero(3, 3), var), NumericalError);
}

TEST(LogScore, InvariantUnderNormalization) {
  const DrawStore store = two_regime_store();
  const Dataset ds = noise_series(60, 2, 5);
  const MatrixXd realized = (MatrixXd(1, 2) << 0.4, -0.9).finished();
  const std::vector<std::size_t> hz{1};
  auto score = [&](const DrawStore& s) {
    Rng rng(3);
    return forecast::evaluate_origin(s, ds, realized, MatrixXd::Ones(1, 1), hz, {}, rng).log_score[0];
  };
  const double base = score(store);
  EXPECT_NEAR(score(analytics::normalize_draws(store, analytics::Policy::SignDiag).store), base, 1e-12);
  EXPECT_NEAR(score(analytics::normalize_draws(store, analytics::Policy::Labels).store), base, 1e-12);
}

TEST(Rmsfe, Examples) {
  const std::vector<VectorXd> f{VectorXd::Constant(1, 1.0), VectorXd::Constant(1, 2.0)};
  const std::vector<VectorXd> y{VectorXd::Constant(1, 1.0), VectorXd::Constant(1, 4.0)};
  EXPECT_NEAR(forecast::rmsfe(f, y)(0), std::sqrt(2.0), 1e-15);
  EXPECT_EQ(forecast::rmsfe(f, f)(0), 0.0);
  EXPECT_THROW(forecast::rmsfe(f, std::vector<VectorXd>{y[0]}), ValidationError);
  EXPECT_THROW(forecast::rmsfe(std::vector<VectorXd>{}, std::vector<VectorXd>{}), ValidationError);
}

TEST(Rolling, ReportStructureAndRelativeMetrics) {
  Dataset ds = noise_series(40, 2, 11);
  ds.names = {"a", "b"};
  ds.dates = monthly_dates(2000, 1, ds.T());
  ModelConfig small = default_config(2, 1, 1, {});
  ModelConfig two = default_config(2, 1, 2, {{1, {{"full", "**"}, {"excl", "0*"}}}});
  forecast::EvaluationOptions opts;
  opts.horizons = {1, 3};
  opts.draws = 30;
  opts.burnin = 10;
  const std::vector<std::size_t> origins{30, 35};
  const auto rep = forecast::rolling_evaluation({{"bench", small}, {"tvi", two}}, ds, origins, opts);
  ASSERT_EQ(rep.records.size(), 8u);
  const auto b1 = rep.select("bench", 1);
  ASSERT_EQ(b1.size(), 2u);
  EXPECT_EQ(b1[0]->origin_date, ds.dates[29]);
  EXPECT_EQ(b1[0]->realized, VectorXd(ds.y.row(30).transpose()));
  EXPECT_EQ(rep.select("tvi", 3)[1]->realized, VectorXd(ds.y.row(37).transpose()));
  for (auto* r : b1) EXPECT_EQ(r->relative_log_score, 0.0);
  const auto [self_d, self_r] = rep.relative("bench", "bench", 1);
  EXPECT_EQ(self_d, 0.0);
  EXPECT_EQ(self_r, VectorXd::Ones(2));
  const auto [d, r] = rep.relative("tvi", "bench", 3);
  const auto [d2, r2] = rep.relative("bench", "tvi", 3);
  EXPECT_NEAR(d, -d2, 1e-15);
  EXPECT_NEAR((r.cwiseProduct(r2) - VectorXd::Ones(2)).norm(), 0.0, 1e-14);

  opts.threads = 3;
  const auto par = forecast::rolling_evaluation({{"bench", small}, {"tvi", two}}, ds, origins, opts);
  for (std::size_t i = 0; i < rep.records.size(); ++i) EXPECT_EQ(par.records[i].log_score, rep.records[i].log_score);

  std::ostringstream out, sum;
  forecast::write_report_csv(out, rep);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "model,origin_date,horizon,log_score,relative_log_score,se_a,se_b");
  forecast::write_summary_csv(sum, rep);
  const std::string s = sum.str();
  EXPECT_EQ(s.substr(0, s.find('\n')),
            "model,horizon,mean_log_score,relative_log_score,rmsfe_a,rmsfe_b,rmsfe_ratio_a,rmsfe_ratio_b");
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 5);
}

TEST(Rolling, OriginValidation) {
  Dataset ds = noise_series(20, 2, 1);
  ds.dates = monthly_dates(2000, 1, ds.T());
  forecast::EvaluationOptions opts;
  opts.horizons = {2};
  EXPECT_THROW(forecast::rolling_evaluation({{"m", default_config(2, 1, 1, {})}}, ds, {19}, opts), ValidationError);
  EXPECT_EQ(forecast::origins_in_range(ds, ds.dates[4], ds.dates[6]), (std::vector<std::size_t>{5, 6, 7}));
  EXPECT_THROW(forecast::origins_in_range(ds, "2100-01", "2100-02"), ValidationError);
}
