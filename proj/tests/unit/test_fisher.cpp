#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles/linear_gaussian.hpp"
#include "spintrack/error.hpp"
#include "spintrack/fisher.hpp"
#include "spintrack/rng.hpp"
#include "spintrack/signals.hpp"
#include "spintrack/trajectory.hpp"

#include <cmath>

using namespace spintrack;
using namespace spintrack::fisher;

namespace {

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng, double sd = 1.0) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = sd * rng.normal();
  return m;
}

}  // namespace

TEST_CASE("quadratic form basics") {
  Rng rng(1);
  const Matrix a = gaussian(40, 5, rng);
  const Matrix inv = regularized_inverse(a.transpose() * a / 40.0).inverse;
  CHECK(fisher_information(Vector::Zero(5), inv) == 0.0);
  const Vector p = Vector::LinSpaced(5, 0.2, 1.0);
  CHECK(fisher_information(3.0 * p, inv) == doctest::Approx(9.0 * fisher_information(p, inv)).epsilon(1e-12));
  CHECK_THROWS_AS(fisher_information(p, Matrix::Identity(4, 4)), DomainError);
  CHECK_THROWS_AS(fisher_information(p, -Matrix::Identity(5, 5)), NumericalError);
}

TEST_CASE("Cramer-Rao bound") {
  CHECK(cramer_rao(1.0, 1.0) == 1.0);
  CHECK(cramer_rao(2.5, 200.0) == doctest::Approx(0.5 * cramer_rao(2.5, 100.0)));
  CHECK_THROWS_AS(cramer_rao(0.0, 1.0), DomainError);
  CHECK_THROWS_AS(cramer_rao(1.0, 0.0), DomainError);
}

TEST_CASE("regularized inverse") {
  Rng rng(2);
  const double v = 2.0;
  const Matrix y = gaussian(20000, 10, rng, std::sqrt(v));
  const Matrix b = gaussian(20000, 1, rng);
  const auto ci = conditional_cov_inverse(y, b, Vector::Zero(10), 0);
  CHECK((ci.inverse - Matrix::Identity(10, 10) / v).cwiseAbs().maxCoeff() < 0.03);
  CHECK(ci.ridge_used == 0.0);

  const Matrix s = column_covariance(y);
  const auto inv = regularized_inverse(s);
  CHECK((s * inv.inverse - Matrix::Identity(10, 10)).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(inv.condition >= 1.0);

  Matrix singular = Matrix::Ones(4, 4);
  const auto fixed = regularized_inverse(singular, 1e-6);
  CHECK(fixed.ridge_used == doctest::Approx(1e-6));
  CHECK(std::isfinite(fixed.condition));
  CHECK_THROWS_AS(regularized_inverse(singular, 0.0), NumericalError);
  try {
    regularized_inverse(singular, 0.0);
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("condition number") != std::string::npos);
  }
}

TEST_CASE("partial mean of a constructed linear model") {
  Rng rng(3);
  const Eigen::Index m = 20000;
  const Matrix b = gaussian(m, 3, rng, 1.5);
  Matrix y = gaussian(m, 6, rng, 0.7);
  for (Eigen::Index k = 0; k < m; ++k) y.row(k).array() += 0.9 * b(k, 1);
  const Vector pm = partial_mean(y, b, 1);
  for (Eigen::Index n = 0; n < 6; ++n) CHECK(pm(n) == doctest::Approx(0.9).epsilon(0.03));
  const Vector none = partial_mean(y, b, 0);
  for (Eigen::Index n = 0; n < 6; ++n) CHECK(std::abs(none(n)) < 3.5 * std::sqrt(0.49 + 0.81 * 2.25) / 1.5 / std::sqrt(static_cast<double>(m)));
  Matrix flat = b;
  flat.col(2).setConstant(1.0);
  CHECK_THROWS_AS(partial_mean(y, flat, 2), DomainError);
}

TEST_CASE("partial mean vanishes without coupling and before the field acts") {
  traj::TrajectoryConfig cfg;
  cfg.kappa_z_sq = 0.0;
  const auto sigs = signals::generate_batch(signals::WhiteParams{0.25, 1.0}, 10000, 40, cfg.tau, 4, 2);
  auto batch = traj::simulate_batch(sigs, cfg, 5, 2);
  const double bound = 3.0 * std::sqrt(0.5 / 10000.0);
  Vector pm = partial_mean(batch.records, batch.signals, 20);
  for (Eigen::Index n = 0; n < 40; ++n) CHECK(std::abs(pm(n)) < bound);

  cfg = {};
  batch = traj::simulate_batch(sigs, cfg, 6, 2);
  pm = partial_mean(batch.records, batch.signals, 20);  // block covers bins 20..29
  const double sd = std::sqrt(0.5 + cfg.kappa_z_sq * cfg.tau * cfg.v0);
  for (Eigen::Index n = 0; n < 20; ++n) CHECK(std::abs(pm(n)) < 3.5 * sd / 100.0);
  CHECK(pm(30) > 3.5 * sd / 100.0);
}

TEST_CASE("scalar linear-Gaussian case") {
  Rng rng(7);
  const Eigen::Index m = 100000;
  const double a = 0.8, sigma = 0.5;
  const Matrix b = gaussian(m, 1, rng, 2.0);
  Matrix y(m, 1);
  for (Eigen::Index k = 0; k < m; ++k) y(k, 0) = a * b(k, 0) + sigma * rng.normal();
  FisherConfig cfg;
  cfg.m = static_cast<std::size_t>(m);
  cfg.d = 1;
  const auto res = fisher_analysis(y, b, cfg);
  CHECK(res.f[0] == doctest::Approx(a * a / (sigma * sigma)).epsilon(0.05));
  CHECK(res.crb_single[0] == doctest::Approx(1.0 / res.f[0]));
}

TEST_CASE("Fisher information is invariant under orthogonal recoding of the record") {
  Rng rng(8);
  const Eigen::Index m = 5000, d = 8;
  const Matrix b = gaussian(m, d, rng);
  Matrix y = gaussian(m, d, rng);
  for (Eigen::Index k = 0; k < m; ++k)
    for (Eigen::Index j = 1; j < d; ++j) y(k, j) += 0.4 * b(k, j - 1) + 0.2 * b(k, j);
  const Eigen::HouseholderQR<Matrix> qr(gaussian(d, d, rng));
  const Matrix q = qr.householderQ();
  FisherConfig cfg;
  cfg.m = static_cast<std::size_t>(m);
  cfg.d = static_cast<std::size_t>(d);
  const auto plain = fisher_analysis(y, b, cfg);
  const auto rotated = fisher_analysis(y * q, b, cfg);
  for (std::size_t i = 0; i < plain.f.size(); ++i) CHECK(rotated.f[i] == doctest::Approx(plain.f[i]).epsilon(1e-9));
}

TEST_CASE("rank-one downdate agrees with the explicit residual covariance") {
  traj::TrajectoryConfig cfg;
  cfg.tau = 0.1;
  const auto ou = signals::OUParams::from_stationary(0.268, 6.12);
  const auto sigs = signals::generate_batch(ou, 3000, 30, cfg.tau, 9);
  const auto batch = traj::simulate_batch(sigs, cfg, 10);
  FisherConfig fc;
  fc.m = 3000;
  fc.d = 30;
  fc.target_bins = {3, 15, 27};
  const auto res = fisher_analysis(batch.records, batch.signals, fc, 3);
  for (std::size_t k = 0; k < fc.target_bins.size(); ++k) {
    const auto i = fc.target_bins[k];
    const Vector pm = partial_mean(batch.records, batch.signals, i);
    const auto inv = conditional_cov_inverse(batch.records, batch.signals, pm, i);
    CHECK(res.f[k] == doctest::Approx(fisher_information(pm, inv.inverse)).epsilon(1e-8));
  }
  const auto serial = fisher_analysis(batch.records, batch.signals, fc, 1);
  CHECK(serial.f == res.f);
}

TEST_CASE("posterior precision equals prior precision plus Fisher information") {
  oracle::LinearGaussian lg;
  lg.tau = 0.1;
  lg.g_b = 2.23;
  const std::size_t d = 100;
  const auto j = oracle::joint_covariance(lg, d);
  const Eigen::VectorXd post = oracle::posterior_variance(j);
  for (Eigen::Index i : {10, 50, 90}) {
    const double vb = j.bb(i, i);
    const Vector c = j.by.row(i).transpose();
    const Vector partial = c / vb;
    const auto inv = regularized_inverse(j.yy - c * c.transpose() / vb);
    const double f = fisher_information(partial, inv.inverse);
    CHECK(1.0 / post(i) == doctest::Approx(1.0 / vb + f).epsilon(1e-9));
  }
}

TEST_CASE("desk-scale OU batch diagnostics") {
  traj::TrajectoryConfig cfg;
  cfg.tau = 0.1;
  const auto ou = signals::OUParams::from_stationary(0.268, 6.12);
  const auto sigs = signals::generate_batch(ou, 10000, 200, cfg.tau, 11, 2);
  const auto batch = traj::simulate_batch(sigs, cfg, 12, 2);
  FisherConfig fc;
  fc.m = 10000;
  fc.d = 200;
  fc.target_bins = {100};
  const auto res = fisher_analysis(batch.records, batch.signals, fc);
  CHECK(std::isfinite(res.condition[0]));
  CHECK(res.condition[0] > 1.0);
  MESSAGE("condition number at bin 100: " << res.condition[0]);
}

TEST_CASE("config validation") {
  FisherConfig fc;
  fc.m = 100;
  fc.d = 100;
  CHECK_THROWS_AS(fc.validate(), ConfigError);
  fc.m = 200;
  fc.target_bins = {100};
  CHECK_THROWS_AS(fc.validate(), ConfigError);
  fc.target_bins = {};
  fc.ridge = -1.0;
  CHECK_THROWS_AS(fc.validate(), ConfigError);
}
