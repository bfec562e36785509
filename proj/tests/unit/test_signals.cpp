#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "spintrack/error.hpp"
#include "spintrack/rng.hpp"
#include "spintrack/signals.hpp"

#include <cmath>
#include <algorithm>
#include <limits>
#include <numbers>

using namespace spintrack;
using namespace spintrack::signals;

TEST_CASE("OU degenerate cases") {
  OUOptions opt;
  opt.initial = 0.0;
  const auto t = gen_ou(OUParams{0.0, 0.0}, 100, 0.025, 1, opt);
  for (double v : t.values) CHECK(v == 0.0);
  CHECK(OUParams{0.0, 1.0}.v_ss() == std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(OUParams::from_stationary(-1.0, 1.0), DomainError);
}

TEST_CASE("OU stationary statistics at the default parameters") {
  const auto p = OUParams::from_stationary(0.268, 6.12);
  CHECK(p.sigma_ou * p.sigma_ou == doctest::Approx(3.28).epsilon(1e-3));
  CHECK(p.v_ss() == doctest::Approx(6.12));
  // Long trace at a coarse step so 1e6 samples span many correlation times.
  const double tau = 0.5;
  const auto t = gen_ou(p, 1000000, tau, 17);
  CHECK(variance(t.values) == doctest::Approx(6.12).epsilon(0.02));
  CHECK(autocorrelation(t.values, 1) == doctest::Approx(std::exp(-0.268 * tau)).epsilon(0.02));
}

TEST_CASE("OU Euler scheme agrees with the exact step at small tau") {
  const auto p = OUParams::from_stationary(0.268, 6.12);
  OUOptions opt;
  opt.method = OUMethod::kEuler;
  const auto t = gen_ou(p, 400000, 0.05, 3, opt);
  // Euler stationary variance: sigma^2 tau / (1 - (1 - beta tau)^2).
  const double a = 1.0 - 0.268 * 0.05;
  CHECK(variance(t.values) == doctest::Approx(p.sigma_ou * p.sigma_ou * 0.05 / (1 - a * a)).epsilon(0.05));
}

TEST_CASE("OU batch covariance follows the exponential kernel") {
  const auto p = OUParams::from_stationary(0.268, 6.12);
  const auto batch = generate_batch(p, 10000, 20, 0.25, 5, 2);
  const Matrix c = signal_covariance(batch);
  for (int i : {0, 5, 10}) {
    for (int j : {0, 1, 4, 9}) {
      const double expect = 6.12 * std::exp(-0.268 * 0.25 * j);
      CHECK(c(i, i + j) == doctest::Approx(expect).epsilon(0.05));
    }
  }
}

TEST_CASE("batches do not depend on the thread count") {
  const auto p = OUParams::from_stationary(0.268, 6.12);
  const auto a = to_matrix(generate_batch(p, 37, 50, 0.025, 9, 1));
  const auto b = to_matrix(generate_batch(p, 37, 50, 0.025, 9, 3));
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("dOU") {
  const auto ou = OUParams::from_stationary(0.402, 5.82);
  DOUParams same{ou, OUParams::from_stationary(0.160, 5.82), 0.0};
  const auto d = gen_dou(same, 200, 0.025, 4);
  const auto o = gen_ou(ou, 200, 0.025, derive_seed(4, 0));
  for (std::size_t i = 0; i < 200; ++i) CHECK(d.values[i] == o.values[i]);

  DOUParams dou{ou, OUParams::from_stationary(0.160, 5.82), 2.0 * std::numbers::pi * 0.134};
  const auto batch = generate_batch(dou, 4000, 400, 0.025, 8, 2);
  const Matrix c = signal_covariance(batch);
  double avg = 0.0;
  for (int i = 0; i < 400; ++i) avg += c(i, i) / 400.0;
  CHECK(avg == doctest::Approx(5.82).epsilon(0.05));
  // cos^2 + sin^2 = 1: no systematic drift between the first and last quarter.
  double early = 0.0, late = 0.0;
  for (int i = 0; i < 100; ++i) early += c(i, i) / 100.0, late += c(300 + i, 300 + i) / 100.0;
  CHECK(early == doctest::Approx(late).epsilon(0.08));
}

TEST_CASE("white levels") {
  const auto z = gen_white(WhiteParams{0.375, 0.0}, 100, 0.025, 1);
  for (double v : z.values) CHECK(v == 0.0);

  const auto batch = generate_batch(WhiteParams{0.25, 1.0}, 10000, 40, 0.025, 2, 2);
  const Matrix c = signal_covariance(batch);
  const double bound = 3.0 / std::sqrt(10000.0);
  CHECK(c(0, 9) == doctest::Approx(1.0).epsilon(0.05));  // same block of 10 samples
  CHECK(std::abs(c(0, 10)) < bound);                       // next block
  CHECK(std::abs(c(5, 25)) < bound);
  CHECK(c(12, 17) == doctest::Approx(1.0).epsilon(0.05));

  WhiteParams u{0.025, 2.0, LevelLaw::kUniform};
  const auto tu = gen_white(u, 200000, 0.025, 3);
  CHECK(variance(tu.values) == doctest::Approx(4.0).epsilon(0.02));
  CHECK(*std::max_element(tu.values.begin(), tu.values.end()) <= 2.0 * std::sqrt(3.0));
  CHECK_THROWS_AS(gen_white(WhiteParams{0.01, 1.0}, 10, 0.025, 1), DomainError);
}

TEST_CASE("pulses") {
  PulseParams none;
  none.n_pulses = 0;
  const auto z = gen_pulses(none, 0.025, 1);
  for (double v : z.trace.values) CHECK(v == 0.0);

  PulseParams p;
  CHECK(p.width == doctest::Approx(0.375));
  const auto t = gen_pulses(p, 0.025, 7);
  REQUIRE(t.starts.size() == 10);
  const std::size_t w = 15;
  std::size_t on = 0;
  for (double v : t.trace.values) on += v != 0.0;
  CHECK(on == 10 * w);
  for (std::size_t j = 1; j < t.starts.size(); ++j) CHECK(t.starts[j] >= t.starts[j - 1] + w);
  for (double a : t.amplitudes) CHECK((a >= 0.0 && a < 10.0));

  PulseParams packed;
  packed.n_pulses = 4;
  packed.width = 0.25;
  packed.duration = 1.0;
  const auto full = gen_pulses(packed, 0.025, 2);
  for (double v : full.trace.values) CHECK(v != 0.0);
  packed.n_pulses = 5;
  CHECK_THROWS_AS(gen_pulses(packed, 0.025, 2), DomainError);
}

TEST_CASE("HMM") {
  auto id = HMMParams::make_default(4, 1.0, 3.0, 0.1);
  id.initial_state = 2;
  const auto c = gen_hmm(id, 500, 0.025, 1);
  for (double v : c.trace.values) CHECK(v == id.levels[2]);

  auto uni = HMMParams::make_default(10, 0.1, 3.0, 0.025);
  const auto u = gen_hmm(uni, 100000, 0.025, 2);
  std::vector<double> counts(10, 0.0);
  for (auto s : u.states) counts[s] += 1.0;
  for (double k : counts) CHECK(std::abs(k - 10000.0) < 3.0 * std::sqrt(10000.0 * 0.9));

  auto two = HMMParams::make_default(2, 0.9, 1.0, 0.025);
  const auto d = gen_hmm(two, 400000, 0.025, 3);
  std::size_t runs = 1;
  for (std::size_t i = 1; i < d.states.size(); ++i) runs += d.states[i] != d.states[i - 1];
  CHECK(static_cast<double>(d.states.size()) / runs == doctest::Approx(10.0).epsilon(0.05));

  HMMParams bad = two;
  bad.transition(0, 0) = 0.5;
  CHECK_THROWS_AS(gen_hmm(bad, 10, 0.025, 1), DomainError);
}

TEST_CASE("covariance of identical traces and batch size") {
  std::vector<SignalTrace> same(5, constant_signal(10, 0.025, 2.0));
  CHECK(signal_covariance(same).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(signal_covariance({constant_signal(10, 0.025, 1.0)}), DomainError);
}
