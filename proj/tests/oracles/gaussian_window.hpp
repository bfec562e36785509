#pragma once

// Exact second moments of the segment statistics for a zero-field record of
// the discrete generator. Built directly from the stationary covariance
//   Cov(Y_i, Y_j) = c^2 v_stat a^|i-j| + 1/2 delta_ij
// so it shares no code with the simulator or the pipeline.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>

namespace oracle {

struct WindowMoments {
  double var_m2 = 0.0;
  double cond1 = 0.0;  // Var(m2 | m1)
  double cond2 = 0.0;  // Var(m2 | m1, m3)
  double light = 0.0;  // 1 / (2 n_v)
};

struct DiscreteSystem {
  double tau, kappa_sq, gamma, v0, eta = 1.0;
  double c2() const { return eta * kappa_sq * tau; }
  double a() const { return 1.0 - gamma * tau; }
  double v_stat() const { return 2.0 * gamma * v0 * tau / (1.0 - a() * a()); }
};

// ns/ng/nv in samples; edge-anchored exponential weights at rate gamma.
inline WindowMoments window_moments(const DiscreteSystem& s, std::size_t ns, std::size_t ng, std::size_t nv) {
  const std::size_t n = 2 * ns + 2 * ng + nv;
  Eigen::MatrixXd cov(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double lag = std::abs(static_cast<double>(i) - static_cast<double>(j));
      cov(i, j) = s.c2() * s.v_stat() * std::pow(s.a(), lag) + (i == j ? 0.5 : 0.0);
    }
  }
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, 3);
  for (std::size_t k = 0; k < ns; ++k) {
    w(k, 0) = std::exp(-s.gamma * s.tau * static_cast<double>(ns - 1 - k));
    w(ns + ng + nv + ng + k, 2) = std::exp(-s.gamma * s.tau * static_cast<double>(k));
  }
  for (std::size_t k = 0; k < nv; ++k) w(ns + ng + k, 1) = 1.0 / static_cast<double>(nv);
  const Eigen::MatrixXd m = w.transpose() * cov * w;
  WindowMoments out;
  out.var_m2 = m(1, 1);
  out.cond1 = m(1, 1) - m(1, 0) * m(1, 0) / m(0, 0);
  Eigen::Matrix2d r;
  r << m(0, 0), m(0, 2), m(2, 0), m(2, 2);
  const Eigen::Vector2d c(m(1, 0), m(1, 2));
  out.cond2 = m(1, 1) - c.dot(r.inverse() * c);
  out.light = 0.5 / static_cast<double>(nv);
  return out;
}

// Normalized dB the pipeline targets: (Var(m2|.) - LN) / (Var_css(m2) - LN), css = same system at v0 = 1/2.
inline double normalized_db(double cond, const DiscreteSystem& s, std::size_t ns, std::size_t ng, std::size_t nv) {
  DiscreteSystem css = s;
  css.v0 = 0.5;
  const auto ref = window_moments(css, ns, ng, nv);
  return 10.0 * std::log10((cond - ref.light) / (ref.var_m2 - ref.light));
}

// Steady prior variance of the discrete filter from the closed-form root of
//   V = a^2 V / (1 + 2 c^2 V) + q.
inline double discrete_prior_root(const DiscreteSystem& s) {
  const double a2 = s.a() * s.a();
  const double q = 2.0 * s.gamma * s.v0 * s.tau;
  const double k = 2.0 * s.c2();
  // k V^2 + (1 - a^2 - q k) V - q = 0
  const double b = 1.0 - a2 - q * k;
  return (-b + std::sqrt(b * b + 4.0 * k * q)) / (2.0 * k);
}

}  // namespace oracle
