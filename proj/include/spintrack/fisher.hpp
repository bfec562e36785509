#pragma once

#include "spintrack/stats.hpp"

#include <cstddef>
#include <vector>

namespace spintrack::fisher {

struct FisherConfig {
  std::size_t m = 20000;  // trajectories
  std::size_t d = 200;    // record length
  double ridge = 1e-10;   // relative to the mean diagonal
  std::vector<std::size_t> target_bins;  // empty: every bin
  /// Throws ConfigError unless m > d, ridge >= 0 and every target bin < d.
  void validate() const;
};

struct FisherResult {
  std::size_t m = 0;
  std::vector<std::size_t> bins;
  std::vector<double> f;           // 1/pT^2
  std::vector<double> crb;         // 1 / (m f), pT^2
  std::vector<double> crb_single;  // 1 / f
  std::vector<double> condition;   // of the residual covariance
  std::vector<double> ridge_used;  // absolute ridge added to the diagonal (0 if none)
};

/// Cov(Y[:, n], B[:, i]) / Var(B[:, i]) for every column n. Throws DomainError if Var(B[:, i]) == 0.
Vector partial_mean(const Matrix& records, const Matrix& signals, std::size_t i);

struct CovInverse {
  Matrix inverse;
  double condition = 0.0;
  double ridge_used = 0.0;
};

/// Inverse of the covariance of Y - B[:, i] partial^T, symmetrized.
/// A ridge of ridge * mean(diag) is added only when the Cholesky factorization
/// fails or the condition number exceeds 1e12; NumericalError if that does not help.
CovInverse conditional_cov_inverse(const Matrix& records, const Matrix& signals, const Vector& partial,
                                   std::size_t i, double ridge = 1e-10);

/// Same, from an already formed covariance matrix.
CovInverse regularized_inverse(Matrix sigma, double ridge = 1e-10);

/// partial^T sigma_inv partial. Values in [-1e-12, 0) are returned as 0; more negative ones throw NumericalError.
double fisher_information(const Vector& partial, const Matrix& sigma_inv);

/// 1 / (repetitions f). Throws DomainError unless f > 0 and repetitions > 0.
double cramer_rao(double f, double repetitions);

/// Fisher information per target bin. The record covariance is formed once and
/// each bin's residual covariance follows by the rank-one downdate
/// C_YY - c c^T / Var(B_i), c = Cov(Y, B_i). Bins run in parallel.
FisherResult fisher_analysis(const Matrix& records, const Matrix& signals, const FisherConfig& cfg,
                             unsigned threads = 1);

}  // namespace spintrack::fisher
