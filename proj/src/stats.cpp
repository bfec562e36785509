#include "spintrack/stats.hpp"

#include "spintrack/error.hpp"

namespace spintrack {

double mean(std::span<const double> x) {
  if (x.empty()) throw DomainError("mean of empty sample");
  CompensatedSum s;
  for (double v : x) s.add(v);
  return s.value() / static_cast<double>(x.size());
}

double covariance(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DomainError("covariance: length mismatch");
  if (x.size() < 2) throw DomainError("covariance needs at least two samples");
  const double mx = mean(x);
  const double my = mean(y);
  CompensatedSum s;
  for (std::size_t i = 0; i < x.size(); ++i) s.add((x[i] - mx) * (y[i] - my));
  return s.value() / static_cast<double>(x.size() - 1);
}

double variance(std::span<const double> x) { return covariance(x, x); }

double autocorrelation(std::span<const double> x, std::size_t lag) {
  if (x.size() <= lag + 1) throw DomainError("autocorrelation: series shorter than lag");
  const double m = mean(x);
  CompensatedSum num, den;
  for (std::size_t i = 0; i < x.size(); ++i) {
    den.add((x[i] - m) * (x[i] - m));
    if (i + lag < x.size()) num.add((x[i] - m) * (x[i + lag] - m));
  }
  return num.value() / den.value();
}

Vector column_mean(const Matrix& a) {
  if (a.rows() == 0) throw DomainError("column_mean: no rows");
  Vector m(a.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    CompensatedSum s;
    for (Eigen::Index i = 0; i < a.rows(); ++i) s.add(a(i, j));
    m(j) = s.value() / static_cast<double>(a.rows());
  }
  return m;
}

Matrix column_covariance(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw DomainError("column_covariance: row mismatch");
  if (a.rows() < 2) throw DomainError("column_covariance needs at least two rows");
  const Matrix ac = a.rowwise() - column_mean(a).transpose();
  const Matrix bc = b.rowwise() - column_mean(b).transpose();
  // Eigen's GEMM blocking is fixed for a given build and shape, so this is
  // deterministic; it does not use a thread pool unless OpenMP is enabled.
  return (ac.transpose() * bc) / static_cast<double>(a.rows() - 1);
}

Matrix column_covariance(const Matrix& a) { return column_covariance(a, a); }

}  // namespace spintrack
