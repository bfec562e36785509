#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>

namespace spintrack {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Neumaier-compensated accumulator. Summation order is fixed by the caller,
/// so results are reproducible to the last bit.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

double mean(std::span<const double> x);
/// Unbiased (n-1) variance.
double variance(std::span<const double> x);
/// Unbiased (n-1) covariance of paired samples.
double covariance(std::span<const double> x, std::span<const double> y);
/// Sample autocorrelation at `lag` using the full-series mean and variance.
double autocorrelation(std::span<const double> x, std::size_t lag);

/// Unbiased covariance between the columns of `a` and the columns of `b`
/// (rows are samples). Result is a.cols() x b.cols().
Matrix column_covariance(const Matrix& a, const Matrix& b);
/// Unbiased covariance matrix of the columns of `a`.
Matrix column_covariance(const Matrix& a);
Vector column_mean(const Matrix& a);

inline std::span<const double> as_span(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

}  // namespace spintrack
