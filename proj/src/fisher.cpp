#include "spintrack/fisher.hpp"

#include "spintrack/error.hpp"
#include "spintrack/parallel.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace spintrack::fisher {

void FisherConfig::validate() const {
  if (m <= d) {
    std::ostringstream os;
    os << "fisher: need more trajectories than bins (m = " << m << ", d = " << d << ")";
    throw ConfigError(os.str());
  }
  if (!(ridge >= 0.0)) throw ConfigError("fisher: ridge must be non-negative");
  for (auto b : target_bins) {
    if (b >= d) throw ConfigError("fisher: target bin outside the record");
  }
}

Vector partial_mean(const Matrix& records, const Matrix& signals, std::size_t i) {
  if (records.rows() != signals.rows()) throw DomainError("partial_mean: row counts differ");
  if (static_cast<Eigen::Index>(i) >= signals.cols()) throw DomainError("partial_mean: bin out of range");
  const Matrix bi = signals.col(static_cast<Eigen::Index>(i));
  const double vb = column_covariance(bi)(0, 0);
  if (!(vb > 0.0)) throw DomainError("partial_mean: signal column has zero variance");
  return column_covariance(records, bi).col(0) / vb;
}

CovInverse regularized_inverse(Matrix sigma, double ridge) {
  const auto d = sigma.rows();
  if (d == 0 || sigma.cols() != d) throw DomainError("regularized_inverse: need a square non-empty matrix");
  sigma = 0.5 * (sigma + sigma.transpose()).eval();
  CovInverse out;
  auto condition_of = [](const Matrix& s) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(s, Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues().minCoeff();
    const double lmax = es.eigenvalues().maxCoeff();
    return lmin > 0.0 ? lmax / lmin : std::numeric_limits<double>::infinity();
  };
  out.condition = condition_of(sigma);
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success || !(out.condition < 1e12)) {
    const double add = ridge * sigma.diagonal().mean();
    if (!(add > 0.0)) {
      std::ostringstream os;
      os << "covariance is singular (condition number " << out.condition << ") and no ridge is allowed";
      throw NumericalError(os.str());
    }
    sigma.diagonal().array() += add;
    out.ridge_used = add;
    out.condition = condition_of(sigma);
    llt.compute(sigma);
    if (llt.info() != Eigen::Success || !std::isfinite(out.condition)) {
      std::ostringstream os;
      os << "covariance stays singular after ridge " << add << " (condition number " << out.condition << ")";
      throw NumericalError(os.str());
    }
  }
  Matrix inv = llt.solve(Matrix::Identity(d, d));
  out.inverse = 0.5 * (inv + inv.transpose());
  return out;
}

CovInverse conditional_cov_inverse(const Matrix& records, const Matrix& signals, const Vector& partial,
                                   std::size_t i, double ridge) {
  if (records.rows() != signals.rows()) throw DomainError("conditional_cov_inverse: row counts differ");
  if (partial.size() != records.cols()) throw DomainError("conditional_cov_inverse: partial has the wrong length");
  if (records.rows() <= records.cols()) throw DomainError("conditional_cov_inverse: need m > d");
  if (static_cast<Eigen::Index>(i) >= signals.cols()) throw DomainError("conditional_cov_inverse: bin out of range");
  const Matrix residual = records - signals.col(static_cast<Eigen::Index>(i)) * partial.transpose();
  return regularized_inverse(column_covariance(residual), ridge);
}

double fisher_information(const Vector& partial, const Matrix& sigma_inv) {
  if (sigma_inv.rows() != partial.size() || sigma_inv.cols() != partial.size()) {
    throw DomainError("fisher_information: dimension mismatch");
  }
  const double f = partial.dot(sigma_inv * partial);
  if (f < 0.0) {
    if (f >= -1e-12) return 0.0;
    std::ostringstream os;
    os << "fisher_information: quadratic form is negative (" << f << ")";
    throw NumericalError(os.str());
  }
  return f;
}

double cramer_rao(double f, double repetitions) {
  if (!(f > 0.0)) throw DomainError("cramer_rao: Fisher information must be positive");
  if (!(repetitions > 0.0)) throw DomainError("cramer_rao: repetitions must be positive");
  return 1.0 / (repetitions * f);
}

FisherResult fisher_analysis(const Matrix& records, const Matrix& signals, const FisherConfig& cfg, unsigned threads) {
  cfg.validate();
  if (static_cast<std::size_t>(records.rows()) != cfg.m || static_cast<std::size_t>(records.cols()) != cfg.d ||
      signals.rows() != records.rows() || signals.cols() != records.cols()) {
    throw DomainError("fisher_analysis: batch shape does not match the config");
  }
  FisherResult out;
  out.m = cfg.m;
  out.bins = cfg.target_bins;
  if (out.bins.empty()) {
    for (std::size_t i = 0; i < cfg.d; ++i) out.bins.push_back(i);
  }
  const std::size_t nb = out.bins.size();
  out.f.resize(nb);
  out.crb.resize(nb);
  out.crb_single.resize(nb);
  out.condition.resize(nb);
  out.ridge_used.resize(nb);

  const Matrix cyy = column_covariance(records);
  const Matrix cyb = column_covariance(records, signals);
  const Vector cbb = (signals.rowwise() - signals.colwise().mean()).colwise().squaredNorm().transpose() /
                     static_cast<double>(cfg.m - 1);
  parallel_for(nb, threads, [&](std::size_t k) {
    const auto i = static_cast<Eigen::Index>(out.bins[k]);
    const double vb = cbb(i);
    if (!(vb > 0.0)) throw DomainError("fisher_analysis: signal column has zero variance");
    const Vector c = cyb.col(i);
    const Vector partial = c / vb;
    const auto inv = regularized_inverse(cyy - c * c.transpose() / vb, cfg.ridge);
    out.f[k] = fisher_information(partial, inv.inverse);
    out.condition[k] = inv.condition;
    out.ridge_used[k] = inv.ridge_used;
    const double inf = std::numeric_limits<double>::infinity();
    out.crb[k] = out.f[k] > 0.0 ? cramer_rao(out.f[k], static_cast<double>(cfg.m)) : inf;
    out.crb_single[k] = out.f[k] > 0.0 ? cramer_rao(out.f[k], 1.0) : inf;
  });
  return out;
}

}  // namespace spintrack::fisher
