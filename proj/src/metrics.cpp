#include "spintrack/metrics.hpp"

#include "spintrack/error.hpp"
#include "spintrack/stats.hpp"

#include <cmath>
#include <complex>
#include <numbers>

namespace spintrack::metrics {

double squeezing_db(double v_cond, double v_ref) {
  if (!(v_cond > 0.0) || !(v_ref > 0.0)) throw DomainError("squeezing_db: variances must be positive");
  return 10.0 * std::log10(v_cond / v_ref);
}

double db_to_ratio(double db) { return std::pow(10.0, db / 10.0); }

double wineland(double xi_sq, double c_sq) {
  if (!(xi_sq > 0.0) || !(c_sq > 0.0)) throw DomainError("wineland: inputs must be positive");
  return xi_sq / c_sq;
}

void SqlParams::validate() const {
  for (double v : {eps1, eps2, factor}) {
    if (!(v > 0.0 && v <= 1.0)) throw DomainError("SqlParams: corrections must lie in (0, 1]");
  }
}

double sql_from_variances(double var_thermal, double var_light, const SqlParams& params) {
  params.validate();
  if (var_thermal < var_light) throw DomainError("sql_from_variances: thermal variance below light noise");
  return params.factor * params.eps_tot() * (var_thermal - var_light);
}

double sensitivity(double std_b_pt, double t_meas_s) {
  if (!(std_b_pt > 0.0) || !(t_meas_s > 0.0)) throw DomainError("sensitivity: inputs must be positive");
  return std_b_pt * 1e3 * std::sqrt(t_meas_s);
}

double mse(std::span<const double> est, std::span<const double> truth, std::optional<std::span<const bool>> mask) {
  if (est.size() != truth.size()) throw DomainError("mse: lengths differ");
  if (mask && mask->size() != est.size()) throw DomainError("mse: mask length differs");
  CompensatedSum acc;
  std::size_t count = 0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    if (mask && !(*mask)[i]) continue;
    const double e = est[i] - truth[i];
    acc.add(e * e);
    ++count;
  }
  if (count == 0) throw DomainError("mse: no bins selected");
  return acc.value() / static_cast<double>(count);
}

double mse(const signals::SignalTrace& est, const signals::SignalTrace& truth) {
  return mse(est.values, truth.values);
}

double PickupCoil::area() const { return 0.25 * std::numbers::pi * diameter * diameter; }

double PickupCoil::load_factor() const { return std::abs(1.0 + std::complex<double>(resistance, reactance) / r_m); }

void PickupCoil::validate() const {
  if (!(n_turns > 0 && diameter > 0 && inductance >= 0 && resistance >= 0 && reactance >= 0 && r_m > 0)) {
    throw DomainError("PickupCoil: turns, diameter and R_m must be positive, impedances non-negative");
  }
}

double rf_from_emf(double u_sa, double omega, const PickupCoil& coil) {
  coil.validate();
  if (!(omega > 0.0)) throw DomainError("rf_from_emf: omega must be positive");
  return std::sqrt(2.0) * coil.load_factor() * std::abs(u_sa) / (coil.n_turns * coil.area() * omega);
}

double rf_from_power(double p_set_dbm) { return 1.428e-7 * std::pow(10.0, p_set_dbm / 20.0); }

RearrangementBudget rearrangement_budget(double ln_per_point, double kappa_sq, double tau, double v_atom) {
  if (!(ln_per_point > 0.0) || !(kappa_sq >= 0.0) || !(tau > 0.0) || !(v_atom >= 0.0)) {
    throw DomainError("rearrangement_budget: inputs must be positive");
  }
  RearrangementBudget b;
  b.an = kappa_sq * tau * v_atom / 0.5 * ln_per_point;
  b.mse_corr = 2.0 * ln_per_point + b.an;
  b.mse_uncorr = 2.0 * ln_per_point + 2.0 * b.an;
  b.strong_standard_factor = b.mse_corr / b.mse_uncorr;
  return b;
}

double strong_standard(double mse_rearranged, const RearrangementBudget& budget) {
  return mse_rearranged * budget.strong_standard_factor;
}

}  // namespace spintrack::metrics
