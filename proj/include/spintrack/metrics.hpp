#pragma once

#include "spintrack/signals.hpp"

#include <optional>
#include <span>
#include <vector>

namespace spintrack::metrics {

/// 10 log10(v_cond / v_ref).
double squeezing_db(double v_cond, double v_ref);
double db_to_ratio(double db);

/// Metrological squeezing xi^2 / C^2.
double wineland(double xi_sq, double c_sq);

struct SqlParams {
  double eps1 = 0.98;   // linewidth correction
  double eps2 = 0.96;   // F = 1 population correction
  double factor = 0.8;  // thermal to coherent-state noise
  double eps_tot() const { return eps1 * eps2; }
  void validate() const;
};

/// factor * eps_tot * (var_thermal - var_light). DomainError if var_thermal < var_light.
double sql_from_variances(double var_thermal, double var_light, const SqlParams& params = {});

/// std_b * sqrt(t_meas), in fT/sqrt(Hz) for std_b in pT and t_meas in s.
double sensitivity(double std_b_pt, double t_meas_s);

/// Mean squared difference over the bins where mask is true (all bins without a mask).
double mse(std::span<const double> est, std::span<const double> truth,
           std::optional<std::span<const bool>> mask = std::nullopt);
double mse(const signals::SignalTrace& est, const signals::SignalTrace& truth);

struct PickupCoil {
  double n_turns = 90.0;
  double diameter = 10.5e-3;     // m
  double inductance = 60.9e-6;   // H
  double resistance = 2.2;       // ohm
  double reactance = 195.0;      // ohm
  double r_m = 50.0;             // ohm, analyzer input
  double area() const;
  /// |1 + Z_coil / R_m| with Z_coil = resistance + i reactance.
  double load_factor() const;
  void validate() const;
};

/// Field amplitude (T) from the analyzer voltage: sqrt(2) |1 + Z/R_m| |U| / (N A omega).
double rf_from_emf(double u_sa, double omega, const PickupCoil& coil = {});

/// 1.428e-7 * 10^(P/20) T for a generator setting P in dBm.
double rf_from_power(double p_set_dbm);

struct RearrangementBudget {
  double an = 0.0;          // atom-noise contribution, units of ln_per_point
  double mse_corr = 0.0;    // 2 LN + AN
  double mse_uncorr = 0.0;  // 2 LN + 2 AN
  double strong_standard_factor = 0.0;  // mse_corr / mse_uncorr
  double ratio() const { return mse_uncorr / mse_corr; }
};

/// AN = (kappa^2 tau v_atom / 0.5) LN.
RearrangementBudget rearrangement_budget(double ln_per_point, double kappa_sq, double tau, double v_atom);

/// Correlated-noise benchmark implied by a measured fully rearranged MSE.
double strong_standard(double mse_rearranged, const RearrangementBudget& budget);

}  // namespace spintrack::metrics
