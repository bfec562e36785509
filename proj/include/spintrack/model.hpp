#pragma once

#include <numbers>

namespace spintrack::model {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kPlanck = 6.62607015e-34;      // J s
inline constexpr double kSpeedOfLight = 299792458.0;   // m/s

/// Unit conversions into the internal convention (times in ms, rates in 1/ms).
namespace units {
constexpr double per_ms_from_per_s(double rate_per_s) { return rate_per_s * 1e-3; }
constexpr double per_s_from_per_ms(double rate_per_ms) { return rate_per_ms * 1e3; }
constexpr double ms_from_s(double t_s) { return t_s * 1e3; }
}  // namespace units

/// 87Rb D2 line data for the 5S1/2 F=2 -> 5P3/2 probe.
struct PhysicalConstants {
  double lambda = 780e-9;                 // m
  double gamma_e = kTwoPi * 6.07e6;       // excited-state FWHM, rad/s
  double delta_13 = kTwoPi * 423.60e6;    // F'=1..3 splitting, rad/s
  double delta_23 = kTwoPi * 266.65e6;    // F'=2..3 splitting, rad/s

  /// Throws DomainError when a field is non-positive or delta_13 <= delta_23.
  void validate() const;
};

/// Photon flux (1/s) of a beam with optical power `power` (W).
double photon_flux(double power_w, double lambda_m);

struct EnsembleParams {
  double n_at = 4e10;
  double v0 = 0.60;                          // canonical variance of the pumped steady state
  double gamma_tot = 0.345;                  // 1/ms
  double orientation = 0.958;                // degree of polarization
  double omega_l = kTwoPi * 510e3;           // rad/s
  double b_bias = 7.2e-5;                    // T

  double j_x() const { return 2.0 * n_at; }
  void validate() const;
};

struct ProbeParams {
  double phi = 1.962e15;                     // photon flux, 1/s (500 uW at 780 nm)
  double detuning = -kTwoPi * 2.5e9;         // rad/s; "blue by 2.5 GHz" is negative here
  double area = 7.03e-6;                     // m^2, sets kappa^2 ~ 3000 1/s
  double eta = 1.0;
  double kappa_sq = 3.0;                     // 1/ms, measurement rate used by the dynamics

  double s_x() const { return phi / 2.0; }
  void validate() const;
};

/// Vector polarizability a1(delta). Throws DomainError at delta == 0 or on
/// the hyperfine poles delta_13, delta_23 (the message names the pole).
double vector_polarizability(double delta, const PhysicalConstants& constants = {});
/// Tensor polarizability a2(delta); same domain as vector_polarizability.
double tensor_polarizability(double delta, const PhysicalConstants& constants = {});

/// Light-atom coupling kappa = -Gamma lambda^2 a1 / (16 A delta pi) * sqrt(Phi N_at), in 1/sqrt(s).
/// Only kappa^2 is used downstream; the sign is informational.
double coupling_kappa(const ProbeParams& probe, const EnsembleParams& ensemble,
                      const PhysicalConstants& constants = {});

/// Probe area (m^2) at which coupling_kappa^2 equals `kappa_sq_per_s`.
double area_for_kappa_sq(double kappa_sq_per_s, const ProbeParams& probe, const EnsembleParams& ensemble,
                         const PhysicalConstants& constants = {});

/// gamma = omega_l / b_bias in rad/(s T).
double gyromagnetic_ratio(double omega_l, double b_bias);

/// Tensor-light-shift precession rate
///   Omega_s = Gamma lambda^2 a2 * 2 (2F - 1) sigma_jx * Phi / (8 A delta 2 pi)
/// for F = 2. Diagnostic only; the trajectory model never uses it.
/// sigma_jx is the sign of the mean spin (-1 for pumping into m_F = -2).
double tensor_shift_rate(const ProbeParams& probe, const EnsembleParams& ensemble,
                         const PhysicalConstants& constants = {}, int sigma_jx = -1);

}  // namespace spintrack::model
