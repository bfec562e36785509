#include "spintrack/model.hpp"

#include "spintrack/error.hpp"

#include <cmath>
#include <string>

namespace spintrack::model {

void PhysicalConstants::validate() const {
  if (!(lambda > 0 && gamma_e > 0 && delta_13 > 0 && delta_23 > 0)) {
    throw DomainError("PhysicalConstants: all fields must be strictly positive");
  }
  if (!(delta_13 > delta_23)) throw DomainError("PhysicalConstants: require delta_13 > delta_23");
}

void EnsembleParams::validate() const {
  if (!(n_at >= 0)) throw DomainError("EnsembleParams: n_at must be >= 0");
  if (!(v0 > 0)) throw DomainError("EnsembleParams: v0 must be > 0");
  if (!(gamma_tot > 0)) throw DomainError("EnsembleParams: gamma_tot must be > 0");
  if (!(orientation >= 0 && orientation <= 1)) throw DomainError("EnsembleParams: orientation outside [0,1]");
  if (!(b_bias > 0)) throw DomainError("EnsembleParams: b_bias must be > 0");
}

void ProbeParams::validate() const {
  if (!(phi >= 0)) throw DomainError("ProbeParams: phi must be >= 0");
  if (detuning == 0.0 || !std::isfinite(detuning)) throw DomainError("ProbeParams: detuning must be finite and nonzero");
  if (!(area > 0)) throw DomainError("ProbeParams: area must be > 0");
  if (!(eta >= 0 && eta <= 1)) throw DomainError("ProbeParams: eta outside [0,1]");
  if (!(kappa_sq >= 0)) throw DomainError("ProbeParams: kappa_sq must be >= 0");
}

double photon_flux(double power_w, double lambda_m) {
  if (!(power_w >= 0 && lambda_m > 0)) throw DomainError("photon_flux: need power >= 0 and lambda > 0");
  return power_w * lambda_m / (kPlanck * kSpeedOfLight);
}

namespace {

// 1 / (1 - pole / delta), the common resonance factor of a1 and a2.
double pole_factor(double delta, double pole, const char* name) {
  if (delta == 0.0) throw DomainError("polarizability: detuning must be nonzero");
  const double denom = 1.0 - pole / delta;
  if (denom == 0.0) throw DomainError(std::string("polarizability: detuning sits on the ") + name + " pole");
  return 1.0 / denom;
}

}  // namespace

double vector_polarizability(double delta, const PhysicalConstants& c) {
  c.validate();
  const double f13 = pole_factor(delta, c.delta_13, "delta_13");
  const double f23 = pole_factor(delta, c.delta_23, "delta_23");
  return std::numbers::sqrt2 / 100.0 * (-15.0 * f13 - 25.0 * f23 + 140.0);
}

double tensor_polarizability(double delta, const PhysicalConstants& c) {
  c.validate();
  const double f13 = pole_factor(delta, c.delta_13, "delta_13");
  const double f23 = pole_factor(delta, c.delta_23, "delta_23");
  return std::numbers::sqrt2 / 40.0 * (f13 - 5.0 * f23 + 4.0);
}

double coupling_kappa(const ProbeParams& probe, const EnsembleParams& ensemble, const PhysicalConstants& c) {
  probe.validate();
  ensemble.validate();
  const double a1 = vector_polarizability(probe.detuning, c);
  const double alpha = -c.gamma_e * c.lambda * c.lambda * a1 / (16.0 * probe.area * probe.detuning * std::numbers::pi);
  return alpha * std::sqrt(probe.phi * ensemble.n_at);
}

double area_for_kappa_sq(double kappa_sq_per_s, const ProbeParams& probe, const EnsembleParams& ensemble,
                         const PhysicalConstants& c) {
  if (!(kappa_sq_per_s > 0)) throw DomainError("area_for_kappa_sq: target must be > 0");
  ProbeParams unit = probe;
  unit.area = 1.0;
  const double kappa_at_unit_area = coupling_kappa(unit, ensemble, c);
  return std::abs(kappa_at_unit_area) / std::sqrt(kappa_sq_per_s);
}

double gyromagnetic_ratio(double omega_l, double b_bias) {
  if (b_bias == 0.0) throw DomainError("gyromagnetic_ratio: bias field must be nonzero");
  if (!(b_bias > 0)) throw DomainError("gyromagnetic_ratio: bias field must be positive");
  return omega_l / b_bias;
}

double tensor_shift_rate(const ProbeParams& probe, const EnsembleParams& ensemble, const PhysicalConstants& c,
                         int sigma_jx) {
  probe.validate();
  ensemble.validate();
  if (sigma_jx != 1 && sigma_jx != -1) throw DomainError("tensor_shift_rate: sigma_jx must be +1 or -1");
  constexpr double kF = 2.0;
  const double a2 = tensor_polarizability(probe.detuning, c);
  const double prefactor = c.gamma_e * c.lambda * c.lambda / (8.0 * probe.area * probe.detuning * kTwoPi);
  return prefactor * a2 * 2.0 * (2.0 * kF - 1.0) * sigma_jx * probe.phi;
}

}  // namespace spintrack::model
