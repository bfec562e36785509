#include "spintrack/trajectory.hpp"

#include "spintrack/error.hpp"
#include "spintrack/parallel.hpp"
#include "spintrack/rng.hpp"

#include <cmath>
#include <sstream>

namespace spintrack::traj {

void TrajectoryConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("trajectory: " + msg); };
  if (!(tau > 0.0) || !std::isfinite(tau)) fail("tau must be positive");
  if (!(gamma_tot > 0.0)) fail("gamma_tot must be positive");
  if (!(kappa_z_sq >= 0.0) || !(kappa_y_sq >= 0.0)) fail("measurement rates must be non-negative");
  if (!(eta >= 0.0 && eta <= 1.0)) fail("eta must lie in [0, 1]");
  if (!(v0 > 0.0)) fail("v0 must be positive");
  if (!std::isfinite(g_b)) fail("g_b must be finite");
  if (!(lowpass_khz >= 0.0)) fail("lowpass_khz must be non-negative");
  if (tau > 0.1 / gamma_tot) {
    std::ostringstream os;
    os << "tau = " << tau << " ms exceeds the stability bound 0.1 / gamma_tot = " << 0.1 / gamma_tot << " ms";
    fail(os.str());
  }
}

double TrajectoryConfig::readout_gain() const { return std::sqrt(eta * kappa_z_sq * tau); }
double TrajectoryConfig::decay_factor() const { return 1.0 - gamma_tot * tau; }
double TrajectoryConfig::spin_noise_var() const { return 2.0 * gamma_tot * v0 * tau + 0.5 * kappa_y_sq * tau; }
double TrajectoryConfig::stationary_spin_var() const {
  const double a = decay_factor();
  return spin_noise_var() / (1.0 - a * a);
}

namespace {

void check_signal(const signals::SignalTrace& signal, const TrajectoryConfig& cfg) {
  if (std::abs(signal.tau - cfg.tau) > 1e-12 * cfg.tau) {
    std::ostringstream os;
    os << "signal sampled at tau = " << signal.tau << " ms but the record uses tau = " << cfg.tau << " ms";
    throw DomainError(os.str());
  }
}

void apply_lowpass(std::vector<double>& y, const TrajectoryConfig& cfg) {
  if (cfg.lowpass_khz <= 0.0 || y.empty()) return;
  const double alpha = -std::expm1(-2.0 * 3.14159265358979323846 * cfg.lowpass_khz * cfg.tau);
  double state = y[0];
  for (double& v : y) {
    state += alpha * (v - state);
    v = state;
  }
}

SimulationResult run_generative(std::span<const double> b, const TrajectoryConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = b.size();
  const double c = cfg.readout_gain();
  const double a = cfg.decay_factor();
  const double shot_sd = std::sqrt(TrajectoryConfig::kShotVar);
  const double pump_sd = std::sqrt(2.0 * cfg.gamma_tot * cfg.v0 * cfg.tau);
  const double ba_y_sd = std::sqrt(0.5 * cfg.kappa_y_sq * cfg.tau);
  const double ba_z_sd = std::sqrt(0.5 * cfg.kappa_z_sq * cfg.tau);
  const bool with_x = cfg.kappa_y_sq > 0.0;

  SimulationResult out;
  out.record.tau = cfg.tau;
  out.record.seed = seed;
  out.record.values.resize(n);
  out.latent.p.resize(n);
  if (with_x) out.latent.x.resize(n);

  double p = std::sqrt(cfg.stationary_spin_var()) * rng.normal();
  double x = 0.0;
  if (with_x) {
    // x is heated by the J_z probe in the same way p is heated by the J_y probe.
    const double qx = 2.0 * cfg.gamma_tot * cfg.v0 * cfg.tau + 0.5 * cfg.kappa_z_sq * cfg.tau;
    x = std::sqrt(qx / (1.0 - a * a)) * rng.normal();
  }
  for (std::size_t i = 0; i < n; ++i) {
    out.latent.p[i] = p;
    out.record.values[i] = c * p + shot_sd * rng.normal();
    double dp = cfg.g_b * b[i] * cfg.tau + pump_sd * rng.normal();
    if (with_x) {
      dp += ba_y_sd * rng.normal();
      out.latent.x[i] = x;
      x = a * x + pump_sd * rng.normal() + ba_z_sd * rng.normal();
    }
    p = a * p + dp;
  }
  return out;
}

// Same law for the record, produced as c * (filter prediction) + innovation.
SimulationResult run_innovations(std::span<const double> b, const TrajectoryConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = b.size();
  const double c = cfg.readout_gain();
  const double a = cfg.decay_factor();
  const double q = cfg.spin_noise_var();

  SimulationResult out;
  out.record.tau = cfg.tau;
  out.record.seed = seed;
  out.record.values.resize(n);

  double m = 0.0;
  double v = cfg.stationary_spin_var();
  for (std::size_t i = 0; i < n; ++i) {
    const double s = TrajectoryConfig::kShotVar + c * c * v;
    const double nu = std::sqrt(s) * rng.normal();
    out.record.values[i] = c * m + nu;
    const double k = c * v / s;
    const double m_post = m + k * nu;
    const double v_post = v - k * c * v;
    m = a * m_post + cfg.g_b * b[i] * cfg.tau;
    v = a * a * v_post + q;
  }
  return out;
}

}  // namespace

SimulationResult simulate_record(const signals::SignalTrace& signal, const TrajectoryConfig& cfg, std::uint64_t seed,
                                 Backend backend) {
  cfg.validate();
  check_signal(signal, cfg);
  SimulationResult out = backend == Backend::kGenerative ? run_generative(signal.values, cfg, seed)
                                                         : run_innovations(signal.values, cfg, seed);
  out.record.signal_id = signal.seed;
  apply_lowpass(out.record.values, cfg);
  return out;
}

SimulationResult simulate_record(const signals::SignalTrace& signal, const TrajectoryConfig& cfg) {
  return simulate_record(signal, cfg, cfg.seed);
}

Batch simulate_batch(const std::vector<signals::SignalTrace>& sigs, const TrajectoryConfig& cfg,
                     std::uint64_t base_seed, unsigned threads, bool keep_latent, Backend backend) {
  cfg.validate();
  if (sigs.empty()) throw DomainError("simulate_batch: no signals");
  const std::size_t d = sigs.front().size();
  for (const auto& s : sigs) {
    if (s.size() != d) throw DomainError("simulate_batch: signals differ in length");
    check_signal(s, cfg);
  }
  if (keep_latent && backend == Backend::kInnovations) {
    throw DomainError("simulate_batch: the innovations backend has no latent trace");
  }
  const std::size_t m = sigs.size();
  Batch batch;
  batch.records.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(d));
  batch.signals = signals::to_matrix(sigs);
  if (keep_latent) batch.latent.emplace(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(d));
  parallel_for(m, threads, [&](std::size_t j) {
    const auto r = simulate_record(sigs[j], cfg, derive_seed(base_seed, j), backend);
    const auto row = static_cast<Eigen::Index>(j);
    for (std::size_t i = 0; i < d; ++i) {
      batch.records(row, static_cast<Eigen::Index>(i)) = r.record.values[i];
      if (keep_latent) (*batch.latent)(row, static_cast<Eigen::Index>(i)) = r.latent.p[i];
    }
  });
  return batch;
}

Batch simulate_zero_signal_batch(std::size_t m, std::size_t d, const TrajectoryConfig& cfg, std::uint64_t base_seed,
                                 unsigned threads, bool keep_latent) {
  cfg.validate();
  if (m == 0 || d == 0) throw DomainError("simulate_zero_signal_batch: empty batch");
  Batch batch;
  batch.records.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(d));
  batch.signals = Matrix::Zero(1, static_cast<Eigen::Index>(d));
  if (keep_latent) batch.latent.emplace(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(d));
  const std::vector<double> zeros(d, 0.0);
  parallel_for(m, threads, [&](std::size_t j) {
    const auto r = run_generative(zeros, cfg, derive_seed(base_seed, j));
    auto y = r.record.values;
    apply_lowpass(y, cfg);
    const auto row = static_cast<Eigen::Index>(j);
    for (std::size_t i = 0; i < d; ++i) {
      batch.records(row, static_cast<Eigen::Index>(i)) = y[i];
      if (keep_latent) (*batch.latent)(row, static_cast<Eigen::Index>(i)) = r.latent.p[i];
    }
  });
  return batch;
}

Rearrangement rearrangement_from_degree(double degree) {
  constexpr double kTol = 1e-6;
  if (std::abs(degree) < kTol) return Rearrangement::kNone;
  if (std::abs(degree - 1.0 / 3.0) < kTol) return Rearrangement::kEveryThird;
  if (std::abs(degree - 0.5) < kTol) return Rearrangement::kEverySecond;
  if (std::abs(degree - 1.0) < kTol) return Rearrangement::kAll;
  std::ostringstream os;
  os << "rearrangement degree " << degree << " is not one of 0, 1/3, 1/2, 1";
  throw DomainError(os.str());
}

double degree_of(Rearrangement r) {
  switch (r) {
    case Rearrangement::kNone: return 0.0;
    case Rearrangement::kEveryThird: return 1.0 / 3.0;
    case Rearrangement::kEverySecond: return 0.5;
    case Rearrangement::kAll: return 1.0;
  }
  return 0.0;
}

Matrix rearrange_records(const Matrix& records, std::size_t group_size, Rearrangement degree, std::uint64_t seed) {
  const auto m = static_cast<std::size_t>(records.rows());
  if (group_size == 0) throw DomainError("rearrange_records: group size must be positive");
  if (m % group_size != 0) {
    std::ostringstream os;
    os << "rearrange_records: " << m << " rows do not split into groups of " << group_size;
    throw DomainError(os.str());
  }
  std::size_t stride = 0;
  switch (degree) {
    case Rearrangement::kNone: return records;
    case Rearrangement::kEveryThird: stride = 3; break;
    case Rearrangement::kEverySecond: stride = 2; break;
    case Rearrangement::kAll: stride = 1; break;
  }
  Matrix out = records;
  const std::size_t groups = m / group_size;
  for (std::size_t g = 0; g < groups; ++g) {
    const std::uint64_t group_seed = derive_seed(seed, g);
    const auto base = static_cast<Eigen::Index>(g * group_size);
    for (Eigen::Index col = 0; col < records.cols(); col += static_cast<Eigen::Index>(stride)) {
      Rng rng(derive_seed(group_seed, static_cast<std::uint64_t>(col)));
      const auto perm = permutation(group_size, rng);
      for (std::size_t r = 0; r < group_size; ++r) {
        out(base + static_cast<Eigen::Index>(r), col) = records(base + static_cast<Eigen::Index>(perm[r]), col);
      }
    }
  }
  return out;
}

Matrix bin_records(const Matrix& records, std::size_t factor) {
  if (factor == 0) throw DomainError("bin_records: factor must be positive");
  const auto bins = records.cols() / static_cast<Eigen::Index>(factor);
  if (bins == 0) throw DomainError("bin_records: record shorter than one bin");
  const double norm = 1.0 / std::sqrt(static_cast<double>(factor));
  Matrix out(records.rows(), bins);
  const auto f = static_cast<Eigen::Index>(factor);
  for (Eigen::Index k = 0; k < bins; ++k) out.col(k) = records.middleCols(k * f, f).rowwise().sum() * norm;
  return out;
}

}  // namespace spintrack::traj
