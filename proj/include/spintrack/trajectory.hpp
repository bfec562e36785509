#pragma once

#include "spintrack/signals.hpp"
#include "spintrack/stats.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace spintrack::traj {

/// Measurement and spin parameters in internal units (ms, 1/ms).
///
/// Canonical spin p = J_z / sqrt(J_x) relaxes at gamma_tot towards a pumped
/// steady state of variance v0, is displaced by g_b * B (B in pT), and is read
/// out with rate kappa_z_sq at detection efficiency eta. kappa_y_sq is the
/// strength of the deliberate J_y probing, whose back-action heats p.
struct TrajectoryConfig {
  double tau = 0.025;
  double kappa_z_sq = 3.0;
  double kappa_y_sq = 0.0;
  double eta = 1.0;
  double gamma_tot = 0.345;
  double v0 = 0.60;
  double g_b = 0.5;             // canonical / (pT ms)
  std::uint64_t seed = 0;
  /// First-order low-pass of the demodulated record (3 dB frequency, kHz). 0 = ideal sampler.
  double lowpass_khz = 0.0;

  /// Throws ConfigError unless tau > 0, rates >= 0, eta in [0,1] and tau <= 0.1 / gamma_tot.
  void validate() const;

  double readout_gain() const;        // sqrt(eta kappa_z^2 tau)
  double decay_factor() const;        // 1 - gamma_tot tau
  double spin_noise_var() const;      // 2 gamma v0 tau + kappa_y^2 tau / 2, per step
  double stationary_spin_var() const; // spin_noise_var / (1 - decay^2)
  static constexpr double kShotVar = 0.5;
};

struct MeasurementRecord {
  double tau = 0.0;
  std::vector<double> values;   // canonical, shot-noise variance 1/2 per sample
  std::uint64_t signal_id = 0;  // seed of the driving SignalTrace
  std::uint64_t seed = 0;
  std::size_t size() const { return values.size(); }
};

struct LatentTrace {
  std::vector<double> p;  // J_z / sqrt(J_x)
  std::vector<double> x;  // J_y / sqrt(J_x), only when kappa_y_sq > 0
};

enum class Backend {
  kGenerative,   // latent spin + shot noise
  kInnovations,  // optimal filter driven by white innovations (no latent trace)
};

struct SimulationResult {
  MeasurementRecord record;
  LatentTrace latent;
};

/// One record driven by `signal`. Per step:
///   Y_i     = sqrt(eta k_z^2 tau) p_i + xi_shot,          xi_shot ~ N(0, 1/2)
///   p_{i+1} = p_i + (g_b B_i - gamma p_i) tau + sqrt(2 gamma v0 tau) xi + sqrt(k_y^2 tau / 2) xi'
/// with p_0 drawn from the zero-signal stationary law. Throws DomainError if
/// signal.tau differs from cfg.tau.
SimulationResult simulate_record(const signals::SignalTrace& signal, const TrajectoryConfig& cfg, std::uint64_t seed,
                                 Backend backend = Backend::kGenerative);
SimulationResult simulate_record(const signals::SignalTrace& signal, const TrajectoryConfig& cfg);

/// Record matrix (M x d) with the matching signal matrix; row j uses
/// derive_seed(base_seed, j). `latent` holds p when requested.
struct Batch {
  Matrix records;
  Matrix signals;
  std::optional<Matrix> latent;
  std::size_t rows() const { return static_cast<std::size_t>(records.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(records.cols()); }
};

Batch simulate_batch(const std::vector<signals::SignalTrace>& signals, const TrajectoryConfig& cfg,
                     std::uint64_t base_seed, unsigned threads = 1, bool keep_latent = false,
                     Backend backend = Backend::kGenerative);

/// Same as above with every row driven by zero field (no signal storage).
Batch simulate_zero_signal_batch(std::size_t m, std::size_t d, const TrajectoryConfig& cfg, std::uint64_t base_seed,
                                 unsigned threads = 1, bool keep_latent = false);

/// Degree of rearrangement: the fraction of time columns that are shuffled.
enum class Rearrangement { kNone, kEveryThird, kEverySecond, kAll };

/// Maps 0, 1/3, 1/2, 1 (tolerance 1e-6) onto Rearrangement; anything else is a DomainError.
Rearrangement rearrangement_from_degree(double degree);
double degree_of(Rearrangement r);

/// Rows are consecutive groups of `group_size` repetitions of one signal
/// realization. In each group every selected column (index divisible by 3, 2
/// or 1) is permuted across the group's rows with its own permutation, so each
/// column keeps its multiset of values. Throws DomainError when the rows do not
/// divide into whole groups.
Matrix rearrange_records(const Matrix& records, std::size_t group_size, Rearrangement degree, std::uint64_t seed);

/// Sums `factor` consecutive samples and divides by sqrt(factor): a record
/// sampled at factor * tau with the same per-sample shot-noise normalization.
Matrix bin_records(const Matrix& records, std::size_t factor);

}  // namespace spintrack::traj
