#pragma once

#include "spintrack/stats.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace spintrack::signals {

enum class SignalKind { kZero, kConstant, kOU, kDOU, kWhite, kPulses, kHMM };

const char* to_string(SignalKind kind);
SignalKind signal_kind_from_string(const std::string& name);

/// A sampled rotating-frame field envelope B(t_i), t_i = i * tau.
struct SignalTrace {
  double tau = 0.0;                     // ms
  std::vector<double> values;           // pT
  SignalKind kind = SignalKind::kZero;
  std::map<std::string, double> params; // generator parameters, as used
  std::uint64_t seed = 0;

  std::size_t size() const { return values.size(); }
};

SignalTrace zero_signal(std::size_t n, double tau);
SignalTrace constant_signal(std::size_t n, double tau, double level);

/// dB = -beta B dt + sigma dW. Rates in 1/ms, sigma in pT/sqrt(ms).
struct OUParams {
  double beta = 0.268;
  double sigma_ou = 0.0;

  static OUParams from_stationary(double beta, double v_ss);
  /// sigma^2 / (2 beta); zero when sigma is zero, infinite for beta == 0 < sigma.
  double v_ss() const;
  void validate() const;
};

enum class OUMethod { kExact, kEuler };

struct OUOptions {
  OUMethod method = OUMethod::kExact;
  /// Starting value; when unset B_0 is drawn from the stationary law (0 if undefined).
  std::optional<double> initial;
};

/// B_dOU(t) = B_1(t) cos(omega_d t) + B_2(t) sin(omega_d t).
struct DOUParams {
  OUParams ou1;
  OUParams ou2;
  double omega_d = 0.0;  // rad/ms
  void validate() const;
};

enum class LevelLaw { kGaussian, kUniform };

/// Piecewise-constant levels, i.i.d. with standard deviation level_std.
struct WhiteParams {
  double hold = 0.740;   // ms
  double level_std = 1.0;
  LevelLaw law = LevelLaw::kGaussian;
  void validate() const;
};

struct PulseParams {
  double width = 0.375;  // ms
  double amp_low = 0.0;
  double amp_high = 10.0;
  std::size_t n_pulses = 10;
  double duration = 180.0;  // ms
  void validate() const;
};

struct HMMParams {
  std::vector<double> levels;  // pT, one per hidden state
  Matrix transition;           // row-stochastic
  double hold = 0.740;         // ms between transitions
  std::optional<std::size_t> initial_state;  // uniform draw when unset

  std::size_t n_states() const { return levels.size(); }
  /// p_stay on the diagonal, uniform off-diagonal, levels equally spaced in [-b_max, b_max].
  static HMMParams make_default(std::size_t n_states = 10, double p_stay = 0.9, double b_max = 3.0,
                                double hold = 0.740);
  void validate() const;
};

using SignalSpec = std::variant<OUParams, DOUParams, WhiteParams, PulseParams, HMMParams>;

SignalTrace gen_ou(const OUParams& params, std::size_t n, double tau, std::uint64_t seed,
                   const OUOptions& options = {});

SignalTrace gen_dou(const DOUParams& params, std::size_t n, double tau, std::uint64_t seed);

SignalTrace gen_white(const WhiteParams& params, std::size_t n, double tau, std::uint64_t seed);

struct PulseTrace {
  SignalTrace trace;
  std::vector<std::size_t> starts;  // sample index of each pulse, ascending
  std::vector<double> amplitudes;
};

/// Rectangular pulses at uniformly random non-overlapping positions over
/// round(duration / tau) samples. Throws DomainError when they cannot fit.
PulseTrace gen_pulses(const PulseParams& params, double tau, std::uint64_t seed);

struct HMMTrace {
  SignalTrace trace;
  std::vector<std::size_t> states;  // hidden state per sample
};

HMMTrace gen_hmm(const HMMParams& params, std::size_t n, double tau, std::uint64_t seed);

/// Generates one trace of length n from any signal spec. Pulse traces are
/// truncated or zero-padded to n.
SignalTrace generate(const SignalSpec& spec, std::size_t n, double tau, std::uint64_t seed);

/// Trace j uses derive_seed(base_seed, j); the result is independent of `threads`.
std::vector<SignalTrace> generate_batch(const SignalSpec& spec, std::size_t count, std::size_t n, double tau,
                                        std::uint64_t base_seed, unsigned threads = 1);

/// Unbiased covariance across the batch for every pair of time indices (pT^2).
Matrix signal_covariance(const std::vector<SignalTrace>& traces);

/// Rows = traces.
Matrix to_matrix(const std::vector<SignalTrace>& traces);

}  // namespace spintrack::signals
