#include "spintrack/signals.hpp"

#include "spintrack/error.hpp"
#include "spintrack/parallel.hpp"
#include "spintrack/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <type_traits>

namespace spintrack::signals {

const char* to_string(SignalKind kind) {
  switch (kind) {
    case SignalKind::kZero: return "zero";
    case SignalKind::kConstant: return "constant";
    case SignalKind::kOU: return "ou";
    case SignalKind::kDOU: return "dou";
    case SignalKind::kWhite: return "white";
    case SignalKind::kPulses: return "pulses";
    case SignalKind::kHMM: return "hmm";
  }
  return "unknown";
}

SignalKind signal_kind_from_string(const std::string& name) {
  for (auto k : {SignalKind::kZero, SignalKind::kConstant, SignalKind::kOU, SignalKind::kDOU, SignalKind::kWhite,
                 SignalKind::kPulses, SignalKind::kHMM}) {
    if (name == to_string(k)) return k;
  }
  throw DomainError("unknown signal kind '" + name + "'");
}

namespace {

void check_grid(std::size_t n, double tau) {
  if (n < 1) throw DomainError("signal length must be >= 1");
  if (!(tau > 0)) throw DomainError("signal sample interval must be > 0");
}

}  // namespace

SignalTrace zero_signal(std::size_t n, double tau) {
  check_grid(n, tau);
  SignalTrace s;
  s.tau = tau;
  s.values.assign(n, 0.0);
  s.kind = SignalKind::kZero;
  return s;
}

SignalTrace constant_signal(std::size_t n, double tau, double level) {
  SignalTrace s = zero_signal(n, tau);
  std::fill(s.values.begin(), s.values.end(), level);
  s.kind = SignalKind::kConstant;
  s.params["level"] = level;
  return s;
}

// ---------------------------------------------------------------- OU

OUParams OUParams::from_stationary(double beta, double v_ss) {
  if (!(beta >= 0 && v_ss >= 0)) throw DomainError("OUParams: beta and v_ss must be >= 0");
  return OUParams{beta, std::sqrt(2.0 * beta * v_ss)};
}

double OUParams::v_ss() const {
  if (sigma_ou == 0.0) return 0.0;
  if (beta == 0.0) return std::numeric_limits<double>::infinity();
  return sigma_ou * sigma_ou / (2.0 * beta);
}

void OUParams::validate() const {
  if (!(beta >= 0)) throw DomainError("OUParams: beta must be >= 0");
  if (!(sigma_ou >= 0)) throw DomainError("OUParams: sigma_ou must be >= 0");
}

namespace {

void fill_ou(const OUParams& p, double tau, Rng& rng, const OUOptions& opt, std::vector<double>& out) {
  const double decay = std::exp(-p.beta * tau);
  // v_ss (1 - e^{-2 beta tau}) written to stay finite as beta -> 0.
  const double step_var = p.beta > 0 ? p.sigma_ou * p.sigma_ou * (-std::expm1(-2.0 * p.beta * tau)) / (2.0 * p.beta)
                                     : p.sigma_ou * p.sigma_ou * tau;
  const double step_sd = std::sqrt(step_var);
  const double euler_sd = p.sigma_ou * std::sqrt(tau);

  double b;
  if (opt.initial) {
    b = *opt.initial;
  } else {
    const double v = p.v_ss();
    b = std::isfinite(v) ? std::sqrt(v) * rng.normal() : 0.0;
  }
  out[0] = b;
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (opt.method == OUMethod::kExact) {
      b = b * decay + step_sd * rng.normal();
    } else {
      b = b * (1.0 - p.beta * tau) + euler_sd * rng.normal();
    }
    out[i] = b;
  }
}

}  // namespace

SignalTrace gen_ou(const OUParams& params, std::size_t n, double tau, std::uint64_t seed, const OUOptions& options) {
  check_grid(n, tau);
  params.validate();
  SignalTrace s;
  s.tau = tau;
  s.kind = SignalKind::kOU;
  s.seed = seed;
  s.params = {{"beta", params.beta}, {"sigma_ou", params.sigma_ou},
              {"euler", options.method == OUMethod::kEuler ? 1.0 : 0.0}};
  if (options.initial) s.params["initial"] = *options.initial;
  s.values.resize(n);
  Rng rng(seed);
  fill_ou(params, tau, rng, options, s.values);
  return s;
}

void DOUParams::validate() const {
  ou1.validate();
  ou2.validate();
  if (!(omega_d >= 0)) throw DomainError("DOUParams: omega_d must be >= 0");
}

SignalTrace gen_dou(const DOUParams& params, std::size_t n, double tau, std::uint64_t seed) {
  check_grid(n, tau);
  params.validate();
  const SignalTrace b1 = gen_ou(params.ou1, n, tau, derive_seed(seed, 0));
  const SignalTrace b2 = gen_ou(params.ou2, n, tau, derive_seed(seed, 1));
  SignalTrace s;
  s.tau = tau;
  s.kind = SignalKind::kDOU;
  s.seed = seed;
  s.params = {{"beta1", params.ou1.beta}, {"sigma1", params.ou1.sigma_ou}, {"beta2", params.ou2.beta},
              {"sigma2", params.ou2.sigma_ou}, {"omega_d", params.omega_d}};
  s.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double phase = params.omega_d * tau * static_cast<double>(i);
    s.values[i] = b1.values[i] * std::cos(phase) + b2.values[i] * std::sin(phase);
  }
  return s;
}

// ---------------------------------------------------------------- white

void WhiteParams::validate() const {
  if (!(hold > 0)) throw DomainError("WhiteParams: hold must be > 0");
  if (!(level_std >= 0)) throw DomainError("WhiteParams: level_std must be >= 0");
}

SignalTrace gen_white(const WhiteParams& params, std::size_t n, double tau, std::uint64_t seed) {
  check_grid(n, tau);
  params.validate();
  if (params.hold < tau * (1.0 - 1e-9)) throw DomainError("WhiteParams: hold must be >= tau");
  const auto steps = static_cast<std::size_t>(std::max(1.0, std::round(params.hold / tau)));
  SignalTrace s;
  s.tau = tau;
  s.kind = SignalKind::kWhite;
  s.seed = seed;
  s.params = {{"hold", static_cast<double>(steps) * tau}, {"hold_steps", static_cast<double>(steps)},
              {"level_std", params.level_std}, {"uniform", params.law == LevelLaw::kUniform ? 1.0 : 0.0}};
  s.values.resize(n);
  Rng rng(seed);
  const double half_width = std::sqrt(3.0) * params.level_std;
  double level = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i % steps == 0) {
      level = params.law == LevelLaw::kGaussian ? params.level_std * rng.normal()
                                                : rng.uniform(-half_width, half_width);
    }
    s.values[i] = level;
  }
  return s;
}

// ---------------------------------------------------------------- pulses

void PulseParams::validate() const {
  if (!(width > 0)) throw DomainError("PulseParams: width must be > 0");
  if (!(duration > 0)) throw DomainError("PulseParams: duration must be > 0");
  if (!(amp_high >= amp_low)) throw DomainError("PulseParams: amp_high < amp_low");
  if (static_cast<double>(n_pulses) * width > duration * (1.0 + 1e-12)) {
    throw DomainError("PulseParams: n_pulses * width exceeds duration");
  }
}

PulseTrace gen_pulses(const PulseParams& params, double tau, std::uint64_t seed) {
  params.validate();
  if (!(tau > 0)) throw DomainError("signal sample interval must be > 0");
  const auto n = static_cast<std::size_t>(std::llround(params.duration / tau));
  const auto w = static_cast<std::size_t>(std::max<long long>(1, std::llround(params.width / tau)));
  const std::size_t k = params.n_pulses;
  if (n == 0 || k * w > n) throw DomainError("gen_pulses: pulses do not fit on the sample grid");

  PulseTrace out;
  SignalTrace& s = out.trace;
  s.tau = tau;
  s.kind = SignalKind::kPulses;
  s.seed = seed;
  s.params = {{"width", static_cast<double>(w) * tau}, {"width_steps", static_cast<double>(w)},
              {"amp_low", params.amp_low}, {"amp_high", params.amp_high},
              {"n_pulses", static_cast<double>(k)}, {"duration", static_cast<double>(n) * tau}};
  s.values.assign(n, 0.0);

  // Stars and bars: the (n - k w) idle samples and k pulse blocks form n - k w + k
  // items; choosing the k block positions uniformly gives every non-overlapping
  // placement equal probability.
  Rng rng(seed);
  const std::size_t items = n - k * w + k;
  std::vector<std::size_t> perm = permutation(items, rng);
  std::vector<std::size_t> slots(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(slots.begin(), slots.end());
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t start = slots[j] + j * (w - 1);
    const double amp = rng.uniform(params.amp_low, params.amp_high);
    for (std::size_t i = start; i < start + w; ++i) s.values[i] = amp;
    out.starts.push_back(start);
    out.amplitudes.push_back(amp);
  }
  return out;
}

// ---------------------------------------------------------------- HMM

HMMParams HMMParams::make_default(std::size_t n_states, double p_stay, double b_max, double hold) {
  if (n_states < 1) throw DomainError("HMMParams: need at least one state");
  if (!(p_stay >= 0 && p_stay <= 1)) throw DomainError("HMMParams: p_stay outside [0,1]");
  HMMParams p;
  p.hold = hold;
  p.levels.resize(n_states);
  for (std::size_t s = 0; s < n_states; ++s) {
    p.levels[s] = n_states == 1 ? 0.0
                                : -b_max + 2.0 * b_max * static_cast<double>(s) / static_cast<double>(n_states - 1);
  }
  p.transition = Matrix::Constant(static_cast<Eigen::Index>(n_states), static_cast<Eigen::Index>(n_states),
                                  n_states == 1 ? 0.0 : (1.0 - p_stay) / static_cast<double>(n_states - 1));
  for (std::size_t s = 0; s < n_states; ++s) {
    p.transition(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s)) = n_states == 1 ? 1.0 : p_stay;
  }
  return p;
}

void HMMParams::validate() const {
  const auto k = static_cast<Eigen::Index>(levels.size());
  if (k < 1) throw DomainError("HMMParams: need at least one state");
  if (transition.rows() != k || transition.cols() != k) {
    throw DomainError("HMMParams: transition matrix must be n_states x n_states");
  }
  for (Eigen::Index r = 0; r < k; ++r) {
    double sum = 0.0;
    for (Eigen::Index c = 0; c < k; ++c) {
      if (!(transition(r, c) >= 0)) throw DomainError("HMMParams: negative transition probability");
      sum += transition(r, c);
    }
    if (std::abs(sum - 1.0) > 1e-12) {
      throw DomainError("HMMParams: transition row " + std::to_string(r) + " does not sum to 1");
    }
  }
  if (!(hold > 0)) throw DomainError("HMMParams: hold must be > 0");
  if (initial_state && *initial_state >= levels.size()) throw DomainError("HMMParams: initial state out of range");
}

HMMTrace gen_hmm(const HMMParams& params, std::size_t n, double tau, std::uint64_t seed) {
  check_grid(n, tau);
  params.validate();
  if (params.hold < tau * (1.0 - 1e-9)) throw DomainError("HMMParams: hold must be >= tau");
  const auto steps = static_cast<std::size_t>(std::max(1.0, std::round(params.hold / tau)));
  const std::size_t k = params.n_states();

  HMMTrace out;
  SignalTrace& s = out.trace;
  s.tau = tau;
  s.kind = SignalKind::kHMM;
  s.seed = seed;
  s.params = {{"n_states", static_cast<double>(k)}, {"hold", static_cast<double>(steps) * tau}};
  s.values.resize(n);
  out.states.resize(n);

  Rng rng(seed);
  std::size_t state = params.initial_state ? *params.initial_state : static_cast<std::size_t>(rng.below(k));
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0 && i % steps == 0) {
      const double u = rng.uniform();
      double cum = 0.0;
      std::size_t next = k - 1;
      for (std::size_t c = 0; c < k; ++c) {
        cum += params.transition(static_cast<Eigen::Index>(state), static_cast<Eigen::Index>(c));
        if (u < cum) {
          next = c;
          break;
        }
      }
      state = next;
    }
    out.states[i] = state;
    s.values[i] = params.levels[state];
  }
  return out;
}

// ---------------------------------------------------------------- batches

SignalTrace generate(const SignalSpec& spec, std::size_t n, double tau, std::uint64_t seed) {
  return std::visit(
      [&](const auto& p) -> SignalTrace {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, OUParams>) {
          return gen_ou(p, n, tau, seed);
        } else if constexpr (std::is_same_v<P, DOUParams>) {
          return gen_dou(p, n, tau, seed);
        } else if constexpr (std::is_same_v<P, WhiteParams>) {
          return gen_white(p, n, tau, seed);
        } else if constexpr (std::is_same_v<P, PulseParams>) {
          SignalTrace t = gen_pulses(p, tau, seed).trace;
          t.values.resize(n, 0.0);
          return t;
        } else {
          return gen_hmm(p, n, tau, seed).trace;
        }
      },
      spec);
}

std::vector<SignalTrace> generate_batch(const SignalSpec& spec, std::size_t count, std::size_t n, double tau,
                                        std::uint64_t base_seed, unsigned threads) {
  std::vector<SignalTrace> out(count);
  parallel_for(count, threads, [&](std::size_t j) { out[j] = generate(spec, n, tau, derive_seed(base_seed, j)); });
  return out;
}

Matrix to_matrix(const std::vector<SignalTrace>& traces) {
  if (traces.empty()) return {};
  const std::size_t d = traces.front().size();
  Matrix m(static_cast<Eigen::Index>(traces.size()), static_cast<Eigen::Index>(d));
  for (std::size_t r = 0; r < traces.size(); ++r) {
    if (traces[r].size() != d) throw DomainError("to_matrix: traces have unequal lengths");
    for (std::size_t c = 0; c < d; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = traces[r].values[c];
  }
  return m;
}

Matrix signal_covariance(const std::vector<SignalTrace>& traces) {
  if (traces.size() < 2) throw DomainError("signal_covariance: batch needs at least two traces");
  return column_covariance(to_matrix(traces));
}

}  // namespace spintrack::signals
