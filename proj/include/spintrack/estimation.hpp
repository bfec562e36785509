#pragma once

#include "spintrack/signals.hpp"
#include "spintrack/stats.hpp"
#include "spintrack/trajectory.hpp"

#include <span>
#include <variant>
#include <vector>

namespace spintrack::est {

struct VarianceCurve {
  std::vector<double> times;  // ms
  std::vector<double> v;
};

enum class Branch { kPrediction, kRetrodiction };

/// RK4 integration of the conditional-variance Riccati equation over [0, horizon]
///   prediction:   dV/dt = -2 G V + 2 G V0 + k_y^2 / 2 - 2 k_z^2 eta V^2
///   retrodiction: dV/dt = +2 G V + 2 G V0 - 2 k_z^2 eta V^2   (t runs backwards from the record end)
/// One point is stored every `stride` steps of size dt; the final time is always stored.
/// Throws DomainError for v_init <= 0, dt <= 0, or k_y^2 > 0 on the retrodiction branch.
VarianceCurve variance_ode_forward(const traj::TrajectoryConfig& cfg, double v_init, double horizon,
                                   double dt = 1e-3, Branch branch = Branch::kPrediction, std::size_t stride = 1);

/// Rates may be in any consistent unit. kappa_sq == 0 returns v0.
double steady_variance_prediction(double kappa_sq, double gamma_tot, double v0, double eta);
/// kappa_sq == 0 returns +inf.
double steady_variance_retrodiction(double kappa_sq, double gamma_tot, double v0, double eta);
/// 1 / (1/v_p + 1/v_r); an infinite argument returns the other one.
double combine_pqs(double v_p, double v_r);
double steady_variance_backaction(double kappa_z_sq, double kappa_y_sq, double gamma_tot, double v0, double eta);

/// Discrete-time versions matched to the generator's per-step model.
double discrete_steady_prior(const traj::TrajectoryConfig& cfg);
double discrete_steady_retro(const traj::TrajectoryConfig& cfg);

/// Forward filter over p with the signal taken as known input.
/// `prior_mean` / `prior_var` at step i condition on Y_0..Y_{i-1};
/// `post_*` additionally on Y_i.
struct FilterState {
  std::vector<double> prior_mean;
  std::vector<double> prior_var;
  std::vector<double> post_mean;
  std::vector<double> post_var;
  std::vector<double> innovations;     // Y_i - c * prior_mean_i
  std::vector<double> innovation_var;  // 1/2 + c^2 prior_var_i
};

/// `signal` may be empty (zero field) or match the record length.
FilterState kalman_filter(const traj::MeasurementRecord& record, const traj::TrajectoryConfig& cfg,
                          std::span<const double> signal = {});

/// Backward information filter over p: info_i and info_vec_i summarize Y_i..Y_{n-1}.
/// retro_var_i = 1 / info_i is the retrodicted variance (+inf without information).
struct RetroState {
  std::vector<double> info;
  std::vector<double> info_vec;
  std::vector<double> retro_var;
};
RetroState retrodiction_filter(const traj::MeasurementRecord& record, const traj::TrajectoryConfig& cfg,
                               std::span<const double> signal = {});

/// Held Gaussian levels with boundaries on multiples of round(hold / tau), as produced by gen_white.
struct HeldWhiteModel {
  double hold = 0.740;
  double level_var = 1.0;
};
using SignalModel = std::variant<signals::OUParams, HeldWhiteModel>;

/// Gaussian signal models only; any other spec throws DomainError.
SignalModel signal_model(const signals::SignalSpec& spec);

struct SmootherResult {
  double v_p = 0.0;   // steady p-only variances of the continuous model
  double v_r = 0.0;
  double v_pr = 0.0;
  std::vector<double> b_est;  // pT
  std::vector<double> b_var;  // pT^2
  std::vector<double> p_est;
  std::vector<double> p_var;
};

/// Two-filter smoother over the joint state (B, p): a forward Kalman filter
/// and a backward information filter, combined per bin. The prior is
/// B_0 ~ N(0, v_ss), p_0 ~ N(0, zero-field stationary variance), independent.
SmootherResult augmented_smoother(const traj::MeasurementRecord& record, const traj::TrajectoryConfig& cfg,
                                  const SignalModel& model);
SmootherResult augmented_smoother(const traj::MeasurementRecord& record, const traj::TrajectoryConfig& cfg,
                                  const signals::SignalSpec& spec);
SmootherResult augmented_smoother(const traj::MeasurementRecord& record, const traj::TrajectoryConfig& cfg,
                                  const signals::OUParams& ou);

/// m = sum_k exp(-gamma_tot |t0 - t_k|) y_k with t_k = t_first + k tau.
double time_mode_weight(std::span<const double> segment, double t_first, double tau, double t0, double gamma_tot);

struct Conditional1 {
  double var_cond = 0.0;
  double alpha = 0.0;
};
struct Conditional2 {
  double var_cond = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double condition = 0.0;  // condition number of the regressor covariance
};

/// Var(m2 - alpha m1) at alpha = Cov(m2, m1) / Var(m1). Needs at least 2 pairs and Var(m1) > 0.
Conditional1 conditional_variance_1(std::span<const double> m2, std::span<const double> m1);
/// Two-regressor optimum. Throws NumericalError, quoting the condition number,
/// when Cov11 Cov33 - Cov13^2 is not safely positive.
Conditional2 conditional_variance_2(std::span<const double> m2, std::span<const double> m1,
                                    std::span<const double> m3);

enum class Anchor {
  kEdge,      // outer segments weighted from their edge next to the verification window
  kMidpoint,  // weighted from the verification midpoint
};

/// squeezing | gap | verification | gap | backward-squeezing, tiled back to
/// back along each record.
struct SegmentLayout {
  double seg_len = 1.5;  // ms
  double gap = 0.3;
  double ver_len = 0.3;
  Anchor anchor = Anchor::kEdge;
  bool tile = true;      // false: one window per record, at its start
};

struct SegmentStats {
  std::vector<double> m1, m2, m3;
  double alpha1 = 0.0;    // prediction-only feedback
  double var_cond1 = 0.0;
  double alpha = 0.0;     // with retrodiction
  double beta = 0.0;
  double var_cond = 0.0;
  double var_m2 = 0.0;
};

/// Throws DomainError when a record cannot hold one window.
SegmentStats segment_outcomes(const Matrix& records, const traj::TrajectoryConfig& cfg, const SegmentLayout& layout);

/// Verification-variance references: a light-only batch (kappa = 0) for the
/// readout noise and a coherent-spin-state batch (v0 = 1/2, same readout).
struct SqueezeReference {
  double light_var = 0.0;
  double css_var = 0.0;
  std::size_t light_samples = 0;
  std::size_t css_samples = 0;
};
/// The two reference configurations derived from `cfg`.
traj::TrajectoryConfig light_only(const traj::TrajectoryConfig& cfg);
traj::TrajectoryConfig coherent_state(const traj::TrajectoryConfig& cfg);
SqueezeReference squeeze_reference_from(const Matrix& light_records, const Matrix& css_records,
                                        const traj::TrajectoryConfig& cfg, const SegmentLayout& layout);
/// Simulates both reference batches (streams 0 and 1 of `seed`).
SqueezeReference make_squeeze_reference(const traj::TrajectoryConfig& cfg, std::size_t n_records,
                                        std::size_t n_samples, const SegmentLayout& layout, std::uint64_t seed,
                                        unsigned threads = 1);

struct SqueezeResult {
  double pred_db = 0.0;      // 10 log10((Var(m2|m1) - LN) / (Var_css(m2) - LN)), NaN when the reference has no spin part
  double pr_db = 0.0;        // same with m3
  double raw_pred_db = 0.0;  // 10 log10(Var(m2|m1) / Var(m2)), no normalization
  double raw_pr_db = 0.0;
  /// Large-sample standard errors of pred_db / pr_db (Gaussian variance estimates, independent batches).
  double pred_db_se = 0.0;
  double pr_db_se = 0.0;
  std::size_t samples = 0;
  SegmentStats stats;
  SqueezeReference reference;
};

SqueezeResult squeezing_pipeline(const Matrix& records, const traj::TrajectoryConfig& cfg,
                                 const SegmentLayout& layout, const SqueezeReference& reference);
/// Builds the reference from batches of the same shape seeded from `seed`.
SqueezeResult squeezing_pipeline(const Matrix& records, const traj::TrajectoryConfig& cfg,
                                 const SegmentLayout& layout, std::uint64_t seed, unsigned threads = 1);

}  // namespace spintrack::est
