#include "spintrack/estimation.hpp"

#include "spintrack/error.hpp"
#include "spintrack/rng.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <utility>

namespace spintrack::est {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double riccati_rhs(const traj::TrajectoryConfig& cfg, Branch branch, double v) {
  const double g = cfg.gamma_tot;
  const double k = cfg.kappa_z_sq * cfg.eta;
  if (branch == Branch::kPrediction) {
    return -2.0 * g * v + 2.0 * g * cfg.v0 + 0.5 * cfg.kappa_y_sq - 2.0 * k * v * v;
  }
  return 2.0 * g * v + 2.0 * g * cfg.v0 - 2.0 * k * v * v;
}

void check_rates(double kappa_sq, double gamma_tot, double v0, double eta) {
  if (!(kappa_sq >= 0.0) || !(v0 >= 0.0) || !(eta >= 0.0) || !(gamma_tot > 0.0)) {
    throw DomainError("steady variance: rates must be non-negative and gamma_tot positive");
  }
}

std::span<const double> checked_signal(std::span<const double> signal, std::size_t n) {
  if (!signal.empty() && signal.size() != n) throw DomainError("filter: signal and record lengths differ");
  return signal;
}

}  // namespace

VarianceCurve variance_ode_forward(const traj::TrajectoryConfig& cfg, double v_init, double horizon, double dt,
                                   Branch branch, std::size_t stride) {
  if (!(v_init > 0.0)) throw DomainError("variance_ode_forward: v_init must be positive");
  if (!(dt > 0.0) || !(horizon >= 0.0)) throw DomainError("variance_ode_forward: need dt > 0 and horizon >= 0");
  if (branch == Branch::kRetrodiction && cfg.kappa_y_sq > 0.0) {
    throw DomainError("variance_ode_forward: retrodiction with J_y probing is not modeled");
  }
  stride = std::max<std::size_t>(1, stride);
  const auto steps = static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
  const double h = steps ? horizon / static_cast<double>(steps) : 0.0;
  VarianceCurve curve;
  curve.times.push_back(0.0);
  curve.v.push_back(v_init);
  double v = v_init;
  for (std::size_t s = 1; s <= steps; ++s) {
    const double k1 = riccati_rhs(cfg, branch, v);
    const double k2 = riccati_rhs(cfg, branch, v + 0.5 * h * k1);
    const double k3 = riccati_rhs(cfg, branch, v + 0.5 * h * k2);
    const double k4 = riccati_rhs(cfg, branch, v + h * k3);
    v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!(v > 0.0) || !std::isfinite(v)) throw NumericalError("variance_ode_forward: integration left v > 0");
    if (s % stride == 0 || s == steps) {
      curve.times.push_back(static_cast<double>(s) * h);
      curve.v.push_back(v);
    }
  }
  return curve;
}

double steady_variance_prediction(double kappa_sq, double gamma_tot, double v0, double eta) {
  return steady_variance_backaction(kappa_sq, 0.0, gamma_tot, v0, eta);
}

double steady_variance_retrodiction(double kappa_sq, double gamma_tot, double v0, double eta) {
  check_rates(kappa_sq, gamma_tot, v0, eta);
  const double r = kappa_sq * eta / gamma_tot;
  if (r == 0.0) return kInf;
  return (std::sqrt(1.0 + 4.0 * v0 * r) + 1.0) / (2.0 * r);
}

double combine_pqs(double v_p, double v_r) {
  if (!(v_p > 0.0) || !(v_r > 0.0)) throw DomainError("combine_pqs: variances must be positive");
  if (std::isinf(v_p)) return v_r;
  if (std::isinf(v_r)) return v_p;
  return 1.0 / (1.0 / v_p + 1.0 / v_r);
}

double steady_variance_backaction(double kappa_z_sq, double kappa_y_sq, double gamma_tot, double v0, double eta) {
  check_rates(kappa_z_sq, gamma_tot, v0, eta);
  if (!(kappa_y_sq >= 0.0)) throw DomainError("steady_variance_backaction: kappa_y_sq must be non-negative");
  // Rationalized (sqrt(1 + 4 V0 r + s) - 1) / (2 r): exact at r = 0 and free of cancellation.
  const double r = kappa_z_sq * eta / gamma_tot;
  const double s = kappa_z_sq * kappa_y_sq * eta / (gamma_tot * gamma_tot);
  return (2.0 * v0 + kappa_y_sq / (2.0 * gamma_tot)) / (std::sqrt(1.0 + 4.0 * v0 * r + s) + 1.0);
}

double discrete_steady_prior(const traj::TrajectoryConfig& cfg) {
  cfg.validate();
  const double c2 = cfg.readout_gain() * cfg.readout_gain();
  const double a = cfg.decay_factor();
  const double q = cfg.spin_noise_var();
  double v = cfg.stationary_spin_var();
  for (int it = 0; it < 10000000; ++it) {
    const double next = a * a * v * 0.5 / (0.5 + c2 * v) + q;
    if (std::abs(next - v) <= 1e-16 * v) return next;
    v = next;
  }
  return v;
}

double discrete_steady_retro(const traj::TrajectoryConfig& cfg) {
  cfg.validate();
  const double c2 = cfg.readout_gain() * cfg.readout_gain();
  if (c2 == 0.0) return kInf;
  const double a = cfg.decay_factor();
  const double q = cfg.spin_noise_var();
  double info = 0.0;
  for (int it = 0; it < 10000000; ++it) {
    const double next = 2.0 * c2 + a * a * info / (1.0 + q * info);
    if (std::abs(next - info) <= 1e-16 * next) return 1.0 / next;
    info = next;
  }
  return 1.0 / info;
}

FilterState kalman_filter(const traj::MeasurementRecord& record, const traj::TrajectoryConfig& cfg,
                          std::span<const double> signal) {
  cfg.validate();
  if (std::abs(record.tau - cfg.tau) > 1e-12 * cfg.tau) throw DomainError("kalman_filter: record tau differs from cfg");
  const std::size_t n = record.size();
  signal = checked_signal(signal, n);
  const double c = cfg.readout_gain();
  const double a = cfg.decay_factor();
  const double q = cfg.spin_noise_var();
  FilterState st;
  st.prior_mean.resize(n);
  st.prior_var.resize(n);
  st.post_mean.resize(n);
  st.post_var.resize(n);
  st.innovations.resize(n);
  st.innovation_var.resize(n);
  double m = 0.0;
  double v = cfg.stationary_spin_var();
  for (std::size_t i = 0; i < n; ++i) {
    st.prior_mean[i] = m;
    st.prior_var[i] = v;
    const double s = traj::TrajectoryConfig::kShotVar + c * c * v;
    const double nu = record.values[i] - c * m;
    const double k = c * v / s;
    st.innovations[i] = nu;
    st.innovation_var[i] = s;
    st.post_mean[i] = m + k * nu;
    st.post_var[i] = v * traj::TrajectoryConfig::kShotVar / s;
    const double u = signal.empty() ? 0.0 : cfg.g_b * signal[i] * cfg.tau;
    m = a * st.post_mean[i] + u;
    v = a * a * st.post_var[i] + q;
  }
  return st;
}

RetroState retrodiction_filter(const traj::MeasurementRecord& record, const traj::TrajectoryConfig& cfg,
                               std::span<const double> signal) {
  cfg.validate();
  if (std::abs(record.tau - cfg.tau) > 1e-12 * cfg.tau) throw DomainError("retrodiction_filter: record tau differs");
  const std::size_t n = record.size();
  signal = checked_signal(signal, n);
  const double c = cfg.readout_gain();
  const double a = cfg.decay_factor();
  const double q = cfg.spin_noise_var();
  const double r_inv = 1.0 / traj::TrajectoryConfig::kShotVar;
  RetroState st;
  st.info.resize(n);
  st.info_vec.resize(n);
  st.retro_var.resize(n);
  double info = 0.0;
  double vec = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    if (k + 1 < n) {
      const double u = signal.empty() ? 0.0 : cfg.g_b * signal[k] * cfg.tau;
      const double mfac = 1.0 / (1.0 + q * info);
      const double next_info = a * a * mfac * info;
      vec = a * mfac * (vec - info * u);
      info = next_info;
    }
    info += c * c * r_inv;
    vec += c * record.values[k] * r_inv;
    st.info[k] = info;
    st.info_vec[k] = vec;
    st.retro_var[k] = info > 0.0 ? 1.0 / info : kInf;
  }
  return st;
}

SignalModel signal_model(const signals::SignalSpec& spec) {
  if (const auto* ou = std::get_if<signals::OUParams>(&spec)) return *ou;
  if (const auto* w = std::get_if<signals::WhiteParams>(&spec)) {
    if (w->law != signals::LevelLaw::kGaussian) {
      throw DomainError("augmented_smoother: uniform levels are not a Gaussian signal model");
    }
    return HeldWhiteModel{w->hold, w->level_std * w->level_std};
  }
  throw DomainError("augmented_smoother: unsupported signal model (Gaussian OU or held white only)");
}

SmootherResult augmented_smoother(const traj::MeasurementRecord& record, const traj::TrajectoryConfig& cfg,
                                  const signals::SignalSpec& spec) {
  return augmented_smoother(record, cfg, signal_model(spec));
}

SmootherResult augmented_smoother(const traj::MeasurementRecord& record, const traj::TrajectoryConfig& cfg,
                                  const signals::OUParams& ou) {
  return augmented_smoother(record, cfg, SignalModel{ou});
}

SmootherResult augmented_smoother(const traj::MeasurementRecord& record, const traj::TrajectoryConfig& cfg,
                                  const SignalModel& model) {
  using M2 = Eigen::Matrix2d;
  using V2 = Eigen::Vector2d;
  cfg.validate();
  if (std::abs(record.tau - cfg.tau) > 1e-12 * cfg.tau) throw DomainError("augmented_smoother: record tau differs");
  const std::size_t n = record.size();
  if (n == 0) throw DomainError("augmented_smoother: empty record");

  double v_ss = 0.0;
  std::function<void(std::size_t, double&, double&)> transition;  // step i -> i+1: (f, q_b)
  if (const auto* ou = std::get_if<signals::OUParams>(&model)) {
    ou->validate();
    v_ss = ou->v_ss();
    if (!std::isfinite(v_ss)) throw DomainError("augmented_smoother: OU model without a stationary law");
    const double f = std::exp(-ou->beta * cfg.tau);
    const double qb = -v_ss * std::expm1(-2.0 * ou->beta * cfg.tau);
    transition = [f, qb](std::size_t, double& fi, double& qi) { fi = f; qi = qb; };
  } else {
    const auto& w = std::get<HeldWhiteModel>(model);
    if (!(w.level_var >= 0.0) || !(w.hold > 0.0)) throw DomainError("augmented_smoother: bad held-white model");
    v_ss = w.level_var;
    const auto steps = static_cast<std::size_t>(std::max(1.0, std::round(w.hold / cfg.tau)));
    transition = [steps, v = w.level_var](std::size_t i, double& fi, double& qi) {
      const bool boundary = (i + 1) % steps == 0;
      fi = boundary ? 0.0 : 1.0;
      qi = boundary ? v : 0.0;
    };
  }

  const double c = cfg.readout_gain();
  const double a = cfg.decay_factor();
  const double qp = cfg.spin_noise_var();
  const double r_inv = 1.0 / traj::TrajectoryConfig::kShotVar;
  const V2 h(0.0, c);
  auto fmat = [&](std::size_t i, M2& f, M2& q) {
    double fi = 0.0, qi = 0.0;
    transition(i, fi, qi);
    f << fi, 0.0, cfg.g_b * cfg.tau, a;
    q << qi, 0.0, 0.0, qp;
  };

  std::vector<V2> prior_mean(n);
  std::vector<M2> prior_cov(n);
  V2 m = V2::Zero();
  M2 p;
  p << v_ss, 0.0, 0.0, cfg.stationary_spin_var();
  M2 f, q;
  for (std::size_t i = 0; i < n; ++i) {
    prior_mean[i] = m;
    prior_cov[i] = p;
    const V2 ph = p * h;
    const double s = traj::TrajectoryConfig::kShotVar + h.dot(ph);
    const V2 k = ph / s;
    m += k * (record.values[i] - h.dot(m));
    p -= k * ph.transpose();
    p = 0.5 * (p + p.transpose()).eval();
    fmat(i, f, q);
    m = f * m;
    p = f * p * f.transpose() + q;
  }

  SmootherResult out;
  out.v_p = steady_variance_backaction(cfg.kappa_z_sq, cfg.kappa_y_sq, cfg.gamma_tot, cfg.v0, cfg.eta);
  out.v_r = steady_variance_retrodiction(cfg.kappa_z_sq, cfg.gamma_tot, cfg.v0, cfg.eta);
  out.v_pr = combine_pqs(out.v_p, out.v_r);
  out.b_est.resize(n);
  out.b_var.resize(n);
  out.p_est.resize(n);
  out.p_var.resize(n);

  M2 info = M2::Zero();
  V2 vec = V2::Zero();
  const M2 eye = M2::Identity();
  for (std::size_t k = n; k-- > 0;) {
    if (k + 1 < n) {
      fmat(k, f, q);
      const M2 gain = (eye + info * q).inverse();
      const M2 next = f.transpose() * gain * info * f;
      vec = f.transpose() * gain * vec;
      info = 0.5 * (next + next.transpose());
    }
    info += r_inv * h * h.transpose();
    vec += r_inv * record.values[k] * h;
    const M2 blend = (eye + prior_cov[k] * info).inverse();
    const M2 ps = blend * prior_cov[k];
    const V2 ms = blend * (prior_mean[k] + prior_cov[k] * vec);
    out.b_est[k] = ms(0);
    out.b_var[k] = ps(0, 0);
    out.p_est[k] = ms(1);
    out.p_var[k] = ps(1, 1);
  }
  return out;
}

double time_mode_weight(std::span<const double> segment, double t_first, double tau, double t0, double gamma_tot) {
  if (segment.empty()) throw DomainError("time_mode_weight: empty segment");
  if (!(gamma_tot >= 0.0)) throw DomainError("time_mode_weight: gamma_tot must be non-negative");
  CompensatedSum acc;
  for (std::size_t k = 0; k < segment.size(); ++k) {
    const double t = t_first + static_cast<double>(k) * tau;
    acc.add(std::exp(-gamma_tot * std::abs(t0 - t)) * segment[k]);
  }
  return acc.value();
}

Conditional1 conditional_variance_1(std::span<const double> m2, std::span<const double> m1) {
  if (m2.size() != m1.size()) throw DomainError("conditional_variance_1: sample counts differ");
  if (m2.size() < 2) throw DomainError("conditional_variance_1: need at least 2 pairs");
  const double v1 = variance(m1);
  if (!(v1 > 0.0)) throw NumericalError("conditional_variance_1: regressor has zero variance");
  const double v2 = variance(m2);
  const double c21 = covariance(m2, m1);
  Conditional1 r;
  r.alpha = c21 / v1;
  r.var_cond = std::max(0.0, v2 - c21 * r.alpha);
  return r;
}

Conditional2 conditional_variance_2(std::span<const double> m2, std::span<const double> m1,
                                    std::span<const double> m3) {
  if (m2.size() != m1.size() || m2.size() != m3.size()) throw DomainError("conditional_variance_2: sample counts differ");
  if (m2.size() < 3) throw DomainError("conditional_variance_2: need at least 3 triples");
  const double c11 = variance(m1);
  const double c33 = variance(m3);
  const double c13 = covariance(m1, m3);
  const double c21 = covariance(m2, m1);
  const double c23 = covariance(m2, m3);
  const double v2 = variance(m2);
  const double det = c11 * c33 - c13 * c13;
  const double tr = c11 + c33;
  const double disc = std::sqrt(std::max(0.0, 0.25 * (c11 - c33) * (c11 - c33) + c13 * c13));
  const double lmax = 0.5 * tr + disc;
  const double lmin = det / lmax;
  Conditional2 r;
  r.condition = lmin > 0.0 ? lmax / lmin : kInf;
  if (!(lmax > 0.0) || !(r.condition < 1e12)) {
    std::ostringstream os;
    os << "conditional_variance_2: singular regressor covariance (Cov11 = " << c11 << ", Cov33 = " << c33
       << ", Cov13 = " << c13 << ", condition number " << r.condition << ")";
    throw NumericalError(os.str());
  }
  r.alpha = (c21 * c33 - c23 * c13) / det;
  r.beta = (c23 * c11 - c21 * c13) / det;
  r.var_cond = std::max(0.0, v2 - (r.alpha * c21 + r.beta * c23));
  return r;
}

namespace {

struct WindowGeometry {
  std::size_t ns, ng, nv, width;
};

WindowGeometry geometry(const traj::TrajectoryConfig& cfg, const SegmentLayout& layout) {
  if (!(layout.seg_len > 0.0) || !(layout.ver_len > 0.0) || !(layout.gap >= 0.0)) {
    throw DomainError("segment layout: lengths must be positive and gap non-negative");
  }
  auto steps = [&](double len) { return static_cast<std::size_t>(std::llround(len / cfg.tau)); };
  WindowGeometry g{steps(layout.seg_len), steps(layout.gap), steps(layout.ver_len), 0};
  if (g.ns == 0 || g.nv == 0) throw DomainError("segment layout: segments shorter than one sample");
  g.width = 2 * g.ns + 2 * g.ng + g.nv;
  return g;
}

}  // namespace

SegmentStats segment_outcomes(const Matrix& records, const traj::TrajectoryConfig& cfg, const SegmentLayout& layout) {
  cfg.validate();
  const WindowGeometry g = geometry(cfg, layout);
  const auto n = static_cast<std::size_t>(records.cols());
  const std::size_t per_record = layout.tile ? n / g.width : (n >= g.width ? 1 : 0);
  if (per_record == 0) {
    std::ostringstream os;
    os << "segmentation infeasible: a window needs " << g.width << " samples, records have " << n;
    throw DomainError(os.str());
  }
  const auto rows = static_cast<std::size_t>(records.rows());
  SegmentStats st;
  st.m1.resize(rows * per_record);
  st.m2.resize(rows * per_record);
  st.m3.resize(rows * per_record);
  const double tau = cfg.tau;
  std::vector<double> row(n);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < n; ++i) row[i] = records(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i));
    for (std::size_t w = 0; w < per_record; ++w) {
      const std::size_t s1 = w * g.width;
      const std::size_t sv = s1 + g.ns + g.ng;
      const std::size_t s3 = sv + g.nv + g.ng;
      const double mid = (static_cast<double>(sv) + 0.5 * static_cast<double>(g.nv - 1)) * tau;
      const double t1 = layout.anchor == Anchor::kEdge ? static_cast<double>(s1 + g.ns - 1) * tau : mid;
      const double t3 = layout.anchor == Anchor::kEdge ? static_cast<double>(s3) * tau : mid;
      const std::span<const double> data(row);
      const std::size_t k = r * per_record + w;
      st.m1[k] = time_mode_weight(data.subspan(s1, g.ns), static_cast<double>(s1) * tau, tau, t1, cfg.gamma_tot);
      st.m3[k] = time_mode_weight(data.subspan(s3, g.ns), static_cast<double>(s3) * tau, tau, t3, cfg.gamma_tot);
      st.m2[k] = mean(data.subspan(sv, g.nv));
    }
  }
  st.var_m2 = variance(st.m2);
  const auto c1 = conditional_variance_1(st.m2, st.m1);
  st.alpha1 = c1.alpha;
  st.var_cond1 = c1.var_cond;
  const auto c2 = conditional_variance_2(st.m2, st.m1, st.m3);
  st.alpha = c2.alpha;
  st.beta = c2.beta;
  st.var_cond = c2.var_cond;
  return st;
}

namespace {

std::pair<double, std::size_t> verification_variance(const Matrix& records, const WindowGeometry& g,
                                                     const SegmentLayout& layout) {
  const auto n = static_cast<std::size_t>(records.cols());
  const std::size_t per = layout.tile ? n / g.width : (n >= g.width ? 1 : 0);
  if (per == 0) throw DomainError("segmentation infeasible for the reference batch");
  std::vector<double> m2;
  m2.reserve(static_cast<std::size_t>(records.rows()) * per);
  for (Eigen::Index r = 0; r < records.rows(); ++r) {
    for (std::size_t w = 0; w < per; ++w) {
      const auto sv = static_cast<Eigen::Index>(w * g.width + g.ns + g.ng);
      CompensatedSum acc;
      for (std::size_t j = 0; j < g.nv; ++j) acc.add(records(r, sv + static_cast<Eigen::Index>(j)));
      m2.push_back(acc.value() / static_cast<double>(g.nv));
    }
  }
  return {variance(m2), m2.size()};
}

}  // namespace

SqueezeReference squeeze_reference_from(const Matrix& light_records, const Matrix& css_records,
                                        const traj::TrajectoryConfig& cfg, const SegmentLayout& layout) {
  const WindowGeometry g = geometry(cfg, layout);
  const auto [light, n_light] = verification_variance(light_records, g, layout);
  const auto [css, n_css] = verification_variance(css_records, g, layout);
  return {light, css, n_light, n_css};
}

traj::TrajectoryConfig light_only(const traj::TrajectoryConfig& cfg) {
  traj::TrajectoryConfig c = cfg;
  c.kappa_z_sq = 0.0;
  c.kappa_y_sq = 0.0;
  return c;
}

traj::TrajectoryConfig coherent_state(const traj::TrajectoryConfig& cfg) {
  traj::TrajectoryConfig c = cfg;
  c.v0 = 0.5;
  c.kappa_y_sq = 0.0;
  return c;
}

SqueezeReference make_squeeze_reference(const traj::TrajectoryConfig& cfg, std::size_t n_records,
                                        std::size_t n_samples, const SegmentLayout& layout, std::uint64_t seed,
                                        unsigned threads) {
  const auto light = traj::simulate_zero_signal_batch(n_records, n_samples, light_only(cfg), derive_seed(seed, 0), threads);
  const auto css = traj::simulate_zero_signal_batch(n_records, n_samples, coherent_state(cfg), derive_seed(seed, 1), threads);
  return squeeze_reference_from(light.records, css.records, cfg, layout);
}

SqueezeResult squeezing_pipeline(const Matrix& records, const traj::TrajectoryConfig& cfg,
                                 const SegmentLayout& layout, const SqueezeReference& reference) {
  SqueezeResult out;
  out.stats = segment_outcomes(records, cfg, layout);
  out.reference = reference;
  out.samples = out.stats.m2.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double denom = reference.css_var - reference.light_var;
  auto normalized = [&](double v) {
    const double num = v - reference.light_var;
    return (denom > 0.0 && num > 0.0) ? 10.0 * std::log10(num / denom) : nan;
  };
  out.pred_db = normalized(out.stats.var_cond1);
  out.pr_db = normalized(out.stats.var_cond);
  auto rel_var_err = [](double v, std::size_t n, std::size_t dof_lost) {
    return n > dof_lost ? v * v * 2.0 / static_cast<double>(n - dof_lost) : kInf;
  };
  const double s_light = rel_var_err(reference.light_var, reference.light_samples, 1);
  const double s_css = rel_var_err(reference.css_var, reference.css_samples, 1);
  auto db_se = [&](double v, std::size_t dof_lost) {
    const double num = v - reference.light_var;
    const double s_num = rel_var_err(v, out.samples, dof_lost) + s_light;
    return 10.0 / std::log(10.0) * std::sqrt(s_num / (num * num) + (s_css + s_light) / (denom * denom));
  };
  out.pred_db_se = std::isnan(out.pred_db) ? nan : db_se(out.stats.var_cond1, 2);
  out.pr_db_se = std::isnan(out.pr_db) ? nan : db_se(out.stats.var_cond, 3);
  out.raw_pred_db = 10.0 * std::log10(out.stats.var_cond1 / out.stats.var_m2);
  out.raw_pr_db = 10.0 * std::log10(out.stats.var_cond / out.stats.var_m2);
  return out;
}

SqueezeResult squeezing_pipeline(const Matrix& records, const traj::TrajectoryConfig& cfg,
                                 const SegmentLayout& layout, std::uint64_t seed, unsigned threads) {
  const auto ref = make_squeeze_reference(cfg, static_cast<std::size_t>(records.rows()),
                                          static_cast<std::size_t>(records.cols()), layout, seed, threads);
  return squeezing_pipeline(records, cfg, layout, ref);
}

}  // namespace spintrack::est
