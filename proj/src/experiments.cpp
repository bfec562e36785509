#include "spintrack/experiments.hpp"

#include "spintrack/error.hpp"
#include "spintrack/estimation.hpp"
#include "spintrack/fisher.hpp"
#include "spintrack/metrics.hpp"
#include "spintrack/model.hpp"
#include "spintrack/parallel.hpp"
#include "spintrack/rng.hpp"
#include "spintrack/version.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace spintrack::exp {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Seed streams of spec.seed, one per independent random source.
enum Stream : std::uint64_t {
  kSignals = 1,
  kRecords = 2,
  kLightRef = 3,
  kCssRef = 4,
  kShuffle = 5,
  kSplit = 6,
  kAmplitudes = 7,
};

std::uint64_t stream(const ExperimentSpec& spec, Stream s, std::uint64_t sub = 0) {
  return derive_seed(derive_seed(spec.seed, s), sub);
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
T get_or(const json& j, const char* key, T def, const std::string& where) {
  if (!j.contains(key)) return def;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + ": '" + key + "' has the wrong type");
  }
}

// Driver settings live either flat in "analysis" or under analysis.<driver>.
class Settings {
 public:
  Settings(const ExperimentSpec& spec, const std::string& driver) : where_("analysis." + driver) {
    const auto& a = spec.analysis;
    j_ = a.contains(driver) && a.at(driver).is_object() ? a.at(driver) : a;
  }
  template <typename T>
  T get(const char* key, T def) const {
    return get_or<T>(j_, key, def, where_);
  }
  double positive(const char* key, double def) const {
    const double v = get<double>(key, def);
    if (!(v > 0.0)) throw ConfigError(where_ + ": '" + key + "' must be positive");
    return v;
  }
  std::size_t count(const char* key, std::size_t def) const {
    const auto v = get<std::size_t>(key, def);
    if (v == 0) throw ConfigError(where_ + ": '" + key + "' must be positive");
    return v;
  }

 private:
  json j_;
  std::string where_;
};

std::size_t steps_of(double len, double tau) { return static_cast<std::size_t>(std::llround(len / tau)); }

signals::OUParams ou_from_json(const json& j, const std::string& where) {
  check_keys(j, {"kind", "beta", "v_ss", "sigma_ou"}, where);
  const double beta = get_or<double>(j, "beta", 0.268, where);
  signals::OUParams p;
  if (j.contains("sigma_ou")) {
    if (j.contains("v_ss")) throw ConfigError(where + ": give either v_ss or sigma_ou");
    p.beta = beta;
    p.sigma_ou = get_or<double>(j, "sigma_ou", 0.0, where);
  } else {
    p = signals::OUParams::from_stationary(beta, get_or<double>(j, "v_ss", 6.12, where));
  }
  return p;
}

json ou_to_json(const signals::OUParams& p) { return {{"beta", p.beta}, {"sigma_ou", p.sigma_ou}}; }

traj::TrajectoryConfig system_from_json(const json& j) {
  check_keys(j, {"tau", "kappa_z_sq", "kappa_y_sq", "eta", "gamma_tot", "v0", "g_b", "lowpass_khz"}, "system");
  traj::TrajectoryConfig c;
  c.tau = get_or(j, "tau", c.tau, "system");
  c.kappa_z_sq = get_or(j, "kappa_z_sq", c.kappa_z_sq, "system");
  c.kappa_y_sq = get_or(j, "kappa_y_sq", c.kappa_y_sq, "system");
  c.eta = get_or(j, "eta", c.eta, "system");
  c.gamma_tot = get_or(j, "gamma_tot", c.gamma_tot, "system");
  c.v0 = get_or(j, "v0", c.v0, "system");
  c.g_b = get_or(j, "g_b", c.g_b, "system");
  c.lowpass_khz = get_or(j, "lowpass_khz", c.lowpass_khz, "system");
  c.validate();
  return c;
}

json system_to_json(const traj::TrajectoryConfig& c) {
  return {{"tau", c.tau},        {"kappa_z_sq", c.kappa_z_sq}, {"kappa_y_sq", c.kappa_y_sq},
          {"eta", c.eta},        {"gamma_tot", c.gamma_tot},   {"v0", c.v0},
          {"g_b", c.g_b},        {"lowpass_khz", c.lowpass_khz}};
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::vector<signals::SignalTrace> make_signals(const ExperimentSpec& spec, std::size_t count, std::size_t n,
                                               std::uint64_t seed) {
  const auto sig = parse_signal(spec.signal);
  if (!sig) {
    std::vector<signals::SignalTrace> out(count, signals::zero_signal(n, spec.system.tau));
    for (std::size_t j = 0; j < count; ++j) out[j].seed = derive_seed(seed, j);
    return out;
  }
  return signals::generate_batch(*sig, count, n, spec.system.tau, seed, spec.threads);
}

std::optional<est::SignalModel> gaussian_model(const ExperimentSpec& spec) {
  const auto sig = parse_signal(spec.signal);
  if (!sig) return std::nullopt;
  try {
    return est::signal_model(*sig);
  } catch (const DomainError&) {
    return std::nullopt;
  }
}

traj::MeasurementRecord row_record(const Matrix& records, Eigen::Index r, double tau) {
  traj::MeasurementRecord rec;
  rec.tau = tau;
  rec.values.resize(static_cast<std::size_t>(records.cols()));
  for (Eigen::Index i = 0; i < records.cols(); ++i) rec.values[static_cast<std::size_t>(i)] = records(r, i);
  return rec;
}

}  // namespace

// ---------------------------------------------------------------- spec

ExperimentSpec ExperimentSpec::from_json(const json& j) {
  check_keys(j, {"name", "seed", "threads", "output", "system", "signal", "analysis"}, "spec");
  ExperimentSpec s;
  s.name = get_or<std::string>(j, "name", s.name, "spec");
  s.seed = get_or<std::uint64_t>(j, "seed", s.seed, "spec");
  s.threads = get_or<unsigned>(j, "threads", s.threads, "spec");
  s.output = get_or<std::string>(j, "output", s.output, "spec");
  s.system = system_from_json(j.contains("system") ? j.at("system") : json::object());
  if (j.contains("signal")) {
    s.signal = j.at("signal");
    parse_signal(s.signal);  // validates
  }
  if (j.contains("analysis")) {
    if (!j.at("analysis").is_object()) throw ConfigError("spec: analysis must be an object");
    s.analysis = j.at("analysis");
  }
  return s;
}

json ExperimentSpec::to_json() const {
  return {{"name", name},     {"seed", seed},         {"threads", threads}, {"output", output},
          {"system", system_to_json(system)}, {"signal", signal}, {"analysis", analysis}};
}

std::string ExperimentSpec::hash() const {
  const json canonical = {{"name", name}, {"seed", seed}, {"system", system_to_json(system)},
                          {"signal", signal}, {"analysis", analysis}};
  return data::hex64(data::fnv1a64(canonical.dump()));
}

ExperimentSpec load_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return ExperimentSpec::from_json(j);
}

std::optional<signals::SignalSpec> parse_signal(const json& j) {
  if (!j.is_object()) throw ConfigError("signal: expected an object");
  const auto kind = get_or<std::string>(j, "kind", "zero", "signal");
  try {
    if (kind == "zero") {
      check_keys(j, {"kind"}, "signal");
      return std::nullopt;
    }
    if (kind == "ou") {
      auto p = ou_from_json(j, "signal");
      p.validate();
      return p;
    }
    if (kind == "dou") {
      check_keys(j, {"kind", "ou1", "ou2", "omega_d"}, "signal");
      signals::DOUParams p;
      p.ou1 = ou_from_json(j.contains("ou1") ? j.at("ou1") : json::object(), "signal.ou1");
      p.ou2 = ou_from_json(j.contains("ou2") ? j.at("ou2") : json::object(), "signal.ou2");
      p.omega_d = get_or<double>(j, "omega_d", 0.0, "signal");
      p.validate();
      return p;
    }
    if (kind == "white") {
      check_keys(j, {"kind", "hold", "level_std", "law"}, "signal");
      signals::WhiteParams p;
      p.hold = get_or(j, "hold", p.hold, "signal");
      p.level_std = get_or(j, "level_std", p.level_std, "signal");
      const auto law = get_or<std::string>(j, "law", "gaussian", "signal");
      if (law != "gaussian" && law != "uniform") throw ConfigError("signal: law must be gaussian or uniform");
      p.law = law == "uniform" ? signals::LevelLaw::kUniform : signals::LevelLaw::kGaussian;
      p.validate();
      return p;
    }
    if (kind == "pulses") {
      check_keys(j, {"kind", "width", "amp_low", "amp_high", "n_pulses", "duration"}, "signal");
      signals::PulseParams p;
      p.width = get_or(j, "width", p.width, "signal");
      p.amp_low = get_or(j, "amp_low", p.amp_low, "signal");
      p.amp_high = get_or(j, "amp_high", p.amp_high, "signal");
      p.n_pulses = get_or(j, "n_pulses", p.n_pulses, "signal");
      p.duration = get_or(j, "duration", p.duration, "signal");
      p.validate();
      return p;
    }
    if (kind == "hmm") {
      check_keys(j, {"kind", "n_states", "p_stay", "b_max", "hold", "levels", "transition", "initial_state"}, "signal");
      signals::HMMParams p;
      if (j.contains("levels") || j.contains("transition")) {
        p.levels = get_or<std::vector<double>>(j, "levels", {}, "signal");
        const auto rows = get_or<std::vector<std::vector<double>>>(j, "transition", {}, "signal");
        p.transition = Matrix::Zero(static_cast<Eigen::Index>(rows.size()),
                                    static_cast<Eigen::Index>(rows.empty() ? 0 : rows[0].size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
          if (rows[r].size() != rows.size()) throw ConfigError("signal: transition matrix must be square");
          for (std::size_t c = 0; c < rows[r].size(); ++c) {
            p.transition(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
          }
        }
        p.hold = get_or(j, "hold", p.hold, "signal");
      } else {
        p = signals::HMMParams::make_default(get_or<std::size_t>(j, "n_states", 10, "signal"),
                                             get_or<double>(j, "p_stay", 0.9, "signal"),
                                             get_or<double>(j, "b_max", 3.0, "signal"),
                                             get_or<double>(j, "hold", 0.740, "signal"));
      }
      if (j.contains("initial_state")) p.initial_state = get_or<std::size_t>(j, "initial_state", 0, "signal");
      p.validate();
      return p;
    }
  } catch (const DomainError& e) {
    throw ConfigError(std::string("signal: ") + e.what());
  }
  throw ConfigError("signal: unknown kind '" + kind + "'");
}

json signal_to_json(const signals::SignalSpec& spec) {
  return std::visit(
      [](const auto& p) -> json {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, signals::OUParams>) {
          json j = ou_to_json(p);
          j["kind"] = "ou";
          return j;
        } else if constexpr (std::is_same_v<P, signals::DOUParams>) {
          return {{"kind", "dou"}, {"ou1", ou_to_json(p.ou1)}, {"ou2", ou_to_json(p.ou2)}, {"omega_d", p.omega_d}};
        } else if constexpr (std::is_same_v<P, signals::WhiteParams>) {
          return {{"kind", "white"}, {"hold", p.hold}, {"level_std", p.level_std},
                  {"law", p.law == signals::LevelLaw::kUniform ? "uniform" : "gaussian"}};
        } else if constexpr (std::is_same_v<P, signals::PulseParams>) {
          return {{"kind", "pulses"}, {"width", p.width},       {"amp_low", p.amp_low},
                  {"amp_high", p.amp_high}, {"n_pulses", p.n_pulses}, {"duration", p.duration}};
        } else {
          std::vector<std::vector<double>> rows(p.n_states(), std::vector<double>(p.n_states()));
          for (std::size_t r = 0; r < p.n_states(); ++r) {
            for (std::size_t c = 0; c < p.n_states(); ++c) {
              rows[r][c] = p.transition(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
            }
          }
          json j = {{"kind", "hmm"}, {"levels", p.levels}, {"transition", rows}, {"hold", p.hold}};
          if (p.initial_state) j["initial_state"] = *p.initial_state;
          return j;
        }
      },
      spec);
}

// ---------------------------------------------------------------- tables

void Table::add(std::string label, std::vector<double> values) {
  if (values.size() != columns.size()) throw DomainError("Table::add: row width differs from the header");
  rows.push_back({std::move(label), std::move(values)});
}

const Row& Table::row(const std::string& label) const {
  for (const auto& r : rows) {
    if (r.label == label) return r;
  }
  throw DomainError("table " + name + " has no row '" + label + "'");
}

std::size_t Table::column(const std::string& col) const {
  for (std::size_t k = 0; k < columns.size(); ++k) {
    if (columns[k] == col) return k;
  }
  throw DomainError("table " + name + " has no column '" + col + "'");
}

double Table::at(const std::string& label, const std::string& col) const { return row(label).values[column(col)]; }

void write_csv(std::ostream& os, const Table& table, const ExperimentSpec& spec) {
  os << "# spintrack " << kVersion << '\n';
  os << "# table " << table.name << '\n';
  os << "# experiment " << spec.name << '\n';
  os << "# spec_hash " << spec.hash() << '\n';
  os << "# seed " << spec.seed << '\n';
  for (const auto& n : table.notes) os << "# " << n << '\n';
  os << "label";
  for (const auto& c : table.columns) os << ',' << c;
  os << '\n';
  for (const auto& r : table.rows) {
    os << r.label;
    for (double v : r.values) os << ',' << format_number(v);
    os << '\n';
  }
}

std::string to_csv(const Table& table, const ExperimentSpec& spec) {
  std::ostringstream os;
  write_csv(os, table, spec);
  return os.str();
}

// ---------------------------------------------------------------- squeezing

Table run_squeezing_sweep(const ExperimentSpec& spec) {
  const Settings s(spec, "squeeze");
  const auto& cfg = spec.system;
  const std::size_t n_records = s.count("n_records", 10000);
  const std::size_t n = steps_of(s.positive("record_len", 20.0), cfg.tau);
  est::SegmentLayout base;
  base.seg_len = s.positive("seg_len", 1.5);
  base.gap = s.get<double>("gap", 0.3);
  base.ver_len = s.positive("ver_len", 0.3);
  const auto anchor = s.get<std::string>("anchor", "edge");
  if (anchor != "edge" && anchor != "midpoint") throw ConfigError("analysis.squeeze: anchor must be edge or midpoint");
  base.anchor = anchor == "edge" ? est::Anchor::kEdge : est::Anchor::kMidpoint;
  base.tile = s.get<bool>("tile", true);
  const auto seg_sweep = s.get<std::vector<double>>("seg_sweep", {0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.5, 6.0});
  const auto gap_sweep = s.get<std::vector<double>>("gap_sweep", {0.0, 0.1, 0.2, 0.3, 0.5, 0.8, 1.2});
  const bool control = s.get<bool>("control", true);

  const auto records = traj::simulate_zero_signal_batch(n_records, n, cfg, stream(spec, kRecords), spec.threads);
  const auto light = traj::simulate_zero_signal_batch(n_records, n, est::light_only(cfg), stream(spec, kLightRef),
                                                      spec.threads);
  const auto css = traj::simulate_zero_signal_batch(n_records, n, est::coherent_state(cfg), stream(spec, kCssRef),
                                                    spec.threads);

  const double v_p = est::steady_variance_backaction(cfg.kappa_z_sq, cfg.kappa_y_sq, cfg.gamma_tot, cfg.v0, cfg.eta);
  const double v_pr = est::combine_pqs(v_p, est::steady_variance_retrodiction(cfg.kappa_z_sq, cfg.gamma_tot, cfg.v0, cfg.eta));
  Table t;
  t.name = "squeezing";
  t.columns = {"seg_len",    "gap",          "ver_len",      "kappa_z_sq", "samples",  "pred_db",  "pr_db",
               "raw_pred_db", "raw_pr_db",   "pred_db_se", "pr_db_se", "bound_pred_db", "bound_pr_db", "var_m2", "var_cond1", "var_cond2",
               "alpha1",     "alpha",        "beta"};
  t.notes.push_back("pred_db/pr_db: 10 log10((Var(m2|.) - LN) / (Var_css(m2) - LN)); raw_*: 10 log10(Var(m2|.) / Var(m2))");
  auto emit = [&](const std::string& label, const Matrix& recs, const traj::TrajectoryConfig& c,
                  const est::SegmentLayout& layout) {
    const auto ref = est::squeeze_reference_from(light.records, css.records, cfg, layout);
    const auto r = est::squeezing_pipeline(recs, c, layout, ref);
    t.add(label, {layout.seg_len, layout.gap, layout.ver_len, c.kappa_z_sq, static_cast<double>(r.samples), r.pred_db,
                  r.pr_db, r.raw_pred_db, r.raw_pr_db, r.pred_db_se, r.pr_db_se, metrics::squeezing_db(v_p, 0.5), metrics::squeezing_db(v_pr, 0.5),
                  r.stats.var_m2, r.stats.var_cond1, r.stats.var_cond, r.stats.alpha1, r.stats.alpha, r.stats.beta});
  };
  for (double seg : seg_sweep) {
    auto layout = base;
    layout.seg_len = seg;
    emit("duration", records.records, cfg, layout);
  }
  for (double gap : gap_sweep) {
    auto layout = base;
    layout.gap = gap;
    emit("gap", records.records, cfg, layout);
  }
  if (control) emit("control", light.records, est::light_only(cfg), base);
  return t;
}

// ---------------------------------------------------------------- pulses

Table run_pulse_magnetometer(const ExperimentSpec& spec) {
  const Settings s(spec, "pulse");
  const auto& cfg = spec.system;
  cfg.validate();
  const std::size_t n_runs = s.count("n_runs", 10000);
  const std::size_t per_run = s.count("pulses_per_run", 10);
  const std::size_t pre_n = steps_of(s.positive("pre_len", 5.0), cfg.tau);
  const std::size_t post_n = steps_of(s.positive("post_len", 0.1), cfg.tau);
  const std::size_t width_n = std::max<std::size_t>(1, steps_of(s.positive("width", cfg.tau), cfg.tau));
  const std::size_t rest_n = steps_of(s.get<double>("rest", 1.0), cfg.tau);
  const auto gap_sweep = s.get<std::vector<double>>("gap_sweep", {0.0, 0.3, 1.0, 2.0, 4.0, 8.0});
  double amp_low = 0.0, amp_high = 10.0;
  if (const auto sig = parse_signal(spec.signal); sig && std::holds_alternative<signals::PulseParams>(*sig)) {
    amp_low = std::get<signals::PulseParams>(*sig).amp_low;
    amp_high = std::get<signals::PulseParams>(*sig).amp_high;
  }
  amp_low = s.get<double>("amp_low", amp_low);
  amp_high = s.get<double>("amp_high", amp_high);
  if (pre_n == 0 || post_n == 0) throw ConfigError("analysis.pulse: windows shorter than one sample");
  if (amp_high < amp_low) throw ConfigError("analysis.pulse: amp_high < amp_low");

  const double c = cfg.readout_gain();
  const double a = cfg.decay_factor();
  // Response of the post-window mean to a unit-amplitude pulse.
  double gain = 0.0;
  {
    double p = 0.0;
    CompensatedSum acc;
    for (std::size_t i = 0; i < width_n + post_n; ++i) {
      if (i >= width_n) acc.add(c * p);
      p = a * p + (i < width_n ? cfg.g_b * cfg.tau : 0.0);
    }
    gain = acc.value() / static_cast<double>(post_n);
  }
  if (!(gain > 0.0)) throw ConfigError("analysis.pulse: the post window carries no pulse response (kappa or g_b is 0)");

  const double v_p = est::steady_variance_backaction(cfg.kappa_z_sq, cfg.kappa_y_sq, cfg.gamma_tot, cfg.v0, cfg.eta);
  const double ln = traj::TrajectoryConfig::kShotVar / static_cast<double>(post_n);
  Table t;
  t.name = "pulse";
  t.columns = {"gap",          "pulses",      "gain",        "var_uncond_pt2", "var_cond_pt2", "ratio_raw",
               "ratio_atomic", "ratio_analytic", "mean_err_uncond", "mean_err_cond", "se_mean_err", "alpha"};
  t.notes.push_back("ratio_atomic: (Var(e|pre) - LN) / (Var(e) - LN), LN = 1/(2 n_post); ratio_analytic: V(gap)/V0");

  for (std::size_t g = 0; g < gap_sweep.size(); ++g) {
    const double gap = gap_sweep[g];
    if (!(gap >= 0.0)) throw ConfigError("analysis.pulse: gaps must be non-negative");
    const std::size_t gap_n = steps_of(gap, cfg.tau);
    const std::size_t slot = pre_n + gap_n + width_n + post_n + rest_n;
    const std::size_t n = slot * per_run;
    std::vector<double> err(n_runs * per_run), pred(n_runs * per_run), amp(n_runs * per_run);
    parallel_for(n_runs, spec.threads, [&](std::size_t run) {
      Rng amp_rng(derive_seed(stream(spec, kAmplitudes, g), run));
      signals::SignalTrace sig = signals::zero_signal(n, cfg.tau);
      sig.kind = signals::SignalKind::kPulses;
      sig.seed = derive_seed(stream(spec, kSignals, g), run);
      std::vector<double> amps(per_run);
      for (std::size_t k = 0; k < per_run; ++k) {
        amps[k] = amp_rng.uniform(amp_low, amp_high);
        // Y at the first pulse sample precedes the kick, so it closes the pre window.
        const std::size_t start = k * slot + pre_n - 1 + gap_n;
        for (std::size_t i = 0; i < width_n; ++i) sig.values[start + i] = amps[k];
      }
      const auto rec = traj::simulate_record(sig, cfg, derive_seed(stream(spec, kRecords, g), run)).record;
      for (std::size_t k = 0; k < per_run; ++k) {
        traj::MeasurementRecord pre;
        pre.tau = cfg.tau;
        pre.values.assign(rec.values.begin() + static_cast<std::ptrdiff_t>(k * slot),
                          rec.values.begin() + static_cast<std::ptrdiff_t>(k * slot + pre_n));
        const auto fs = est::kalman_filter(pre, cfg);
        const std::size_t post = k * slot + pre_n - 1 + gap_n + width_n;
        CompensatedSum acc;
        for (std::size_t i = 0; i < post_n; ++i) acc.add(rec.values[post + i]);
        const std::size_t idx = run * per_run + k;
        err[idx] = acc.value() / static_cast<double>(post_n) - gain * amps[k];
        pred[idx] = fs.post_mean.back();
        amp[idx] = amps[k];
      }
    });
    const double var_u = variance(err);
    const auto cond = est::conditional_variance_1(err, pred);
    CompensatedSum mu, mc;
    for (std::size_t i = 0; i < err.size(); ++i) {
      mu.add(err[i]);
      mc.add(err[i] - cond.alpha * pred[i]);
    }
    const double cnt = static_cast<double>(err.size());
    const double v_gap = cfg.v0 + (v_p - cfg.v0) * std::exp(-2.0 * cfg.gamma_tot * gap);
    t.add("gap", {gap, cnt, gain, var_u / (gain * gain), cond.var_cond / (gain * gain), cond.var_cond / var_u,
                  (cond.var_cond - ln) / (var_u - ln), v_gap / cfg.v0, mu.value() / cnt / gain, mc.value() / cnt / gain,
                  std::sqrt(var_u / cnt) / gain, cond.alpha});
  }
  return t;
}

// ---------------------------------------------------------------- OU tracking

namespace {

struct TrackStats {
  double mse = 0.0;
  double mean_b_var = 0.0;
  double latent_err = 0.0;  // prediction error variance of p (kalman prior)
};

// Smoother MSE and mean posterior variance over bins [lo, hi) of every row.
TrackStats track_batch(const traj::Batch& batch, const traj::TrajectoryConfig& cfg, const est::SignalModel& model,
                       std::size_t lo, std::size_t hi, unsigned threads) {
  const std::size_t m = batch.rows();
  std::vector<double> se(m), bv(m);
  parallel_for(m, threads, [&](std::size_t r) {
    const auto rec = row_record(batch.records, static_cast<Eigen::Index>(r), cfg.tau);
    const auto res = est::augmented_smoother(rec, cfg, model);
    CompensatedSum e, v;
    for (std::size_t i = lo; i < hi; ++i) {
      const double d = res.b_est[i] - batch.signals(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i));
      e.add(d * d);
      v.add(res.b_var[i]);
    }
    se[r] = e.value();
    bv[r] = v.value();
  });
  CompensatedSum e, v;
  for (std::size_t r = 0; r < m; ++r) {
    e.add(se[r]);
    v.add(bv[r]);
  }
  const double cnt = static_cast<double>(m * (hi - lo));
  return {e.value() / cnt, v.value() / cnt, 0.0};
}

}  // namespace

Table run_ou_tracking(const ExperimentSpec& spec) {
  const Settings s(spec, "track");
  const auto& cfg = spec.system;
  cfg.validate();
  double v_ss = 6.12;
  if (const auto sig = parse_signal(spec.signal); sig && std::holds_alternative<signals::OUParams>(*sig)) {
    v_ss = std::get<signals::OUParams>(*sig).v_ss();
  }
  v_ss = s.get<double>("v_ss", v_ss);
  const std::size_t n_traces = s.count("n_traces", 400);
  const std::size_t n = steps_of(s.positive("record_len", 20.0), cfg.tau);
  const std::size_t margin = steps_of(s.get<double>("margin", 2.0), cfg.tau);
  if (2 * margin >= n) throw ConfigError("analysis.track: margin leaves no interior bins");
  const auto betas = s.get<std::vector<double>>("beta_sweep", {0.01, 0.05, 0.1, 0.268, 0.5, 1.0, 2.0, 5.0});

  Table t;
  t.name = "track";
  t.columns = {"beta", "v_ss", "mse", "mean_b_var", "mse_over_vss", "mse_over_b_var"};
  for (std::size_t k = 0; k < betas.size(); ++k) {
    const auto ou = signals::OUParams::from_stationary(betas[k], v_ss);
    const auto sigs = signals::generate_batch(ou, n_traces, n, cfg.tau, stream(spec, kSignals, k), spec.threads);
    const auto batch = traj::simulate_batch(sigs, cfg, stream(spec, kRecords, k), spec.threads);
    const auto st = track_batch(batch, cfg, ou, margin, n - margin, spec.threads);
    t.add("beta", {betas[k], v_ss, st.mse, st.mean_b_var, st.mse / v_ss, st.mse / st.mean_b_var});
  }
  return t;
}

// ---------------------------------------------------------------- back-action

Table run_backaction_sweep(const ExperimentSpec& spec) {
  const Settings s(spec, "backaction");
  const std::size_t n_records = s.count("n_records", 2000);
  const std::size_t n = steps_of(s.positive("record_len", 10.0), spec.system.tau);
  const std::size_t burn = steps_of(s.get<double>("burn_in", 3.0), spec.system.tau);
  if (burn >= n) throw ConfigError("analysis.backaction: burn_in exceeds the record");
  const auto sweep = s.get<std::vector<double>>("kappa_y_sq_sweep", {0.0, 0.6, 1.2, 1.8, 2.4, 3.0});
  const auto model = gaussian_model(spec);

  Table t;
  t.name = "backaction";
  t.columns = {"kappa_y_sq", "cond_noise", "analytic_noise", "discrete_noise", "rel_err", "mse", "mean_b_var"};
  t.notes.push_back("noise columns are conditional variances of p divided by the coherent-state value 1/2");
  for (std::size_t k = 0; k < sweep.size(); ++k) {
    traj::TrajectoryConfig cfg = spec.system;
    cfg.kappa_y_sq = sweep[k];
    cfg.validate();
    const auto sigs = make_signals(spec, n_records, n, stream(spec, kSignals, k));
    const auto batch = traj::simulate_batch(sigs, cfg, stream(spec, kRecords, k), spec.threads, true);
    std::vector<double> err(n_records);
    parallel_for(n_records, spec.threads, [&](std::size_t r) {
      const auto rec = row_record(batch.records, static_cast<Eigen::Index>(r), cfg.tau);
      const auto fs = est::kalman_filter(rec, cfg, sigs[r].values);
      CompensatedSum acc;
      for (std::size_t i = burn; i < n; ++i) {
        const double d = (*batch.latent)(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) - fs.prior_mean[i];
        acc.add(d * d);
      }
      err[r] = acc.value();
    });
    CompensatedSum acc;
    for (double e : err) acc.add(e);
    const double cond = acc.value() / static_cast<double>(n_records * (n - burn)) / 0.5;
    const double analytic =
        est::steady_variance_backaction(cfg.kappa_z_sq, cfg.kappa_y_sq, cfg.gamma_tot, cfg.v0, cfg.eta) / 0.5;
    double mse = kNaN, bvar = kNaN;
    if (model) {
      const auto st = track_batch(batch, cfg, *model, burn, n - burn > burn ? n - burn : n, spec.threads);
      mse = st.mse;
      bvar = st.mean_b_var;
    }
    t.add("kappa_y_sq", {cfg.kappa_y_sq, cond, analytic, est::discrete_steady_prior(cfg) / 0.5, cond / analytic - 1.0,
                         mse, bvar});
  }
  return t;
}

// ---------------------------------------------------------------- rearrangement

Table run_rearrangement(const ExperimentSpec& spec) {
  const Settings s(spec, "rearrange");
  const auto& cfg = spec.system;
  cfg.validate();
  const std::size_t n_signals = s.count("n_signals", 40);
  const std::size_t reps = s.count("repetitions", 50);
  const std::size_t factor = s.count("bin_factor", 5);
  const std::size_t points = s.count("n_points", 400);
  const auto degrees = s.get<std::vector<double>>("degrees", {0.0, 1.0 / 3.0, 0.5, 1.0});
  if (reps < 2 || points < 3) throw ConfigError("analysis.rearrange: need at least 2 repetitions and 3 points");
  const std::size_t n = points * factor;
  const double tau_point = cfg.tau * static_cast<double>(factor);

  // Each signal realization is applied `reps` times with fresh spin and shot noise.
  const auto base = make_signals(spec, n_signals, n, stream(spec, kSignals));
  std::vector<signals::SignalTrace> sigs;
  sigs.reserve(n_signals * reps);
  for (const auto& b : base) {
    for (std::size_t r = 0; r < reps; ++r) sigs.push_back(b);
  }
  const auto batch = traj::simulate_batch(sigs, cfg, stream(spec, kRecords), spec.threads);
  const Matrix z = traj::bin_records(batch.records, factor);

  const auto budget = metrics::rearrangement_budget(traj::TrajectoryConfig::kShotVar, cfg.eta * cfg.kappa_z_sq,
                                                    tau_point, cfg.v0);
  Table t;
  t.name = "rearrange";
  t.columns = {"degree", "mse", "se_mse", "ratio", "se_ratio", "budget_ratio", "lag1_corr", "ln", "an"};
  t.notes.push_back("mse: variance of the difference estimator z[k+1] - z[k] about its group mean (canonical units)");

  struct Result {
    double mse, se, lag1;
  };
  auto evaluate = [&](const Matrix& zz) {
    const auto groups = n_signals;
    std::vector<double> group_mse(groups);
    CompensatedSum c01, c00;
    for (std::size_t g = 0; g < groups; ++g) {
      const auto blk = zz.middleRows(static_cast<Eigen::Index>(g * reps), static_cast<Eigen::Index>(reps));
      const Matrix resid = blk.rowwise() - blk.colwise().mean();
      const Matrix d = resid.rightCols(resid.cols() - 1) - resid.leftCols(resid.cols() - 1);
      group_mse[g] = d.squaredNorm() / static_cast<double>(d.cols()) / static_cast<double>(reps - 1);
      c01.add((resid.leftCols(resid.cols() - 1).array() * resid.rightCols(resid.cols() - 1).array()).sum());
      c00.add(resid.squaredNorm());
    }
    const double mse = mean(group_mse);
    const double se = groups > 1 ? std::sqrt(variance(group_mse) / static_cast<double>(groups)) : kNaN;
    const double lag1 = c01.value() / c00.value() * static_cast<double>(points) / static_cast<double>(points - 1);
    return Result{mse, se, lag1};
  };
  std::optional<Result> ref;
  for (std::size_t k = 0; k < degrees.size(); ++k) {
    const auto deg = traj::rearrangement_from_degree(degrees[k]);
    const Matrix zz = traj::rearrange_records(z, reps, deg, stream(spec, kShuffle, k));
    const auto r = evaluate(zz);
    if (!ref) ref = evaluate(z);
    const double ratio = r.mse / ref->mse;
    const double se_ratio = ratio * std::hypot(r.se / r.mse, ref->se / ref->mse);
    t.add("degree", {traj::degree_of(deg), r.mse, r.se, ratio, se_ratio, budget.ratio(), r.lag1,
                     traj::TrajectoryConfig::kShotVar, budget.an});
  }
  return t;
}

// ---------------------------------------------------------------- Fisher

Table run_fisher(const ExperimentSpec& spec) {
  const Settings s(spec, "fisher");
  const auto& cfg = spec.system;
  cfg.validate();
  fisher::FisherConfig fc;
  fc.m = s.count("m", 20000);
  fc.d = s.count("d", 200);
  fc.ridge = s.get<double>("ridge", fc.ridge);
  const std::size_t lo = s.get<std::size_t>("bin_lo", fc.d / 4);
  const std::size_t hi = s.get<std::size_t>("bin_hi", fc.d - fc.d / 4);
  const std::size_t stride = s.count("bin_stride", 1);
  if (lo >= hi || hi > fc.d) throw ConfigError("analysis.fisher: need bin_lo < bin_hi <= d");
  for (std::size_t i = lo; i < hi; i += stride) fc.target_bins.push_back(i);
  fc.validate();

  const auto sigs = make_signals(spec, fc.m, fc.d, stream(spec, kSignals));
  const auto batch = traj::simulate_batch(sigs, cfg, stream(spec, kRecords), spec.threads);
  const auto res = fisher::fisher_analysis(batch.records, batch.signals, fc, spec.threads);
  std::vector<double> b_var(fc.d, kNaN);
  if (const auto model = gaussian_model(spec)) {
    b_var = est::augmented_smoother(row_record(batch.records, 0, cfg.tau), cfg, *model).b_var;
  }
  Table t;
  t.name = "fisher";
  t.columns = {"bin", "time_ms", "f", "crb", "crb_single", "smoother_b_var", "rel_diff", "condition", "ridge_used"};
  t.notes.push_back("crb = 1/(m f); crb_single = 1/f; rel_diff = crb_single / smoother_b_var - 1");
  for (std::size_t k = 0; k < res.bins.size(); ++k) {
    const std::size_t i = res.bins[k];
    t.add("bin", {static_cast<double>(i), static_cast<double>(i) * cfg.tau, res.f[k], res.crb[k], res.crb_single[k],
                  b_var[i], res.crb_single[k] / b_var[i] - 1.0, res.condition[k], res.ridge_used[k]});
  }
  return t;
}

// ---------------------------------------------------------------- report

Table run_report(const ExperimentSpec& spec) {
  const auto& c = spec.system;
  c.validate();
  Table t;
  t.name = "report";
  t.columns = {"value"};
  const double v_p = est::steady_variance_prediction(c.kappa_z_sq, c.gamma_tot, c.v0, c.eta);
  const double v_r = est::steady_variance_retrodiction(c.kappa_z_sq, c.gamma_tot, c.v0, c.eta);
  const double v_pr = est::combine_pqs(v_p, v_r);
  t.add("v_p", {v_p});
  t.add("v_r", {v_r});
  t.add("v_pr", {v_pr});
  t.add("v_p_db", {metrics::squeezing_db(v_p, 0.5)});
  t.add("v_pr_db", {metrics::squeezing_db(v_pr, 0.5)});
  t.add("v_backaction", {est::steady_variance_backaction(c.kappa_z_sq, c.kappa_y_sq, c.gamma_tot, c.v0, c.eta)});
  t.add("discrete_prior", {est::discrete_steady_prior(c)});
  t.add("discrete_retro", {est::discrete_steady_retro(c)});

  const model::PhysicalConstants consts;
  const model::ProbeParams probe;
  const model::EnsembleParams ens;
  t.add("a1", {model::vector_polarizability(probe.detuning, consts)});
  t.add("a2", {model::tensor_polarizability(probe.detuning, consts)});
  t.add("a2_over_a1", {model::tensor_polarizability(probe.detuning, consts) /
                       model::vector_polarizability(probe.detuning, consts)});
  const double kappa = model::coupling_kappa(probe, ens, consts);
  t.add("kappa_sq_per_s", {kappa * kappa});
  t.add("gyromagnetic_ratio", {model::gyromagnetic_ratio(ens.omega_l, ens.b_bias)});
  t.add("tensor_shift_rate", {model::tensor_shift_rate(probe, ens, consts)});

  t.add("sensitivity_1.12pT_625us", {metrics::sensitivity(1.12, 625e-6)});
  t.add("rf_from_power_-80dBm_pT", {metrics::rf_from_power(-80.0) * 1e12});
  t.add("rf_from_emf_1uV_510kHz_T", {metrics::rf_from_emf(1e-6, model::kTwoPi * 510e3)});
  t.add("sql_1.5_0.5", {metrics::sql_from_variances(1.5, 0.5)});
  const auto budget = metrics::rearrangement_budget(1.0, 3.0, 0.375, 0.5);
  t.add("budget_an", {budget.an});
  t.add("budget_corr", {budget.mse_corr});
  t.add("budget_uncorr", {budget.mse_uncorr});
  t.add("budget_factor", {budget.strong_standard_factor});
  t.add("strong_standard_3.89", {metrics::strong_standard(3.89, budget)});
  t.add("wineland_db", {metrics::squeezing_db(
                           metrics::wineland(metrics::db_to_ratio(-2.79), metrics::db_to_ratio(-0.37 - 0.49)), 1.0)});
  return t;
}

// ---------------------------------------------------------------- simulate / dataset

data::Dataset build_dataset(const ExperimentSpec& spec) {
  const Settings s(spec, "export");
  const auto& cfg = spec.system;
  cfg.validate();
  data::Dataset ds;
  const std::size_t n_traces = s.count("n_traces", 2000);
  ds.signal_len = s.count("signal_len", 4986);
  ds.tail_len = s.get<std::size_t>("tail_len", 1575);
  ds.tail_level = s.get<double>("tail_level", 1.0);
  ds.tau = cfg.tau;
  const double train_fraction = s.get<double>("train_fraction", 0.8);

  auto sigs = make_signals(spec, n_traces, ds.signal_len, stream(spec, kSignals));
  for (auto& sg : sigs) {
    sg.values.resize(ds.signal_len);
    sg.values.insert(sg.values.end(), ds.tail_len, ds.tail_level);
  }
  const auto batch = traj::simulate_batch(sigs, cfg, stream(spec, kRecords), spec.threads);
  ds.signals = batch.signals;
  ds.records = batch.records;
  data::split_indices(n_traces, train_fraction, stream(spec, kSplit), ds.train, ds.test);
  json spec_json = spec.to_json();
  spec_json.erase("threads");
  spec_json.erase("output");
  ds.metadata = {{"generator", "spintrack"},
                 {"version", kVersion},
                 {"spec", spec_json},
                 {"spec_hash", spec.hash()},
                 {"seeds", {{"base", spec.seed},
                            {"signals", stream(spec, kSignals)},
                            {"records", stream(spec, kRecords)},
                            {"split", stream(spec, kSplit)}}},
                 {"train_fraction", train_fraction}};
  return ds;
}

void export_dataset(const ExperimentSpec& spec, const std::filesystem::path& out) {
  data::write_dataset(out, build_dataset(spec));
}

data::Dataset import_dataset(const std::filesystem::path& path) { return data::read_dataset(path); }

Table run_simulate(const ExperimentSpec& spec, const std::optional<std::filesystem::path>& out) {
  const Settings s(spec, "simulate");
  const auto& cfg = spec.system;
  cfg.validate();
  const std::size_t n_records = s.count("n_records", 100);
  const std::size_t n = steps_of(s.positive("record_len", 20.0), cfg.tau);
  const auto sigs = make_signals(spec, n_records, n, stream(spec, kSignals));
  const auto batch = traj::simulate_batch(sigs, cfg, stream(spec, kRecords), spec.threads, true);

  auto flat_var = [](const Matrix& m) {
    return std::span<const double>(m.data(), static_cast<std::size_t>(m.size()));
  };
  Table t;
  t.name = "simulate";
  t.columns = {"value"};
  t.add("records", {static_cast<double>(n_records)});
  t.add("samples", {static_cast<double>(n)});
  t.add("record_mean", {mean(flat_var(batch.records))});
  t.add("record_var", {variance(flat_var(batch.records))});
  t.add("signal_var", {variance(flat_var(batch.signals))});
  t.add("latent_var", {variance(flat_var(*batch.latent))});
  t.add("expected_record_var_zero_field", {traj::TrajectoryConfig::kShotVar +
                                           cfg.readout_gain() * cfg.readout_gain() * cfg.stationary_spin_var()});
  if (out) {
    data::Dataset ds;
    ds.tau = cfg.tau;
    ds.signal_len = n;
    ds.tail_len = 0;
    ds.signals = batch.signals;
    ds.records = batch.records;
    data::split_indices(n_records, s.get<double>("train_fraction", 0.8), stream(spec, kSplit), ds.train, ds.test);
    ds.metadata = {{"generator", "spintrack"}, {"version", kVersion}, {"spec_hash", spec.hash()}};
    data::write_dataset(*out, ds);
  }
  return t;
}

}  // namespace spintrack::exp
