// Acceptance run: one PASS/FAIL line per criterion, sub-checks indented below it.
// Usage: acceptance [ID...]   (no IDs: run everything)

#include "spintrack/estimation.hpp"
#include "spintrack/experiments.hpp"
#include "spintrack/fisher.hpp"
#include "spintrack/metrics.hpp"
#include "spintrack/model.hpp"
#include "spintrack/rng.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace spintrack;
using nlohmann::json;
namespace fs = std::filesystem;

struct Outcome {
  std::string summary;
  std::vector<std::pair<bool, std::string>> checks;
  bool pass() const {
    for (const auto& c : checks)
      if (!c.first) return false;
    return !checks.empty();
  }
  void check(bool ok, std::string what) { checks.emplace_back(ok, std::move(what)); }
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double db(double v) { return 10.0 * std::log10(v / 0.5); }

exp::ExperimentSpec spec_of(const json& j) { return exp::ExperimentSpec::from_json(j); }

const json kOU = {{"kind", "ou"}, {"beta", 0.268}, {"v_ss", 6.12}};

// ---------------------------------------------------------------- closed forms

Outcome steady_prediction() {
  Outcome o;
  const double v = est::steady_variance_prediction(3000.0, 345.0, 0.60, 1.0);
  o.summary = fmt("V_P = %.6f, %.4f dB", v, db(v));
  o.check(std::abs(v - 0.2114) <= 1e-3, fmt("V_P = %.6f within 0.2114 +- 1e-3", v));
  o.check(std::abs(db(v) - (-3.74)) <= 0.005, fmt("%.4f dB rounds to -3.74 dB", db(v)));
  return o;
}

Outcome pqs_combination() {
  Outcome o;
  const double vp = est::steady_variance_prediction(3000.0, 345.0, 0.60, 1.0);
  const double vr = est::steady_variance_retrodiction(3000.0, 345.0, 0.60, 1.0);
  const double v = est::combine_pqs(vp, vr);
  o.summary = fmt("V_R = %.6f, V_PR = %.6f, %.4f dB", vr, v, db(v));
  o.check(std::abs(v - 0.1283) <= 1e-3, fmt("V_PR = %.6f within 0.1283 +- 1e-3", v));
  o.check(std::abs(db(v) - (-5.9)) <= 0.05, fmt("%.4f dB rounds to -5.9 dB", db(v)));
  return o;
}

Outcome backaction_benchmark() {
  Outcome o;
  double worst = 0.0;
  for (auto [k, g] : {std::pair{3.0, 0.345}, std::pair{10.0, 1.0}, std::pair{0.7, 2.5}}) {
    const double v = est::steady_variance_backaction(k, k, g, 0.5, 1.0);
    worst = std::max(worst, std::abs(v - 0.5));
    o.check(std::abs(v - 0.5) <= 1e-14, fmt("kappa^2 = %g, Gamma = %g -> %.17g", k, g, v));
  }
  o.summary = fmt("max |V - 0.5| = %.3g over three (kappa, Gamma) pairs", worst);
  return o;
}

Outcome ode_equivalence() {
  Outcome o;
  struct P {
    double kz, ky, g, v0;
  };
  const std::vector<P> grid = {{3.0, 0.0, 0.345, 0.6}, {3.0, 1.2, 0.345, 0.6}, {1.0, 0.5, 0.1, 0.5},
                               {10.0, 3.0, 1.0, 0.7}, {0.5, 0.2, 0.345, 1.0}, {5.0, 5.0, 0.5, 0.5},
                               {2.0, 0.0, 0.2, 0.55}, {0.2, 1.0, 0.05, 0.6}, {20.0, 2.0, 2.0, 0.8},
                               {3.0, 3.0, 0.345, 0.5}};
  double worst = 0.0;
  for (const auto& p : grid) {
    traj::TrajectoryConfig cfg;
    cfg.kappa_z_sq = p.kz;
    cfg.kappa_y_sq = p.ky;
    cfg.gamma_tot = p.g;
    cfg.v0 = p.v0;
    const double horizon = 40.0 / (2.0 * p.g);
    // Prediction branch; with k_y > 0 it is the heated equation.
    const double v_ode = est::variance_ode_forward(cfg, p.v0, horizon, 1e-3, est::Branch::kPrediction, 1000000).v.back();
    const double v_cf = p.ky > 0 ? est::steady_variance_backaction(p.kz, p.ky, p.g, p.v0, 1.0)
                                 : est::steady_variance_prediction(p.kz, p.g, p.v0, 1.0);
    const double e1 = std::abs(v_ode / v_cf - 1.0);
    worst = std::max(worst, e1);
    o.check(e1 <= 1e-4, fmt("%s k_z^2=%g k_y^2=%g G=%g V0=%g: ode %.10f closed %.10f", p.ky > 0 ? "back-action " : "prediction  ",
                            p.kz, p.ky, p.g, p.v0, v_ode, v_cf));
    traj::TrajectoryConfig rc = cfg;
    rc.kappa_y_sq = 0.0;
    const double r_ode = est::variance_ode_forward(rc, 10.0 * p.v0, horizon, 1e-3, est::Branch::kRetrodiction, 1000000).v.back();
    const double r_cf = est::steady_variance_retrodiction(p.kz, p.g, p.v0, 1.0);
    const double e2 = std::abs(r_ode / r_cf - 1.0);
    worst = std::max(worst, e2);
    o.check(e2 <= 1e-4, fmt("retrodiction k_z^2=%g G=%g V0=%g: ode %.10f closed %.10f", p.kz, p.g, p.v0, r_ode, r_cf));
  }
  o.summary = fmt("max relative deviation %.2e over %zu grid points", worst, grid.size());
  return o;
}

// ---------------------------------------------------------------- squeezing

Outcome squeezing() {
  Outcome o;
  const auto spec = spec_of({{"name", "acceptance-squeeze"}, {"seed", 5}, {"system", {{"tau", 0.025}}},
                             {"analysis", {{"squeeze", {{"n_records", 10000}, {"record_len", 20.0}}}}}});
  const auto t = exp::run_squeezing_sweep(spec);
  const auto c = [&](const char* name) { return t.column(name); };
  std::vector<const exp::Row*> dur, gap;
  for (const auto& r : t.rows) {
    if (r.label == "duration") dur.push_back(&r);
    if (r.label == "gap") gap.push_back(&r);
  }
  const exp::Row* at = nullptr;
  for (const auto* r : dur)
    if (std::abs(r->values[c("seg_len")] - 1.5) < 1e-9 && std::abs(r->values[c("gap")] - 0.3) < 1e-9) at = r;
  if (!at) {
    o.check(false, "no row at seg 1.5 ms, gap 0.3 ms");
    return o;
  }
  const double pred = at->values[c("pred_db")], pr = at->values[c("pr_db")];
  const double bp = at->values[c("bound_pred_db")], bpr = at->values[c("bound_pr_db")];
  o.summary = fmt("seg 1.5 ms, gap 0.3 ms, 10^4 records: prediction %.3f dB (bound %.3f), P+R %.3f dB (bound %.3f)", pred, bp,
                  pr, bpr);
  o.check(pred >= bp && pred <= bp + 1.0, fmt("prediction %.3f +- %.3f dB in [%.3f, %.3f]", pred, at->values[c("pred_db_se")], bp, bp + 1.0));
  o.check(pr >= bpr && pr <= bpr + 1.0, fmt("P+R %.3f +- %.3f dB in [%.3f, %.3f]", pr, at->values[c("pr_db_se")], bpr, bpr + 1.0));

  for (const char* col : {"pred_db", "pr_db"}) {
    const std::string se_col = std::string(col) + "_se";
    bool mono = true;
    std::string trail;
    for (std::size_t k = 0; k < gap.size(); ++k) {
      trail += fmt("%s%.2f", k ? ", " : "", gap[k]->values[c(col)]);
      if (k == 0) continue;
      const double tol = 2.0 * std::hypot(gap[k]->values[c(se_col.c_str())], gap[k - 1]->values[c(se_col.c_str())]);
      mono = mono && gap[k]->values[c(col)] >= gap[k - 1]->values[c(col)] - tol;
    }
    o.check(mono, fmt("gap sweep %s non-decreasing within 2 sigma: %s", col, trail.c_str()));
  }
  for (const char* col : {"pred_db", "pr_db"}) {
    std::size_t best = 0;
    std::string trail;
    for (std::size_t k = 0; k < dur.size(); ++k) {
      trail += fmt("%s%.2f", k ? ", " : "", dur[k]->values[c(col)]);
      if (dur[k]->values[c(col)] < dur[best]->values[c(col)]) best = k;
    }
    const bool interior = best > 0 && best + 1 < dur.size();
    const bool turns = dur[1]->values[c(col)] < dur[0]->values[c(col)] &&
                       dur.back()->values[c(col)] > dur[dur.size() - 2]->values[c(col)];
    o.check(interior && turns, fmt("duration sweep %s has an interior minimum at %.2f ms: %s", col,
                                   dur[best]->values[c("seg_len")], trail.c_str()));
  }
  return o;
}

// ---------------------------------------------------------------- arithmetic

Outcome polarizability_ratio() {
  Outcome o;
  const double d = -model::kTwoPi * 2.5e9;
  const double r = model::tensor_polarizability(d) / model::vector_polarizability(d);
  o.summary = fmt("a2/a1 = %.6f", r);
  o.check(std::abs(r - 0.0081) <= 3e-4, fmt("%.6f within 0.0081 +- 0.0003", r));
  return o;
}

Outcome sensitivity() {
  Outcome o;
  const double s = metrics::sensitivity(1.12, 625e-6);
  o.summary = fmt("sensitivity(1.12 pT, 625 us) = %.4f fT/sqrt(Hz)", s);
  o.check(std::abs(s / 27.97 - 1.0) <= 5e-3, fmt("%.4f within 27.97 +- 0.5%%", s));
  return o;
}

Outcome calibration() {
  Outcome o;
  const double b = metrics::rf_from_power(-80.0) * 1e12;
  const auto budget = metrics::rearrangement_budget(1.0, 3.0, 0.375, 0.5);
  const double strong = metrics::strong_standard(3.89, budget);
  o.summary = fmt("B(-80 dBm) = %.4f pT; budgets %.4f / %.4f; strong standard %.4f pT^2", b, budget.mse_corr,
                  budget.mse_uncorr, strong);
  o.check(std::abs(b / 14.28 - 1.0) <= 1e-3, fmt("%.5f pT within 14.28 +- 0.1%%", b));
  o.check(std::abs(budget.mse_corr - 3.125) <= 1e-12, fmt("2LN + AN = %.12g LN", budget.mse_corr));
  o.check(std::abs(budget.mse_uncorr - 4.25) <= 1e-12, fmt("2LN + 2AN = %.12g LN", budget.mse_uncorr));
  o.check(std::abs(strong - 2.86) < 0.005, fmt("3.89 / 4.25 * 3.125 = %.6f", strong));
  return o;
}

// ---------------------------------------------------------------- Fisher

Outcome fisher_consistency() {
  Outcome o;
  const auto spec = spec_of({{"name", "acceptance-fisher"}, {"seed", 11}, {"system", {{"tau", 0.1}, {"g_b", 2.23}}},
                             {"signal", kOU}, {"analysis", {{"fisher", {{"m", 20000}, {"d", 200}}}}}});
  const auto t = exp::run_fisher(spec);
  double worst = 0.0, sum = 0.0;
  std::size_t worst_bin = 0;
  for (const auto& r : t.rows) {
    const double d = r.values[t.column("rel_diff")];
    sum += d;
    if (std::abs(d) > std::abs(worst)) worst = d, worst_bin = static_cast<std::size_t>(r.values[t.column("bin")]);
  }
  const auto& mid = t.rows[t.rows.size() / 2];
  o.check(std::abs(worst) <= 0.10, fmt("max |CRB/b_var - 1| = %.4f at bin %zu over %zu interior bins (mean %.4f)",
                                       std::abs(worst), worst_bin, t.rows.size(), sum / t.rows.size()));

  Rng rng(2024);
  const Eigen::Index m = 100000;
  const double a = 0.8, sigma = 0.5;
  Matrix b(m, 1), y(m, 1);
  for (Eigen::Index k = 0; k < m; ++k) {
    b(k, 0) = 2.0 * rng.normal();
    y(k, 0) = a * b(k, 0) + sigma * rng.normal();
  }
  fisher::FisherConfig fc;
  fc.m = static_cast<std::size_t>(m);
  fc.d = 1;
  const double f = fisher::fisher_analysis(y, b, fc).f[0];
  o.check(std::abs(f / (a * a / (sigma * sigma)) - 1.0) <= 0.05,
          fmt("scalar case F = %.4f vs a^2/sigma^2 = %.4f at M = 1e5", f, a * a / (sigma * sigma)));
  o.summary = fmt("M = 2e4, d = 200: bin %g CRB %.4f pT^2, smoother %.4f pT^2; scalar F/F_exact = %.4f",
                  mid.values[t.column("bin")], mid.values[t.column("crb_single")], mid.values[t.column("smoother_b_var")],
                  f / (a * a / (sigma * sigma)));
  return o;
}

// ---------------------------------------------------------------- rearrangement

Outcome rearrangement() {
  Outcome o;
  const auto spec = spec_of({{"name", "acceptance-rearrange"}, {"seed", 5}, {"system", {{"tau", 0.075}}},
                             {"signal", {{"kind", "white"}, {"hold", 0.375}, {"level_std", 1.0}}}});
  const auto t = exp::run_rearrangement(spec);
  const auto c = [&](const char* n) { return t.column(n); };
  const auto& first = t.rows.front();
  const auto& last = t.rows.back();
  const double ratio = last.values[c("ratio")], budget = last.values[c("budget_ratio")];
  o.summary = fmt("MSE(1)/MSE(0) = %.3f +- %.3f, linear budget %.3f", ratio, last.values[c("se_ratio")], budget);
  o.check(last.values[c("mse")] > first.values[c("mse")],
          fmt("MSE(1) = %.4f > MSE(0) = %.4f", last.values[c("mse")], first.values[c("mse")]));
  o.check(std::abs(ratio / budget - 1.0) <= 0.15, fmt("ratio %.3f within 15%% of %.3f (off by %+.1f%%)", ratio, budget,
                                                      100.0 * (ratio / budget - 1.0)));
  bool mono = true;
  std::string trail;
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    trail += fmt("%s%.4f", k ? ", " : "", t.rows[k].values[c("mse")]);
    if (k == 0) continue;
    const double tol = 3.0 * std::hypot(t.rows[k].values[c("se_mse")], t.rows[k - 1].values[c("se_mse")]);
    mono = mono && t.rows[k].values[c("mse")] >= t.rows[k - 1].values[c("mse")] - tol;
  }
  o.check(mono, fmt("MSE non-decreasing in degree within 3 sigma: %s", trail.c_str()));
  return o;
}

// ---------------------------------------------------------------- back-action sweep

Outcome backaction_sweep() {
  Outcome o;
  const auto spec = spec_of({{"name", "acceptance-backaction"}, {"seed", 5}, {"system", {{"tau", 0.01}}}, {"signal", kOU}});
  const auto t = exp::run_backaction_sweep(spec);
  double worst = 0.0;
  for (const auto& r : t.rows) {
    const double e = r.values[t.column("rel_err")];
    worst = std::max(worst, std::abs(e));
    o.check(std::abs(e) <= 0.05, fmt("k_y^2 = %.1f: simulated %.4f, closed form %.4f (%+.2f%%)", r.values[t.column("kappa_y_sq")],
                                     r.values[t.column("cond_noise")], r.values[t.column("analytic_noise")], 100.0 * e));
  }
  o.summary = fmt("%zu points, max relative deviation %.2f%%", t.rows.size(), 100.0 * worst);
  return o;
}

// ---------------------------------------------------------------- determinism

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

Outcome determinism() {
  Outcome o;
  const json analysis = {
      {"squeeze", {{"n_records", 400}, {"record_len", 8.0}, {"seg_sweep", {0.5, 1.5}}, {"gap_sweep", {0.0, 0.3}}}},
      {"pulse", {{"n_runs", 200}, {"gap_sweep", {0.0, 1.0}}}},
      {"track", {{"n_traces", 30}, {"record_len", 6.0}, {"margin", 1.0}, {"beta_sweep", {0.1, 1.0}}}},
      {"backaction", {{"n_records", 40}, {"record_len", 4.0}, {"burn_in", 1.0}, {"kappa_y_sq_sweep", {0.0, 1.5}}}},
      {"rearrange", {{"n_signals", 4}, {"repetitions", 10}, {"n_points", 40}}},
      {"fisher", {{"m", 400}, {"d", 40}}},
      {"simulate", {{"n_records", 50}, {"record_len", 2.0}}},
      {"export", {{"n_traces", 40}, {"signal_len", 100}, {"tail_len", 20}}}};
  const json base = {{"name", "acceptance-determinism"}, {"seed", 77}, {"signal", kOU}, {"analysis", analysis}};
  const fs::path dir = fs::temp_directory_path() / "spintrack_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  {
    std::ofstream os(dir / "spec.json");
    os << base.dump(2);
  }
  using Driver = std::function<exp::Table(const exp::ExperimentSpec&)>;
  const std::vector<std::pair<std::string, Driver>> drivers = {
      {"squeeze", exp::run_squeezing_sweep}, {"pulse", exp::run_pulse_magnetometer}, {"track", exp::run_ou_tracking},
      {"backaction", exp::run_backaction_sweep}, {"rearrange", exp::run_rearrangement}, {"fisher", exp::run_fisher},
      {"report", exp::run_report}, {"simulate", [](const exp::ExperimentSpec& s) { return exp::run_simulate(s); }}};
  std::size_t same = 0;
  for (const auto& [name, fn] : drivers) {
    auto a = exp::load_spec(dir / "spec.json");
    auto b = exp::load_spec(dir / "spec.json");
    auto c = exp::load_spec(dir / "spec.json");
    a.threads = 1;
    b.threads = 1;
    c.threads = 4;
    const std::string ca = exp::to_csv(fn(a), a), cb = exp::to_csv(fn(b), b), cc = exp::to_csv(fn(c), c);
    const bool ok = ca == cb && ca == cc;
    same += ok;
    o.check(ok, fmt("%-10s rerun and --threads 4 byte-identical (%zu bytes)", name.c_str(), ca.size()));
  }
  auto a = exp::load_spec(dir / "spec.json");
  auto c = a;
  c.threads = 4;
  exp::export_dataset(a, dir / "d1");
  exp::export_dataset(c, dir / "d4");
  const bool ds_ok = slurp(dir / "d1" / "dataset.bin") == slurp(dir / "d4" / "dataset.bin") &&
                     slurp(dir / "d1" / "dataset.json") == slurp(dir / "d4" / "dataset.json");
  o.check(ds_ok, "export     dataset files byte-identical across --threads");
  o.summary = fmt("%zu/%zu drivers and the dataset export reproduce byte for byte", same, drivers.size());
  fs::remove_all(dir);
  return o;
}

struct Criterion {
  const char* id;
  const char* title;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {"C01", "steady prediction variance", steady_prediction},
    {"C02", "prediction-retrodiction combination", pqs_combination},
    {"C03", "back-action benchmark", backaction_benchmark},
    {"C04", "Riccati ODE and closed forms", ode_equivalence},
    {"C05", "Monte-Carlo squeezing", squeezing},
    {"C06", "polarizability ratio", polarizability_ratio},
    {"C07", "sensitivity arithmetic", sensitivity},
    {"C08", "field calibration and noise budget", calibration},
    {"C09", "Fisher consistency", fisher_consistency},
    {"C10", "rearrangement", rearrangement},
    {"C11", "back-action sweep", backaction_sweep},
    {"C12", "determinism", determinism},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> wanted(argv + 1, argv + argc);
  int failed = 0, ran = 0;
  for (const auto& c : kCriteria) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end()) continue;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.check(false, std::string("threw: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %s %s: %s [%.1f s]\n", o.pass() ? "PASS" : "FAIL", c.id, c.title, o.summary.c_str(), secs);
    for (const auto& [ok, what] : o.checks) std::printf("    %s %s\n", ok ? "ok  " : "FAIL", what.c_str());
    std::fflush(stdout);
    failed += !o.pass();
  }
  if (ran == 0) {
    std::fprintf(stderr, "no criterion matches\n");
    return 2;
  }
  return failed ? 1 : 0;
}
