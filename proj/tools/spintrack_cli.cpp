#include "spintrack/error.hpp"
#include "spintrack/experiments.hpp"
#include "spintrack/version.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>

namespace {

namespace fs = std::filesystem;
using spintrack::exp::ExperimentSpec;

constexpr int kConfigExit = 2;
constexpr int kNumericalExit = 3;

ExperimentSpec resolve_spec(const std::string& config, std::optional<std::uint64_t> seed, std::optional<unsigned> threads,
                            const std::string& out) {
  ExperimentSpec spec;
  if (config.empty()) {
    spec.name = "default";
    spec.signal = {{"kind", "ou"}, {"beta", 0.268}, {"v_ss", 6.12}};
  } else {
    spec = spintrack::exp::load_spec(config);
  }
  if (seed) spec.seed = *seed;
  if (threads) spec.threads = *threads;
  if (!out.empty()) spec.output = out;
  return spec;
}

void write_table(const ExperimentSpec& spec, const spintrack::exp::Table& table, const std::string& verb) {
  fs::create_directories(spec.output);
  const fs::path path = fs::path(spec.output) / (verb + ".csv");
  std::ofstream os(path, std::ios::trunc);
  spintrack::exp::write_csv(os, table, spec);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  std::cout << path.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation and estimation toolkit for a continuously monitored spin-squeezed magnetometer"};
  app.set_version_flag("--version", std::string(spintrack::kVersion));
  app.require_subcommand(1);

  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::string out;
  app.add_option("--config", config, "Experiment spec (JSON)")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Override the spec seed");
  app.add_option("--out", out, "Output directory (default: the spec's output)");
  app.add_option("--threads", threads, "Worker threads; results do not depend on it")->check(CLI::PositiveNumber);

  using Driver = std::function<spintrack::exp::Table(const ExperimentSpec&)>;
  const std::map<std::string, std::pair<std::string, Driver>> table_verbs = {
      {"squeeze", {"Squeezing versus segment duration and gap", spintrack::exp::run_squeezing_sweep}},
      {"pulse", {"Pulse-amplitude variance with pre-pulse conditioning versus gap", spintrack::exp::run_pulse_magnetometer}},
      {"track", {"Smoother MSE versus OU relaxation rate", spintrack::exp::run_ou_tracking}},
      {"fisher", {"Fisher information and Cramer-Rao bound per bin", spintrack::exp::run_fisher}},
      {"backaction", {"Conditional noise and MSE versus J_y probe strength", spintrack::exp::run_backaction_sweep}},
      {"rearrange", {"Estimator noise versus degree of rearrangement", spintrack::exp::run_rearrangement}},
      {"report", {"Closed-form figures of merit", spintrack::exp::run_report}},
  };
  for (const auto& [name, entry] : table_verbs) app.add_subcommand(name, entry.first)->fallthrough();
  app.add_subcommand("simulate", "Simulate a batch; writes summary stats and the batch as a dataset")
      ->fallthrough();
  app.add_subcommand("export", "Write a (B, Y) dataset with calibration tail and 8:2 split")->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigExit;
  }

  try {
    const auto spec = resolve_spec(config, seed, threads, out);
    const std::string verb = app.get_subcommands().front()->get_name();
    if (auto it = table_verbs.find(verb); it != table_verbs.end()) {
      write_table(spec, it->second.second(spec), verb);
    } else if (verb == "simulate") {
      write_table(spec, spintrack::exp::run_simulate(spec, fs::path(spec.output) / "batch"), verb);
    } else if (verb == "export") {
      spintrack::exp::export_dataset(spec, spec.output);
      std::cout << (fs::path(spec.output) / "dataset.json").string() << '\n';
    }
    return 0;
  } catch (const spintrack::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigExit;
  } catch (const spintrack::DomainError& e) {
    std::cerr << "invalid parameter: " << e.what() << '\n';
    return kConfigExit;
  } catch (const spintrack::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumericalExit;
  } catch (const spintrack::IntegrityError& e) {
    std::cerr << "data integrity: " << e.what() << '\n';
    return kNumericalExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
