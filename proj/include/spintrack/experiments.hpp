#pragma once

#include "spintrack/dataset.hpp"
#include "spintrack/signals.hpp"
#include "spintrack/trajectory.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace spintrack::exp {

/// One experiment: physical system, signal model and driver settings.
///
/// JSON layout:
///   { "name": ..., "seed": ..., "threads": ..., "output": ...,
///     "system":   { tau, kappa_z_sq, kappa_y_sq, eta, gamma_tot, v0, g_b, lowpass_khz },
///     "signal":   { "kind": "zero" | "ou" | "dou" | "white" | "pulses" | "hmm", ... },
///     "analysis": { driver settings, see README } }
/// `threads` and `output` do not enter the hash: they cannot change results.
struct ExperimentSpec {
  std::string name = "experiment";
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::string output = "out";
  traj::TrajectoryConfig system;
  nlohmann::json signal = {{"kind", "zero"}};
  nlohmann::json analysis = nlohmann::json::object();

  /// Throws ConfigError on unknown keys, wrong types or invalid parameters.
  static ExperimentSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  /// FNV-1a over the canonical dump of everything that determines results.
  std::string hash() const;
};

ExperimentSpec load_spec(const std::filesystem::path& path);

/// Empty optional for "zero".
std::optional<signals::SignalSpec> parse_signal(const nlohmann::json& j);
nlohmann::json signal_to_json(const signals::SignalSpec& spec);

struct Row {
  std::string label;
  std::vector<double> values;
};

struct Table {
  std::string name;
  std::vector<std::string> columns;  // after the leading "label" column
  std::vector<Row> rows;
  std::vector<std::string> notes;    // written as extra comment lines

  void add(std::string label, std::vector<double> values);
  /// First row with this label; throws DomainError if absent.
  const Row& row(const std::string& label) const;
  double at(const std::string& label, const std::string& column) const;
  std::size_t column(const std::string& column) const;
};

/// Comment header (toolkit version, experiment name, spec hash, notes), then
/// label plus columns. Numbers use %.12g; no timestamps.
void write_csv(std::ostream& os, const Table& table, const ExperimentSpec& spec);
std::string to_csv(const Table& table, const ExperimentSpec& spec);

/// Segment-duration and gap sweeps through the squeezing pipeline plus a
/// kappa = 0 control row.
Table run_squeezing_sweep(const ExperimentSpec& spec);
/// Pulse-amplitude error variance with and without pre-pulse conditioning versus gap.
Table run_pulse_magnetometer(const ExperimentSpec& spec);
/// Smoother MSE versus the OU relaxation rate at fixed stationary variance.
Table run_ou_tracking(const ExperimentSpec& spec);
/// Conditional noise and tracking MSE versus the J_y probe strength.
Table run_backaction_sweep(const ExperimentSpec& spec);
/// Difference-estimator noise versus the degree of rearrangement.
Table run_rearrangement(const ExperimentSpec& spec);
/// Fisher information and Cramer-Rao bound per bin beside the smoother variance.
Table run_fisher(const ExperimentSpec& spec);
/// Closed-form figures of merit for the spec's system (no simulation).
Table run_report(const ExperimentSpec& spec);
/// Summary statistics of a simulated batch; the batch itself is written as a dataset when `out` is given.
Table run_simulate(const ExperimentSpec& spec, const std::optional<std::filesystem::path>& out = std::nullopt);

/// Simulated (B, Y) dataset with the calibration tail and an 8:2 split.
data::Dataset build_dataset(const ExperimentSpec& spec);
void export_dataset(const ExperimentSpec& spec, const std::filesystem::path& out);
data::Dataset import_dataset(const std::filesystem::path& path);

}  // namespace spintrack::exp
