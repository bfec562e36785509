#pragma once

#include "spintrack/stats.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace spintrack::data {

/// A batch of paired (B, Y) traces on disk:
///   <dir>/dataset.json  metadata, array index, split indices
///   <dir>/dataset.bin   raw little-endian float64 arrays, row-major
/// Every trace is `signal_len` signal points followed by `tail_len` points of
/// the constant calibration field `tail_level`.
struct Dataset {
  nlohmann::json metadata;  // free-form provenance (spec, seeds, units)
  double tau = 0.0;         // ms
  std::size_t signal_len = 0;
  std::size_t tail_len = 0;
  double tail_level = 0.0;  // pT
  Matrix signals;           // traces x (signal_len + tail_len), pT
  Matrix records;           // canonical
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::size_t n_traces() const { return static_cast<std::size_t>(signals.rows()); }
  std::size_t trace_len() const { return signal_len + tail_len; }
};

inline constexpr const char* kMetadataFile = "dataset.json";
inline constexpr const char* kArrayFile = "dataset.bin";
inline constexpr int kFormatVersion = 1;

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::span<const unsigned char> bytes, std::uint64_t state = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(const std::string& text);
std::string hex64(std::uint64_t value);

/// Disjoint train/test index sets: a seeded permutation of 0..n-1 cut at round(train_fraction n); both sorted.
void split_indices(std::size_t n, double train_fraction, std::uint64_t seed, std::vector<std::size_t>& train,
                   std::vector<std::size_t>& test);

/// Writes both files; the directory is created if needed.
void write_dataset(const std::filesystem::path& dir, const Dataset& ds);

/// Reads and verifies a dataset. Missing files, schema violations, size
/// mismatches and checksum failures raise IntegrityError.
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace spintrack::data
