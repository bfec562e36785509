#include "spintrack/dataset.hpp"

#include "spintrack/error.hpp"
#include "spintrack/rng.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace spintrack::data {

using nlohmann::json;

std::uint64_t fnv1a64(std::span<const unsigned char> bytes, std::uint64_t state) {
  for (unsigned char b : bytes) {
    state ^= b;
    state *= 0x100000001b3ULL;
  }
  return state;
}

std::uint64_t fnv1a64(const std::string& text) {
  return fnv1a64({reinterpret_cast<const unsigned char*>(text.data()), text.size()});
}

std::string hex64(std::uint64_t value) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << value;
  return os.str();
}

void split_indices(std::size_t n, double train_fraction, std::uint64_t seed, std::vector<std::size_t>& train,
                   std::vector<std::size_t>& test) {
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) throw DomainError("split: fraction must lie in [0, 1]");
  Rng rng(seed);
  auto perm = permutation(n, rng);
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
}

namespace {

std::vector<unsigned char> encode_rows(const Matrix& m) {
  std::vector<unsigned char> out(static_cast<std::size_t>(m.size()) * 8);
  std::size_t pos = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      auto bits = std::bit_cast<std::uint64_t>(m(r, c));
      for (int k = 0; k < 8; ++k) out[pos++] = static_cast<unsigned char>(bits >> (8 * k));
    }
  }
  return out;
}

Matrix decode_rows(const unsigned char* data, std::size_t rows, std::size_t cols) {
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  std::size_t pos = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      std::uint64_t bits = 0;
      for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(data[pos++]) << (8 * k);
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = std::bit_cast<double>(bits);
    }
  }
  return m;
}

[[noreturn]] void corrupt(const std::string& what) { throw IntegrityError("dataset: " + what); }

template <typename T>
T field(const json& j, const char* key) {
  if (!j.contains(key)) corrupt(std::string("metadata lacks '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    corrupt(std::string("metadata field '") + key + "' has the wrong type");
  }
}

}  // namespace

void write_dataset(const std::filesystem::path& dir, const Dataset& ds) {
  if (ds.signals.rows() != ds.records.rows() || ds.signals.cols() != ds.records.cols()) {
    throw DomainError("write_dataset: signal and record arrays differ in shape");
  }
  if (static_cast<std::size_t>(ds.signals.cols()) != ds.trace_len()) {
    throw DomainError("write_dataset: trace length differs from signal_len + tail_len");
  }
  std::filesystem::create_directories(dir);
  const auto sig = encode_rows(ds.signals);
  const auto rec = encode_rows(ds.records);
  const std::vector<std::size_t> shape{ds.n_traces(), ds.trace_len()};

  json meta;
  meta["format"] = "spintrack-dataset";
  meta["format_version"] = kFormatVersion;
  meta["provenance"] = ds.metadata;
  meta["tau_ms"] = ds.tau;
  meta["layout"] = {{"signal_len", ds.signal_len},
                    {"tail_len", ds.tail_len},
                    {"trace_len", ds.trace_len()},
                    {"tail_level_pT", ds.tail_level}};
  meta["units"] = {{"signal", "pT"}, {"record", "canonical, shot-noise variance 1/2 per sample"}, {"time", "ms"}};
  meta["arrays"] = json::array();
  meta["arrays"].push_back({{"name", "signal"}, {"dtype", "float64"}, {"byte_order", "little"}, {"order", "row-major"},
                            {"shape", shape}, {"offset", 0}, {"nbytes", sig.size()},
                            {"fnv1a64", hex64(fnv1a64(sig))}});
  meta["arrays"].push_back({{"name", "record"}, {"dtype", "float64"}, {"byte_order", "little"}, {"order", "row-major"},
                            {"shape", shape}, {"offset", sig.size()}, {"nbytes", rec.size()},
                            {"fnv1a64", hex64(fnv1a64(rec))}});
  meta["split"] = {{"train", ds.train}, {"test", ds.test}};

  {
    std::ofstream bin(dir / kArrayFile, std::ios::binary | std::ios::trunc);
    bin.write(reinterpret_cast<const char*>(sig.data()), static_cast<std::streamsize>(sig.size()));
    bin.write(reinterpret_cast<const char*>(rec.data()), static_cast<std::streamsize>(rec.size()));
    if (!bin) throw std::runtime_error("write_dataset: cannot write " + (dir / kArrayFile).string());
  }
  std::ofstream js(dir / kMetadataFile, std::ios::trunc);
  js << meta.dump(2) << '\n';
  if (!js) throw std::runtime_error("write_dataset: cannot write " + (dir / kMetadataFile).string());
}

Dataset read_dataset(const std::filesystem::path& dir) {
  std::ifstream js(dir / kMetadataFile);
  if (!js) corrupt("missing " + (dir / kMetadataFile).string());
  json meta;
  try {
    js >> meta;
  } catch (const json::exception& e) {
    corrupt(std::string("metadata is not valid JSON: ") + e.what());
  }
  if (field<std::string>(meta, "format") != "spintrack-dataset") corrupt("unknown format tag");
  if (field<int>(meta, "format_version") != kFormatVersion) corrupt("unsupported format version");

  std::ifstream bin(dir / kArrayFile, std::ios::binary);
  if (!bin) corrupt("missing " + (dir / kArrayFile).string());
  const std::vector<unsigned char> blob((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());

  Dataset ds;
  ds.metadata = meta.contains("provenance") ? meta["provenance"] : json::object();
  ds.tau = field<double>(meta, "tau_ms");
  const auto layout = field<json>(meta, "layout");
  ds.signal_len = field<std::size_t>(layout, "signal_len");
  ds.tail_len = field<std::size_t>(layout, "tail_len");
  ds.tail_level = field<double>(layout, "tail_level_pT");
  if (field<std::size_t>(layout, "trace_len") != ds.trace_len()) corrupt("layout lengths are inconsistent");

  bool have_signal = false, have_record = false;
  for (const auto& a : field<json>(meta, "arrays")) {
    const auto name = field<std::string>(a, "name");
    if (field<std::string>(a, "dtype") != "float64" || field<std::string>(a, "byte_order") != "little") {
      corrupt("array '" + name + "' is not little-endian float64");
    }
    const auto shape = field<std::vector<std::size_t>>(a, "shape");
    const auto offset = field<std::size_t>(a, "offset");
    const auto nbytes = field<std::size_t>(a, "nbytes");
    if (shape.size() != 2 || shape[1] != ds.trace_len() || nbytes != shape[0] * shape[1] * 8) {
      corrupt("array '" + name + "' has an inconsistent shape");
    }
    if (offset > blob.size() || nbytes > blob.size() - offset) corrupt("array '" + name + "' is truncated");
    const std::span<const unsigned char> bytes(blob.data() + offset, nbytes);
    if (hex64(fnv1a64(bytes)) != field<std::string>(a, "fnv1a64")) corrupt("checksum mismatch in '" + name + "'");
    Matrix m = decode_rows(bytes.data(), shape[0], shape[1]);
    if (name == "signal") {
      ds.signals = std::move(m);
      have_signal = true;
    } else if (name == "record") {
      ds.records = std::move(m);
      have_record = true;
    }
  }
  if (!have_signal || !have_record) corrupt("signal or record array missing");
  if (ds.signals.rows() != ds.records.rows()) corrupt("signal and record arrays differ in trace count");

  const auto split = field<json>(meta, "split");
  ds.train = field<std::vector<std::size_t>>(split, "train");
  ds.test = field<std::vector<std::size_t>>(split, "test");
  std::vector<std::size_t> all = ds.train;
  all.insert(all.end(), ds.test.begin(), ds.test.end());
  std::sort(all.begin(), all.end());
  for (std::size_t k = 0; k < all.size(); ++k) {
    if (all[k] != k) corrupt("split indices are not a partition of the traces");
  }
  if (all.size() != ds.n_traces()) corrupt("split indices do not cover every trace");
  return ds;
}

}  // namespace spintrack::data
