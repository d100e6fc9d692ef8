#include "lglbci/eeg_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <zlib.h>

#include "byte_io.hpp"
#include "lglbci/error.hpp"

namespace lgl {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::InvalidBand: return "InvalidBand";
    case ErrorCode::UnstableDesign: return "UnstableDesign";
    case ErrorCode::GaborViolation: return "GaborViolation";
    case ErrorCode::WindowTooLong: return "WindowTooLong";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::RankDeficientWeight: return "RankDeficientWeight";
    case ErrorCode::KarcherDivergence: return "KarcherDivergence";
    case ErrorCode::MissingForwardCache: return "MissingForwardCache";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks for very large payloads.
  std::size_t offset = 0;
  while (offset < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - offset, 1u << 30));
    crc = ::crc32(crc, bytes.data() + offset, chunk);
    offset += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

void RawTrialSet::validate() const {
  if (!(sample_rate_hz > 0.0) || !std::isfinite(sample_rate_hz)) {
    throw Error(ErrorCode::InvalidConfig, "sample rate must be positive");
  }
  if (channels == 0 || samples_per_trial == 0) {
    throw Error(ErrorCode::DimensionMismatch, "channels and samples_per_trial must be positive");
  }
  if (n_classes < 2) {
    throw Error(ErrorCode::LabelOutOfRange, "need at least two classes");
  }
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto& t = trials[i];
    if (t.data.rows() != channels || t.data.cols() != samples_per_trial) {
      throw Error(ErrorCode::DimensionMismatch, "trial " + std::to_string(i) + " has shape " +
                                                    std::to_string(t.data.rows()) + "x" +
                                                    std::to_string(t.data.cols()));
    }
    if (t.label >= n_classes) {
      throw Error(ErrorCode::LabelOutOfRange, "trial " + std::to_string(i) + " label " +
                                                  std::to_string(t.label));
    }
    if (!t.data.allFinite()) {
      throw Error(ErrorCode::NonFiniteValue, "trial " + std::to_string(i));
    }
  }
}

RawTrialSet RawTrialSet::subset(std::span<const std::size_t> indices) const {
  RawTrialSet out{sample_rate_hz, channels, samples_per_trial, n_classes, {}};
  out.trials.reserve(indices.size());
  for (auto i : indices) out.trials.push_back(trials.at(i));
  return out;
}

std::vector<std::uint8_t> encode_trials(const RawTrialSet& set) {
  set.validate();
  detail::ByteWriter w;
  w.put_bytes(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>("EEGB"), 4));
  w.put(kEegbVersion);
  w.put(set.channels);
  w.put(set.samples_per_trial);
  w.put(static_cast<std::uint32_t>(set.trials.size()));
  w.put(set.n_classes);
  w.put(static_cast<float>(set.sample_rate_hz));
  for (const auto& t : set.trials) {
    w.put(t.label);
    for (Eigen::Index c = 0; c < t.data.rows(); ++c) {
      for (Eigen::Index s = 0; s < t.data.cols(); ++s) w.put(static_cast<float>(t.data(c, s)));
    }
  }
  auto& bytes = w.bytes();
  const auto crc = crc32(bytes);
  w.put(crc);
  return std::move(bytes);
}

RawTrialSet decode_trials(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "EEGB", 4) != 0) {
    throw Error(ErrorCode::MalformedHeader, "bad magic");
  }
  r.require(4);
  for (int i = 0; i < 4; ++i) r.get<std::uint8_t>();
  if (r.remaining() < 24) throw Error(ErrorCode::MalformedHeader, "header truncated");
  const auto version = r.get<std::uint32_t>();
  if (version != kEegbVersion) {
    throw Error(ErrorCode::MalformedHeader, "unsupported EEGB version " + std::to_string(version));
  }
  RawTrialSet set;
  set.channels = r.get<std::uint32_t>();
  set.samples_per_trial = r.get<std::uint32_t>();
  const auto n_trials = r.get<std::uint32_t>();
  set.n_classes = r.get<std::uint32_t>();
  set.sample_rate_hz = static_cast<double>(r.get<float>());
  if (set.channels == 0 || set.samples_per_trial == 0) {
    throw Error(ErrorCode::MalformedHeader, "zero channels or samples");
  }

  const std::uint64_t per_trial =
      4 + 4ull * static_cast<std::uint64_t>(set.channels) * set.samples_per_trial;
  const std::uint64_t expected = per_trial * n_trials + 4;
  if (r.remaining() != expected) {
    throw Error(ErrorCode::DimensionMismatch, "payload holds " + std::to_string(r.remaining()) +
                                                  " bytes, header implies " +
                                                  std::to_string(expected));
  }
  const auto crc_offset = bytes.size() - 4;
  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, bytes.data() + crc_offset, 4);
  if (stored_crc != crc32(bytes.first(crc_offset))) {
    throw Error(ErrorCode::ChecksumMismatch, "EEGB CRC-32 mismatch");
  }

  set.trials.resize(n_trials);
  for (auto& t : set.trials) {
    t.label = r.get<std::uint32_t>();
    t.data.resize(set.channels, set.samples_per_trial);
    for (Eigen::Index c = 0; c < t.data.rows(); ++c) {
      for (Eigen::Index s = 0; s < t.data.cols(); ++s) t.data(c, s) = r.get<float>();
    }
  }
  set.validate();
  return set;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::IoFailure, "read failed: " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "write failed: " + path.string());
}

RawTrialSet load_trials(const std::filesystem::path& path) { return decode_trials(read_file(path)); }

void save_trials(const RawTrialSet& set, const std::filesystem::path& path) {
  write_file(path, encode_trials(set));
}

Trial load_csv_trial(const std::filesystem::path& path, std::uint32_t label) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw Error(ErrorCode::MalformedHeader, "unparseable value '" + cell + "' in " + path.string());
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw Error(ErrorCode::DimensionMismatch, "ragged rows in " + path.string());
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorCode::DimensionMismatch, "empty trial " + path.string());
  Trial t;
  t.label = label;
  t.data.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t c = 0; c < rows.size(); ++c) {
    for (std::size_t s = 0; s < rows[c].size(); ++s) {
      t.data(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(s)) = rows[c][s];
    }
  }
  if (!t.data.allFinite()) throw Error(ErrorCode::NonFiniteValue, path.string());
  return t;
}

RawTrialSet import_csv_trials(std::span<const std::filesystem::path> paths,
                              std::span<const std::uint32_t> labels, double sample_rate_hz,
                              std::uint32_t n_classes) {
  if (paths.size() != labels.size() || paths.empty()) {
    throw Error(ErrorCode::DimensionMismatch, "need one label per CSV file");
  }
  RawTrialSet set;
  set.sample_rate_hz = sample_rate_hz;
  set.n_classes = n_classes;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    set.trials.push_back(load_csv_trial(paths[i], labels[i]));
  }
  set.channels = static_cast<std::uint32_t>(set.trials[0].data.rows());
  set.samples_per_trial = static_cast<std::uint32_t>(set.trials[0].data.cols());
  set.validate();
  return set;
}

}  // namespace lgl
