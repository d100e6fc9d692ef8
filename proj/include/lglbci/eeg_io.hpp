#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace lgl {

struct Trial {
  std::uint32_t label = 0;
  Eigen::MatrixXd data;  // channels x samples
};

// Multi-channel trial set as stored in an EEGB file.
struct RawTrialSet {
  double sample_rate_hz = 0.0;
  std::uint32_t channels = 0;
  std::uint32_t samples_per_trial = 0;
  std::uint32_t n_classes = 0;
  std::vector<Trial> trials;

  // Throws Error(DimensionMismatch | NonFiniteValue | LabelOutOfRange | InvalidConfig).
  void validate() const;

  RawTrialSet subset(std::span<const std::size_t> indices) const;
};

// EEGB v1, little-endian:
//   "EEGB" | version u32 | M u32 | samples u32 | n_trials u32 | n_classes u32 |
//   sample_rate f32 | { label u32, M*samples f32 channel-major } * n_trials | crc32 u32
// The CRC covers every byte preceding it.
inline constexpr std::uint32_t kEegbVersion = 1;

RawTrialSet load_trials(const std::filesystem::path& path);
void save_trials(const RawTrialSet& set, const std::filesystem::path& path);

std::vector<std::uint8_t> encode_trials(const RawTrialSet& set);
RawTrialSet decode_trials(std::span<const std::uint8_t> bytes);

// One trial per file: each row is a channel, comma separated samples.
Trial load_csv_trial(const std::filesystem::path& path, std::uint32_t label);
RawTrialSet import_csv_trials(std::span<const std::filesystem::path> paths,
                              std::span<const std::uint32_t> labels, double sample_rate_hz,
                              std::uint32_t n_classes);

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace lgl
