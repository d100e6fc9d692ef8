#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lglbci/eeg_io.hpp"
#include "lglbci/spd.hpp"

namespace lgl {

enum class SyntheticKind {
  Classification,   // C classes with distinct spatial covariance means
  PlantedChannels,  // 2 classes differing only on a known channel subset
};

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::Classification;
  std::size_t channels = 8;
  std::size_t classes = 2;
  std::size_t trials = 500;  // balanced over classes
  std::size_t samples = 1000;
  double sample_rate_hz = 250.0;
  double separation = 3.0;     // AIRM distance from class 0's mean to each other class mean
  double trial_spread = 0.1;   // scale of per-trial tangent perturbations
  double sensor_noise = 0.1;   // white noise std relative to the mean signal std
  std::vector<std::size_t> planted = {1, 3, 5};
  std::uint64_t seed = 7;
};

// Same `key = value` format as the training config. Throws InvalidConfig.
SyntheticSpec parse_synthetic_spec(const std::string& text);
std::string to_text(const SyntheticSpec& spec);

// Class-mean spatial covariances (M x M), one per class.
std::vector<Matrix> synthetic_class_means(const SyntheticSpec& spec);

// Trials are x_t = Sigma_trial^{1/2} z_t + noise with white z_t, labels
// interleaved 0, 1, ..., C-1, 0, ...
RawTrialSet generate_synthetic(const SyntheticSpec& spec);

}  // namespace lgl
