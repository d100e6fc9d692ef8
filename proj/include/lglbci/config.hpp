#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lglbci/channel_select.hpp"
#include "lglbci/filter_bank.hpp"

namespace lgl {

enum class StdConvention { Population, Sample };

struct TrainConfig {
  // optimisation
  int epochs = 100;
  int batch_size = 64;
  double learning_rate = 1e-3;
  std::uint64_t seed = 42;

  // preprocessing
  BandSpec bands = BandSpec::default_bank();
  std::size_t window_len = 250;
  double shrinkage = 1e-4;  // relative: epsilon = shrinkage * trace / M

  // feature extractor
  int bimap_layers = 2;
  std::vector<std::size_t> bimap_widths;  // empty: every layer keeps M
  double reeig_epsilon = 1e-4;
  int karcher_iterations = 10;
  double karcher_tolerance = 1e-9;
  double rbn_momentum = 0.9;
  bool rbn_bias = false;

  // channel selection and MBT
  std::size_t m = 8;
  std::size_t heads = 4;
  int selection_max_iters = 20;
  double selection_tol = 1e-6;
  ChannelRule selection_rule = ChannelRule::RowNorm;

  // classifier
  std::size_t conv_maps = 4;

  // reporting
  StdConvention std_convention = StdConvention::Population;

  std::size_t threads = 1;

  // Throws InvalidConfig.
  void validate() const;
};

// `key = value` lines; '#' starts a comment. Unknown keys, duplicate keys
// and malformed values are InvalidConfig errors.
TrainConfig parse_config(const std::string& text);
TrainConfig load_config(const std::filesystem::path& path);

// Canonical text form; parse_config(to_text(c)) reproduces c exactly.
std::string to_text(const TrainConfig& config);

}  // namespace lgl
