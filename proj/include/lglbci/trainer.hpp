#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lglbci/network.hpp"

namespace lgl {

// CRC-32 over a prepared trial's label and covariances.
std::uint32_t trial_fingerprint(const PreparedTrial& trial);

struct TrainResult {
  ModelBundle model;
  std::vector<double> epoch_loss;
  double train_accuracy = 0.0;
  // Fingerprints of every trial that touched a fitted quantity
  // (band scales, RBN means, channel selection, gradients).
  std::vector<std::uint32_t> fit_fingerprints;
};

using EpochCallback = std::function<void(int epoch, double loss, const ModelBundle& model)>;

// Scales, RBN running means, channel selection and MBT heads, before any
// gradient step. train() with epochs = 0 returns exactly this model.
ModelBundle initialise_model(const TrainConfig& config, const DataSchema& schema,
                             std::span<const PreparedTrial> trials);

// Throws NonFiniteLoss plus errors from the modules underneath.
TrainResult train(const TrainConfig& config, const RawTrialSet& trials, const EpochCallback& on_epoch = {});
TrainResult train_prepared(const TrainConfig& config, const DataSchema& schema, std::span<const PreparedTrial> trials,
                           const EpochCallback& on_epoch = {});

// Channel selection alone, as `select` runs it.
SelectionTransform select_channels(const TrainConfig& config, const RawTrialSet& trials);

struct LatencyStats {
  std::vector<double> samples;  // seconds
  double mean = 0.0;
  double median = 0.0;
  double max = 0.0;

  static LatencyStats from(std::vector<double> samples);
};

struct FoldResult {
  std::vector<std::size_t> train_ids;
  std::vector<std::size_t> test_ids;
  std::vector<std::uint32_t> predictions;  // aligned with test_ids
  std::vector<std::uint32_t> fit_fingerprints;
  double accuracy = 0.0;
  std::uint32_t model_crc = 0;
};

struct EvalReport {
  std::string protocol;  // "cv" or "holdout"
  std::size_t classes = 0;
  std::vector<FoldResult> folds;
  std::vector<double> fold_accuracy;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  StdConvention std_convention = StdConvention::Population;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted], summed over folds
  std::size_t parameter_count = 0;
  LatencyStats latency;  // per-trial network inference on test trials
};

double mean_of(std::span<const double> xs);
double std_of(std::span<const double> xs, StdConvention convention);

// Per-class shuffle, then round-robin over folds. Throws InsufficientData
// when a class has fewer than `folds` trials.
std::vector<std::vector<std::size_t>> stratified_folds(std::span<const std::uint32_t> labels, std::size_t classes,
                                                       std::size_t folds, std::uint64_t seed);

EvalReport evaluate_cv(const TrainConfig& config, const RawTrialSet& trials, std::size_t folds);
// Throws SchemaMismatch when sample rate, trial length, M or C differ.
EvalReport evaluate_holdout(const TrainConfig& config, const RawTrialSet& train_set, const RawTrialSet& eval_set);

// Full pipeline per trial: filter bank, windows, covariances, network, logits.
LatencyStats bench_inference(const ModelBundle& model, const RawTrialSet& trials, std::size_t repetitions);

// Sectioned CSV, first column names the record kind. Timing is left out
// unless asked for so that re-runs are byte-identical.
std::string report_csv(const EvalReport& report, bool include_timing = false);
std::string latency_csv(const LatencyStats& stats);
std::string selection_csv(const SelectionTransform& selection);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace lgl
