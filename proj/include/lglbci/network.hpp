#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "lglbci/channel_select.hpp"
#include "lglbci/config.hpp"
#include "lglbci/eeg_io.hpp"
#include "lglbci/filter_bank.hpp"
#include "lglbci/manifold_layers.hpp"
#include "lglbci/tangent_classifier.hpp"

namespace lgl {

// What a model expects of its input data.
struct DataSchema {
  double sample_rate_hz = 0.0;
  std::size_t channels = 0;
  std::size_t samples_per_trial = 0;
  std::size_t classes = 0;

  bool operator==(const DataSchema&) const = default;
  static DataSchema of(const RawTrialSet& set);
};

// Per-band layer stack: [BiMap -> ReEig] ... BiMap -> RBN -> ReEig -> LogEig.
struct BandStack {
  std::vector<BiMapLayer> bimaps;
  std::vector<ReEigLayer> reeigs;  // one after each BiMap but the last
  RbnLayer rbn;
  ReEigLayer post_reeig;
  LogEigLayer logeig;

  Eigen::Index in_dim() const { return bimaps.front().in_dim(); }
  Eigen::Index out_dim() const { return bimaps.back().out_dim(); }
};

struct BandGradients {
  std::vector<Matrix> bimaps;
  Matrix rbn_bias;
};

class ManifoldNetwork {
 public:
  ManifoldNetwork() = default;
  ManifoldNetwork(std::size_t bands, Eigen::Index channels, const TrainConfig& config);

  std::vector<BandStack> stacks;
  // Inputs of band f are divided by band_scale[f] before the first BiMap.
  Vector band_scale;

  std::size_t bands() const { return stacks.size(); }
  Eigen::Index out_dim() const { return stacks.empty() ? 0 : stacks.front().out_dim(); }

  // Through the whole stack, caching for backward. Returns tangent vectors.
  Batch forward_band(std::size_t f, std::span<const Matrix> batch, bool training);
  // Tangent gradients back to the layer parameters (input gradient dropped).
  BandGradients backward_band(std::size_t f, std::span<const Matrix> grad_tangent);

  // Cache-free inference. pre_rbn_* stops before RBN, spd_* before LogEig.
  Matrix pre_rbn_band(std::size_t f, const Matrix& x) const;
  Matrix spd_band(std::size_t f, const Matrix& x) const;
  Matrix tangent_band(std::size_t f, const Matrix& x) const;

  void apply_gradients(const std::vector<BandGradients>& grads, double step);
  void clear_caches();
  std::size_t parameter_count() const;
};

struct ModelBundle {
  TrainConfig config;
  DataSchema schema;
  std::size_t windows = 0;
  ManifoldNetwork network;
  SelectionTransform selection;
  MbtHeads heads;
  TangentClassifier classifier;
  std::size_t parameter_count = 0;
};

// Freshly initialised model; selection is the first-m-channels default until fitted.
ModelBundle init_model(const TrainConfig& config, const DataSchema& schema, std::mt19937_64& rng);

// Exact scalar count of learnable parameters, heads included.
std::size_t count_parameters(const ModelBundle& model);

FeatureShape feature_shape(const ModelBundle& model);

// S x F covariances with shrinkage * trace / M on the diagonal.
// Throws DegenerateInput on an all-constant window.
SpdTensor covariance_tensor(const TrialTensor& tensor, double shrinkage);

struct PreparedTrial {
  std::uint32_t label = 0;
  SpdTensor cov;
};

std::vector<PreparedTrial> prepare_trials(const RawTrialSet& set, const TrainConfig& config);
PreparedTrial prepare_trial(const FilterBank& bank, const Trial& trial, const TrainConfig& config);

// Stacked MBT blocks for one trial from its per-band tangent vectors,
// tangents[f][s]; block order matches reshape_features.
std::vector<Matrix> mbt_blocks(const MbtHeads& heads, const std::vector<std::vector<Matrix>>& tangents,
                               std::size_t windows);

Vector predict_logits(const ModelBundle& model, const SpdTensor& cov);
std::uint32_t predict(const ModelBundle& model, const SpdTensor& cov);

struct ModelGradients {
  double loss = 0.0;  // mean cross-entropy over the batch
  TangentClassifier::Gradients classifier;
  std::vector<Matrix> heads;  // Euclidean; heads[0] stays frozen
  std::vector<BandGradients> bands;
};

// Training-mode forward and backward (updates the RBN running means).
// Throws NonFiniteLoss.
ModelGradients compute_gradients(ModelBundle& model, std::span<const PreparedTrial* const> batch);
// Euclidean steps for unconstrained parameters, QR retraction for BiMap
// weights and MBT heads.
void apply_gradients(ModelBundle& model, const ModelGradients& grads, double step);

// compute_gradients then apply_gradients; returns the batch loss.
double train_step(ModelBundle& model, std::span<const PreparedTrial* const> batch, double step);

}  // namespace lgl
