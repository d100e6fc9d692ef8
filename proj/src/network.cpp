#include "lglbci/network.hpp"

#include <cmath>

#include "lglbci/error.hpp"
#include "lglbci/parallel.hpp"
#include "lglbci/stiefel.hpp"

namespace lgl {

namespace {

std::vector<std::size_t> layer_widths(const TrainConfig& config, Eigen::Index channels) {
  if (!config.bimap_widths.empty()) {
    if (static_cast<Eigen::Index>(config.bimap_widths.front()) > channels) {
      throw Error(ErrorCode::InvalidConfig, "first BiMap width exceeds the channel count");
    }
    return config.bimap_widths;
  }
  return std::vector<std::size_t>(static_cast<std::size_t>(config.bimap_layers), static_cast<std::size_t>(channels));
}

Matrix rectify(const Matrix& x, double epsilon) {
  return eig_apply(sym_eig(x), [epsilon](double l) { return std::max(l, epsilon); });
}

}  // namespace

DataSchema DataSchema::of(const RawTrialSet& set) {
  return {set.sample_rate_hz, set.channels, set.samples_per_trial, set.n_classes};
}

ManifoldNetwork::ManifoldNetwork(std::size_t bands, Eigen::Index channels, const TrainConfig& config) {
  const auto widths = layer_widths(config, channels);
  const RbnOptions rbn{config.karcher_iterations, config.karcher_tolerance, config.rbn_momentum, config.rbn_bias};
  stacks.reserve(bands);
  for (std::size_t f = 0; f < bands; ++f) {
    std::vector<BiMapLayer> bimaps;
    std::vector<ReEigLayer> reeigs;
    Eigen::Index in = channels;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      const auto out = static_cast<Eigen::Index>(widths[i]);
      bimaps.push_back(BiMapLayer::identity(in, out));
      if (i + 1 < widths.size()) reeigs.emplace_back(config.reeig_epsilon);
      in = out;
    }
    stacks.push_back(BandStack{std::move(bimaps), std::move(reeigs), RbnLayer(in, rbn),
                               ReEigLayer(config.reeig_epsilon), LogEigLayer{}});
  }
  band_scale = Vector::Ones(static_cast<Eigen::Index>(bands));
}

Batch ManifoldNetwork::forward_band(std::size_t f, std::span<const Matrix> batch, bool training) {
  auto& st = stacks[f];
  Batch x(batch.begin(), batch.end());
  for (auto& m : x) m /= band_scale[static_cast<Eigen::Index>(f)];
  for (std::size_t i = 0; i < st.bimaps.size(); ++i) {
    x = st.bimaps[i].forward(x);
    if (i < st.reeigs.size()) x = st.reeigs[i].forward(x);
  }
  x = st.rbn.forward(x, training);
  x = st.post_reeig.forward(x);
  return st.logeig.forward(x);
}

BandGradients ManifoldNetwork::backward_band(std::size_t f, std::span<const Matrix> grad_tangent) {
  auto& st = stacks[f];
  BandGradients out;
  out.bimaps.resize(st.bimaps.size());
  Batch g = st.logeig.backward(grad_tangent);
  g = st.post_reeig.backward(g);
  auto rbn = st.rbn.backward(g);
  out.rbn_bias = std::move(rbn.bias);
  g = std::move(rbn.input);
  for (std::size_t i = st.bimaps.size(); i-- > 0;) {
    if (i < st.reeigs.size()) g = st.reeigs[i].backward(g);
    auto b = st.bimaps[i].backward(g);
    out.bimaps[i] = std::move(b.weight);
    g = std::move(b.input);
  }
  return out;
}

Matrix ManifoldNetwork::pre_rbn_band(std::size_t f, const Matrix& input) const {
  const auto& st = stacks[f];
  Matrix x = input / band_scale[static_cast<Eigen::Index>(f)];
  for (std::size_t i = 0; i < st.bimaps.size(); ++i) {
    const Matrix& w = st.bimaps[i].weight();
    x = symmetrize(w * x * w.transpose());
    if (i < st.reeigs.size()) x = rectify(x, st.reeigs[i].epsilon());
  }
  return x;
}

Matrix ManifoldNetwork::spd_band(std::size_t f, const Matrix& input) const {
  const auto& st = stacks[f];
  Matrix x = pre_rbn_band(f, input);
  const Matrix q = pow_spd_unchecked(st.rbn.running_mean(), -0.5);
  x = symmetrize(q * x * q);
  if (st.rbn.options().learn_bias) {
    const Matrix c = exp_sym_unchecked(0.5 * st.rbn.bias());
    x = symmetrize(c * x * c);
  }
  return rectify(x, st.post_reeig.epsilon());
}

Matrix ManifoldNetwork::tangent_band(std::size_t f, const Matrix& x) const {
  return spd_log(SpdMatrix(spd_band(f, x))).mat();
}

void ManifoldNetwork::apply_gradients(const std::vector<BandGradients>& grads, double step) {
  for (std::size_t f = 0; f < stacks.size(); ++f) {
    for (std::size_t i = 0; i < stacks[f].bimaps.size(); ++i) stacks[f].bimaps[i].apply_gradient(grads[f].bimaps[i], step);
    stacks[f].rbn.apply_gradient(grads[f].rbn_bias, step);
  }
}

void ManifoldNetwork::clear_caches() {
  for (auto& st : stacks) {
    for (auto& b : st.bimaps) b.clear_cache();
    for (auto& r : st.reeigs) r.clear_cache();
    st.rbn.clear_cache();
    st.post_reeig.clear_cache();
    st.logeig.clear_cache();
  }
}

std::size_t ManifoldNetwork::parameter_count() const {
  std::size_t n = 0;
  for (const auto& st : stacks) {
    for (const auto& b : st.bimaps) n += static_cast<std::size_t>(b.weight().size());
    if (st.rbn.options().learn_bias) {
      const auto d = static_cast<std::size_t>(st.out_dim());
      n += d * (d + 1) / 2;
    }
  }
  return n;
}

FeatureShape feature_shape(const ModelBundle& model) {
  return {model.windows, model.network.bands(), model.heads.size(), model.config.m};
}

std::size_t count_parameters(const ModelBundle& model) {
  std::size_t heads = 0;
  for (const auto& h : model.heads.heads) heads += static_cast<std::size_t>(h.size());
  return model.network.parameter_count() + heads + model.classifier.parameter_count();
}

ModelBundle init_model(const TrainConfig& config, const DataSchema& schema, std::mt19937_64& rng) {
  config.validate();
  if (schema.classes < 2) throw Error(ErrorCode::InvalidConfig, "need at least two classes");
  config.bands.validate(schema.sample_rate_hz);
  FilterBank(config.bands, schema.sample_rate_hz).check_window(config.window_len, schema.samples_per_trial);

  ModelBundle model;
  model.config = config;
  model.schema = schema;
  model.windows = schema.samples_per_trial / config.window_len;
  model.network = ManifoldNetwork(config.bands.bands.size(), static_cast<Eigen::Index>(schema.channels), config);
  const Eigen::Index dim = model.network.out_dim();
  if (static_cast<Eigen::Index>(config.m) > dim) {
    throw Error(ErrorCode::InvalidConfig, "m = " + std::to_string(config.m) + " exceeds the feature dimension " +
                                              std::to_string(dim));
  }
  const auto m = static_cast<Eigen::Index>(config.m);
  model.selection.w_hat = Matrix::Identity(dim, m);
  for (std::size_t c = 0; c < config.m; ++c) model.selection.selected_channels.push_back(c);
  model.heads = init_heads(model.selection, dim, config.heads, rng);
  model.classifier = TangentClassifier(feature_shape(model), config.conv_maps, schema.classes, rng);
  model.parameter_count = count_parameters(model);
  return model;
}

SpdTensor covariance_tensor(const TrialTensor& tensor, double shrinkage) {
  SpdTensor out{tensor.windows(), tensor.bands(), {}};
  out.slices.reserve(tensor.windows() * tensor.bands());
  const auto channels = static_cast<double>(tensor.channels());
  for (std::size_t s = 0; s < tensor.windows(); ++s) {
    for (std::size_t f = 0; f < tensor.bands(); ++f) {
      const Matrix window = tensor.slice(s, f);
      const Matrix centred = window.colwise() - window.rowwise().mean();
      const double trace = centred.squaredNorm() / static_cast<double>(window.cols());
      if (!(trace > 0.0)) throw Error(ErrorCode::DegenerateInput, "constant window");
      out.slices.push_back(covariance(window, shrinkage * trace / channels).mat());
    }
  }
  return out;
}

PreparedTrial prepare_trial(const FilterBank& bank, const Trial& trial, const TrainConfig& config) {
  return {trial.label, covariance_tensor(bank.apply(trial.data, config.window_len), config.shrinkage)};
}

std::vector<PreparedTrial> prepare_trials(const RawTrialSet& set, const TrainConfig& config) {
  set.validate();
  const FilterBank bank(config.bands, set.sample_rate_hz);
  bank.check_window(config.window_len, set.samples_per_trial);
  std::vector<PreparedTrial> out(set.trials.size());
  parallel_for(set.trials.size(), config.threads,
               [&](std::size_t i) { out[i] = prepare_trial(bank, set.trials[i], config); });
  return out;
}

std::vector<Matrix> mbt_blocks(const MbtHeads& heads, const std::vector<std::vector<Matrix>>& tangents,
                               std::size_t windows) {
  const std::size_t bands = tangents.size();
  std::vector<Matrix> blocks;
  blocks.reserve(windows * bands * heads.size());
  for (std::size_t s = 0; s < windows; ++s) {
    for (std::size_t f = 0; f < bands; ++f) {
      for (const auto& w : heads.heads) blocks.push_back(w.transpose() * tangents[f][s] * w);
    }
  }
  return blocks;
}

Vector predict_logits(const ModelBundle& model, const SpdTensor& cov) {
  const std::size_t bands = model.network.bands();
  if (cov.windows != model.windows || cov.bands != bands) {
    throw Error(ErrorCode::ShapeMismatch, "covariance tensor does not match the model");
  }
  std::vector<std::vector<Matrix>> tangents(bands, std::vector<Matrix>(cov.windows));
  for (std::size_t f = 0; f < bands; ++f) {
    for (std::size_t s = 0; s < cov.windows; ++s) tangents[f][s] = model.network.tangent_band(f, cov.at(s, f));
  }
  const auto blocks = mbt_blocks(model.heads, tangents, cov.windows);
  return model.classifier.forward(reshape_features(blocks, feature_shape(model))).logits;
}

std::uint32_t predict(const ModelBundle& model, const SpdTensor& cov) {
  Eigen::Index best = 0;
  predict_logits(model, cov).maxCoeff(&best);
  return static_cast<std::uint32_t>(best);
}

ModelGradients compute_gradients(ModelBundle& model, std::span<const PreparedTrial* const> batch) {
  const std::size_t n = batch.size();
  const std::size_t windows = model.windows;
  const std::size_t bands = model.network.bands();
  const std::size_t workers = model.config.threads;
  const FeatureShape shape = feature_shape(model);
  if (n == 0) throw Error(ErrorCode::InsufficientData, "empty batch");
  for (const auto* t : batch) {
    if (t->cov.windows != windows || t->cov.bands != bands) {
      throw Error(ErrorCode::ShapeMismatch, "covariance tensor does not match the model");
    }
  }

  // tangents[f][b * S + s]
  std::vector<Batch> tangents(bands);
  parallel_for(bands, workers, [&](std::size_t f) {
    Batch inputs;
    inputs.reserve(n * windows);
    for (const auto* t : batch) {
      for (std::size_t s = 0; s < windows; ++s) inputs.push_back(t->cov.at(s, f));
    }
    tangents[f] = model.network.forward_band(f, inputs, true);
  });

  struct PerTrial {
    double loss = 0.0;
    TangentClassifier::Gradients clf;
    std::vector<Matrix> grad_blocks;
  };
  std::vector<PerTrial> per(n);
  parallel_for(n, workers, [&](std::size_t b) {
    std::vector<std::vector<Matrix>> mine(bands, std::vector<Matrix>(windows));
    for (std::size_t f = 0; f < bands; ++f) {
      for (std::size_t s = 0; s < windows; ++s) mine[f][s] = tangents[f][b * windows + s];
    }
    const auto fmap = reshape_features(mbt_blocks(model.heads, mine, windows), shape);
    const auto fwd = model.classifier.forward(fmap);
    per[b].loss = cross_entropy(fwd.logits, batch[b]->label);
    const Vector grad_logits = cross_entropy_grad(fwd.logits, batch[b]->label) / static_cast<double>(n);
    per[b].clf = model.classifier.backward(fmap, fwd, grad_logits);
    per[b].grad_blocks = inverse_reshape(per[b].clf.input);
  });

  ModelGradients out;
  for (const auto& p : per) out.loss += p.loss;
  out.loss /= static_cast<double>(n);
  if (!std::isfinite(out.loss)) {
    model.network.clear_caches();
    throw Error(ErrorCode::NonFiniteLoss, "mini-batch loss is not finite");
  }

  out.classifier = std::move(per[0].clf);
  auto& clf = out.classifier;
  for (std::size_t b = 1; b < n; ++b) {
    clf.kernel += per[b].clf.kernel;
    clf.conv_bias += per[b].clf.conv_bias;
    clf.omega1 += per[b].clf.omega1;
    clf.omega2 += per[b].clf.omega2;
    clf.head_weight += per[b].clf.head_weight;
    clf.head_bias += per[b].clf.head_bias;
  }
  clf.input = {};

  // MBT backward: H_k = W_k^T V W_k.
  const std::size_t k_heads = model.heads.size();
  const auto& heads = model.heads.heads;
  std::vector<Batch> grad_tangents(bands, Batch(n * windows));
  std::vector<std::vector<Matrix>> head_grads(bands, std::vector<Matrix>(k_heads));
  parallel_for(bands, workers, [&](std::size_t f) {
    for (std::size_t k = 0; k < k_heads; ++k) head_grads[f][k] = Matrix::Zero(heads[k].rows(), heads[k].cols());
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t s = 0; s < windows; ++s) {
        const Matrix& v = tangents[f][b * windows + s];
        Matrix gv = Matrix::Zero(v.rows(), v.cols());
        for (std::size_t k = 0; k < k_heads; ++k) {
          const Matrix& gh = per[b].grad_blocks[(s * bands + f) * k_heads + k];
          gv += heads[k] * gh * heads[k].transpose();
          head_grads[f][k] += v * heads[k] * (gh + gh.transpose());
        }
        grad_tangents[f][b * windows + s] = std::move(gv);
      }
    }
  });
  out.heads.resize(k_heads);
  for (std::size_t k = 0; k < k_heads; ++k) {
    out.heads[k] = Matrix::Zero(heads[k].rows(), heads[k].cols());
    for (std::size_t f = 0; f < bands; ++f) out.heads[k] += head_grads[f][k];
  }

  out.bands.resize(bands);
  parallel_for(bands, workers, [&](std::size_t f) { out.bands[f] = model.network.backward_band(f, grad_tangents[f]); });
  model.network.clear_caches();
  return out;
}

void apply_gradients(ModelBundle& model, const ModelGradients& grads, double step) {
  model.classifier.apply_gradient(grads.classifier, step);
  for (std::size_t k = 1; k < model.heads.size(); ++k) {
    model.heads.heads[k] = stiefel::retract_step(model.heads.heads[k], grads.heads[k], step);
  }
  model.network.apply_gradients(grads.bands, step);
}

double train_step(ModelBundle& model, std::span<const PreparedTrial* const> batch, double step) {
  const auto grads = compute_gradients(model, batch);
  apply_gradients(model, grads, step);
  return grads.loss;
}

}  // namespace lgl
