#include "lglbci/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "lglbci/error.hpp"
#include "lglbci/model_io.hpp"
#include "lglbci/parallel.hpp"

namespace lgl {

namespace {

// Separate stream for mini-batch order, so initialisation and shuffling
// do not share draws.
constexpr std::uint64_t kShuffleSalt = 0x9E3779B97F4A7C15ULL;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double accuracy_on(const ModelBundle& model, std::span<const PreparedTrial> trials) {
  if (trials.empty()) return 0.0;
  std::vector<std::uint32_t> pred(trials.size());
  parallel_for(trials.size(), model.config.threads, [&](std::size_t i) { pred[i] = predict(model, trials[i].cov); });
  std::size_t hits = 0;
  for (std::size_t i = 0; i < trials.size(); ++i) hits += pred[i] == trials[i].label;
  return static_cast<double>(hits) / static_cast<double>(trials.size());
}

std::vector<PreparedTrial> pick(std::span<const PreparedTrial> all, std::span<const std::size_t> ids) {
  std::vector<PreparedTrial> out;
  out.reserve(ids.size());
  for (auto i : ids) out.push_back(all[i]);
  return out;
}

void finish_report(EvalReport& r) {
  r.fold_accuracy.clear();
  for (const auto& f : r.folds) r.fold_accuracy.push_back(f.accuracy);
  r.mean_accuracy = mean_of(r.fold_accuracy);
  r.std_accuracy = std_of(r.fold_accuracy, r.std_convention);
}

// Predicts each test trial, timing the network part alone.
void score_fold(const ModelBundle& model, std::span<const PreparedTrial> test, FoldResult& fold, EvalReport& report,
                std::vector<double>& times) {
  std::size_t hits = 0;
  for (const auto& t : test) {
    const auto start = std::chrono::steady_clock::now();
    const auto p = predict(model, t.cov);
    times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    fold.predictions.push_back(p);
    report.confusion[t.label][p] += 1;
    hits += p == t.label;
  }
  fold.accuracy = test.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(test.size());
}

}  // namespace

std::uint32_t trial_fingerprint(const PreparedTrial& trial) {
  std::vector<std::uint8_t> bytes(sizeof(trial.label));
  std::memcpy(bytes.data(), &trial.label, sizeof(trial.label));
  for (const auto& m : trial.cov.slices) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(m.data());
    bytes.insert(bytes.end(), p, p + m.size() * sizeof(double));
  }
  return crc32(bytes);
}

ModelBundle initialise_model(const TrainConfig& config, const DataSchema& schema,
                             std::span<const PreparedTrial> trials) {
  if (trials.empty()) throw Error(ErrorCode::InsufficientData, "no training trials");
  std::mt19937_64 rng(config.seed);
  ModelBundle model = init_model(config, schema, rng);
  auto& net = model.network;
  const std::size_t bands = net.bands();
  const std::size_t windows = model.windows;
  for (const auto& t : trials) {
    if (t.cov.windows != windows || t.cov.bands != bands) {
      throw Error(ErrorCode::ShapeMismatch, "prepared trial does not match the configuration");
    }
  }
  const auto channels = static_cast<double>(schema.channels);

  // Per-band scale: mean trace / M over the training windows.
  for (std::size_t f = 0; f < bands; ++f) {
    double sum = 0.0;
    for (const auto& t : trials) {
      for (std::size_t s = 0; s < windows; ++s) sum += t.cov.at(s, f).trace() / channels;
    }
    net.band_scale[static_cast<Eigen::Index>(f)] = sum / static_cast<double>(trials.size() * windows);
  }

  const KarcherOptions karcher{config.karcher_iterations, config.karcher_tolerance};
  parallel_for(bands, config.threads, [&](std::size_t f) {
    Batch pre;
    pre.reserve(trials.size() * windows);
    for (const auto& t : trials) {
      for (std::size_t s = 0; s < windows; ++s) pre.push_back(net.pre_rbn_band(f, t.cov.at(s, f)));
    }
    net.stacks[f].rbn.set_running_mean(karcher_mean(pre, karcher));
  });

  // One representative per (class, band): Karcher mean of the normalised windows.
  std::map<std::uint32_t, std::vector<const PreparedTrial*>> by_class;
  for (const auto& t : trials) by_class[t.label].push_back(&t);
  std::vector<std::pair<std::uint32_t, std::size_t>> keys;
  for (const auto& [label, members] : by_class) {
    for (std::size_t f = 0; f < bands; ++f) keys.emplace_back(label, f);
  }
  std::vector<Matrix> points(keys.size());
  parallel_for(keys.size(), config.threads, [&](std::size_t i) {
    const auto [label, f] = keys[i];
    Batch x;
    for (const auto* t : by_class.at(label)) {
      for (std::size_t s = 0; s < windows; ++s) x.push_back(net.spd_band(f, t->cov.at(s, f)));
    }
    points[i] = karcher_mean(x, karcher);
  });

  SelectionOptions options;
  options.m = static_cast<Eigen::Index>(config.m);
  options.max_iters = config.selection_max_iters;
  options.tol = config.selection_tol;
  options.rule = config.selection_rule;
  model.selection = fit_selection(points, std::nullopt, options);
  model.heads = init_heads(model.selection, net.out_dim(), config.heads, rng);
  model.parameter_count = count_parameters(model);
  return model;
}

TrainResult train_prepared(const TrainConfig& config, const DataSchema& schema, std::span<const PreparedTrial> trials,
                           const EpochCallback& on_epoch) {
  TrainResult result;
  result.model = initialise_model(config, schema, trials);
  for (const auto& t : trials) result.fit_fingerprints.push_back(trial_fingerprint(t));

  std::mt19937_64 shuffle(config.seed ^ kShuffleSalt);
  std::vector<std::size_t> order(trials.size());
  std::iota(order.begin(), order.end(), 0);
  const auto batch_size = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t end = std::min(order.size(), start + batch_size);
      std::vector<const PreparedTrial*> batch;
      for (std::size_t i = start; i < end; ++i) batch.push_back(&trials[order[i]]);
      total += train_step(result.model, batch, config.learning_rate) * static_cast<double>(batch.size());
    }
    result.epoch_loss.push_back(total / static_cast<double>(trials.size()));
    if (on_epoch) on_epoch(epoch, result.epoch_loss.back(), result.model);
  }
  result.train_accuracy = accuracy_on(result.model, trials);
  return result;
}

TrainResult train(const TrainConfig& config, const RawTrialSet& trials, const EpochCallback& on_epoch) {
  const auto prepared = prepare_trials(trials, config);
  return train_prepared(config, DataSchema::of(trials), prepared, on_epoch);
}

SelectionTransform select_channels(const TrainConfig& config, const RawTrialSet& trials) {
  const auto prepared = prepare_trials(trials, config);
  return initialise_model(config, DataSchema::of(trials), prepared).selection;
}

LatencyStats LatencyStats::from(std::vector<double> samples) {
  LatencyStats s;
  s.samples = std::move(samples);
  if (s.samples.empty()) return s;
  s.mean = mean_of(s.samples);
  s.max = *std::max_element(s.samples.begin(), s.samples.end());
  std::vector<double> sorted = s.samples;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  s.median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  return s;
}

double mean_of(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

double std_of(std::span<const double> xs, StdConvention convention) {
  const std::size_t n = xs.size();
  if (n == 0 || (convention == StdConvention::Sample && n < 2)) return 0.0;
  const double mu = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - mu) * (x - mu);
  const double divisor = convention == StdConvention::Population ? static_cast<double>(n) : static_cast<double>(n - 1);
  return std::sqrt(ss / divisor);
}

std::vector<std::vector<std::size_t>> stratified_folds(std::span<const std::uint32_t> labels, std::size_t classes,
                                                       std::size_t folds, std::uint64_t seed) {
  if (folds < 2) throw Error(ErrorCode::InvalidConfig, "cross-validation needs at least two folds");
  std::vector<std::vector<std::size_t>> by_class(classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= classes) throw Error(ErrorCode::LabelOutOfRange, "label " + std::to_string(labels[i]));
    by_class[labels[i]].push_back(i);
  }
  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::size_t>> out(folds);
  std::size_t next = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    if (by_class[c].size() < folds) {
      throw Error(ErrorCode::InsufficientData, "class " + std::to_string(c) + " has " +
                                                   std::to_string(by_class[c].size()) + " trials for " +
                                                   std::to_string(folds) + " folds");
    }
    std::shuffle(by_class[c].begin(), by_class[c].end(), rng);
    // Continue the round-robin across classes so fold sizes stay balanced.
    for (auto i : by_class[c]) out[next++ % folds].push_back(i);
  }
  for (auto& f : out) std::sort(f.begin(), f.end());
  return out;
}

EvalReport evaluate_cv(const TrainConfig& config, const RawTrialSet& trials, std::size_t folds) {
  trials.validate();
  std::vector<std::uint32_t> labels;
  for (const auto& t : trials.trials) labels.push_back(t.label);
  const auto assignment = stratified_folds(labels, trials.n_classes, folds, config.seed);
  // Filtering and covariances are per-trial, so preparing everything once
  // cannot leak; every fitted quantity is computed inside train_prepared.
  const auto prepared = prepare_trials(trials, config);
  const auto schema = DataSchema::of(trials);

  EvalReport report;
  report.protocol = "cv";
  report.classes = trials.n_classes;
  report.std_convention = config.std_convention;
  report.confusion.assign(trials.n_classes, std::vector<std::size_t>(trials.n_classes, 0));
  std::vector<double> times;
  for (std::size_t k = 0; k < folds; ++k) {
    FoldResult fold;
    fold.test_ids = assignment[k];
    for (std::size_t j = 0; j < folds; ++j) {
      if (j != k) fold.train_ids.insert(fold.train_ids.end(), assignment[j].begin(), assignment[j].end());
    }
    std::sort(fold.train_ids.begin(), fold.train_ids.end());
    const auto train_part = pick(prepared, fold.train_ids);
    const auto test_part = pick(prepared, fold.test_ids);
    auto trained = train_prepared(config, schema, train_part);
    fold.fit_fingerprints = std::move(trained.fit_fingerprints);
    fold.model_crc = model_hash(trained.model);
    report.parameter_count = trained.model.parameter_count;
    score_fold(trained.model, test_part, fold, report, times);
    report.folds.push_back(std::move(fold));
  }
  report.latency = LatencyStats::from(std::move(times));
  finish_report(report);
  return report;
}

EvalReport evaluate_holdout(const TrainConfig& config, const RawTrialSet& train_set, const RawTrialSet& eval_set) {
  train_set.validate();
  eval_set.validate();
  const auto schema = DataSchema::of(train_set);
  if (!(schema == DataSchema::of(eval_set))) {
    throw Error(ErrorCode::SchemaMismatch, "train and eval sets differ in sample rate, trial length, M or C");
  }
  const auto train_part = prepare_trials(train_set, config);
  const auto test_part = prepare_trials(eval_set, config);

  EvalReport report;
  report.protocol = "holdout";
  report.classes = schema.classes;
  report.std_convention = config.std_convention;
  report.confusion.assign(schema.classes, std::vector<std::size_t>(schema.classes, 0));
  FoldResult fold;
  fold.train_ids.resize(train_part.size());
  std::iota(fold.train_ids.begin(), fold.train_ids.end(), 0);
  fold.test_ids.resize(test_part.size());
  std::iota(fold.test_ids.begin(), fold.test_ids.end(), 0);
  auto trained = train_prepared(config, schema, train_part);
  fold.fit_fingerprints = std::move(trained.fit_fingerprints);
  fold.model_crc = model_hash(trained.model);
  report.parameter_count = trained.model.parameter_count;
  std::vector<double> times;
  score_fold(trained.model, test_part, fold, report, times);
  report.folds.push_back(std::move(fold));
  report.latency = LatencyStats::from(std::move(times));
  finish_report(report);
  return report;
}

LatencyStats bench_inference(const ModelBundle& model, const RawTrialSet& trials, std::size_t repetitions) {
  if (repetitions < 1) throw Error(ErrorCode::InvalidConfig, "repetitions must be positive");
  trials.validate();
  if (!(DataSchema::of(trials) == model.schema)) throw Error(ErrorCode::SchemaMismatch, "data does not match the model");
  const FilterBank bank(model.config.bands, trials.sample_rate_hz);
  std::vector<double> samples;
  samples.reserve(repetitions * trials.trials.size());
  for (std::size_t r = 0; r < repetitions; ++r) {
    for (const auto& t : trials.trials) {
      const auto start = std::chrono::steady_clock::now();
      const auto prepared = prepare_trial(bank, t, model.config);
      const Vector logits = predict_logits(model, prepared.cov);
      const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      if (!logits.allFinite()) throw Error(ErrorCode::NonFiniteValue, "non-finite logits");
      samples.push_back(elapsed);
    }
  }
  return LatencyStats::from(std::move(samples));
}

std::string report_csv(const EvalReport& r, bool include_timing) {
  std::ostringstream out;
  out << "record,key,value\n";
  out << "meta,protocol," << r.protocol << "\n";
  out << "meta,folds," << r.folds.size() << "\n";
  out << "meta,classes," << r.classes << "\n";
  out << "meta,parameter_count," << r.parameter_count << "\n";
  out << "meta,std_convention,"
      << (r.std_convention == StdConvention::Population ? "population_over_folds" : "sample_over_folds") << "\n";
  for (std::size_t k = 0; k < r.folds.size(); ++k) {
    const auto& f = r.folds[k];
    char crc[16];
    std::snprintf(crc, sizeof(crc), "%08x", f.model_crc);
    out << "fold," << k << "," << fmt(f.accuracy) << "," << f.test_ids.size() << "," << crc << "\n";
  }
  out << "summary,mean_accuracy," << fmt(r.mean_accuracy) << "\n";
  out << "summary,std_accuracy," << fmt(r.std_accuracy) << "\n";
  for (std::size_t i = 0; i < r.confusion.size(); ++i) {
    out << "confusion," << i;
    for (auto v : r.confusion[i]) out << "," << v;
    out << "\n";
  }
  if (include_timing) {
    out << "timing,mean_s," << fmt(r.latency.mean) << "\n";
    out << "timing,median_s," << fmt(r.latency.median) << "\n";
    out << "timing,max_s," << fmt(r.latency.max) << "\n";
  }
  return out.str();
}

std::string latency_csv(const LatencyStats& s) {
  std::ostringstream out;
  out << "record,key,value\n";
  out << "summary,count," << s.samples.size() << "\n";
  out << "summary,mean_s," << fmt(s.mean) << "\n";
  out << "summary,median_s," << fmt(s.median) << "\n";
  out << "summary,max_s," << fmt(s.max) << "\n";
  for (std::size_t i = 0; i < s.samples.size(); ++i) out << "sample," << i << "," << fmt(s.samples[i]) << "\n";
  return out.str();
}

std::string selection_csv(const SelectionTransform& s) {
  std::ostringstream out;
  out << "record,key,value\n";
  for (std::size_t i = 0; i < s.selected_channels.size(); ++i) out << "channel," << i << "," << s.selected_channels[i] << "\n";
  for (std::size_t i = 0; i < s.objective_trace.size(); ++i) out << "objective," << i << "," << fmt(s.objective_trace[i]) << "\n";
  out << "summary,iterations," << s.iterations_run << "\n";
  out << "summary,initial_gamma_gap," << fmt(s.initial_gamma_gap) << "\n";
  out << "summary,final_gamma_gap," << fmt(s.final_gamma_gap) << "\n";
  return out.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error(ErrorCode::IoFailure, "write to " + path.string() + " failed");
}

}  // namespace lgl
