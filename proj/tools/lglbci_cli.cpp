#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "lglbci/config.hpp"
#include "lglbci/eeg_io.hpp"
#include "lglbci/error.hpp"
#include "lglbci/model_io.hpp"
#include "lglbci/synthetic.hpp"
#include "lglbci/trainer.hpp"

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw lgl::Error(lgl::ErrorCode::IoFailure, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

lgl::TrainConfig config_from(const std::string& path) {
  return path.empty() ? lgl::TrainConfig{} : lgl::load_config(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Filter-bank SPD-manifold EEG classifier with geometry-aware channel selection"};
  app.require_subcommand(1);

  std::string config_path, data_path, out_path, report_path, train_path, test_path, model_path, spec_path;
  std::size_t folds = 10, reps = 10;
  bool timing = false, quiet = false;

  auto* train = app.add_subcommand("train", "Fit a model and save it");
  train->add_option("--config", config_path, "key = value config file (defaults when omitted)");
  train->add_option("--data", data_path, "EEGB trial file")->required();
  train->add_option("--out", out_path, "model output path")->required();
  train->add_flag("--quiet", quiet, "no per-epoch loss lines");

  auto* cv = app.add_subcommand("eval-cv", "Stratified k-fold cross-validation");
  cv->add_option("--config", config_path);
  cv->add_option("--data", data_path)->required();
  cv->add_option("--folds", folds, "number of folds")->check(CLI::Range(2, 1000));
  cv->add_option("--report", report_path, "CSV report path")->required();
  cv->add_flag("--timing", timing, "append latency lines (breaks byte-identical re-runs)");

  auto* holdout = app.add_subcommand("eval-holdout", "Train on one set, evaluate on another");
  holdout->add_option("--config", config_path);
  holdout->add_option("--train", train_path)->required();
  holdout->add_option("--test", test_path)->required();
  holdout->add_option("--report", report_path)->required();
  holdout->add_flag("--timing", timing);

  auto* select = app.add_subcommand("select", "Channel selection only");
  select->add_option("--config", config_path);
  select->add_option("--data", data_path)->required();
  select->add_option("--out", out_path, "CSV with channel indices and objective trace")->required();

  auto* bench = app.add_subcommand("bench", "Per-trial inference latency of the full pipeline");
  bench->add_option("--model", model_path)->required();
  bench->add_option("--data", data_path)->required();
  bench->add_option("--reps", reps)->check(CLI::PositiveNumber);
  bench->add_option("--report", report_path)->required();

  auto* gen = app.add_subcommand("gen-synthetic", "Write a synthetic EEGB data set");
  gen->add_option("--spec", spec_path, "generator spec, key = value")->required();
  gen->add_option("--out", out_path)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      const auto config = config_from(config_path);
      const auto data = lgl::load_trials(data_path);
      const auto result = lgl::train(config, data, [&](int epoch, double loss, const lgl::ModelBundle&) {
        if (!quiet) std::printf("epoch %d loss %.6f\n", epoch + 1, loss);
      });
      lgl::save_model(result.model, out_path);
      std::printf("train accuracy %.4f, %zu parameters, selected channels", result.train_accuracy,
                  result.model.parameter_count);
      for (auto c : result.model.selection.selected_channels) std::printf(" %zu", c);
      std::printf("\n");
    } else if (*cv) {
      const auto report = lgl::evaluate_cv(config_from(config_path), lgl::load_trials(data_path), folds);
      lgl::write_text(report_path, lgl::report_csv(report, timing));
      std::printf("mean accuracy %.4f (population std over folds %.4f)\n", report.mean_accuracy, report.std_accuracy);
    } else if (*holdout) {
      const auto report = lgl::evaluate_holdout(config_from(config_path), lgl::load_trials(train_path),
                                                lgl::load_trials(test_path));
      lgl::write_text(report_path, lgl::report_csv(report, timing));
      std::printf("holdout accuracy %.4f\n", report.mean_accuracy);
    } else if (*select) {
      const auto selection = lgl::select_channels(config_from(config_path), lgl::load_trials(data_path));
      lgl::write_text(out_path, lgl::selection_csv(selection));
    } else if (*bench) {
      const auto stats = lgl::bench_inference(lgl::load_model(model_path), lgl::load_trials(data_path), reps);
      lgl::write_text(report_path, lgl::latency_csv(stats));
      std::printf("mean %.3f ms, median %.3f ms, max %.3f ms\n", stats.mean * 1e3, stats.median * 1e3, stats.max * 1e3);
    } else if (*gen) {
      lgl::save_trials(lgl::generate_synthetic(lgl::parse_synthetic_spec(slurp(spec_path))), out_path);
    }
  } catch (const lgl::Error& e) {
    std::fprintf(stderr, "error %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
