// One PASS/FAIL line per acceptance criterion. Exit status is the number
// of failed criteria.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gradcheck.hpp"
#include "lglbci/channel_select.hpp"
#include "lglbci/eeg_io.hpp"
#include "lglbci/error.hpp"
#include "lglbci/model_io.hpp"
#include "lglbci/spd.hpp"
#include "lglbci/stiefel.hpp"
#include "lglbci/synthetic.hpp"
#include "lglbci/trainer.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace lgl;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::string detail;
};

int report(int id, const Outcome& o, double secs) {
  std::printf("criterion %d %s (%.1fs) %s\n", id, o.pass ? "PASS" : "FAIL", secs, o.detail.c_str());
  std::fflush(stdout);
  return o.pass ? 0 : 1;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), f, a, b, c, d);
  return buf;
}

// ---------------------------------------------------------------- 1

Outcome riemannian_core() {
  std::mt19937_64 rng(101);
  double sym = 0.0, ident = 0.0, affine = 0.0, roundtrip = 0.0, psd = 0.0;
  for (Eigen::Index n : {5, 8}) {
    for (int t = 0; t < 200; ++t) {
      const SpdMatrix x(test::random_spd(n, rng)), y(test::random_spd(n, rng));
      const double dxy = airm_distance(x, y);
      sym = std::max(sym, std::abs(dxy - airm_distance(y, x)));
      ident = std::max(ident, airm_distance(x, x));
      const Matrix a = test::gaussian(n, n, rng) + 2.0 * Matrix::Identity(n, n);
      const SpdMatrix ax(symmetrize(a * x.mat() * a.transpose())), ay(symmetrize(a * y.mat() * a.transpose()));
      affine = std::max(affine, std::abs(airm_distance(ax, ay) - dxy));
      const Matrix back = spd_exp(spd_log(x)).mat();
      const Matrix v = test::random_sym(n, rng);
      const Matrix vback = spd_log(spd_exp(SymMatrix(v))).mat();
      roundtrip = std::max({roundtrip, (back - x.mat()).norm() / x.mat().norm(), (vback - v).norm() / v.norm()});
    }
  }
  // Point-set pairs: log-Euclidean distances of SPD samples against their
  // projections through a random orthonormal W, and Euclidean point
  // clouds against coordinate projections.
  std::uniform_int_distribution<int> count(4, 10);
  for (int t = 0; t < 100; ++t) {
    const int n = count(rng);
    if (t % 2 == 0) {
      std::vector<Matrix> xs;
      for (int i = 0; i < n; ++i) xs.push_back(test::random_spd(6, rng));
      const Matrix k = tangent_distance_matrix(xs, Matrix::Identity(6, 6));
      const Matrix d = tangent_distance_matrix(xs, stiefel::random_orthonormal(6, 3, rng));
      psd = std::min(psd, distance_gap_min_eigenvalue(k, d));
    } else {
      const Matrix p = test::gaussian(n, 4, rng);
      const Matrix q = p * stiefel::random_orthonormal(4, 2, rng);
      Matrix g(n, n), d(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          g(i, j) = (p.row(i) - p.row(j)).norm();
          d(i, j) = (q.row(i) - q.row(j)).norm();
        }
      psd = std::min(psd, distance_gap_min_eigenvalue(g, d));
    }
  }
  Outcome o;
  o.pass = sym < 1e-8 && ident < 1e-8 && affine < 1e-8 && roundtrip < 1e-8 && psd >= -1e-8;
  o.detail = fmt("symmetry %.2e identity %.2e affine %.2e roundtrip %.2e", sym, ident, affine, roundtrip) +
             fmt(" min_lambda %.2e", psd);
  return o;
}

// ---------------------------------------------------------------- 2

Matrix literal_L(const std::vector<Matrix>& logs, const Matrix& g, const Matrix& w) {
  const Eigen::Index m = logs.front().rows();
  const Matrix wwt = w * w.transpose();
  Matrix l = Matrix::Zero(m, m);
  for (std::size_t i = 0; i < logs.size(); ++i)
    for (std::size_t j = 0; j < logs.size(); ++j) {
      const Matrix d = logs[i] - logs[j];
      for (Eigen::Index r = 0; r < m; ++r)
        for (Eigen::Index c = 0; c < m; ++c) {
          double acc = 0.0;
          for (Eigen::Index p = 0; p < m; ++p)
            for (Eigen::Index q = 0; q < m; ++q) acc += d(r, p) * wwt(p, q) * d(c, q);
          l(r, c) -= g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * acc;
        }
    }
  return l;
}

Outcome selection_optimality() {
  std::mt19937_64 rng(202);
  double margin = 1e300;
  std::uniform_int_distribution<int> dim(2, 8);
  for (int t = 0; t < 20; ++t) {
    const int mm = dim(rng);
    const int m = std::uniform_int_distribution<int>(1, mm)(rng);
    const Matrix l = test::random_sym(mm, rng);
    const auto best = update_W(l, m);
    for (int c = 0; c < 10000; ++c) {
      const Matrix v = stiefel::random_orthonormal(mm, m, rng);
      margin = std::min(margin, best.trace - (v.transpose() * l * v).trace());
    }
  }

  double loop_err = 0.0;
  for (int t = 0; t < 10; ++t) {
    std::vector<Matrix> logs;
    std::vector<Matrix> xs;
    const int n = 3 + t % 4;
    for (int i = 0; i < n; ++i) {
      xs.push_back(test::random_spd(5, rng));
      logs.push_back(log_spd_unchecked(xs.back()));
    }
    const Matrix g = gamma(geodesic_matrix(xs));
    const Matrix w = stiefel::random_orthonormal(5, 2, rng);
    const Matrix ref = literal_L(logs, g, w);
    loop_err = std::max(loop_err, (assemble_L(logs, g, w) - ref).cwiseAbs().maxCoeff() /
                                      std::max(1.0, ref.cwiseAbs().maxCoeff()));
  }

  // monotone objective on every fit: random sets and the planted generator
  double worst_drop = 0.0;
  int fits = 0;
  auto track = [&](const SelectionTransform& s) {
    ++fits;
    for (std::size_t i = 1; i < s.objective_trace.size(); ++i)
      worst_drop = std::max(worst_drop, s.objective_trace[i - 1] - s.objective_trace[i]);
  };
  for (int t = 0; t < 10; ++t) {
    std::vector<Matrix> xs;
    for (int i = 0; i < 12; ++i) xs.push_back(test::random_spd(8, rng, 0.2));
    SelectionOptions opt;
    opt.m = 2 + t % 5;
    opt.tol = 0.0;
    track(fit_selection(xs, std::nullopt, opt));
  }
  SyntheticSpec planted;
  planted.kind = SyntheticKind::PlantedChannels;
  planted.trials = 60;
  planted.samples = 500;
  TrainConfig c;
  c.window_len = 500;
  c.m = 3;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    planted.seed = seed;
    track(select_channels(c, generate_synthetic(planted)));
  }

  Outcome o;
  o.pass = margin >= -1e-9 && loop_err <= 1e-12 && worst_drop <= 1e-9;
  o.detail = fmt("rayleigh margin %.2e, loop oracle %.2e, largest objective drop %.2e over ", margin, loop_err,
                 worst_drop) +
             std::to_string(fits) + " fits";
  return o;
}

// ---------------------------------------------------------------- 3

SyntheticSpec planted_spec() {
  SyntheticSpec s;
  s.kind = SyntheticKind::PlantedChannels;
  s.channels = 8;
  s.classes = 2;
  s.trials = 200;
  s.samples = 1250;
  s.separation = 2.0;
  s.trial_spread = 0.3;
  s.planted = {1, 3, 5};
  s.seed = 303;
  return s;
}

Outcome channel_recovery() {
  const auto spec = planted_spec();
  const auto data = generate_synthetic(spec);
  TrainConfig config;
  config.window_len = spec.samples;
  config.m = 3;
  const auto prepared = prepare_trials(data, config);
  const auto model = initialise_model(config, DataSchema::of(data), prepared);
  const auto& chosen = model.selection.selected_channels;

  // Oracle: the 3-subset whose coordinate projection best preserves the
  // geometry of the per-(class, band) means, by brute force.
  const auto& net = model.network;
  std::vector<Matrix> points;
  for (std::uint32_t label = 0; label < 2; ++label) {
    for (std::size_t f = 0; f < net.bands(); ++f) {
      Batch x;
      for (const auto& t : prepared) {
        if (t.label == label) x.push_back(net.spd_band(f, t.cov.at(0, f)));
      }
      KarcherOptions k;
      k.max_iterations = 30;
      k.tolerance = 1e-12;
      points.push_back(karcher_mean(x, k));
    }
  }
  const Matrix gamma_g = gamma(geodesic_matrix(points));
  std::vector<std::size_t> best;
  double best_gap = 1e300;
  for (std::size_t a = 0; a < 8; ++a)
    for (std::size_t b = a + 1; b < 8; ++b)
      for (std::size_t c = b + 1; c < 8; ++c) {
        Matrix e = Matrix::Zero(8, 3);
        e(static_cast<Eigen::Index>(a), 0) = e(static_cast<Eigen::Index>(b), 1) = e(static_cast<Eigen::Index>(c), 2) = 1.0;
        const double gap = (gamma_g - gamma(tangent_distance_matrix(points, e))).norm();
        if (gap < best_gap) {
          best_gap = gap;
          best = {a, b, c};
        }
      }
  Outcome o;
  o.pass = chosen == spec.planted && best == spec.planted;
  auto list = [](const std::vector<std::size_t>& v) {
    std::string s;
    for (auto c : v) s += (s.empty() ? "" : " ") + std::to_string(c);
    return "{" + s + "}";
  };
  o.detail = "selected " + list(chosen) + ", exhaustive oracle " + list(best) + ", planted " + list(spec.planted);
  return o;
}

// ---------------------------------------------------------------- 4

Outcome gradient_suite() {
  struct Check {
    const char* name;
    double (*fn)(std::uint64_t);
  };
  const Check checks[] = {
      {"bimap_input", test::fd_bimap_input},   {"bimap_weight", test::fd_bimap_weight},
      {"reeig", test::fd_reeig},               {"logeig", test::fd_logeig},
      {"rbn_train", test::fd_rbn_training},    {"rbn_infer", test::fd_rbn_inference},
      {"rbn_bias", test::fd_rbn_bias},         {"conv", test::fd_conv},
      {"band_importance", test::fd_band_importance}, {"classifier", test::fd_classifier_head},
      {"classifier_input", test::fd_classifier_input}, {"network", test::fd_network},
  };
  Outcome o;
  double worst = 0.0;
  std::string worst_name;
  for (const auto& c : checks) {
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
      const double e = c.fn(seed);
      if (!(e < 1e-4)) o.pass = false;
      if (!(e <= worst)) {
        worst = e;
        worst_name = c.name;
      }
    }
  }
  double drift = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) drift = std::max(drift, test::stiefel_drift(seed, 100));
  o.pass = o.pass && drift < 1e-8;
  o.detail = fmt("worst relative error %.2e (", worst) + worst_name + fmt("), stiefel drift %.2e", drift);
  return o;
}

// ---------------------------------------------------------------- 5, 6

SyntheticSpec classification_spec(std::uint64_t seed) {
  SyntheticSpec s;
  s.kind = SyntheticKind::Classification;
  s.channels = 8;
  s.classes = 2;
  s.trials = 500;
  s.samples = 1250;
  s.separation = 2.0;
  s.trial_spread = 0.6;
  s.sensor_noise = 0.1;
  s.seed = seed;
  return s;
}

TrainConfig classification_config(std::size_t m, std::size_t heads, std::uint64_t seed) {
  TrainConfig c;
  c.window_len = 1250;
  c.m = m;
  c.heads = heads;
  c.seed = seed;
  return c;
}

struct Split {
  DataSchema schema;
  std::vector<PreparedTrial> train, test;
};

Split split_400_100(const RawTrialSet& data, const TrainConfig& config) {
  auto prepared = prepare_trials(data, config);
  Split s;
  s.schema = DataSchema::of(data);
  s.train.assign(prepared.begin(), prepared.begin() + 400);
  s.test.assign(prepared.begin() + 400, prepared.end());
  return s;
}

double test_accuracy(const TrainConfig& config, const Split& split) {
  const auto result = train_prepared(config, split.schema, split.train);
  std::size_t hits = 0;
  for (const auto& t : split.test) hits += predict(result.model, t.cov) == t.label;
  return static_cast<double>(hits) / static_cast<double>(split.test.size());
}

Outcome end_to_end() {
  const auto t0 = Clock::now();
  const auto data = generate_synthetic(classification_spec(505));
  const auto c5 = classification_config(5, 4, 42);
  const auto split = split_400_100(data, c5);
  const double acc5 = test_accuracy(c5, split);
  const double secs5 = seconds_since(t0);
  const double acc8 = test_accuracy(classification_config(8, 4, 42), split);
  Outcome o;
  o.pass = acc5 >= 0.90 && secs5 < 300.0 && acc5 >= acc8 - 0.08;
  o.detail = fmt("m=5 test accuracy %.3f in %.1fs, m=8 %.3f, gap %+.3f", acc5, secs5, acc8, acc5 - acc8);
  return o;
}

Outcome multi_head() {
  double k4 = 0.0, k1 = 0.0;
  std::string per_seed;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto data = generate_synthetic(classification_spec(600 + s));
    const auto split = split_400_100(data, classification_config(3, 4, 42 + s));
    const double a4 = test_accuracy(classification_config(3, 4, 42 + s), split);
    const double a1 = test_accuracy(classification_config(3, 1, 42 + s), split);
    k4 += a4 / 5.0;
    k1 += a1 / 5.0;
    per_seed += fmt(" %.2f/%.2f", a4, a1);
  }
  Outcome o;
  o.pass = k4 >= k1 - 0.01;
  o.detail = fmt("m=3 mean test accuracy K=4 %.3f, K=1 %.3f; per seed K4/K1", k4, k1) + per_seed;
  return o;
}

// ---------------------------------------------------------------- 7

std::size_t shape_count(std::size_t M, const std::vector<std::size_t>& widths, std::size_t F, std::size_t S,
                        std::size_t K, std::size_t m, std::size_t C, std::size_t maps, bool bias) {
  std::size_t n = 0, in = M;
  for (auto w : widths) {
    n += F * w * in;
    in = w;
  }
  if (bias) n += F * in * (in + 1) / 2;
  n += K * in * m;
  const std::size_t hidden = std::max<std::size_t>(1, F / 2);
  return n + maps * S * K * m * m + maps + 2 * F * hidden + C * F * maps + C;
}

Outcome parameter_accounting() {
  struct Case {
    TrainConfig config;
    DataSchema schema;
    std::size_t expect;
  };
  std::vector<Case> cases;
  {
    TrainConfig c;
    c.window_len = 1250;
    c.m = 5;
    cases.push_back({c, {250.0, 8, 1250, 2}, shape_count(8, {8, 8}, 9, 1, 4, 5, 2, 4, false)});
  }
  {
    TrainConfig c;
    c.bands.bands = {{4, 8}, {8, 12}, {12, 16}, {16, 20}, {20, 24}};
    c.bimap_layers = 3;
    c.bimap_widths = {12, 10, 6};
    c.m = 4;
    c.heads = 2;
    c.conv_maps = 6;
    c.rbn_bias = true;
    cases.push_back({c, {250.0, 16, 1000, 4}, shape_count(16, {12, 10, 6}, 5, 4, 2, 4, 4, 6, true)});
  }
  {
    TrainConfig c;
    c.bimap_layers = 1;
    c.bimap_widths = {10};
    c.m = 10;
    c.heads = 1;
    c.window_len = 500;
    cases.push_back({c, {200.0, 20, 1000, 3}, shape_count(20, {10}, 9, 2, 1, 10, 3, 4, false)});
  }
  Outcome o;
  std::string counts;
  for (const auto& c : cases) {
    std::mt19937_64 rng(1);
    const auto model = init_model(c.config, c.schema, rng);
    // independent tally over the stored tensors
    std::size_t tally = 0;
    for (const auto& st : model.network.stacks) {
      for (const auto& b : st.bimaps) tally += static_cast<std::size_t>(b.weight().size());
      if (c.config.rbn_bias) tally += static_cast<std::size_t>(st.rbn.bias().rows() * (st.rbn.bias().rows() + 1) / 2);
    }
    for (const auto& h : model.heads.heads) tally += static_cast<std::size_t>(h.size());
    const auto& k = model.classifier;
    tally += static_cast<std::size_t>(k.kernel.size() + k.conv_bias.size() + k.omega1.size() + k.omega2.size() +
                                      k.head_weight.size() + k.head_bias.size());
    if (count_parameters(model) != c.expect || tally != c.expect || model.parameter_count != c.expect) o.pass = false;
    counts += std::to_string(count_parameters(model)) + "/" + std::to_string(c.expect) + " ";
  }
  // default config on a 22-channel, 4-class, 4 s at 250 Hz schema
  std::mt19937_64 rng(1);
  const auto def = init_model(TrainConfig{}, {250.0, 22, 1000, 4}, rng);
  const std::size_t n = count_parameters(def);
  o.pass = o.pass && n >= 10000 && n <= 200000;
  o.detail = "counted/hand " + counts + "default " + std::to_string(n);
  return o;
}

// ---------------------------------------------------------------- 8

int run(const std::string& cmd) {
  const int rc = std::system((cmd + " > /dev/null 2>&1").c_str());
  return rc;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome format_cli(const std::string& cli, const fs::path& work) {
  fs::create_directories(work);
  Outcome o;
  std::vector<std::string> notes;
  auto fail = [&](const std::string& why) {
    o.pass = false;
    notes.push_back(why);
  };

  // EEGB round trip through the generator CLI
  {
    std::ofstream spec(work / "small.spec");
    spec << "channels = 4\nclasses = 2\ntrials = 40\nsamples = 250\nseparation = 3.0\nseed = 808\n";
  }
  const fs::path data = work / "small.eegb";
  if (run(cli + " gen-synthetic --spec " + (work / "small.spec").string() + " --out " + data.string()) != 0) {
    fail("gen-synthetic failed");
    o.detail = notes.front();
    return o;
  }
  const auto bytes = read_file(data);
  const auto set = load_trials(data);
  if (encode_trials(set) != bytes) fail("EEGB re-encode differs");
  save_trials(set, work / "copy.eegb");
  if (read_file(work / "copy.eegb") != bytes) fail("EEGB save differs");

  // every single-byte corruption at 200 positions is caught, by the
  // library and by the CLI's exit status
  std::mt19937_64 rng(808);
  std::uniform_int_distribution<std::size_t> pos(0, bytes.size() - 1);
  int undetected = 0;
  for (int i = 0; i < 200; ++i) {
    auto bad = bytes;
    bad[pos(rng)] ^= static_cast<std::uint8_t>(1u << (i % 8));
    try {
      decode_trials(bad);
      ++undetected;
    } catch (const Error&) {
    }
  }
  if (undetected) fail(std::to_string(undetected) + " corruptions undetected");
  {
    auto bad = bytes;
    bad[bytes.size() / 2] ^= 0xFF;
    write_file(work / "bad.eegb", bad);
    if (run(cli + " select --data " + (work / "bad.eegb").string() + " --out " + (work / "bad.csv").string()) == 0)
      fail("CLI accepted a corrupted file");
  }

  // eval-cv twice, byte-identical and self-consistent
  {
    std::ofstream cfg(work / "small.cfg");
    cfg << "bands = 8-12,12-16,16-20\nwindow_len = 250\nm = 3\nheads = 2\nepochs = 3\nbatch_size = 16\n"
           "learning_rate = 0.01\n";
  }
  const std::string cv = cli + " eval-cv --config " + (work / "small.cfg").string() + " --data " + data.string() +
                         " --folds 5 --report ";
  if (run(cv + (work / "cv1.csv").string()) != 0 || run(cv + (work / "cv2.csv").string()) != 0) {
    fail("eval-cv failed");
  } else {
    const auto r1 = slurp(work / "cv1.csv");
    if (r1 != slurp(work / "cv2.csv")) fail("re-run report differs");
    std::vector<double> acc;
    std::vector<std::size_t> n_test;
    double mean = -1.0, stdev = -1.0;
    std::vector<std::vector<std::size_t>> confusion;
    std::stringstream in(r1);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      std::vector<std::string> cells;
      std::stringstream ls(line);
      std::string cell;
      while (std::getline(ls, cell, ',')) cells.push_back(cell);
      if (cells[0] == "fold") {
        acc.push_back(std::stod(cells[2]));
        n_test.push_back(std::stoul(cells[3]));
      } else if (cells[0] == "summary" && cells[1] == "mean_accuracy") {
        mean = std::stod(cells[2]);
      } else if (cells[0] == "summary" && cells[1] == "std_accuracy") {
        stdev = std::stod(cells[2]);
      } else if (cells[0] == "confusion") {
        confusion.emplace_back();
        for (std::size_t i = 2; i < cells.size(); ++i) confusion.back().push_back(std::stoul(cells[i]));
      }
    }
    double mu = 0.0, var = 0.0, hits = 0.0;
    for (std::size_t k = 0; k < acc.size(); ++k) {
      mu += acc[k] / static_cast<double>(acc.size());
      hits += acc[k] * static_cast<double>(n_test[k]);
    }
    for (double a : acc) var += (a - mu) * (a - mu) / static_cast<double>(acc.size());
    std::size_t total = 0, diag = 0;
    for (std::size_t i = 0; i < confusion.size(); ++i) {
      std::size_t row = 0;
      for (std::size_t j = 0; j < confusion[i].size(); ++j) row += confusion[i][j];
      if (row != 20) fail("confusion row " + std::to_string(i) + " sums to " + std::to_string(row));
      total += row;
      diag += confusion[i][i];
    }
    if (acc.size() != 5) fail("expected 5 fold rows");
    if (std::abs(mean - mu) > 1e-12) fail("mean disagrees with folds");
    if (std::abs(stdev - std::sqrt(var)) > 1e-12) fail("std disagrees with folds");
    if (total != 40 || std::abs(static_cast<double>(diag) - hits) > 1e-9) fail("confusion trace disagrees with folds");
  }
  o.detail = notes.empty() ? "round trip, 200/200 corruptions caught, cv report consistent and byte-identical on re-run"
                           : notes.front();
  for (std::size_t i = 1; i < notes.size(); ++i) o.detail += "; " + notes[i];
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::string cli = "lglbci", workdir = (fs::temp_directory_path() / "lglbci_acceptance").string();
  std::vector<int> only;
  app.add_option("--cli", cli, "path to the lglbci executable");
  app.add_option("--workdir", workdir, "scratch directory");
  app.add_option("--only", only, "run just these criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  auto wanted = [&](int id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };
  struct Entry {
    int id;
    double limit_s;  // 0: no runtime bound
    std::function<Outcome()> fn;
  };
  const std::vector<Entry> entries = {
      {1, 30.0, riemannian_core},
      {2, 60.0, selection_optimality},
      {3, 120.0, channel_recovery},
      {4, 120.0, gradient_suite},
      {5, 0.0, end_to_end},  // the 5 minute bound is checked inside, on the m=5 run
      {6, 0.0, multi_head},
      {7, 0.0, parameter_accounting},
      {8, 0.0, [&] { return format_cli(cli, workdir); }},
  };
  int failed = 0;
  for (const auto& e : entries) {
    if (!wanted(e.id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = e.fn();
    } catch (const std::exception& ex) {
      o.pass = false;
      o.detail = std::string("threw: ") + ex.what();
    }
    const double secs = seconds_since(t0);
    if (e.limit_s > 0.0 && secs >= e.limit_s) {
      o.pass = false;
      o.detail += fmt(" [over the %.0fs budget]", e.limit_s);
    }
    failed += report(e.id, o, secs);
  }
  return failed;
}
