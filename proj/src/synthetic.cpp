#include "lglbci/synthetic.hpp"

#include <charconv>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "lglbci/error.hpp"

namespace lgl {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  return s.substr(begin, s.find_last_not_of(" \t\r") - begin + 1);
}

[[noreturn]] void bad(const std::string& key, const std::string& value) {
  throw Error(ErrorCode::InvalidConfig, "bad value '" + value + "' for key '" + key + "'");
}

std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad(key, v);
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad(key, v);
  return out;
}

Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  }
  return m;
}

Matrix random_symmetric_unit(Eigen::Index n, std::mt19937_64& rng) {
  const Matrix g = gaussian_matrix(n, n, rng);
  const Matrix s = 0.5 * (g + g.transpose());
  return s / s.norm();
}

void validate(const SyntheticSpec& s) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::InvalidConfig, what);
  };
  require(s.channels >= 2, "channels must be at least 2");
  require(s.classes >= 2, "classes must be at least 2");
  require(s.trials >= s.classes, "need at least one trial per class");
  require(s.samples >= 2, "samples must be at least 2");
  require(s.sample_rate_hz > 0.0, "sample_rate must be positive");
  require(s.separation > 0.0, "separation must be positive");
  require(s.trial_spread >= 0.0 && s.sensor_noise >= 0.0, "noise scales must be >= 0");
  if (s.kind == SyntheticKind::PlantedChannels) {
    require(s.classes == 2, "planted-channel data has two classes");
    require(!s.planted.empty() && s.planted.size() < s.channels, "planted subset must be a proper non-empty subset");
    std::set<std::size_t> seen;
    for (auto c : s.planted) require(c < s.channels && seen.insert(c).second, "planted channels must be distinct and in range");
  }
}

}  // namespace

SyntheticSpec parse_synthetic_spec(const std::string& text) {
  SyntheticSpec spec;
  std::set<std::string> seen;
  std::stringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::InvalidConfig, "expected 'key = value': " + line);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second) throw Error(ErrorCode::InvalidConfig, "duplicate key '" + key + "'");
    if (key == "kind") {
      if (value == "classification") spec.kind = SyntheticKind::Classification;
      else if (value == "planted_channels") spec.kind = SyntheticKind::PlantedChannels;
      else bad(key, value);
    } else if (key == "channels") spec.channels = to_size(key, value);
    else if (key == "classes") spec.classes = to_size(key, value);
    else if (key == "trials") spec.trials = to_size(key, value);
    else if (key == "samples") spec.samples = to_size(key, value);
    else if (key == "sample_rate") spec.sample_rate_hz = to_double(key, value);
    else if (key == "separation") spec.separation = to_double(key, value);
    else if (key == "trial_spread") spec.trial_spread = to_double(key, value);
    else if (key == "sensor_noise") spec.sensor_noise = to_double(key, value);
    else if (key == "seed") spec.seed = to_size(key, value);
    else if (key == "planted") {
      spec.planted.clear();
      std::stringstream items(value);
      std::string item;
      while (std::getline(items, item, ',')) spec.planted.push_back(to_size(key, trim(item)));
    } else {
      throw Error(ErrorCode::InvalidConfig, "unknown key '" + key + "'");
    }
  }
  validate(spec);
  return spec;
}

std::string to_text(const SyntheticSpec& s) {
  std::ostringstream out;
  out.precision(17);
  out << "kind = " << (s.kind == SyntheticKind::Classification ? "classification" : "planted_channels") << "\n";
  out << "channels = " << s.channels << "\n";
  out << "classes = " << s.classes << "\n";
  out << "trials = " << s.trials << "\n";
  out << "samples = " << s.samples << "\n";
  out << "sample_rate = " << s.sample_rate_hz << "\n";
  out << "separation = " << s.separation << "\n";
  out << "trial_spread = " << s.trial_spread << "\n";
  out << "sensor_noise = " << s.sensor_noise << "\n";
  out << "planted = ";
  for (std::size_t i = 0; i < s.planted.size(); ++i) out << (i ? "," : "") << s.planted[i];
  out << "\nseed = " << s.seed << "\n";
  return out.str();
}

std::vector<Matrix> synthetic_class_means(const SyntheticSpec& spec) {
  validate(spec);
  std::mt19937_64 rng(spec.seed);
  const auto n = static_cast<Eigen::Index>(spec.channels);
  std::vector<Matrix> means;
  if (spec.kind == SyntheticKind::Classification) {
    // Sigma_c = A exp(sep * U_c) A^T, so airm(Sigma_0, Sigma_c) = sep.
    const Matrix a = Matrix::Identity(n, n) + 0.3 * gaussian_matrix(n, n, rng) / std::sqrt(static_cast<double>(n));
    means.push_back(symmetrize(a * a.transpose()));
    for (std::size_t c = 1; c < spec.classes; ++c) {
      const Matrix u = random_symmetric_unit(n, rng);
      means.push_back(symmetrize(a * exp_sym_unchecked(spec.separation * u) * a.transpose()));
    }
  } else {
    const auto k = static_cast<Eigen::Index>(spec.planted.size());
    const Matrix block = exp_sym_unchecked(spec.separation * random_symmetric_unit(k, rng));
    means.push_back(Matrix::Identity(n, n));
    Matrix second = Matrix::Identity(n, n);
    for (Eigen::Index i = 0; i < k; ++i) {
      for (Eigen::Index j = 0; j < k; ++j) {
        second(static_cast<Eigen::Index>(spec.planted[i]), static_cast<Eigen::Index>(spec.planted[j])) = block(i, j);
      }
    }
    means.push_back(second);
  }
  return means;
}

RawTrialSet generate_synthetic(const SyntheticSpec& spec) {
  const auto means = synthetic_class_means(spec);
  const auto n = static_cast<Eigen::Index>(spec.channels);
  const auto len = static_cast<Eigen::Index>(spec.samples);
  std::vector<Matrix> roots;
  for (const auto& m : means) roots.push_back(pow_spd_unchecked(m, 0.5));

  // Offset the stream so the data draws differ from the class-mean draws.
  std::mt19937_64 rng(spec.seed * 0x100000001B3ULL + 1);
  RawTrialSet set;
  set.sample_rate_hz = spec.sample_rate_hz;
  set.channels = static_cast<std::uint32_t>(spec.channels);
  set.samples_per_trial = static_cast<std::uint32_t>(spec.samples);
  set.n_classes = static_cast<std::uint32_t>(spec.classes);
  for (std::size_t t = 0; t < spec.trials; ++t) {
    const auto label = static_cast<std::uint32_t>(t % spec.classes);
    const Matrix& root = roots[label];
    const Matrix wobble = exp_sym_unchecked(spec.trial_spread * std::sqrt(static_cast<double>(n)) *
                                            random_symmetric_unit(n, rng));
    const Matrix sigma = symmetrize(root * wobble * root);
    const Matrix mix = pow_spd_unchecked(sigma, 0.5);
    const double level = std::sqrt(sigma.trace() / static_cast<double>(n));
    Matrix x = mix * gaussian_matrix(n, len, rng) + spec.sensor_noise * level * gaussian_matrix(n, len, rng);
    // EEGB stores float32; round here so in-memory and on-disk sets agree.
    x = x.cast<float>().cast<double>();
    set.trials.push_back({label, std::move(x)});
  }
  set.validate();
  return set;
}

}  // namespace lgl
