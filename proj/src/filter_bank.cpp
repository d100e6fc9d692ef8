#include "lglbci/filter_bank.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lglbci/error.hpp"

namespace lgl {

namespace {

using cplx = std::complex<double>;
constexpr double kPi = std::numbers::pi;

struct Zpk {
  std::vector<cplx> zeros;
  std::vector<cplx> poles;
  double gain = 1.0;
};

// Analog Chebyshev II lowpass prototype, stopband edge at 1 rad/s.
Zpk chebyshev2_prototype(int order, double atten_db) {
  const double eps = 1.0 / std::sqrt(std::pow(10.0, 0.1 * atten_db) - 1.0);
  const double mu = std::asinh(1.0 / eps) / order;
  Zpk out;
  for (int k = 1; k <= order; ++k) {
    const double theta = (2.0 * k - 1.0) * kPi / (2.0 * order);
    // For odd orders the middle zero sits at infinity.
    if (2 * k - 1 != order) out.zeros.emplace_back(0.0, 1.0 / std::cos(theta));
    const cplx cheb1(-std::sinh(mu) * std::sin(theta), std::cosh(mu) * std::cos(theta));
    out.poles.push_back(1.0 / cheb1);
  }
  cplx num(1.0), den(1.0);
  for (const auto& p : out.poles) num *= -p;
  for (const auto& z : out.zeros) den *= -z;
  out.gain = (num / den).real();
  return out;
}

// Frequency (prototype units) where the prototype response is -3 dB.
double chebyshev2_half_power(int order, double atten_db) {
  const double eps = 1.0 / std::sqrt(std::pow(10.0, 0.1 * atten_db) - 1.0);
  return 1.0 / std::cosh(std::acosh(1.0 / eps) / order);
}

Zpk scale_frequency(Zpk in, double factor) {
  for (auto& z : in.zeros) z *= factor;
  for (auto& p : in.poles) p *= factor;
  in.gain *= std::pow(factor, static_cast<double>(in.poles.size() - in.zeros.size()));
  return in;
}

Zpk lowpass_to_bandpass(const Zpk& in, double center, double bandwidth) {
  Zpk out;
  auto transform = [&](const cplx& r, std::vector<cplx>& dst) {
    const cplx half = r * bandwidth / 2.0;
    const cplx disc = std::sqrt(half * half - center * center);
    dst.push_back(half + disc);
    dst.push_back(half - disc);
  };
  for (const auto& z : in.zeros) transform(z, out.zeros);
  for (const auto& p : in.poles) transform(p, out.poles);
  const std::size_t degree = in.poles.size() - in.zeros.size();
  for (std::size_t i = 0; i < degree; ++i) out.zeros.emplace_back(0.0, 0.0);
  out.gain = in.gain * std::pow(bandwidth, static_cast<double>(degree));
  return out;
}

Zpk bilinear(const Zpk& in, double fs) {
  const double fs2 = 2.0 * fs;
  Zpk out;
  cplx num(1.0), den(1.0);
  for (const auto& z : in.zeros) {
    out.zeros.push_back((fs2 + z) / (fs2 - z));
    num *= fs2 - z;
  }
  for (const auto& p : in.poles) {
    out.poles.push_back((fs2 + p) / (fs2 - p));
    den *= fs2 - p;
  }
  while (out.zeros.size() < out.poles.size()) out.zeros.emplace_back(-1.0, 0.0);
  out.gain = in.gain * (num / den).real();
  return out;
}

// Groups roots into conjugate pairs (or pairs of real roots). Bandpass
// designs always carry an even number of poles and zeros.
std::vector<std::array<cplx, 2>> pair_roots(const std::vector<cplx>& roots) {
  constexpr double tol = 1e-10;
  std::vector<cplx> real_roots;
  std::vector<std::array<cplx, 2>> pairs;
  for (const auto& r : roots) {
    if (std::abs(r.imag()) <= tol * std::max(1.0, std::abs(r))) {
      real_roots.emplace_back(r.real(), 0.0);
    } else if (r.imag() > 0) {
      pairs.push_back({r, std::conj(r)});
    }
  }
  std::sort(real_roots.begin(), real_roots.end(),
            [](const cplx& x, const cplx& y) { return x.real() < y.real(); });
  for (std::size_t i = 0; i + 1 < real_roots.size(); i += 2) pairs.push_back({real_roots[i], real_roots[i + 1]});
  return pairs;
}

std::array<double, 3> quadratic(const std::array<cplx, 2>& pair) {
  return {1.0, -(pair[0] + pair[1]).real(), (pair[0] * pair[1]).real()};
}

std::vector<double> poly_from_roots(const std::vector<cplx>& roots) {
  std::vector<cplx> c{cplx(1.0)};
  for (const auto& r : roots) {
    std::vector<cplx> next(c.size() + 1, cplx(0.0));
    for (std::size_t i = 0; i < c.size(); ++i) {
      next[i] += c[i];
      next[i + 1] -= c[i] * r;
    }
    c = std::move(next);
  }
  std::vector<double> out(c.size());
  std::transform(c.begin(), c.end(), out.begin(), [](const cplx& v) { return v.real(); });
  return out;
}

// Pole pairs ordered by distance to the unit circle, each matched with the
// nearest remaining zero pair.
std::vector<Biquad> zpk_to_sos(const Zpk& zpk) {
  auto poles = pair_roots(zpk.poles);
  auto zeros = pair_roots(zpk.zeros);
  if (2 * poles.size() != zpk.poles.size() || 2 * zeros.size() != zpk.zeros.size()) {
    throw Error(ErrorCode::UnstableDesign, "unpaired filter roots");
  }
  std::sort(poles.begin(), poles.end(), [](const auto& x, const auto& y) {
    return 1.0 - std::abs(x[0]) < 1.0 - std::abs(y[0]);
  });

  std::vector<Biquad> sections;
  for (const auto& pp : poles) {
    Biquad s;
    s.a = quadratic(pp);
    if (!zeros.empty()) {
      auto best = std::min_element(zeros.begin(), zeros.end(), [&](const auto& x, const auto& y) {
        return std::abs(x[0] - pp[0]) < std::abs(y[0] - pp[0]);
      });
      s.b = quadratic(*best);
      zeros.erase(best);
    } else {
      s.b = {1.0, 0.0, 0.0};
    }
    sections.push_back(s);
  }
  if (!sections.empty()) {
    for (auto& v : sections.front().b) v *= zpk.gain;
  }
  return sections;
}

}  // namespace

BandSpec BandSpec::default_bank() {
  BandSpec spec;
  for (int i = 0; i < 9; ++i) spec.bands.push_back({4.0 + 4.0 * i, 8.0 + 4.0 * i});
  return spec;
}

void BandSpec::validate(double sample_rate_hz) const {
  if (bands.empty()) throw Error(ErrorCode::InvalidBand, "band list is empty");
  if (filter_order < 1) throw Error(ErrorCode::InvalidBand, "filter order must be positive");
  if (!(stopband_atten_db > 0.0)) throw Error(ErrorCode::InvalidBand, "attenuation must be positive");
  const double nyquist = sample_rate_hz / 2.0;
  for (std::size_t i = 0; i < bands.size(); ++i) {
    const auto& b = bands[i];
    if (!(b.low_hz > 0.0 && b.low_hz < b.high_hz && b.high_hz < nyquist)) {
      throw Error(ErrorCode::InvalidBand, "band " + std::to_string(i) + " outside (0, Nyquist)");
    }
    if (i > 0 && b.low_hz < bands[i - 1].high_hz) {
      throw Error(ErrorCode::InvalidBand, "bands must be increasing and non-overlapping");
    }
  }
}

double BandSpec::narrowest_width() const {
  double w = std::numeric_limits<double>::infinity();
  for (const auto& b : bands) w = std::min(w, b.width());
  return w;
}

FilterCoefficients design_bandpass(Band band, double sample_rate_hz, int order, double atten_db) {
  if (!(band.low_hz > 0.0 && band.low_hz < band.high_hz && band.high_hz < sample_rate_hz / 2.0)) {
    throw Error(ErrorCode::InvalidBand, "need 0 < low < high < fs/2");
  }
  if (order < 1 || !(atten_db > 0.0)) throw Error(ErrorCode::InvalidBand, "order and attenuation must be positive");

  // Prewarped analog band edges.
  const double wl = 2.0 * sample_rate_hz * std::tan(kPi * band.low_hz / sample_rate_hz);
  const double wh = 2.0 * sample_rate_hz * std::tan(kPi * band.high_hz / sample_rate_hz);

  auto proto = chebyshev2_prototype(order, atten_db);
  proto = scale_frequency(proto, 1.0 / chebyshev2_half_power(order, atten_db));
  const auto digital = bilinear(lowpass_to_bandpass(proto, std::sqrt(wl * wh), wh - wl), sample_rate_hz);

  for (const auto& p : digital.poles) {
    if (!(std::abs(p) < 1.0)) throw Error(ErrorCode::UnstableDesign, "pole on or outside the unit circle");
  }

  FilterCoefficients out;
  out.zeros = digital.zeros;
  out.poles = digital.poles;
  out.gain = digital.gain;
  out.b = poly_from_roots(digital.zeros);
  for (auto& v : out.b) v *= digital.gain;
  out.a = poly_from_roots(digital.poles);
  out.sections = zpk_to_sos(digital);
  return out;
}

Eigen::VectorXd sos_filter(const std::vector<Biquad>& sections, const Eigen::Ref<const Eigen::VectorXd>& x) {
  Eigen::VectorXd y = x;
  for (const auto& s : sections) {
    // Transposed direct form II.
    double z1 = 0.0, z2 = 0.0;
    for (Eigen::Index n = 0; n < y.size(); ++n) {
      const double in = y[n];
      const double out = s.b[0] * in + z1;
      z1 = s.b[1] * in - s.a[1] * out + z2;
      z2 = s.b[2] * in - s.a[2] * out;
      y[n] = out;
    }
  }
  return y;
}

bool check_gabor(double window_len_samples, double sample_rate_hz, double band_width_hz) {
  return (window_len_samples / sample_rate_hz) * band_width_hz >= 1.0 / (4.0 * kPi);
}

TrialTensor::TrialTensor(std::size_t windows, std::size_t bands, std::size_t channels, std::size_t window_len)
    : s_(windows), f_(bands), m_(channels), l_(window_len), data_(windows * bands * channels * window_len, 0.0) {}

Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> TrialTensor::slice(
    std::size_t s, std::size_t f) const {
  return {data_.data() + (s * f_ + f) * m_ * l_, static_cast<Eigen::Index>(m_), static_cast<Eigen::Index>(l_)};
}

FilterBank::FilterBank(const BandSpec& spec, double sample_rate_hz) : spec_(spec), sample_rate_hz_(sample_rate_hz) {
  spec_.validate(sample_rate_hz);
  for (const auto& b : spec_.bands) {
    filters_.push_back(design_bandpass(b, sample_rate_hz, spec_.filter_order, spec_.stopband_atten_db));
  }
}

void FilterBank::check_window(std::size_t window_len, std::size_t samples_per_trial) const {
  if (window_len == 0 || window_len > samples_per_trial) {
    throw Error(ErrorCode::WindowTooLong, "window of " + std::to_string(window_len) + " samples for trials of " +
                                              std::to_string(samples_per_trial));
  }
  if (!check_gabor(static_cast<double>(window_len), sample_rate_hz_, spec_.narrowest_width())) {
    throw Error(ErrorCode::GaborViolation, "window too short for the narrowest band");
  }
}

TrialTensor FilterBank::apply(const Eigen::MatrixXd& trial, std::size_t window_len) const {
  const auto samples = static_cast<std::size_t>(trial.cols());
  check_window(window_len, samples);
  const std::size_t windows = samples / window_len;
  const auto channels = static_cast<std::size_t>(trial.rows());
  TrialTensor out(windows, filters_.size(), channels, window_len);
  for (std::size_t f = 0; f < filters_.size(); ++f) {
    for (std::size_t m = 0; m < channels; ++m) {
      const Eigen::VectorXd y = sos_filter(filters_[f].sections, trial.row(static_cast<Eigen::Index>(m)).transpose());
      for (std::size_t s = 0; s < windows; ++s) {
        for (std::size_t l = 0; l < window_len; ++l) {
          out.at(s, f, m, l) = y[static_cast<Eigen::Index>(s * window_len + l)];
        }
      }
    }
  }
  return out;
}

std::vector<LabeledTensor> segment(const RawTrialSet& trials, const BandSpec& spec, std::size_t window_len) {
  FilterBank bank(spec, trials.sample_rate_hz);
  bank.check_window(window_len, trials.samples_per_trial);
  std::vector<LabeledTensor> out;
  out.reserve(trials.trials.size());
  for (const auto& t : trials.trials) out.push_back({t.label, bank.apply(t.data, window_len)});
  return out;
}

}  // namespace lgl
