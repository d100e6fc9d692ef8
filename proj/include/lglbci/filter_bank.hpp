#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "lglbci/eeg_io.hpp"

namespace lgl {

struct Band {
  double low_hz = 0.0;
  double high_hz = 0.0;
  double width() const { return high_hz - low_hz; }
};

struct BandSpec {
  std::vector<Band> bands;
  int filter_order = 4;
  double stopband_atten_db = 40.0;

  // Nine touching 4 Hz bands covering 4-40 Hz.
  static BandSpec default_bank();

  // Throws InvalidBand.
  void validate(double sample_rate_hz) const;
  double narrowest_width() const;
};

// Normalised biquad: y = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2) x
struct Biquad {
  std::array<double, 3> b{};
  std::array<double, 3> a{1.0, 0.0, 0.0};
};

struct FilterCoefficients {
  std::vector<double> b;  // numerator, descending powers of z^-1
  std::vector<double> a;  // denominator, a[0] == 1
  std::vector<Biquad> sections;
  std::vector<std::complex<double>> zeros;
  std::vector<std::complex<double>> poles;
  double gain = 1.0;
};

// Causal Chebyshev type II bandpass with its -3 dB points at the band edges.
// `order` is the lowpass prototype order; the bandpass has order 2*order.
// Throws InvalidBand, UnstableDesign.
FilterCoefficients design_bandpass(Band band, double sample_rate_hz, int order, double atten_db);

// Cascaded second-order sections, zero initial state.
Eigen::VectorXd sos_filter(const std::vector<Biquad>& sections, const Eigen::Ref<const Eigen::VectorXd>& x);

// Time-frequency resolution bound: (L / fs) * bandwidth >= 1 / (4 pi).
bool check_gabor(double window_len_samples, double sample_rate_hz, double band_width_hz);

// Dense S x F x M x L tensor, row-major in that order.
class TrialTensor {
 public:
  TrialTensor() = default;
  TrialTensor(std::size_t windows, std::size_t bands, std::size_t channels, std::size_t window_len);

  std::size_t windows() const { return s_; }
  std::size_t bands() const { return f_; }
  std::size_t channels() const { return m_; }
  std::size_t window_len() const { return l_; }

  double& at(std::size_t s, std::size_t f, std::size_t m, std::size_t l) {
    return data_[((s * f_ + f) * m_ + m) * l_ + l];
  }
  double at(std::size_t s, std::size_t f, std::size_t m, std::size_t l) const {
    return data_[((s * f_ + f) * m_ + m) * l_ + l];
  }

  // M x L view of one (window, band) slice.
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> slice(
      std::size_t s, std::size_t f) const;

  const std::vector<double>& data() const { return data_; }

 private:
  std::size_t s_ = 0, f_ = 0, m_ = 0, l_ = 0;
  std::vector<double> data_;
};

struct LabeledTensor {
  std::uint32_t label = 0;
  TrialTensor tensor;
};

// Band-pass bank applied to a single trial (M x samples), then cut into
// floor(samples / L) non-overlapping windows. Throws GaborViolation, WindowTooLong.
class FilterBank {
 public:
  FilterBank(const BandSpec& spec, double sample_rate_hz);

  TrialTensor apply(const Eigen::MatrixXd& trial, std::size_t window_len) const;
  void check_window(std::size_t window_len, std::size_t samples_per_trial) const;

  const std::vector<FilterCoefficients>& filters() const { return filters_; }
  const BandSpec& spec() const { return spec_; }

 private:
  BandSpec spec_;
  double sample_rate_hz_;
  std::vector<FilterCoefficients> filters_;
};

std::vector<LabeledTensor> segment(const RawTrialSet& trials, const BandSpec& spec, std::size_t window_len);

}  // namespace lgl
