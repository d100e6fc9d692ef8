#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "lglbci/spd.hpp"

namespace lgl {

struct FeatureShape {
  std::size_t windows = 1;  // S
  std::size_t bands = 1;    // F
  std::size_t heads = 1;    // K
  std::size_t m = 1;

  std::size_t plane() const { return heads * m * m; }   // K*m*m
  std::size_t per_band() const { return windows * plane(); }
  std::size_t total() const { return bands * per_band(); }
  bool operator==(const FeatureShape&) const = default;
};

// F x 1 x S x (K*m*m) map; element [f][0][s][(k*m + i)*m + j].
struct TangentFeatureMap {
  FeatureShape shape;
  std::vector<double> data;

  double at(std::size_t f, std::size_t s, std::size_t q) const {
    return data[(f * shape.windows + s) * shape.plane() + q];
  }
  // F x (S*K*m*m), one row per band.
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> band_rows() const {
    return {data.data(), static_cast<Eigen::Index>(shape.bands), static_cast<Eigen::Index>(shape.per_band())};
  }
};

// stacked[(s*F + f)*K + k] is an m x m tangent block. Throws ShapeMismatch.
TangentFeatureMap reshape_features(std::span<const Matrix> stacked, const FeatureShape& shape);
std::vector<Matrix> inverse_reshape(const TangentFeatureMap& map);

struct BandImportance {
  Vector squeezed;    // F, mean over the non-band axes of O
  Vector hidden_pre;  // omega1^T squeezed
  Vector hidden;      // relu
  Vector excite_pre;  // omega2^T hidden
  Vector weights;     // sigmoid, entries in (0, 1)
  Matrix scaled;      // weights_f * O[f, :]
};

double sigmoid(double x);
Vector softmax(const Vector& logits);
// -log softmax(logits)[label]. Throws LabelOutOfRange.
double cross_entropy(const Vector& logits, std::uint32_t label);
// d loss / d logits
Vector cross_entropy_grad(const Vector& logits, std::uint32_t label);

// Per-band convolution with one kernel spanning the whole S x (K*m*m)
// plane, frequency-band importance weighting, then a linear head.
class TangentClassifier {
 public:
  TangentClassifier() = default;
  TangentClassifier(const FeatureShape& shape, std::size_t conv_maps, std::size_t classes, std::mt19937_64& rng);

  struct Forward {
    Matrix conv;  // O, F x C_out
    BandImportance importance;
    Vector logits;
  };

  struct Gradients {
    Matrix kernel;
    Vector conv_bias;
    Matrix omega1;
    Matrix omega2;
    Matrix head_weight;
    Vector head_bias;
    TangentFeatureMap input;
  };

  // Throws ShapeMismatch.
  Matrix conv_forward(const TangentFeatureMap& fmap) const;
  BandImportance band_importance(const Matrix& conv) const;
  Vector classify(const Matrix& scaled) const;
  Forward forward(const TangentFeatureMap& fmap) const;
  Gradients backward(const TangentFeatureMap& fmap, const Forward& fwd, const Vector& grad_logits) const;

  void apply_gradient(const Gradients& g, double step);

  std::size_t parameter_count() const;
  static std::size_t parameter_count(const FeatureShape& shape, std::size_t conv_maps, std::size_t classes);
  static std::size_t hidden_width(std::size_t bands) { return std::max<std::size_t>(1, bands / 2); }

  const FeatureShape& shape() const { return shape_; }
  std::size_t conv_maps() const { return static_cast<std::size_t>(kernel.rows()); }
  std::size_t classes() const { return static_cast<std::size_t>(head_weight.rows()); }

  // Raw parameter access for serialisation and tests.
  Matrix kernel;       // C_out x (S*K*m*m)
  Vector conv_bias;    // C_out
  Matrix omega1;       // F x hidden
  Matrix omega2;       // hidden x F
  Matrix head_weight;  // C x (F*C_out)
  Vector head_bias;    // C

 private:
  FeatureShape shape_;
};

}  // namespace lgl
