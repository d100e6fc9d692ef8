#include "lglbci/tangent_classifier.hpp"

#include <cmath>

#include "lglbci/error.hpp"

namespace lgl {

namespace {

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, double fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(fan_in));
  Matrix out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = normal(rng);
  }
  return out;
}

// Row-major flatten of an F x C_out matrix.
Vector flatten(const Matrix& m) {
  Vector v(m.size());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) v[r * m.cols() + c] = m(r, c);
  }
  return v;
}

}  // namespace

TangentFeatureMap reshape_features(std::span<const Matrix> stacked, const FeatureShape& shape) {
  const auto m = static_cast<Eigen::Index>(shape.m);
  if (stacked.size() != shape.windows * shape.bands * shape.heads) {
    throw Error(ErrorCode::ShapeMismatch, "expected " + std::to_string(shape.windows * shape.bands * shape.heads) +
                                              " blocks, got " + std::to_string(stacked.size()));
  }
  TangentFeatureMap out{shape, std::vector<double>(shape.total())};
  for (std::size_t s = 0; s < shape.windows; ++s) {
    for (std::size_t f = 0; f < shape.bands; ++f) {
      for (std::size_t k = 0; k < shape.heads; ++k) {
        const Matrix& block = stacked[(s * shape.bands + f) * shape.heads + k];
        if (block.rows() != m || block.cols() != m) throw Error(ErrorCode::ShapeMismatch, "tangent block size");
        double* dst = out.data.data() + (f * shape.windows + s) * shape.plane() + k * shape.m * shape.m;
        for (Eigen::Index i = 0; i < m; ++i) {
          for (Eigen::Index j = 0; j < m; ++j) dst[i * m + j] = block(i, j);
        }
      }
    }
  }
  return out;
}

std::vector<Matrix> inverse_reshape(const TangentFeatureMap& map) {
  const auto& shape = map.shape;
  const auto m = static_cast<Eigen::Index>(shape.m);
  if (map.data.size() != shape.total()) throw Error(ErrorCode::ShapeMismatch, "feature map size");
  std::vector<Matrix> out(shape.windows * shape.bands * shape.heads, Matrix(m, m));
  for (std::size_t s = 0; s < shape.windows; ++s) {
    for (std::size_t f = 0; f < shape.bands; ++f) {
      for (std::size_t k = 0; k < shape.heads; ++k) {
        Matrix& block = out[(s * shape.bands + f) * shape.heads + k];
        const double* src = map.data.data() + (f * shape.windows + s) * shape.plane() + k * shape.m * shape.m;
        for (Eigen::Index i = 0; i < m; ++i) {
          for (Eigen::Index j = 0; j < m; ++j) block(i, j) = src[i * m + j];
        }
      }
    }
  }
  return out;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vector softmax(const Vector& logits) {
  const Vector shifted = (logits.array() - logits.maxCoeff()).exp();
  return shifted / shifted.sum();
}

double cross_entropy(const Vector& logits, std::uint32_t label) {
  if (label >= logits.size()) throw Error(ErrorCode::LabelOutOfRange, "label " + std::to_string(label));
  const double top = logits.maxCoeff();
  const double lse = top + std::log((logits.array() - top).exp().sum());
  return lse - logits[label];
}

Vector cross_entropy_grad(const Vector& logits, std::uint32_t label) {
  if (label >= logits.size()) throw Error(ErrorCode::LabelOutOfRange, "label " + std::to_string(label));
  Vector g = softmax(logits);
  g[label] -= 1.0;
  return g;
}

TangentClassifier::TangentClassifier(const FeatureShape& shape, std::size_t conv_maps, std::size_t classes,
                                     std::mt19937_64& rng)
    : shape_(shape) {
  if (conv_maps < 1 || classes < 2 || shape.total() == 0) {
    throw Error(ErrorCode::InvalidConfig, "classifier needs conv_maps >= 1, classes >= 2 and a non-empty shape");
  }
  const auto f = static_cast<Eigen::Index>(shape.bands);
  const auto h = static_cast<Eigen::Index>(hidden_width(shape.bands));
  const auto maps = static_cast<Eigen::Index>(conv_maps);
  kernel = gaussian(maps, static_cast<Eigen::Index>(shape.per_band()), static_cast<double>(shape.per_band()), rng);
  conv_bias = Vector::Zero(maps);
  omega1 = gaussian(f, h, static_cast<double>(f), rng);
  omega2 = gaussian(h, f, static_cast<double>(h), rng);
  head_weight = gaussian(static_cast<Eigen::Index>(classes), f * maps, static_cast<double>(f * maps), rng);
  head_bias = Vector::Zero(static_cast<Eigen::Index>(classes));
}

Matrix TangentClassifier::conv_forward(const TangentFeatureMap& fmap) const {
  if (!(fmap.shape == shape_) || fmap.data.size() != shape_.total()) {
    throw Error(ErrorCode::ShapeMismatch, "feature map does not match the classifier");
  }
  Matrix o = fmap.band_rows() * kernel.transpose();
  o.rowwise() += conv_bias.transpose();
  return o;
}

BandImportance TangentClassifier::band_importance(const Matrix& conv) const {
  BandImportance b;
  b.squeezed = conv.rowwise().mean();
  b.hidden_pre = omega1.transpose() * b.squeezed;
  b.hidden = b.hidden_pre.cwiseMax(0.0);
  b.excite_pre = omega2.transpose() * b.hidden;
  b.weights = b.excite_pre.unaryExpr([](double x) { return sigmoid(x); });
  b.scaled = b.weights.asDiagonal() * conv;
  return b;
}

Vector TangentClassifier::classify(const Matrix& scaled) const { return head_weight * flatten(scaled) + head_bias; }

TangentClassifier::Forward TangentClassifier::forward(const TangentFeatureMap& fmap) const {
  Forward f;
  f.conv = conv_forward(fmap);
  f.importance = band_importance(f.conv);
  f.logits = classify(f.importance.scaled);
  return f;
}

TangentClassifier::Gradients TangentClassifier::backward(const TangentFeatureMap& fmap, const Forward& fwd,
                                                         const Vector& grad_logits) const {
  const auto& imp = fwd.importance;
  const auto bands = fwd.conv.rows();
  const auto maps = fwd.conv.cols();
  Gradients g;

  g.head_weight = grad_logits * flatten(imp.scaled).transpose();
  g.head_bias = grad_logits;
  const Vector grad_flat = head_weight.transpose() * grad_logits;
  Matrix grad_scaled(bands, maps);
  for (Eigen::Index r = 0; r < bands; ++r) {
    for (Eigen::Index c = 0; c < maps; ++c) grad_scaled(r, c) = grad_flat[r * maps + c];
  }

  Matrix grad_conv = imp.weights.asDiagonal() * grad_scaled;
  const Vector grad_weights = grad_scaled.cwiseProduct(fwd.conv).rowwise().sum();
  const Vector grad_excite = grad_weights.cwiseProduct(imp.weights.cwiseProduct((1.0 - imp.weights.array()).matrix()));
  g.omega2 = imp.hidden * grad_excite.transpose();
  Vector grad_hidden = omega2 * grad_excite;
  for (Eigen::Index i = 0; i < grad_hidden.size(); ++i) {
    if (imp.hidden_pre[i] <= 0.0) grad_hidden[i] = 0.0;
  }
  g.omega1 = imp.squeezed * grad_hidden.transpose();
  const Vector grad_squeezed = omega1 * grad_hidden;
  grad_conv.colwise() += grad_squeezed / static_cast<double>(maps);

  g.kernel = grad_conv.transpose() * fmap.band_rows();
  g.conv_bias = grad_conv.colwise().sum().transpose();
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> grad_input = grad_conv * kernel;
  g.input.shape = shape_;
  g.input.data.assign(grad_input.data(), grad_input.data() + grad_input.size());
  return g;
}

void TangentClassifier::apply_gradient(const Gradients& g, double step) {
  kernel -= step * g.kernel;
  conv_bias -= step * g.conv_bias;
  omega1 -= step * g.omega1;
  omega2 -= step * g.omega2;
  head_weight -= step * g.head_weight;
  head_bias -= step * g.head_bias;
}

std::size_t TangentClassifier::parameter_count(const FeatureShape& shape, std::size_t conv_maps, std::size_t classes) {
  const std::size_t h = hidden_width(shape.bands);
  return conv_maps * shape.per_band() + conv_maps + 2 * shape.bands * h + classes * shape.bands * conv_maps + classes;
}

std::size_t TangentClassifier::parameter_count() const {
  return static_cast<std::size_t>(kernel.size() + conv_bias.size() + omega1.size() + omega2.size() +
                                  head_weight.size() + head_bias.size());
}

}  // namespace lgl
