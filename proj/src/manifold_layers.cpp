#include "lglbci/manifold_layers.hpp"

#include <cmath>

#include "lglbci/error.hpp"
#include "lglbci/parallel.hpp"
#include "lglbci/stiefel.hpp"

namespace lgl {

namespace {

constexpr double kCrossingTol = 1e-12;

void fill_function(EigFunctionCache& c, EigFunction kind) {
  const auto n = c.lambda.size();
  c.f.resize(n);
  c.df.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double l = c.lambda[i];
    switch (kind) {
      case EigFunction::Log:
        c.f[i] = std::log(l);
        c.df[i] = 1.0 / l;
        break;
      case EigFunction::Exp:
        c.f[i] = std::exp(l);
        c.df[i] = c.f[i];
        break;
      case EigFunction::Sqrt:
        c.f[i] = std::sqrt(l);
        c.df[i] = 0.5 / c.f[i];
        break;
      case EigFunction::InvSqrt:
        c.f[i] = 1.0 / std::sqrt(l);
        c.df[i] = -0.5 * c.f[i] / l;
        break;
      case EigFunction::HalfExp:
        c.f[i] = std::exp(0.5 * l);
        c.df[i] = 0.5 * c.f[i];
        break;
    }
  }
}

EigFunctionCache decompose(const Matrix& x) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(x);
  if (es.info() != Eigen::Success) throw Error(ErrorCode::ConvergenceFailure, "symmetric eigensolver");
  return {es.eigenvectors(), es.eigenvalues(), {}, {}};
}

Matrix divided_differences(const EigFunctionCache& c) {
  const auto n = c.lambda.size();
  Matrix k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double gap = c.lambda[i] - c.lambda[j];
      k(i, j) = std::abs(gap) < kCrossingTol ? c.df[i] : (c.f[i] - c.f[j]) / gap;
    }
  }
  return k;
}

// Gradient of Y = Q X Q with respect to a symmetric Q.
Matrix congruence_grad_q(const Matrix& g, const Matrix& q, const Matrix& x) {
  return g * q * x + x * q * g;
}

void require_cache(bool ok, const char* layer) {
  if (!ok) throw Error(ErrorCode::MissingForwardCache, std::string(layer) + " backward called before forward");
}

}  // namespace

EigFunctionCache eig_function(const Matrix& x, EigFunction kind) {
  auto c = decompose(x);
  fill_function(c, kind);
  return c;
}

Matrix eig_function_value(const EigFunctionCache& cache) {
  return symmetrize(cache.u * cache.f.asDiagonal() * cache.u.transpose());
}

Matrix eig_function_backward(const EigFunctionCache& cache, const Matrix& grad_out) {
  const Matrix inner = cache.u.transpose() * symmetrize(grad_out) * cache.u;
  return symmetrize(cache.u * divided_differences(cache).cwiseProduct(inner) * cache.u.transpose());
}

Matrix eig_function_backward(const EigFunctionCache& first, const Matrix& grad_first,
                             const EigFunctionCache& second, const Matrix& grad_second) {
  const Matrix& u = first.u;
  const Matrix inner = divided_differences(first).cwiseProduct(u.transpose() * symmetrize(grad_first) * u) +
                       divided_differences(second).cwiseProduct(u.transpose() * symmetrize(grad_second) * u);
  return symmetrize(u * inner * u.transpose());
}

// ---------------------------------------------------------------- BiMap

BiMapLayer::BiMapLayer(Matrix weight, bool enforce_orthonormal) : orthonormal_(enforce_orthonormal) {
  set_weight(std::move(weight));
}

BiMapLayer BiMapLayer::identity(Eigen::Index in, Eigen::Index out) {
  return BiMapLayer(Matrix::Identity(out, in), true);
}

void BiMapLayer::set_weight(Matrix w) {
  if (w.rows() > w.cols() || w.rows() == 0) {
    throw Error(ErrorCode::RankDeficientWeight, "BiMap weight must be wide (out <= in)");
  }
  if (orthonormal_ && (w * w.transpose() - Matrix::Identity(w.rows(), w.rows())).norm() > 1e-8) {
    throw Error(ErrorCode::RankDeficientWeight, "BiMap weight rows are not orthonormal");
  }
  weight_ = std::move(w);
}

Batch BiMapLayer::forward(std::span<const Matrix> batch, std::size_t workers) {
  if (!orthonormal_) {
    Eigen::JacobiSVD<Matrix> svd(weight_);
    const auto& s = svd.singularValues();
    if (s.minCoeff() <= 1e-10 * s.maxCoeff()) throw Error(ErrorCode::RankDeficientWeight, "BiMap weight");
  }
  cache_.assign(batch.begin(), batch.end());
  Batch out(batch.size());
  parallel_for(batch.size(), workers, [&](std::size_t i) {
    if (batch[i].rows() != in_dim() || batch[i].cols() != in_dim()) {
      throw Error(ErrorCode::DimensionMismatch, "BiMap input dimension");
    }
    out[i] = symmetrize(weight_ * batch[i] * weight_.transpose());
  });
  return out;
}

BiMapLayer::Gradients BiMapLayer::backward(std::span<const Matrix> grad_out, std::size_t workers) const {
  require_cache(!cache_.empty() && cache_.size() == grad_out.size(), "BiMap");
  Gradients g{Batch(grad_out.size()), Matrix::Zero(weight_.rows(), weight_.cols())};
  Batch per_sample(grad_out.size());
  parallel_for(grad_out.size(), workers, [&](std::size_t i) {
    const Matrix& go = grad_out[i];
    g.input[i] = weight_.transpose() * go * weight_;
    per_sample[i] = go * weight_ * cache_[i].transpose() + go.transpose() * weight_ * cache_[i];
  });
  for (const auto& w : per_sample) g.weight += w;
  return g;
}

void BiMapLayer::apply_gradient(const Matrix& weight_grad, double step) {
  if (orthonormal_) {
    weight_ = stiefel::retract_step(weight_.transpose(), weight_grad.transpose(), step).transpose();
  } else {
    weight_ -= step * weight_grad;
  }
}

// ---------------------------------------------------------------- ReEig

ReEigLayer::ReEigLayer(double epsilon) : epsilon_(epsilon) {
  if (!(epsilon > 0.0)) throw Error(ErrorCode::InvalidConfig, "ReEig epsilon must be positive");
}

Batch ReEigLayer::forward(std::span<const Matrix> batch, std::size_t workers) {
  cache_.assign(batch.size(), {});
  Batch out(batch.size());
  parallel_for(batch.size(), workers, [&](std::size_t i) {
    auto c = decompose(batch[i]);
    const auto n = c.lambda.size();
    c.f.resize(n);
    c.df.resize(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      // Subgradient 0 at the clamp, like ReLU.
      const bool pass = c.lambda[k] > epsilon_;
      c.f[k] = pass ? c.lambda[k] : epsilon_;
      c.df[k] = pass ? 1.0 : 0.0;
    }
    out[i] = eig_function_value(c);
    cache_[i] = std::move(c);
  });
  return out;
}

Batch ReEigLayer::backward(std::span<const Matrix> grad_out, std::size_t workers) const {
  require_cache(!cache_.empty() && cache_.size() == grad_out.size(), "ReEig");
  Batch out(grad_out.size());
  parallel_for(grad_out.size(), workers, [&](std::size_t i) { out[i] = eig_function_backward(cache_[i], grad_out[i]); });
  return out;
}

// ---------------------------------------------------------------- LogEig

Batch LogEigLayer::forward(std::span<const Matrix> batch, std::size_t workers) {
  cache_.assign(batch.size(), {});
  Batch out(batch.size());
  parallel_for(batch.size(), workers, [&](std::size_t i) {
    auto c = decompose(batch[i]);
    if (!(c.lambda.minCoeff() > 0.0)) throw Error(ErrorCode::NotPositiveDefinite, "LogEig input");
    fill_function(c, EigFunction::Log);
    out[i] = eig_function_value(c);
    cache_[i] = std::move(c);
  });
  return out;
}

Batch LogEigLayer::backward(std::span<const Matrix> grad_out, std::size_t workers) const {
  require_cache(!cache_.empty() && cache_.size() == grad_out.size(), "LogEig");
  Batch out(grad_out.size());
  parallel_for(grad_out.size(), workers, [&](std::size_t i) { out[i] = eig_function_backward(cache_[i], grad_out[i]); });
  return out;
}

// ---------------------------------------------------------------- RBN

RbnLayer::RbnLayer(Eigen::Index dim, RbnOptions options)
    : options_(options), running_mean_(Matrix::Identity(dim, dim)) {
  if (options_.karcher_iterations < 1) throw Error(ErrorCode::InvalidConfig, "karcher_iterations must be positive");
  if (!(options_.momentum >= 0.0 && options_.momentum < 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "RBN momentum must lie in [0, 1)");
  }
  if (options_.learn_bias) bias_ = Matrix::Zero(dim, dim);
}

void RbnLayer::set_running_mean(Matrix m) {
  if (!is_spd(m)) throw Error(ErrorCode::NotPositiveDefinite, "RBN running mean");
  running_mean_ = std::move(m);
}

void RbnLayer::set_bias(Matrix b) {
  if (!options_.learn_bias) throw Error(ErrorCode::InvalidConfig, "RBN bias is disabled");
  bias_ = symmetrize(b);
}

void RbnLayer::clear_cache() {
  cached_ = false;
  inputs_.clear();
  iterations_.clear();
  centred_.clear();
}

Batch RbnLayer::forward(std::span<const Matrix> batch, bool training, std::size_t workers) {
  if (batch.empty()) throw Error(ErrorCode::DimensionMismatch, "RBN needs a non-empty batch");
  const auto n = running_mean_.rows();
  for (const auto& x : batch) {
    if (x.rows() != n || x.cols() != n) throw Error(ErrorCode::DimensionMismatch, "RBN input dimension");
  }
  clear_cache();
  inputs_.assign(batch.begin(), batch.end());
  const auto count = static_cast<double>(batch.size());

  Matrix mean;
  if (training) {
    mean = running_mean_;  // warm start; a constant with respect to the batch
    double previous = std::numeric_limits<double>::infinity();
    for (int t = 0; t < options_.karcher_iterations; ++t) {
      Iteration it;
      auto base = decompose(mean);
      it.sqrt = base;
      it.inv_sqrt = std::move(base);
      fill_function(it.sqrt, EigFunction::Sqrt);
      fill_function(it.inv_sqrt, EigFunction::InvSqrt);
      it.p = eig_function_value(it.sqrt);
      it.q = eig_function_value(it.inv_sqrt);
      it.logs.resize(batch.size());
      Batch values(batch.size());
      parallel_for(batch.size(), workers, [&](std::size_t i) {
        it.logs[i] = eig_function(symmetrize(it.q * batch[i] * it.q), EigFunction::Log);
        values[i] = eig_function_value(it.logs[i]);
      });
      Matrix tangent = Matrix::Zero(n, n);
      for (const auto& v : values) tangent += v;
      tangent /= count;
      const double residual = tangent.norm();
      if (residual < options_.karcher_tolerance) break;
      if (residual > previous * (1.0 + 1e-6) + 1e-12) {
        throw Error(ErrorCode::KarcherDivergence, "residual rose from " + std::to_string(previous) + " to " +
                                                      std::to_string(residual));
      }
      previous = residual;
      it.exp = eig_function(tangent, EigFunction::Exp);
      it.r = eig_function_value(it.exp);
      mean = symmetrize(it.p * it.r * it.p);
      iterations_.push_back(std::move(it));
    }
    batch_mean_ = mean;
    running_mean_ = geodesic(running_mean_, mean, 1.0 - options_.momentum);
  } else {
    mean = running_mean_;
  }

  final_inv_sqrt_ = eig_function(mean, EigFunction::InvSqrt);
  final_q_ = eig_function_value(final_inv_sqrt_);
  centred_.resize(batch.size());
  parallel_for(batch.size(), workers, [&](std::size_t i) { centred_[i] = symmetrize(final_q_ * batch[i] * final_q_); });

  cached_ = true;
  cached_training_ = training;
  if (!options_.learn_bias) return centred_;

  bias_half_ = eig_function(bias_, EigFunction::HalfExp);
  bias_c_ = eig_function_value(bias_half_);
  Batch out(batch.size());
  parallel_for(batch.size(), workers, [&](std::size_t i) { out[i] = symmetrize(bias_c_ * centred_[i] * bias_c_); });
  return out;
}

RbnLayer::Gradients RbnLayer::backward(std::span<const Matrix> grad_out, std::size_t workers) const {
  require_cache(cached_ && grad_out.size() == inputs_.size(), "RBN");
  const std::size_t count = inputs_.size();
  const auto n = running_mean_.rows();
  Gradients g{Batch(count, Matrix::Zero(n, n)), Matrix()};
  Batch scratch(count);

  // Gradient with respect to the centred batch.
  Batch grad_centred(grad_out.begin(), grad_out.end());
  if (options_.learn_bias) {
    parallel_for(count, workers, [&](std::size_t i) {
      scratch[i] = congruence_grad_q(grad_out[i], bias_c_, centred_[i]);
      grad_centred[i] = bias_c_ * grad_out[i] * bias_c_;
    });
    Matrix grad_c = Matrix::Zero(n, n);
    for (const auto& s : scratch) grad_c += s;
    g.bias = eig_function_backward(bias_half_, grad_c);
  }

  parallel_for(count, workers, [&](std::size_t i) {
    g.input[i] = final_q_ * grad_centred[i] * final_q_;
    scratch[i] = congruence_grad_q(grad_centred[i], final_q_, inputs_[i]);
  });
  if (!cached_training_) return g;

  Matrix grad_q = Matrix::Zero(n, n);
  for (const auto& s : scratch) grad_q += s;
  Matrix grad_mean = eig_function_backward(final_inv_sqrt_, grad_q);

  for (std::size_t t = iterations_.size(); t-- > 0;) {
    const auto& it = iterations_[t];
    const Matrix grad_p = congruence_grad_q(grad_mean, it.p, it.r);
    const Matrix grad_r = it.p * grad_mean * it.p;
    const Matrix grad_log = eig_function_backward(it.exp, grad_r) / static_cast<double>(count);
    parallel_for(count, workers, [&](std::size_t i) {
      const Matrix grad_z = eig_function_backward(it.logs[i], grad_log);
      g.input[i] += it.q * grad_z * it.q;
      scratch[i] = congruence_grad_q(grad_z, it.q, inputs_[i]);
    });
    if (t == 0) break;  // the starting point does not depend on the batch
    Matrix grad_qt = Matrix::Zero(n, n);
    for (const auto& s : scratch) grad_qt += s;
    grad_mean = eig_function_backward(it.sqrt, grad_p, it.inv_sqrt, grad_qt);
  }
  return g;
}

void RbnLayer::apply_gradient(const Matrix& bias_grad, double step) {
  if (!options_.learn_bias || bias_grad.size() == 0) return;
  bias_ = symmetrize(bias_ - step * bias_grad);
}

}  // namespace lgl
