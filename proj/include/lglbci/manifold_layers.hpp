#pragma once

#include <optional>
#include <span>
#include <vector>

#include "lglbci/spd.hpp"

namespace lgl {

using Batch = std::vector<Matrix>;

// Cached spectral decomposition for Y = U diag(f(lambda)) U^T, enough to
// backpropagate with the Daleckii-Krein divided differences.
struct EigFunctionCache {
  Matrix u;
  Vector lambda;
  Vector f;
  Vector df;
};

enum class EigFunction { Log, Exp, Sqrt, InvSqrt, HalfExp };

EigFunctionCache eig_function(const Matrix& x, EigFunction kind);
Matrix eig_function_value(const EigFunctionCache& cache);

// dL/dX from dL/dY. Entries with |lambda_i - lambda_j| < 1e-12 use f'(lambda_i).
Matrix eig_function_backward(const EigFunctionCache& cache, const Matrix& grad_out);

// Same, summing contributions of two functions of one decomposition.
Matrix eig_function_backward(const EigFunctionCache& first, const Matrix& grad_first,
                             const EigFunctionCache& second, const Matrix& grad_second);

// X -> W X W^T with W of shape (out x in), full row rank.
class BiMapLayer {
 public:
  BiMapLayer(Matrix weight, bool enforce_orthonormal);

  // Weight = first `out` rows of the identity.
  static BiMapLayer identity(Eigen::Index in, Eigen::Index out);

  // Throws DimensionMismatch, RankDeficientWeight.
  Batch forward(std::span<const Matrix> batch, std::size_t workers = 1);

  struct Gradients {
    Batch input;
    Matrix weight;
  };
  // Throws MissingForwardCache.
  Gradients backward(std::span<const Matrix> grad_out, std::size_t workers = 1) const;

  // Gradient step: QR retraction on the Stiefel manifold when orthonormal
  // rows are enforced, plain Euclidean otherwise.
  void apply_gradient(const Matrix& weight_grad, double step);

  const Matrix& weight() const { return weight_; }
  void set_weight(Matrix w);
  bool enforce_orthonormal() const { return orthonormal_; }
  Eigen::Index in_dim() const { return weight_.cols(); }
  Eigen::Index out_dim() const { return weight_.rows(); }
  void clear_cache() { cache_.clear(); }

 private:
  Matrix weight_;
  bool orthonormal_;
  Batch cache_;
};

// Eigenvalue rectification max(lambda, epsilon).
class ReEigLayer {
 public:
  explicit ReEigLayer(double epsilon);

  Batch forward(std::span<const Matrix> batch, std::size_t workers = 1);
  Batch backward(std::span<const Matrix> grad_out, std::size_t workers = 1) const;

  double epsilon() const { return epsilon_; }
  void clear_cache() { cache_.clear(); }

 private:
  double epsilon_;
  std::vector<EigFunctionCache> cache_;
};

// Matrix logarithm into the tangent space at the identity.
class LogEigLayer {
 public:
  // Throws NotPositiveDefinite.
  Batch forward(std::span<const Matrix> batch, std::size_t workers = 1);
  Batch backward(std::span<const Matrix> grad_out, std::size_t workers = 1) const;
  void clear_cache() { cache_.clear(); }

 private:
  std::vector<EigFunctionCache> cache_;
};

struct RbnOptions {
  int karcher_iterations = 10;
  double karcher_tolerance = 1e-9;
  double momentum = 0.9;
  bool learn_bias = false;
};

// Riemannian batch normalisation: congruence by the inverse square root of
// the batch Karcher mean (training) or of the running mean (inference), so
// the normalised batch is centred at the identity. With learn_bias the
// result is re-centred at exp(bias) instead. The training-mode Karcher
// iteration starts from the running mean.
class RbnLayer {
 public:
  RbnLayer(Eigen::Index dim, RbnOptions options = {});

  // Throws KarcherDivergence, DimensionMismatch.
  Batch forward(std::span<const Matrix> batch, bool training, std::size_t workers = 1);

  struct Gradients {
    Batch input;
    Matrix bias;  // zero-size unless learn_bias
  };
  Gradients backward(std::span<const Matrix> grad_out, std::size_t workers = 1) const;

  void apply_gradient(const Matrix& bias_grad, double step);

  const Matrix& running_mean() const { return running_mean_; }
  void set_running_mean(Matrix m);
  const Matrix& bias() const { return bias_; }
  void set_bias(Matrix b);
  const RbnOptions& options() const { return options_; }
  // Karcher mean computed by the last training-mode forward.
  const Matrix& last_batch_mean() const { return batch_mean_; }
  int last_iterations() const { return static_cast<int>(iterations_.size()); }
  void clear_cache();

 private:
  struct Iteration {
    EigFunctionCache sqrt, inv_sqrt;
    Matrix p, q;
    std::vector<EigFunctionCache> logs;
    EigFunctionCache exp;
    Matrix r;
  };

  RbnOptions options_;
  Matrix running_mean_;
  Matrix bias_;  // symmetric log of the bias point

  // forward cache
  bool cached_ = false;
  bool cached_training_ = false;
  Batch inputs_;
  std::vector<Iteration> iterations_;
  EigFunctionCache final_inv_sqrt_;
  Matrix final_q_;
  Batch centred_;
  EigFunctionCache bias_half_;
  Matrix bias_c_;
  Matrix batch_mean_;
};

}  // namespace lgl
