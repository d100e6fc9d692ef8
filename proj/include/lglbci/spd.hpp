#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace lgl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kSymmetryTol = 1e-10;
inline constexpr double kSpdRatioTol = 1e-12;

// Symmetric matrix, e.g. a tangent vector at the identity.
class SymMatrix {
 public:
  // Throws DimensionMismatch when the input is not square or not symmetric.
  explicit SymMatrix(Matrix m);

  const Matrix& mat() const { return m_; }
  Eigen::Index dim() const { return m_.rows(); }

 private:
  Matrix m_;
};

// Symmetric positive-definite matrix; lambda_min > 1e-12 * lambda_max.
class SpdMatrix {
 public:
  // Throws DimensionMismatch (not square / not symmetric) or NotPositiveDefinite.
  explicit SpdMatrix(Matrix m);

  const Matrix& mat() const { return m_; }
  Eigen::Index dim() const { return m_.rows(); }

  static SpdMatrix identity(Eigen::Index n) { return SpdMatrix(Matrix::Identity(n, n)); }

 private:
  Matrix m_;
};

// S x F grid of M x M covariance matrices, window-major.
struct SpdTensor {
  std::size_t windows = 0;
  std::size_t bands = 0;
  std::vector<Matrix> slices;  // index s * bands + f

  const Matrix& at(std::size_t s, std::size_t f) const { return slices[s * bands + f]; }
  Matrix& at(std::size_t s, std::size_t f) { return slices[s * bands + f]; }
  Eigen::Index dim() const { return slices.empty() ? 0 : slices.front().rows(); }

  // Throws NotPositiveDefinite / DimensionMismatch when a slice is not SPD.
  void validate() const;
};

bool is_symmetric(const Matrix& m, double rel_tol = kSymmetryTol);
bool is_spd(const Matrix& m);
Matrix symmetrize(const Matrix& m);

struct SymEig {
  Vector values;  // descending
  Matrix vectors; // columns match values
};

// Throws ConvergenceFailure.
SymEig sym_eig(const Matrix& x);

// U diag(f(lambda)) U^T for symmetric x.
Matrix eig_apply(const SymEig& eig, const std::function<double(double)>& f);

// Row-mean-centred (1/L) Z Z^T + shrinkage * I. Throws DegenerateInput.
SpdMatrix covariance(const Eigen::Ref<const Matrix>& window, double shrinkage);

SymMatrix spd_log(const SpdMatrix& x);
SpdMatrix spd_exp(const SymMatrix& v);
SpdMatrix spd_pow(const SpdMatrix& x, double p);
SpdMatrix spd_sqrt(const SpdMatrix& x);
SpdMatrix spd_inv_sqrt(const SpdMatrix& x);

// Unchecked kernels on raw matrices, used on hot paths where the caller
// guarantees the input is SPD (or symmetric, for exp).
Matrix log_spd_unchecked(const Matrix& x);
Matrix exp_sym_unchecked(const Matrix& v);
Matrix pow_spd_unchecked(const Matrix& x, double p);

// Affine-invariant distance ||log(X^-1/2 Y X^-1/2)||_F. Throws DimensionMismatch.
double airm_distance(const SpdMatrix& x, const SpdMatrix& y);
double airm_distance_unchecked(const Matrix& x, const Matrix& y);

// Karcher (Frechet) mean under the affine-invariant metric by fixed-point
// iteration, started from the identity. Throws KarcherDivergence.
struct KarcherOptions {
  int max_iterations = 10;
  double tolerance = 1e-9;
};
Matrix karcher_mean(std::span<const Matrix> batch, const KarcherOptions& options = {});

// Point at fraction t along the geodesic from a to b.
Matrix geodesic(const Matrix& a, const Matrix& b, double t);

// I - (1/n) 1 1^T.
SymMatrix centering_matrix(Eigen::Index n);

// Smallest eigenvalue of H (-1/2 (G.^2 - D.^2)) H. Throws DimensionMismatch.
double distance_gap_min_eigenvalue(const Matrix& g, const Matrix& d);

}  // namespace lgl
