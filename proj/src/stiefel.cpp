#include "lglbci/stiefel.hpp"

#include "lglbci/error.hpp"

namespace lgl::stiefel {

Matrix qr_factor(const Matrix& a) {
  if (a.rows() < a.cols()) throw Error(ErrorCode::RankDeficientWeight, "Stiefel point needs rows >= cols");
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ() * Matrix::Identity(a.rows(), a.cols());
  const Matrix r = qr.matrixQR().topRows(a.cols()).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    if (r(j, j) == 0.0) throw Error(ErrorCode::RankDeficientWeight, "retraction of a rank-deficient matrix");
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

Matrix project_tangent(const Matrix& w, const Matrix& euclidean_grad) {
  const Matrix wtz = w.transpose() * euclidean_grad;
  return euclidean_grad - w * symmetrize(wtz);
}

Matrix retract_step(const Matrix& w, const Matrix& euclidean_grad, double step) {
  return qr_factor(w - step * project_tangent(w, euclidean_grad));
}

double orthonormality_error(const Matrix& w) {
  return (w.transpose() * w - Matrix::Identity(w.cols(), w.cols())).norm();
}

Matrix random_orthonormal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix g(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) g(i, j) = normal(rng);
  }
  return qr_factor(g);
}

}  // namespace lgl::stiefel
