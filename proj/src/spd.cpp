#include "lglbci/spd.hpp"

#include <cmath>

#include "lglbci/error.hpp"

namespace lgl {

namespace {

void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw Error(ErrorCode::DimensionMismatch, std::string(what) + " must be square and non-empty");
  }
}

}  // namespace

bool is_symmetric(const Matrix& m, double rel_tol) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.norm());
  return (m - m.transpose()).norm() <= rel_tol * scale;
}

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

bool is_spd(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0 || !m.allFinite() || !is_symmetric(m)) return false;
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) return false;
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  return lo > 0.0 && lo > kSpdRatioTol * hi;
}

SymMatrix::SymMatrix(Matrix m) : m_(std::move(m)) {
  require_square(m_, "symmetric matrix");
  if (!is_symmetric(m_)) throw Error(ErrorCode::DimensionMismatch, "matrix is not symmetric");
}

SpdMatrix::SpdMatrix(Matrix m) : m_(std::move(m)) {
  require_square(m_, "SPD matrix");
  if (!is_symmetric(m_)) throw Error(ErrorCode::DimensionMismatch, "matrix is not symmetric");
  if (!is_spd(m_)) throw Error(ErrorCode::NotPositiveDefinite, "smallest eigenvalue not positive");
}

void SpdTensor::validate() const {
  if (slices.size() != windows * bands) throw Error(ErrorCode::DimensionMismatch, "SPD tensor shape");
  for (const auto& s : slices) {
    if (s.rows() != dim() || s.cols() != dim()) throw Error(ErrorCode::DimensionMismatch, "ragged SPD tensor");
    if (!is_spd(s)) throw Error(ErrorCode::NotPositiveDefinite, "SPD tensor slice");
  }
}

SymEig sym_eig(const Matrix& x) {
  require_square(x, "eigendecomposition input");
  Eigen::SelfAdjointEigenSolver<Matrix> es(x);
  if (es.info() != Eigen::Success) throw Error(ErrorCode::ConvergenceFailure, "symmetric eigensolver");
  const auto n = x.rows();
  SymEig out{Vector(n), Matrix(n, n)};
  // Eigen sorts ascending.
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values[i] = es.eigenvalues()[n - 1 - i];
    out.vectors.col(i) = es.eigenvectors().col(n - 1 - i);
  }
  return out;
}

Matrix eig_apply(const SymEig& eig, const std::function<double(double)>& f) {
  Vector fl = eig.values.unaryExpr(f);
  Matrix out = eig.vectors * fl.asDiagonal() * eig.vectors.transpose();
  return symmetrize(out);
}

SpdMatrix covariance(const Eigen::Ref<const Matrix>& window, double shrinkage) {
  if (window.cols() < 1 || window.rows() < 1) throw Error(ErrorCode::DegenerateInput, "empty window");
  if (!(shrinkage >= 0.0)) throw Error(ErrorCode::DegenerateInput, "negative shrinkage");
  const auto m = window.rows();
  const double len = static_cast<double>(window.cols());
  const Matrix z = window.colwise() - window.rowwise().mean();
  Matrix c = (z * z.transpose()) / len;
  c = symmetrize(c);
  c.diagonal().array() += shrinkage;
  if (!is_spd(c)) throw Error(ErrorCode::DegenerateInput, "covariance of " + std::to_string(m) + " channels is singular");
  return SpdMatrix(std::move(c));
}

Matrix log_spd_unchecked(const Matrix& x) {
  return eig_apply(sym_eig(x), [](double l) { return std::log(l); });
}

Matrix exp_sym_unchecked(const Matrix& v) {
  return eig_apply(sym_eig(v), [](double l) { return std::exp(l); });
}

Matrix pow_spd_unchecked(const Matrix& x, double p) {
  return eig_apply(sym_eig(x), [p](double l) { return std::pow(l, p); });
}

SymMatrix spd_log(const SpdMatrix& x) { return SymMatrix(log_spd_unchecked(x.mat())); }

SpdMatrix spd_exp(const SymMatrix& v) { return SpdMatrix(exp_sym_unchecked(v.mat())); }

SpdMatrix spd_pow(const SpdMatrix& x, double p) { return SpdMatrix(pow_spd_unchecked(x.mat(), p)); }

SpdMatrix spd_sqrt(const SpdMatrix& x) { return spd_pow(x, 0.5); }

SpdMatrix spd_inv_sqrt(const SpdMatrix& x) { return spd_pow(x, -0.5); }

double airm_distance_unchecked(const Matrix& x, const Matrix& y) {
  const Matrix isq = pow_spd_unchecked(x, -0.5);
  const Matrix inner = symmetrize(isq * y * isq);
  Eigen::SelfAdjointEigenSolver<Matrix> es(inner, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw Error(ErrorCode::ConvergenceFailure, "airm eigensolver");
  const auto& l = es.eigenvalues();
  if (l.minCoeff() <= 0.0) throw Error(ErrorCode::NotPositiveDefinite, "airm operand");
  return std::sqrt(l.array().log().square().sum());
}

double airm_distance(const SpdMatrix& x, const SpdMatrix& y) {
  if (x.dim() != y.dim()) throw Error(ErrorCode::DimensionMismatch, "airm operands differ in size");
  return airm_distance_unchecked(x.mat(), y.mat());
}

Matrix karcher_mean(std::span<const Matrix> batch, const KarcherOptions& options) {
  if (batch.empty()) throw Error(ErrorCode::DimensionMismatch, "Karcher mean of an empty batch");
  const auto n = batch.front().rows();
  Matrix mean = Matrix::Identity(n, n);
  double previous = std::numeric_limits<double>::infinity();
  for (int it = 0; it < options.max_iterations; ++it) {
    const auto eig = sym_eig(mean);
    const Matrix sq = eig_apply(eig, [](double l) { return std::sqrt(l); });
    const Matrix isq = eig_apply(eig, [](double l) { return 1.0 / std::sqrt(l); });
    Matrix tangent = Matrix::Zero(n, n);
    for (const auto& x : batch) tangent += log_spd_unchecked(symmetrize(isq * x * isq));
    tangent /= static_cast<double>(batch.size());
    const double residual = tangent.norm();
    if (residual < options.tolerance) break;
    if (residual > previous * (1.0 + 1e-6) + 1e-12) {
      throw Error(ErrorCode::KarcherDivergence, "residual rose from " + std::to_string(previous) + " to " +
                                                    std::to_string(residual));
    }
    previous = residual;
    mean = symmetrize(sq * exp_sym_unchecked(tangent) * sq);
  }
  return mean;
}

Matrix geodesic(const Matrix& a, const Matrix& b, double t) {
  const auto eig = sym_eig(a);
  const Matrix sq = eig_apply(eig, [](double l) { return std::sqrt(l); });
  const Matrix isq = eig_apply(eig, [](double l) { return 1.0 / std::sqrt(l); });
  return symmetrize(sq * pow_spd_unchecked(symmetrize(isq * b * isq), t) * sq);
}

SymMatrix centering_matrix(Eigen::Index n) {
  if (n < 1) throw Error(ErrorCode::DimensionMismatch, "centering matrix needs n >= 1");
  Matrix h = Matrix::Identity(n, n);
  h.array() -= 1.0 / static_cast<double>(n);
  return SymMatrix(std::move(h));
}

double distance_gap_min_eigenvalue(const Matrix& g, const Matrix& d) {
  if (g.rows() != g.cols() || d.rows() != d.cols() || g.rows() != d.rows() || g.rows() == 0) {
    throw Error(ErrorCode::DimensionMismatch, "distance matrices must be square and equal in size");
  }
  const Matrix h = centering_matrix(g.rows()).mat();
  const Matrix a = -0.5 * (g.array().square() - d.array().square()).matrix();
  const Matrix centered = symmetrize(h * a * h);
  Eigen::SelfAdjointEigenSolver<Matrix> es(centered, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw Error(ErrorCode::ConvergenceFailure, "distance gap eigensolver");
  return es.eigenvalues().minCoeff();
}

}  // namespace lgl
