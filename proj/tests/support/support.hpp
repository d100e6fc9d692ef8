#pragma once

#include <cmath>
#include <random>

#include <Eigen/Dense>

namespace lgl::test {

inline Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd a(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) a(i, j) = n(rng);
  return a;
}

inline Eigen::MatrixXd random_sym(Eigen::Index n, std::mt19937_64& rng) {
  Eigen::MatrixXd a = gaussian(n, n, rng);
  return 0.5 * (a + a.transpose());
}

// A A^T / n + floor I, reasonably conditioned.
inline Eigen::MatrixXd random_spd(Eigen::Index n, std::mt19937_64& rng, double floor = 0.1) {
  Eigen::MatrixXd a = gaussian(n, n + 2, rng);
  Eigen::MatrixXd x = a * a.transpose() / static_cast<double>(n) + floor * Eigen::MatrixXd::Identity(n, n);
  return 0.5 * (x + x.transpose());
}

// Well-separated spectrum, keeps divided differences away from the
// repeated-eigenvalue branch.
inline Eigen::MatrixXd spread_spd(Eigen::Index n, std::mt19937_64& rng, double lo = 0.5, double hi = 3.0) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian(n, n, rng));
  Eigen::MatrixXd q = qr.householderQ();
  Eigen::VectorXd lam(n);
  for (Eigen::Index i = 0; i < n; ++i) lam(i) = lo + (hi - lo) * static_cast<double>(i) / std::max<Eigen::Index>(1, n - 1);
  Eigen::MatrixXd x = q * lam.asDiagonal() * q.transpose();
  return 0.5 * (x + x.transpose());
}

inline double rel_err(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-8});
  return std::abs(a - b) / scale;
}

inline double inner(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return (a.array() * b.array()).sum(); }

}  // namespace lgl::test
