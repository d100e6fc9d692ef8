#pragma once

#include <random>

#include "lglbci/spd.hpp"

namespace lgl::stiefel {

// Orthonormal-column factor of a thin QR decomposition, signs fixed so
// that diag(R) > 0.
Matrix qr_factor(const Matrix& a);

// Riemannian gradient on St(n, p) for column-orthonormal w: Z - W sym(W^T Z).
Matrix project_tangent(const Matrix& w, const Matrix& euclidean_grad);

// One descent step followed by the QR retraction.
Matrix retract_step(const Matrix& w, const Matrix& euclidean_grad, double step);

// ||W^T W - I||_F
double orthonormality_error(const Matrix& w);

Matrix random_orthonormal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng);

}  // namespace lgl::stiefel
