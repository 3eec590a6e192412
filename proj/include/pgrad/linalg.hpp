#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace pgrad {

using Vector = std::vector<double>;

/// Dense row-major matrix. Small sizes only; the eigensolver is meant for
/// Gram matrices of trajectory length, not parameter dimension.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vector data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

struct EigenPair {
  double value = 0.0;
  Vector vector;
};

// Vector helpers shared across modules.
double dot(const Vector& a, const Vector& b);
double norm2(const Vector& a);
double cosine(const Vector& a, const Vector& b);
Vector scaled(const Vector& a, double s);
void axpy(double a, const Vector& x, Vector& y);  // y += a*x
Vector sub(const Vector& a, const Vector& b);
Vector add(const Vector& a, const Vector& b);
bool all_finite(const Vector& a);

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Pairs come back sorted by eigenvalue, descending; eigenvectors are unit
/// length with the largest-magnitude component flipped positive.
/// Throws std::invalid_argument on non-symmetric input and std::runtime_error
/// if the off-diagonal norm has not converged after the sweep cap.
std::vector<EigenPair> sym_eig(const Matrix& a);

/// Same as sym_eig but for matrices known to be positive semi-definite:
/// eigenvalues in [-1e-10, 0) are clamped to 0, anything more negative is an
/// error (it signals a broken Gram computation upstream).
std::vector<EigenPair> sym_eig_psd(const Matrix& a);

/// Removes the column mean from every row. Returns (centered, mean).
std::pair<Matrix, Vector> center_rows(const Matrix& t);

/// scale * (centered · centeredᵀ); callers pass scale = 1/m for an
/// (m+1)-row centered trajectory.
Matrix gram(const Matrix& centered, double scale);

/// centeredᵀ · e, mapping a Gram-space eigenvector back to parameter space.
Vector transpose_times(const Matrix& m, const Vector& e);

}  // namespace pgrad
