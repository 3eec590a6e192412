#include "pgrad/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace pgrad {

double dot(const Vector& a, const Vector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(const Vector& a) { return std::sqrt(dot(a, a)); }

double cosine(const Vector& a, const Vector& b) {
  const double na = norm2(a), nb = norm2(b);
  if (na == 0.0 || nb == 0.0)
    throw std::invalid_argument("cosine: zero-norm vector");
  return dot(a, b) / (na * nb);
}

Vector scaled(const Vector& a, double s) {
  Vector out(a);
  for (double& x : out) x *= s;
  return out;
}

void axpy(double a, const Vector& x, Vector& y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

Vector sub(const Vector& a, const Vector& b) {
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

Vector add(const Vector& a, const Vector& b) {
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

bool all_finite(const Vector& a) {
  return std::all_of(a.begin(), a.end(),
                     [](double x) { return std::isfinite(x); });
}

namespace {

double frobenius(const Matrix& a) {
  double s = 0.0;
  for (double x : a.data) s += x * x;
  return std::sqrt(s);
}

void check_symmetric(const Matrix& a) {
  if (a.rows != a.cols)
    throw std::invalid_argument("sym_eig: matrix is not square");
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = i + 1; j < a.cols; ++j) {
      const double tol = 1e-12 * std::max(1.0, std::abs(a.at(i, j)));
      if (std::abs(a.at(i, j) - a.at(j, i)) > tol) {
        std::ostringstream msg;
        msg << "sym_eig: asymmetric entry at (" << i << "," << j << "): "
            << a.at(i, j) << " vs " << a.at(j, i);
        throw std::invalid_argument(msg.str());
      }
    }
}

double offdiag_norm(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j)
      if (i != j) s += a.at(i, j) * a.at(i, j);
  return std::sqrt(s);
}

}  // namespace

std::vector<EigenPair> sym_eig(const Matrix& input) {
  check_symmetric(input);
  const std::size_t n = input.rows;
  if (n == 0) throw std::invalid_argument("sym_eig: empty matrix");
  if (n > 256) throw std::invalid_argument("sym_eig: size exceeds 256");

  Matrix a = input;
  // v starts as identity; columns accumulate the eigenvectors.
  Matrix v(n, n);
  for (std::size_t i = 0; i < n; ++i) v.at(i, i) = 1.0;

  const double fro = frobenius(input);
  const double threshold = 1e-12 * fro;
  const int max_sweeps = 100;

  int sweep = 0;
  while (offdiag_norm(a) > threshold && fro > 0.0) {
    if (++sweep > max_sweeps) {
      std::ostringstream msg;
      msg << "sym_eig: no convergence after " << max_sweeps
          << " sweeps, off-diagonal residual " << offdiag_norm(a);
      throw std::runtime_error(msg.str());
    }
    for (std::size_t p = 0; p < n - 1; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a.at(p, q);
        if (apq == 0.0) continue;
        const double app = a.at(p, p), aqq = a.at(q, q);
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t i = 0; i < n; ++i) {
          const double aip = a.at(i, p), aiq = a.at(i, q);
          a.at(i, p) = c * aip - s * aiq;
          a.at(i, q) = s * aip + c * aiq;
        }
        for (std::size_t j = 0; j < n; ++j) {
          const double apj = a.at(p, j), aqj = a.at(q, j);
          a.at(p, j) = c * apj - s * aqj;
          a.at(q, j) = s * apj + c * aqj;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vip = v.at(i, p), viq = v.at(i, q);
          v.at(i, p) = c * vip - s * viq;
          v.at(i, q) = s * vip + c * viq;
        }
      }
    }
  }

  std::vector<EigenPair> pairs(n);
  for (std::size_t j = 0; j < n; ++j) {
    pairs[j].value = a.at(j, j);
    pairs[j].vector.resize(n);
    for (std::size_t i = 0; i < n; ++i) pairs[j].vector[i] = v.at(i, j);
    // Fix the sign: largest-magnitude component positive.
    std::size_t imax = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (std::abs(pairs[j].vector[i]) > std::abs(pairs[j].vector[imax]))
        imax = i;
    if (pairs[j].vector[imax] < 0.0)
      for (double& x : pairs[j].vector) x = -x;
  }
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const EigenPair& a, const EigenPair& b) {
                     return a.value > b.value;
                   });
  return pairs;
}

std::vector<EigenPair> sym_eig_psd(const Matrix& input) {
  auto pairs = sym_eig(input);
  for (auto& p : pairs) {
    if (p.value < 0.0) {
      if (p.value < -1e-10) {
        std::ostringstream msg;
        msg << "sym_eig_psd: eigenvalue " << p.value
            << " below the PSD clamp window";
        throw std::runtime_error(msg.str());
      }
      p.value = 0.0;
    }
  }
  return pairs;
}

std::pair<Matrix, Vector> center_rows(const Matrix& t) {
  if (t.rows < 2)
    throw std::invalid_argument("center_rows: need at least 2 rows");
  Vector mean(t.cols, 0.0);
  for (std::size_t i = 0; i < t.rows; ++i)
    for (std::size_t j = 0; j < t.cols; ++j) mean[j] += t.at(i, j);
  for (double& m : mean) m /= static_cast<double>(t.rows);
  Matrix centered(t.rows, t.cols);
  for (std::size_t i = 0; i < t.rows; ++i)
    for (std::size_t j = 0; j < t.cols; ++j)
      centered.at(i, j) = t.at(i, j) - mean[j];
  return {std::move(centered), std::move(mean)};
}

Matrix gram(const Matrix& centered, double scale) {
  Matrix g(centered.rows, centered.rows);
  for (std::size_t i = 0; i < centered.rows; ++i) {
    for (std::size_t j = i; j < centered.rows; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < centered.cols; ++c)
        s += centered.at(i, c) * centered.at(j, c);
      g.at(i, j) = g.at(j, i) = scale * s;
    }
  }
  return g;
}

Vector transpose_times(const Matrix& m, const Vector& e) {
  if (e.size() != m.rows)
    throw std::invalid_argument("transpose_times: length mismatch");
  Vector out(m.cols, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) out[j] += m.at(i, j) * e[i];
  return out;
}

}  // namespace pgrad
