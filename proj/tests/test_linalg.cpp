#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "oracles.hpp"
#include "pgrad/linalg.hpp"

using namespace pgrad;

namespace {

Matrix from_rows(const std::vector<Vector>& rows) {
  Matrix m(rows.size(), rows.empty() ? 0 : rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m.at(i, j) = rows[i][j];
  return m;
}

double abs_cos(const Vector& a, const Vector& b) {
  return std::abs(cosine(a, b));
}

}  // namespace

TEST_CASE("sym_eig identity 2x2") {
  Matrix a = from_rows({{1, 0}, {0, 1}});
  auto pairs = sym_eig(a);
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].value == doctest::Approx(1.0));
  CHECK(pairs[1].value == doctest::Approx(1.0));
  CHECK(norm2(pairs[0].vector) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(std::abs(dot(pairs[0].vector, pairs[1].vector)) < 1e-8);
}

TEST_CASE("sym_eig diagonal 2x2") {
  Matrix a = from_rows({{2, 0}, {0, 1}});
  auto pairs = sym_eig(a);
  CHECK(pairs[0].value == doctest::Approx(2.0));
  CHECK(pairs[1].value == doctest::Approx(1.0));
  CHECK(abs_cos(pairs[0].vector, {1, 0}) == doctest::Approx(1.0));
  CHECK(abs_cos(pairs[1].vector, {0, 1}) == doctest::Approx(1.0));
}

TEST_CASE("sym_eig matches power-iteration oracle on seeded 5x5") {
  Matrix a = oracle::random_symmetric(5, 42);
  auto pairs = sym_eig(a);
  auto ref = oracle::power_eig(a);
  REQUIRE(pairs.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(pairs[i].value == doctest::Approx(ref.values[i]).epsilon(1e-8));
    CHECK(abs_cos(pairs[i].vector, ref.vectors[i]) > 1.0 - 1e-8);
  }
}

TEST_CASE("sym_eig rejects asymmetric input") {
  Matrix a = from_rows({{1, 2}, {3, 1}});
  CHECK_THROWS_AS(sym_eig(a), std::invalid_argument);
}

TEST_CASE("sym_eig reconstruction and trace over seeded matrices") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::size_t n = 2 + seed % 7;
    Matrix a = oracle::random_symmetric(n, 100 + seed);
    auto pairs = sym_eig(a);

    double fro = 0.0;
    for (double x : a.data) fro += x * x;
    fro = std::sqrt(fro);

    Matrix recon(n, n);
    double trace_sum = 0.0;
    for (const auto& p : pairs) {
      trace_sum += p.value;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          recon.at(i, j) += p.value * p.vector[i] * p.vector[j];
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        CHECK(std::abs(recon.at(i, j) - a.at(i, j)) < 1e-7 * fro);

    double trace = 0.0;
    for (std::size_t i = 0; i < n; ++i) trace += a.at(i, i);
    CHECK(std::abs(trace_sum - trace) <= 1e-9 * std::abs(trace) + 1e-12);

    // pairwise orthogonality
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        CHECK(std::abs(dot(pairs[i].vector, pairs[j].vector)) < 1e-8);
  }
}

TEST_CASE("sym_eig_psd clamps the negative round-off window only") {
  Matrix a = from_rows({{1e-12, 0}, {0, -5e-11}});
  auto pairs = sym_eig_psd(a);
  CHECK(pairs[1].value == 0.0);

  Matrix bad = from_rows({{1, 0}, {0, -1}});
  CHECK_THROWS_AS(sym_eig_psd(bad), std::runtime_error);
}

TEST_CASE("center_rows hand case") {
  auto [centered, mean] = center_rows(from_rows({{1, 1}, {3, 3}}));
  CHECK(mean == Vector{2, 2});
  CHECK(centered.at(0, 0) == doctest::Approx(-1));
  CHECK(centered.at(0, 1) == doctest::Approx(-1));
  CHECK(centered.at(1, 0) == doctest::Approx(1));
  CHECK(centered.at(1, 1) == doctest::Approx(1));
}

TEST_CASE("center_rows of repeated row is zero") {
  auto [centered, mean] = center_rows(from_rows({{2, 5}, {2, 5}, {2, 5}}));
  for (double x : centered.data) CHECK(x == doctest::Approx(0.0));
  CHECK(mean == Vector{2, 5});
}

TEST_CASE("center_rows column sums vanish on random input") {
  Matrix t = oracle::random_matrix(4, 6, 99);
  auto [centered, mean] = center_rows(t);
  for (std::size_t j = 0; j < 6; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < 4; ++i) s += centered.at(i, j);
    CHECK(std::abs(s) < 1e-12);
  }
}

TEST_CASE("center_rows rejects single-row input") {
  CHECK_THROWS_AS(center_rows(from_rows({{1, 2}})), std::invalid_argument);
}

TEST_CASE("gram hand case") {
  Matrix g = gram(from_rows({{-1, 0}, {1, 0}}), 1.0);
  CHECK(g.at(0, 0) == doctest::Approx(1));
  CHECK(g.at(0, 1) == doctest::Approx(-1));
  CHECK(g.at(1, 0) == doctest::Approx(-1));
  CHECK(g.at(1, 1) == doctest::Approx(1));
}

TEST_CASE("gram of zero matrix is zero") {
  Matrix z(3, 4);
  Matrix g = gram(z, 0.5);
  for (double x : g.data) CHECK(x == 0.0);
}

TEST_CASE("gram matches naive double loop") {
  Matrix m = oracle::random_matrix(3, 8, 17);
  Matrix g = gram(m, 0.5);
  Matrix ref = oracle::naive_gram(m, 0.5);
  for (std::size_t i = 0; i < g.data.size(); ++i)
    CHECK(std::abs(g.data[i] - ref.data[i]) < 1e-12);
}

TEST_CASE("bijection between Gram and covariance eigenpairs") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Matrix raw = oracle::random_matrix(4, 8, 300 + seed);
    auto [centered, mean] = center_rows(raw);
    const double scale = 1.0 / 3.0;

    auto gram_pairs = sym_eig_psd(gram(centered, scale));
    auto cov_pairs = sym_eig_psd(oracle::naive_covariance(centered, scale));

    // nonzero eigenvalues agree
    for (std::size_t z = 0; z < 3; ++z) {
      if (gram_pairs[z].value < 1e-12) continue;
      CHECK(cov_pairs[z].value ==
            doctest::Approx(gram_pairs[z].value).epsilon(1e-9));
      Vector mapped = transpose_times(centered, gram_pairs[z].vector);
      CHECK(abs_cos(mapped, cov_pairs[z].vector) > 1.0 - 1e-8);
    }
  }
}
