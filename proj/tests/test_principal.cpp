#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "oracles.hpp"
#include "pgrad/principal.hpp"

using namespace pgrad;

namespace {

GradFn constant_grad(Vector g) {
  return [g = std::move(g)](const Vector&) { return g; };
}

Trajectory traj_from_points(std::vector<Vector> points) {
  Trajectory t;
  t.points = std::move(points);
  return t;
}

Trajectory random_trajectory(std::size_t n_points, std::size_t d,
                             std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::vector<Vector> pts(n_points, Vector(d));
  for (auto& p : pts)
    for (double& x : p) x = gauss(rng);
  return traj_from_points(std::move(pts));
}

// Full pipeline through the d x d covariance route, bypassing the Gram
// bijection entirely.
Vector direct_principal_direction(const Trajectory& traj, std::size_t k) {
  const std::size_t n_points = traj.points.size();
  const std::size_t d = traj.points[0].size();
  Matrix t(n_points, d);
  for (std::size_t i = 0; i < n_points; ++i)
    for (std::size_t j = 0; j < d; ++j) t.at(i, j) = traj.points[i][j];
  auto [centered, mean] = center_rows(t);
  const double scale = 1.0 / static_cast<double>(n_points - 1);
  auto pairs = sym_eig_psd(oracle::naive_covariance(centered, scale));
  Vector ref = sub(traj.points.front(), traj.points.back());
  const double ref_norm = norm2(ref);

  std::size_t retained = 0;
  while (retained < pairs.size() && pairs[retained].value > 1e-10 * pairs[0].value)
    ++retained;
  const std::size_t n_axes = std::min(k, retained - 1) + 1;
  double wn = 0.0;
  for (std::size_t z = 0; z < n_axes; ++z)
    wn += pairs[z].value * pairs[z].value;
  wn = std::sqrt(wn);

  Vector dir(d, 0.0);
  for (std::size_t z = 0; z < n_axes; ++z) {
    Vector axis = pairs[z].vector;
    const int sign = dot(axis, ref) >= 0.0 ? 1 : -1;
    axpy(sign * pairs[z].value * ref_norm / wn, axis, dir);
  }
  return dir;
}

}  // namespace

TEST_CASE("n=1 reduces to the reference step exactly") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> gauss;
  Vector start(5), next(5);
  for (double& x : start) x = gauss(rng);
  for (std::size_t i = 0; i < 5; ++i) next[i] = start[i] - 0.3 * gauss(rng);
  auto traj = traj_from_points({start, next});

  PGradConfig cfg;
  auto pg = principal_gradient(traj, cfg);
  CHECK(!pg.degenerate);
  CHECK(pg.retained == 1);
  Vector ref = sub(start, next);
  for (std::size_t i = 0; i < 5; ++i)
    CHECK(pg.direction[i] == doctest::Approx(ref[i]).epsilon(1e-12));

  // one outer step with gamma=1 lands exactly on the inner endpoint
  Vector landed = outer_update(start, pg, 1.0);
  for (std::size_t i = 0; i < 5; ++i)
    CHECK(landed[i] == doctest::Approx(next[i]).epsilon(1e-12));
}

TEST_CASE("hand trajectory matches the direct covariance pipeline") {
  auto traj = traj_from_points({{0, 0}, {-1, 0}, {-1, -1}});
  PGradConfig cfg;
  auto pg = principal_gradient(traj, cfg);
  Vector direct = direct_principal_direction(traj, cfg.k);
  REQUIRE(pg.direction.size() == 2);
  CHECK(cosine(pg.direction, direct) > 1.0 - 1e-8);
  CHECK(norm2(pg.direction) == doctest::Approx(norm2(direct)).epsilon(1e-9));

  // centered rows are {(2/3,1/3), (-1/3,1/3), (-1/3,-2/3)}
  Matrix t(3, 2);
  t.at(0, 0) = 0; t.at(0, 1) = 0;
  t.at(1, 0) = -1; t.at(1, 1) = 0;
  t.at(2, 0) = -1; t.at(2, 1) = -1;
  auto [centered, mean] = center_rows(t);
  CHECK(centered.at(0, 0) == doctest::Approx(2.0 / 3.0));
  CHECK(centered.at(0, 1) == doctest::Approx(1.0 / 3.0));
  CHECK(centered.at(2, 1) == doctest::Approx(-2.0 / 3.0));
}

TEST_CASE("k beyond the available rank truncates silently") {
  auto traj = traj_from_points({{0, 0}, {-1, 0}, {-1, -1}});
  PGradConfig cfg;
  cfg.k = 50;
  auto pg = principal_gradient(traj, cfg);
  CHECK(pg.retained == 2);  // 3 points, centering eats one rank
  CHECK(pg.signs.size() == 2);
  CHECK(pg.eigenvalues.size() == 3);
}

TEST_CASE("degenerate trajectory returns a flagged zero direction") {
  auto traj = traj_from_points({{1, 1}, {2, 1}, {1, 1}});
  PGradConfig cfg;
  auto pg = principal_gradient(traj, cfg);
  CHECK(pg.degenerate);
  CHECK(norm2(pg.direction) == 0.0);

  // outer update with a zero direction is the identity
  CHECK(outer_update({5, 5}, pg, 1.0) == Vector{5, 5});
}

TEST_CASE("unit-norm identity before length calibration") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto traj = random_trajectory(5, 9, 500 + seed);
    for (std::size_t k = 0; k < 5; ++k) {
      PGradConfig cfg;
      cfg.k = k;
      auto pg = principal_gradient(traj, cfg);
      if (pg.degenerate) continue;
      // dividing out the reference norm recovers the unit aggregate
      CHECK(norm2(pg.direction) / pg.reference_norm ==
            doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("direction lies in the trajectory row space") {
  auto traj = random_trajectory(4, 10, 77);
  PGradConfig cfg;
  auto pg = principal_gradient(traj, cfg);

  Matrix t(4, 10);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 10; ++j) t.at(i, j) = traj.points[i][j];
  auto [centered, mean] = center_rows(t);
  auto pairs = sym_eig_psd(gram(centered, 1.0 / 3.0));
  Vector residual = pg.direction;
  for (const auto& p : pairs) {
    if (p.value < 1e-12 * pairs[0].value) break;
    Vector axis = transpose_times(centered, p.vector);
    const double nrm = norm2(axis);
    for (double& x : axis) x /= nrm;
    axpy(-dot(residual, axis), axis, residual);
  }
  CHECK(norm2(residual) < 1e-8 * norm2(pg.direction));
}

TEST_CASE("sign property: nonnegative inner product with the reference") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto traj = random_trajectory(4, 7, 900 + seed);
    PGradConfig cfg;
    cfg.k = seed % 3;
    auto pg = principal_gradient(traj, cfg);
    if (pg.degenerate) continue;
    Vector ref = sub(traj.points.front(), traj.points.back());
    CHECK(dot(pg.direction, ref) >= -1e-12);
  }
}

TEST_CASE("bijection consistency against the direct covariance route") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto traj = random_trajectory(4, 8, 1300 + seed);
    for (std::size_t k : {std::size_t(0), std::size_t(2)}) {
      PGradConfig cfg;
      cfg.k = k;
      auto pg = principal_gradient(traj, cfg);
      if (pg.degenerate) continue;
      Vector direct = direct_principal_direction(traj, k);
      CHECK(cosine(pg.direction, direct) > 1.0 - 1e-8);
    }
  }
}

TEST_CASE("noise suppression recovers the shared direction") {
  // g_i = s + n_i, zero-sum orthogonal noises below ||s||; exact SGD rollout.
  const std::size_t d = 8;
  Vector s(d, 0.0);
  s[0] = 1.0;
  std::vector<Vector> noises(4, Vector(d, 0.0));
  noises[0][1] = 0.5;
  noises[1][2] = 0.5;
  noises[2][1] = -0.5;
  noises[3][2] = -0.5;

  RolloutConfig rcfg;
  rcfg.inner_optimizer = InnerOpt::Sgd;
  rcfg.alpha = 0.1;
  rcfg.order_policy = OrderPolicy::Fixed;
  std::vector<GradFn> pseudo;
  double max_domain_cos = -1.0;
  for (const auto& n : noises) {
    Vector g = add(s, n);
    max_domain_cos = std::max(max_domain_cos, cosine(g, s));
    pseudo.push_back(constant_grad(std::move(g)));
  }
  CHECK(max_domain_cos < 0.99);  // the designed bound on raw gradients

  auto traj = rollout_sequential(Vector(d, 0.0), pseudo, rcfg);
  PGradConfig cfg;
  cfg.k = 0;
  auto pg = principal_gradient(traj, cfg);
  CHECK(std::abs(cosine(pg.direction, s)) >= 0.99);

  // cross-check the top axis with the exact covariance decomposition
  Vector direct = direct_principal_direction(traj, 0);
  CHECK(cosine(pg.direction, direct) > 1.0 - 1e-8);
}

TEST_CASE("retained never exceeds the trajectory rank") {
  // duplicate points force rank deficiency
  auto traj = traj_from_points({{0, 0, 0}, {1, 0, 0}, {1, 0, 0}, {2, 0, 0}});
  PGradConfig cfg;
  auto pg = principal_gradient(traj, cfg);
  CHECK(pg.retained == 1);  // collinear: single direction
  for (std::size_t z = pg.retained; z < pg.eigenvalues.size(); ++z)
    CHECK(pg.eigenvalues[z] <= 1e-10 * pg.eigenvalues[0]);
}

TEST_CASE("erm_update basics") {
  std::vector<GradFn> domains{constant_grad({1, 0}), constant_grad({-1, 0})};
  CHECK(erm_update({3, 3}, domains, 0.5) == Vector{3, 3});

  std::vector<GradFn> one{constant_grad({2, 4})};
  CHECK(erm_update({1, 1}, one, 0.5) == Vector{0, -1});

  std::mt19937_64 rng(8);
  std::normal_distribution<double> gauss;
  std::vector<Vector> gs(3, Vector(4));
  for (auto& g : gs)
    for (double& x : g) x = gauss(rng);
  std::vector<GradFn> three;
  for (const auto& g : gs) three.push_back(constant_grad(g));
  Vector params(4, 1.0);
  Vector got = erm_update(params, three, 0.3);
  for (std::size_t i = 0; i < 4; ++i) {
    const double mean_g = (gs[0][i] + gs[1][i] + gs[2][i]) / 3.0;
    CHECK(got[i] == doctest::Approx(params[i] - 0.3 * mean_g).epsilon(1e-15));
  }
}
