#include "pgrad/principal.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pgrad/linalg.hpp"

namespace pgrad {

PrincipalGradient principal_gradient(const Trajectory& traj,
                                     const PGradConfig& cfg) {
  const std::size_t n_points = traj.points.size();
  if (n_points < 2)
    throw std::invalid_argument("principal_gradient: trajectory too short");
  if (!traj.start_included)
    throw std::invalid_argument("principal_gradient: start point missing");
  const std::size_t d = traj.points[0].size();
  const std::size_t m = n_points - 1;

  PrincipalGradient pg;
  const Vector ref = reference_gradient(traj);
  pg.reference_norm = norm2(ref);

  // Joint stationary point: every inner step canceled out.
  if (pg.reference_norm < 1e-15 * (1.0 + norm2(traj.points[0]))) {
    pg.degenerate = true;
    pg.direction.assign(d, 0.0);
    return pg;
  }

  Matrix t(n_points, d);
  for (std::size_t i = 0; i < n_points; ++i)
    for (std::size_t j = 0; j < d; ++j) t.at(i, j) = traj.points[i][j];
  auto [centered, mean] = center_rows(t);
  auto pairs = sym_eig_psd(gram(centered, 1.0 / static_cast<double>(m)));

  pg.eigenvalues.reserve(pairs.size());
  for (const auto& p : pairs) pg.eigenvalues.push_back(p.value);

  const double floor = cfg.rank_epsilon * pg.eigenvalues.front();
  std::size_t retained = 0;
  while (retained < pairs.size() && pg.eigenvalues[retained] > floor &&
         pg.eigenvalues[retained] > 0.0)
    ++retained;
  pg.retained = retained;
  if (retained == 0) {
    pg.degenerate = true;
    pg.direction.assign(d, 0.0);
    return pg;
  }

  // k counts retained axes beyond the first; clamp before adding one so the
  // "keep everything" default (SIZE_MAX) cannot overflow.
  const std::size_t n_axes = std::min(cfg.k, retained - 1) + 1;
  const std::size_t first =
      (cfg.select == AxisSelect::Top) ? 0 : retained - n_axes;

  double weight_norm_sq = 0.0;
  for (std::size_t z = first; z < first + n_axes; ++z)
    weight_norm_sq += pg.eigenvalues[z] * pg.eigenvalues[z];
  const double weight_norm = std::sqrt(weight_norm_sq);

  pg.direction.assign(d, 0.0);
  for (std::size_t z = first; z < first + n_axes; ++z) {
    Vector axis = transpose_times(centered, pairs[z].vector);
    const double axis_norm = norm2(axis);
    if (axis_norm == 0.0) continue;  // cannot happen above the floor
    for (double& x : axis) x /= axis_norm;
    const int sign = (dot(axis, ref) >= 0.0) ? 1 : -1;
    pg.signs.push_back(sign);
    const double weight =
        sign * pg.eigenvalues[z] * pg.reference_norm / weight_norm;
    axpy(weight, axis, pg.direction);
  }
  return pg;
}

Vector outer_update(const Vector& params, const PrincipalGradient& pg,
                    double gamma) {
  if (params.size() != pg.direction.size())
    throw std::invalid_argument("outer_update: length mismatch");
  Vector out(params);
  axpy(-gamma, pg.direction, out);
  return out;
}

Vector erm_update(const Vector& params, const std::vector<GradFn>& domains,
                  double gamma) {
  if (domains.empty())
    throw std::invalid_argument("erm_update: no training domains");
  Vector mean_grad(params.size(), 0.0);
  for (const auto& g : domains) axpy(1.0, g(params), mean_grad);
  const double scale = gamma / static_cast<double>(domains.size());
  Vector out(params);
  axpy(-scale, mean_grad, out);
  return out;
}

}  // namespace pgrad
