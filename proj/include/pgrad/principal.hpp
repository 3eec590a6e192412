#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "pgrad/rollout.hpp"

namespace pgrad {

enum class AxisSelect { Top, Bottom };

struct PGradConfig {
  /// Number of retained axes is k+1; clamped to the available rank.
  std::size_t k = std::numeric_limits<std::size_t>::max();
  /// Relative eigenvalue floor separating the structural zero of centering
  /// from genuine components.
  double rank_epsilon = 1e-10;
  /// Bottom selects the smallest above-floor axes instead (probe mode).
  AxisSelect select = AxisSelect::Top;
};

/// The aggregated, calibrated update direction with its provenance.
struct PrincipalGradient {
  Vector direction;                 // length d; zero when degenerate
  std::vector<double> eigenvalues;  // all Gram eigenvalues, descending
  std::vector<int> signs;           // +-1 per aggregated axis
  double reference_norm = 0.0;
  std::size_t retained = 0;  // axes above the rank floor
  bool degenerate = false;   // joint stationary point or rank collapse
};

/// Centers the trajectory, eigendecomposes its (1/m)-scaled Gram matrix, maps
/// the eigenvectors back to parameter space (renormalized to unit length),
/// calibrates signs against the start-to-end displacement, and aggregates the
/// selected axes with eigenvalue weights scaled to the displacement norm.
PrincipalGradient principal_gradient(const Trajectory& traj,
                                     const PGradConfig& cfg);

/// params - gamma * direction.
Vector outer_update(const Vector& params, const PrincipalGradient& pg,
                    double gamma);

/// Plain averaged-gradient update: params - (gamma/n) * sum of per-domain
/// gradients, all evaluated at the same params.
Vector erm_update(const Vector& params, const std::vector<GradFn>& domains,
                  double gamma);

}  // namespace pgrad
