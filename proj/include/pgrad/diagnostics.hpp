#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <vector>

#include "pgrad/principal.hpp"
#include "pgrad/rollout.hpp"

namespace pgrad {

struct AlignmentReport {
  double value = 0.0;  // mean pairwise cosine, in [-1, 1]
  std::size_t n_pairs = 0;
};

/// Mean cosine similarity over all unordered gradient pairs.
AlignmentReport gradient_alignment(const std::vector<Vector>& grads);

/// Accumulates per-rank normalized eigenvalue contributions and emits the
/// window mean at each window boundary.
struct SpectrumLog {
  std::size_t window_size = 100;

  struct WindowRow {
    std::size_t window_start = 0;
    std::size_t window_end = 0;  // exclusive
    std::vector<double> mean_contributions;
  };
  std::vector<WindowRow> entries;
  std::size_t skipped = 0;  // all-zero spectra

  /// Contributions are lambda_z / sum(lambda); an all-zero spectrum is
  /// counted in `skipped` and otherwise ignored.
  void record(std::size_t step, const std::vector<double>& eigenvalues);
  /// Emits a partial final window if one is pending.
  void flush();

 private:
  std::vector<double> accum_;
  std::size_t accum_count_ = 0;
  std::optional<std::size_t> window_start_;
  void emit(std::size_t end);
};

/// Max entrywise deviation between the d x d scaled covariance of the
/// centered trajectory and the average outer product of its rows. These are
/// the same quantity by algebra, so anything above round-off indicates a
/// centering or Gram bug. Requires d <= 200.
double fim_identity_check(const Trajectory& traj);

enum class ProbeMode { Top, Bottom, SwitchAt };

struct ProbeConfig {
  ProbeMode mode = ProbeMode::Top;
  std::size_t switch_step = 0;  // SwitchAt only
  std::size_t steps = 100;
  double alpha = 0.05;
  double gamma = 0.5;
  std::size_t k = 0;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
};

/// Runs outer training while aggregating either the top-(k+1) axes or the
/// bottom retained axes, with the usual sign and length calibration. Returns
/// the mean training loss across domains at each step.
std::vector<double> bottom_subspace_probe(const ModelSpec& spec,
                                          const Vector& start_params,
                                          DomainSet& domains,
                                          const ProbeConfig& cfg);

struct Projection2D {
  std::vector<std::array<double, 2>> points;
  bool rank_deficient = false;  // second coordinate is meaningless if set
};

/// Top-2 principal-axis coordinates of the centered checkpoint matrix.
Projection2D project_checkpoints(const std::vector<Vector>& checkpoints);

}  // namespace pgrad
