#include "pgrad/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pgrad/linalg.hpp"

namespace pgrad {

AlignmentReport gradient_alignment(const std::vector<Vector>& grads) {
  if (grads.size() < 2)
    throw std::invalid_argument("gradient_alignment: need >= 2 gradients");
  for (std::size_t i = 0; i < grads.size(); ++i)
    if (norm2(grads[i]) == 0.0)
      throw std::invalid_argument("gradient_alignment: zero gradient at index " +
                                  std::to_string(i));
  AlignmentReport report;
  double sum = 0.0;
  for (std::size_t i = 0; i < grads.size(); ++i)
    for (std::size_t j = i + 1; j < grads.size(); ++j) {
      sum += cosine(grads[i], grads[j]);
      ++report.n_pairs;
    }
  report.value = sum / static_cast<double>(report.n_pairs);
  return report;
}

void SpectrumLog::record(std::size_t step,
                         const std::vector<double>& eigenvalues) {
  if (eigenvalues.empty())
    throw std::invalid_argument("spectrum_log: empty spectrum");
  double total = 0.0;
  for (double v : eigenvalues) {
    if (v < 0.0)
      throw std::invalid_argument("spectrum_log: negative eigenvalue");
    total += v;
  }
  if (total == 0.0) {
    ++skipped;
    return;
  }
  if (!window_start_) window_start_ = step;
  if (accum_.size() < eigenvalues.size()) accum_.resize(eigenvalues.size(), 0.0);
  for (std::size_t z = 0; z < eigenvalues.size(); ++z)
    accum_[z] += eigenvalues[z] / total;
  ++accum_count_;
  if (accum_count_ >= window_size) emit(step + 1);
}

void SpectrumLog::flush() {
  if (accum_count_ > 0 && window_start_)
    emit(*window_start_ + accum_count_);
}

void SpectrumLog::emit(std::size_t end) {
  WindowRow row;
  row.window_start = *window_start_;
  row.window_end = end;
  row.mean_contributions = accum_;
  for (double& c : row.mean_contributions)
    c /= static_cast<double>(accum_count_);
  entries.push_back(std::move(row));
  accum_.clear();
  accum_count_ = 0;
  window_start_.reset();
}

double fim_identity_check(const Trajectory& traj) {
  const std::size_t d = traj.points[0].size();
  if (d > 200)
    throw std::invalid_argument(
        "fim_identity_check: d exceeds the 200-dimension materialization cap");
  const std::size_t n_points = traj.points.size();
  const double m = static_cast<double>(n_points - 1);

  Matrix t(n_points, d);
  for (std::size_t i = 0; i < n_points; ++i)
    for (std::size_t j = 0; j < d; ++j) t.at(i, j) = traj.points[i][j];
  auto [centered, mean] = center_rows(t);

  // Route one: matrix-product covariance.
  Matrix cov(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      double s = 0.0;
      for (std::size_t r = 0; r < n_points; ++r)
        s += centered.at(r, i) * centered.at(r, j);
      cov.at(i, j) = s / m;
    }

  // Route two: average of per-row outer products.
  Matrix fim(d, d);
  for (std::size_t r = 0; r < n_points; ++r)
    for (std::size_t i = 0; i < d; ++i) {
      const double ci = centered.at(r, i);
      for (std::size_t j = 0; j < d; ++j)
        fim.at(i, j) += ci * centered.at(r, j) / m;
    }

  double max_dev = 0.0;
  for (std::size_t i = 0; i < cov.data.size(); ++i)
    max_dev = std::max(max_dev, std::abs(cov.data[i] - fim.data[i]));
  return max_dev;
}

std::vector<double> bottom_subspace_probe(const ModelSpec& spec,
                                          const Vector& start_params,
                                          DomainSet& domains,
                                          const ProbeConfig& cfg) {
  std::vector<double> losses;
  losses.reserve(cfg.steps);
  Vector params = start_params;

  // Probes must be self-contained: restart the batch cursors so repeated
  // calls over the same domains replay identical rollouts.
  for (std::size_t i = 0; i < domains.train.size(); ++i)
    domains.train[i].reset_cursor(cfg.seed * 1000003 + i);

  RolloutConfig rcfg;
  rcfg.inner_optimizer = InnerOpt::Sgd;
  rcfg.alpha = cfg.alpha;
  rcfg.order_policy = OrderPolicy::Shuffled;
  rcfg.seed = cfg.seed;

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    auto pseudo =
        make_pseudo_domains(spec, domains.train, cfg.batch_size, rcfg, step);
    Trajectory traj = rollout_sequential(params, pseudo, rcfg, step);

    PGradConfig pcfg;
    pcfg.k = cfg.k;
    const bool bottom =
        cfg.mode == ProbeMode::Bottom ||
        (cfg.mode == ProbeMode::SwitchAt && step >= cfg.switch_step);
    pcfg.select = bottom ? AxisSelect::Bottom : AxisSelect::Top;

    PrincipalGradient pg = principal_gradient(traj, pcfg);
    if (!pg.degenerate && pg.retained < 2)
      throw std::runtime_error("bottom_subspace_probe: trajectory rank < 2");
    params = outer_update(params, pg, cfg.gamma);

    double mean_loss = 0.0;
    for (auto& d : domains.train)
      mean_loss += loss_only(spec, params, d.full_batch());
    losses.push_back(mean_loss / static_cast<double>(domains.train.size()));
  }
  return losses;
}

Projection2D project_checkpoints(const std::vector<Vector>& checkpoints) {
  if (checkpoints.size() < 3)
    throw std::invalid_argument("project_checkpoints: need >= 3 checkpoints");
  const std::size_t n = checkpoints.size();
  const std::size_t d = checkpoints[0].size();
  Matrix t(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) t.at(i, j) = checkpoints[i][j];
  auto [centered, mean] = center_rows(t);
  auto pairs =
      sym_eig_psd(gram(centered, 1.0 / static_cast<double>(n - 1)));

  Projection2D out;
  out.points.resize(n);

  const double floor = 1e-12 * std::max(pairs[0].value, 1e-300);
  std::vector<Vector> axes;
  for (std::size_t z = 0; z < 2 && z < pairs.size(); ++z) {
    if (pairs[z].value <= floor) break;
    Vector axis = transpose_times(centered, pairs[z].vector);
    const double nrm = norm2(axis);
    for (double& x : axis) x /= nrm;
    axes.push_back(std::move(axis));
  }
  out.rank_deficient = axes.size() < 2;

  for (std::size_t i = 0; i < n; ++i) {
    Vector row(d);
    for (std::size_t j = 0; j < d; ++j) row[j] = centered.at(i, j);
    out.points[i] = {axes.empty() ? 0.0 : dot(row, axes[0]),
                     axes.size() > 1 ? dot(row, axes[1]) : 0.0};
  }
  return out;
}

}  // namespace pgrad
