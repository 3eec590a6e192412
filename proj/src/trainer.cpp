#include "pgrad/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "pgrad/linalg.hpp"

namespace pgrad {

std::string algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::Erm: return "erm";
    case Algorithm::PGradF: return "pgrad-f";
    case Algorithm::PGrad: return "pgrad";
    case Algorithm::PGradB: return "pgrad-b";
    case Algorithm::PGradBMix: return "pgrad-bmix";
    case Algorithm::PGradParallel: return "pgrad-parallel";
  }
  return "?";
}

Algorithm parse_algorithm(const std::string& name) {
  if (name == "erm") return Algorithm::Erm;
  if (name == "pgrad-f") return Algorithm::PGradF;
  if (name == "pgrad") return Algorithm::PGrad;
  if (name == "pgrad-b") return Algorithm::PGradB;
  if (name == "pgrad-bmix") return Algorithm::PGradBMix;
  if (name == "pgrad-parallel") return Algorithm::PGradParallel;
  throw std::invalid_argument("unknown algorithm: " + name);
}

DomainSet build_dataset(const DatasetConfig& cfg, std::uint64_t seed) {
  if (cfg.name == "spurious_regression")
    return gen_spurious_regression(cfg.n_domains, cfg.samples_per_domain,
                                   cfg.shared_dim, cfg.noise_scale, seed);
  if (cfg.name == "rotated_moons")
    return gen_rotated_moons(cfg.n_domains, cfg.samples_per_domain,
                             cfg.rotation_step, cfg.label_noise, seed);
  throw std::invalid_argument("unknown dataset: " + cfg.name);
}

void apply_dataset_dims(const DatasetConfig& cfg, ModelSpec& spec) {
  if (cfg.name == "spurious_regression") {
    spec.input_dim = 2 * cfg.shared_dim;
    spec.output_dim = 1;
    spec.loss = LossKind::Mse;
  } else if (cfg.name == "rotated_moons") {
    spec.input_dim = 2;
    spec.output_dim = 2;
    spec.loss = LossKind::CrossEntropy;
  } else {
    throw std::invalid_argument("unknown dataset: " + cfg.name);
  }
}

namespace {

RolloutConfig make_rollout_config(const TrainerConfig& cfg) {
  RolloutConfig r;
  r.inner_optimizer = cfg.inner_optimizer;
  r.alpha = cfg.inner_alpha;
  r.seed = cfg.seed;
  switch (cfg.algorithm) {
    case Algorithm::PGradF:
      r.order_policy = OrderPolicy::Fixed;
      break;
    case Algorithm::PGradB:
      r.order_policy = OrderPolicy::Shuffled;
      r.B = cfg.B;
      break;
    case Algorithm::PGradBMix:
      r.order_policy = OrderPolicy::Shuffled;
      r.B = cfg.B;
      r.mixup_beta = cfg.mixup_beta;
      break;
    default:
      r.order_policy = OrderPolicy::Shuffled;
      break;
  }
  return r;
}

MetricRow evaluate(const TrainerConfig& cfg, const DomainSet& domains,
                   const Vector& params, std::size_t step) {
  MetricRow row;
  row.step = step;
  std::vector<Vector> grads;
  bool alignment_defined = true;
  for (const auto& d : domains.train) {
    auto [loss, grad] = loss_and_grad(cfg.model, params, d.full_batch());
    row.domain_loss.push_back(loss);
    if (norm2(grad) == 0.0) alignment_defined = false;
    grads.push_back(std::move(grad));
  }
  if (alignment_defined && grads.size() >= 2)
    row.alignment = gradient_alignment(grads).value;
  else
    row.alignment = std::numeric_limits<double>::quiet_NaN();

  double val = 0.0;
  for (const auto& d : domains.val_holdouts)
    val += eval_metric(cfg.model, params, d.full_batch());
  row.val_metric = val / static_cast<double>(domains.val_holdouts.size());

  double test = 0.0;
  for (const auto& d : domains.test)
    test += eval_metric(cfg.model, params, d.full_batch());
  row.test_metric = test / static_cast<double>(domains.test.size());
  return row;
}

}  // namespace

TrainResult train(const TrainerConfig& cfg) {
  DomainSet domains = build_dataset(cfg.dataset, cfg.seed);
  const std::size_t n = domains.n_domains();
  for (std::size_t i = 0; i < n; ++i)
    domains.train[i].reset_cursor(cfg.seed * 1000003ull + i);

  Vector params = init_params(cfg.model, cfg.seed);
  const std::size_t d = params.size();

  TrainResult result;
  result.best_params = params;
  RolloutConfig rcfg = make_rollout_config(cfg);
  if (cfg.algorithm != Algorithm::Erm)
    result.trajectory_len = n * rcfg.B + 1;

  PGradConfig pcfg;
  if (cfg.k) pcfg.k = *cfg.k;
  const double gamma = cfg.scale_gamma_by_n
                           ? cfg.outer_gamma / static_cast<double>(n)
                           : cfg.outer_gamma;

  AdamState persistent = AdamState::zero(d);
  double best_val = -std::numeric_limits<double>::infinity();

  std::vector<double> latest_eigs;
  double latest_ref_norm = 0.0;

  auto eval_point = [&](std::size_t step) {
    MetricRow row = evaluate(cfg, domains, params, step);
    row.eigenvalues = latest_eigs;
    row.reference_norm = latest_ref_norm;
    if (row.val_metric > best_val) {
      best_val = row.val_metric;
      result.best_params = params;
      result.best_row = result.table.size();
    }
    result.table.push_back(std::move(row));
  };

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    try {
      if (cfg.algorithm == Algorithm::Erm) {
        std::vector<GradFn> per_domain;
        for (auto& domain : domains.train) {
          Batch batch = domain.next_batch(cfg.batch_size);
          per_domain.push_back(
              [&cfg, batch = std::move(batch)](const Vector& p) {
                return loss_and_grad(cfg.model, p, batch).second;
              });
        }
        params = erm_update(params, per_domain, gamma);
      } else {
        auto pseudo = make_pseudo_domains(cfg.model, domains.train,
                                          cfg.batch_size, rcfg, step);
        Trajectory traj =
            (cfg.algorithm == Algorithm::PGradParallel)
                ? rollout_parallel(params, pseudo, rcfg)
                : rollout_sequential(params, pseudo, rcfg, step,
                                     cfg.persist_adam ? &persistent : nullptr);
        PrincipalGradient pg = principal_gradient(traj, pcfg);
        latest_eigs = pg.eigenvalues;
        latest_ref_norm = pg.reference_norm;
        if (!pg.degenerate)
          result.spectrum.record(step, pg.eigenvalues);
        params = outer_update(params, pg, gamma);
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("train: step " + std::to_string(step) + ": " +
                               e.what());
    }
    if ((step + 1) % cfg.eval_every == 0 || step + 1 == cfg.steps)
      eval_point(step + 1);
  }
  result.spectrum.flush();
  return result;
}

double variance_summary(const std::vector<MetricRow>& table,
                        std::size_t window_rows) {
  if (table.empty())
    throw std::invalid_argument("variance_summary: empty metric table");
  const std::size_t rows = std::min(window_rows, table.size());
  const std::size_t n_domains = table.back().domain_loss.size();
  if (n_domains < 2)
    throw std::invalid_argument(
        "variance_summary: need at least 2 training domains");

  Vector mean_loss(n_domains, 0.0);
  for (std::size_t r = table.size() - rows; r < table.size(); ++r)
    for (std::size_t i = 0; i < n_domains; ++i)
      mean_loss[i] += table[r].domain_loss[i];
  for (double& v : mean_loss) v /= static_cast<double>(rows);

  double mean = 0.0;
  for (double v : mean_loss) mean += v;
  mean /= static_cast<double>(n_domains);
  double var = 0.0;
  for (double v : mean_loss) var += (v - mean) * (v - mean);
  return var / static_cast<double>(n_domains - 1);
}

}  // namespace pgrad
