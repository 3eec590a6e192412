#include "pgrad/rollout.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace pgrad {

std::vector<GradFn> make_pseudo_domains(const ModelSpec& spec,
                                        std::vector<DomainDataset>& domains,
                                        std::size_t batch_size,
                                        const RolloutConfig& cfg,
                                        std::uint64_t step_seed) {
  if (domains.empty())
    throw std::invalid_argument("make_pseudo_domains: no training domains");
  if (cfg.B < 1) throw std::invalid_argument("make_pseudo_domains: B >= 1");

  std::vector<GradFn> pseudo;
  pseudo.reserve(domains.size() * cfg.B);
  std::uint64_t mix_seed = step_seed ^ 0xfeedULL;
  for (auto& domain : domains) {
    Batch batch = domain.next_batch(batch_size);
    if (batch.inputs.rows < cfg.B)
      throw std::runtime_error("rollout: domain '" + domain.domain_id +
                               "' batch too small to split into " +
                               std::to_string(cfg.B) + " sub-batches");
    const std::size_t rows = batch.inputs.rows;
    for (std::size_t b = 0; b < cfg.B; ++b) {
      const std::size_t begin = b * rows / cfg.B;
      const std::size_t end = (b + 1) * rows / cfg.B;
      Batch sub;
      sub.inputs = Matrix(end - begin, batch.inputs.cols);
      sub.targets = Matrix(end - begin, batch.targets.cols);
      for (std::size_t i = begin; i < end; ++i) {
        for (std::size_t j = 0; j < batch.inputs.cols; ++j)
          sub.inputs.at(i - begin, j) = batch.inputs.at(i, j);
        for (std::size_t j = 0; j < batch.targets.cols; ++j)
          sub.targets.at(i - begin, j) = batch.targets.at(i, j);
      }
      if (cfg.mixup_beta) {
        // pair each sample with a rotated copy of the same sub-batch
        Batch partner;
        partner.inputs = Matrix(sub.inputs.rows, sub.inputs.cols);
        partner.targets = Matrix(sub.targets.rows, sub.targets.cols);
        const std::size_t n = sub.inputs.rows;
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t src = (i + 1) % n;
          for (std::size_t j = 0; j < sub.inputs.cols; ++j)
            partner.inputs.at(i, j) = sub.inputs.at(src, j);
          for (std::size_t j = 0; j < sub.targets.cols; ++j)
            partner.targets.at(i, j) = sub.targets.at(src, j);
        }
        sub = mixup(sub, partner, *cfg.mixup_beta, mix_seed++);
      }
      pseudo.push_back([spec, sub = std::move(sub)](const Vector& params) {
        return loss_and_grad(spec, params, sub).second;
      });
    }
  }
  return pseudo;
}

namespace {

std::vector<std::size_t> visitation_order(std::size_t n,
                                          const RolloutConfig& cfg,
                                          std::uint64_t step_seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (cfg.order_policy == OrderPolicy::Shuffled) {
    std::mt19937_64 rng(cfg.seed ^ (0x9e3779b97f4a7c15ull * (step_seed + 1)));
    std::shuffle(order.begin(), order.end(), rng);
  }
  return order;
}

}  // namespace

Trajectory rollout_sequential(const Vector& start,
                              const std::vector<GradFn>& pseudo_domains,
                              const RolloutConfig& cfg,
                              std::uint64_t step_seed, AdamState* adam) {
  if (pseudo_domains.empty())
    throw std::invalid_argument("rollout_sequential: no pseudo-domains");
  if (cfg.alpha <= 0.0)
    throw std::invalid_argument("rollout_sequential: alpha must be > 0");

  Trajectory traj;
  traj.order = visitation_order(pseudo_domains.size(), cfg, step_seed);
  traj.points.push_back(start);

  AdamState local = AdamState::zero(start.size());
  AdamState* state = adam ? adam : &local;

  for (std::size_t idx : traj.order) {
    const Vector& prev = traj.points.back();
    Vector grad = pseudo_domains[idx](prev);
    Vector next = (cfg.inner_optimizer == InnerOpt::Sgd)
                      ? sgd_step(prev, grad, cfg.alpha)
                      : adam_step(*state, prev, grad, cfg.alpha);
    traj.points.push_back(std::move(next));
  }
  return traj;
}

Trajectory rollout_parallel(const Vector& start,
                            const std::vector<GradFn>& pseudo_domains,
                            const RolloutConfig& cfg) {
  if (pseudo_domains.empty())
    throw std::invalid_argument("rollout_parallel: no pseudo-domains");
  if (cfg.alpha <= 0.0)
    throw std::invalid_argument("rollout_parallel: alpha must be > 0");

  Trajectory traj;
  traj.points.push_back(start);
  traj.order.resize(pseudo_domains.size());
  std::iota(traj.order.begin(), traj.order.end(), 0);
  for (std::size_t i = 0; i < pseudo_domains.size(); ++i) {
    Vector grad = pseudo_domains[i](start);
    traj.points.push_back(sgd_step(start, grad, cfg.alpha));
  }
  return traj;
}

Vector reference_gradient(const Trajectory& traj) {
  if (traj.points.size() < 2)
    throw std::invalid_argument("reference_gradient: trajectory too short");
  return sub(traj.points.front(), traj.points.back());
}

}  // namespace pgrad
