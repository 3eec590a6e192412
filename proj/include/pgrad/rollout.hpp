#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "pgrad/data.hpp"
#include "pgrad/model.hpp"

namespace pgrad {

enum class InnerOpt { Sgd, Adam };
enum class OrderPolicy { Fixed, Shuffled };

struct RolloutConfig {
  InnerOpt inner_optimizer = InnerOpt::Sgd;
  double alpha = 5e-5;
  OrderPolicy order_policy = OrderPolicy::Shuffled;
  std::size_t B = 1;
  std::optional<double> mixup_beta;
  std::uint64_t seed = 0;
  // Adam moments are reset at every rollout unless a persistent state is
  // handed to rollout_sequential.
};

/// The parameter path of one rollout. points[0] is always the outer
/// parameter; order records which pseudo-domain produced each subsequent
/// point.
struct Trajectory {
  std::vector<Vector> points;      // length n*B + 1
  std::vector<std::size_t> order;  // visitation sequence over pseudo-domains
  bool start_included = true;
};

/// A pseudo-domain: params -> loss gradient. Data-backed instances close over
/// one sub-batch; tests may hand in constant gradients directly.
using GradFn = std::function<Vector(const Vector&)>;

/// Draws one batch per training domain, splits it into B sub-batches, and
/// wraps each as a gradient callable in domain-major, sub-batch-minor order.
/// With mixup configured, each sub-batch is mixed with a shuffled copy of
/// itself (same-domain pairing).
std::vector<GradFn> make_pseudo_domains(const ModelSpec& spec,
                                        std::vector<DomainDataset>& domains,
                                        std::size_t batch_size,
                                        const RolloutConfig& cfg,
                                        std::uint64_t step_seed);

/// One inner-optimizer step per pseudo-domain, each taken from the previous
/// point. Shuffled ordering permutes all n*B pseudo-domains uniformly.
/// `adam` (optional) carries moments across rollouts; when null a fresh state
/// is used per rollout.
Trajectory rollout_sequential(const Vector& start,
                              const std::vector<GradFn>& pseudo_domains,
                              const RolloutConfig& cfg,
                              std::uint64_t step_seed = 0,
                              AdamState* adam = nullptr);

/// Every step branches from `start` instead of chaining (ablation mode).
Trajectory rollout_parallel(const Vector& start,
                            const std::vector<GradFn>& pseudo_domains,
                            const RolloutConfig& cfg);

/// First point minus last point; the start-to-end displacement.
Vector reference_gradient(const Trajectory& traj);

}  // namespace pgrad
