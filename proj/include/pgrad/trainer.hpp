#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pgrad/data.hpp"
#include "pgrad/diagnostics.hpp"
#include "pgrad/principal.hpp"
#include "pgrad/rollout.hpp"

namespace pgrad {

enum class Algorithm { Erm, PGradF, PGrad, PGradB, PGradBMix, PGradParallel };

std::string algorithm_name(Algorithm a);
Algorithm parse_algorithm(const std::string& name);

struct DatasetConfig {
  std::string name = "spurious_regression";  // or "rotated_moons"
  std::size_t n_domains = 3;
  std::size_t samples_per_domain = 200;
  std::size_t shared_dim = 4;       // spurious_regression
  double noise_scale = 1.0;         // spurious_regression
  double rotation_step = 30.0;      // rotated_moons
  double label_noise = 0.0;         // rotated_moons
};

DomainSet build_dataset(const DatasetConfig& cfg, std::uint64_t seed);
/// The model input/output dimensions the generator produces.
void apply_dataset_dims(const DatasetConfig& cfg, ModelSpec& spec);

struct TrainerConfig {
  Algorithm algorithm = Algorithm::PGrad;
  std::size_t steps = 100;
  double inner_alpha = 5e-5;
  double outer_gamma = 0.1;
  bool scale_gamma_by_n = false;
  std::size_t B = 3;  // PGradB / PGradBMix only
  std::optional<std::size_t> k;  // default: every axis above the rank floor
  InnerOpt inner_optimizer = InnerOpt::Adam;
  bool persist_adam = false;
  double mixup_beta = 0.2;
  std::uint64_t seed = 0;
  std::size_t eval_every = 10;
  std::size_t batch_size = 32;
  ModelSpec model;
  DatasetConfig dataset;
};

struct MetricRow {
  std::size_t step = 0;
  std::vector<double> domain_loss;  // per training domain
  double val_metric = 0.0;          // mean over per-domain holdouts
  double test_metric = 0.0;         // mean over test domains
  double alignment = 0.0;           // NaN when undefined
  std::vector<double> eigenvalues;  // latest rollout spectrum (empty for ERM)
  double reference_norm = 0.0;
};

struct TrainResult {
  Vector best_params;
  std::size_t best_row = 0;
  std::vector<MetricRow> table;
  SpectrumLog spectrum;
  std::size_t trajectory_len = 0;  // points per rollout (0 for ERM)
};

/// Runs `steps` outer updates of the configured algorithm and evaluates at
/// every eval_every boundary. Fully deterministic per seed.
TrainResult train(const TrainerConfig& cfg);

/// Sample variance (divisor n-1) across domains of the per-domain mean loss
/// over the final `window_rows` evaluation rows.
double variance_summary(const std::vector<MetricRow>& table,
                        std::size_t window_rows = 5);

}  // namespace pgrad
