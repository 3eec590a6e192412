#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pgrad/model.hpp"

namespace pgrad {

/// One domain's samples plus a persistent shuffled batch cursor. A cursor is
/// single-consumer: give each trainer its own copy of the dataset.
struct DomainDataset {
  std::string domain_id;
  Matrix inputs;
  Matrix targets;

  std::size_t size() const { return inputs.rows; }

  void reset_cursor(std::uint64_t seed);
  /// Next batch of up to batch_size samples; reshuffles when the epoch ends.
  Batch next_batch(std::size_t batch_size);
  /// The whole domain as one batch.
  Batch full_batch() const;

 private:
  std::uint64_t cursor_seed_ = 0;
  std::uint64_t epoch_ = 0;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
  void reshuffle();
};

struct DomainSet {
  std::vector<DomainDataset> train;         // 80% per training domain
  std::vector<DomainDataset> val_holdouts;  // matching 20% splits
  std::vector<DomainDataset> test;          // unseen domains

  std::size_t n_domains() const { return train.size(); }
};

/// Regression domains sharing a common signal direction while each domain
/// carries its own spurious weight vector (scaled by noise_scale) on the
/// second half of the input. Test domains draw fresh spurious weights.
/// Inputs have dimension 2*shared_dim, targets a single column.
DomainSet gen_spurious_regression(std::size_t n_domains,
                                  std::size_t samples_per_domain,
                                  std::size_t shared_dim, double noise_scale,
                                  std::uint64_t seed);

/// Two-moons classification; domain i is rotated by i*rotation_step degrees,
/// the test domain sits at an unseen rotation. Targets are one-hot over two
/// classes.
DomainSet gen_rotated_moons(std::size_t n_domains,
                            std::size_t samples_per_domain,
                            double rotation_step_degrees, double label_noise,
                            std::uint64_t seed);

/// Disjoint, exhaustive split; |val| = round(fraction * size).
std::pair<DomainDataset, DomainDataset> split_holdout(
    const DomainDataset& domain, double fraction, std::uint64_t seed);

/// Convex combination of two batches with per-pair lambda ~ Beta(b, b).
/// forced_lambda overrides the draw (test hook).
Batch mixup(const Batch& a, const Batch& b, double beta_param,
            std::uint64_t seed, std::optional<double> forced_lambda = {});

/// CSV dump/load: header row, one sample per line, targets last. The sidecar
/// manifest (same path + ".json") records {domain_id, size, role}.
void dump_domain_csv(const DomainDataset& domain, const std::string& path,
                     const std::string& role);
DomainDataset load_domain_csv(const std::string& path);

}  // namespace pgrad
