#include "pgrad/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace pgrad {

void DomainDataset::reset_cursor(std::uint64_t seed) {
  cursor_seed_ = seed;
  epoch_ = 0;
  pos_ = 0;
  reshuffle();
}

void DomainDataset::reshuffle() {
  order_.resize(size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  std::mt19937_64 rng(cursor_seed_ ^ (0x9e3779b97f4a7c15ull * (epoch_ + 1)));
  std::shuffle(order_.begin(), order_.end(), rng);
}

Batch DomainDataset::next_batch(std::size_t batch_size) {
  if (size() == 0)
    throw std::runtime_error("next_batch: domain '" + domain_id + "' is empty");
  if (order_.size() != size()) reshuffle();
  const std::size_t take = std::min(batch_size, size());
  Batch b;
  b.inputs = Matrix(take, inputs.cols);
  b.targets = Matrix(take, targets.cols);
  for (std::size_t i = 0; i < take; ++i) {
    if (pos_ >= order_.size()) {
      pos_ = 0;
      ++epoch_;
      reshuffle();
    }
    const std::size_t src = order_[pos_++];
    for (std::size_t j = 0; j < inputs.cols; ++j)
      b.inputs.at(i, j) = inputs.at(src, j);
    for (std::size_t j = 0; j < targets.cols; ++j)
      b.targets.at(i, j) = targets.at(src, j);
  }
  return b;
}

Batch DomainDataset::full_batch() const { return Batch{inputs, targets}; }

namespace {

DomainDataset make_domain(std::string id, Matrix x, Matrix y) {
  DomainDataset d;
  d.domain_id = std::move(id);
  d.inputs = std::move(x);
  d.targets = std::move(y);
  return d;
}

// Pushes an 80/20 train/val split of `full` into the set.
void push_training_domain(DomainSet& set, const DomainDataset& full,
                          std::uint64_t seed) {
  auto [train, val] = split_holdout(full, 0.2, seed);
  set.train.push_back(std::move(train));
  set.val_holdouts.push_back(std::move(val));
}

}  // namespace

DomainSet gen_spurious_regression(std::size_t n_domains,
                                  std::size_t samples_per_domain,
                                  std::size_t shared_dim, double noise_scale,
                                  std::uint64_t seed) {
  if (n_domains < 1 || samples_per_domain < 1 || shared_dim < 1)
    throw std::invalid_argument("gen_spurious_regression: counts must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;

  Vector w_shared(shared_dim);
  for (double& w : w_shared) w = gauss(rng);

  const std::size_t input_dim = 2 * shared_dim;
  const std::size_t n_test = 2;
  const double label_noise_sd = 0.01;

  auto gen_domain = [&](const std::string& id) {
    Vector w_spur(shared_dim);
    for (double& w : w_spur) w = noise_scale * gauss(rng);
    Matrix x(samples_per_domain, input_dim);
    Matrix y(samples_per_domain, 1);
    for (std::size_t i = 0; i < samples_per_domain; ++i) {
      double target = 0.0;
      for (std::size_t j = 0; j < input_dim; ++j) {
        const double v = gauss(rng);
        x.at(i, j) = v;
        target += (j < shared_dim) ? w_shared[j] * v
                                   : w_spur[j - shared_dim] * v;
      }
      y.at(i, 0) = target + label_noise_sd * gauss(rng);
    }
    return make_domain(id, std::move(x), std::move(y));
  };

  DomainSet set;
  for (std::size_t i = 0; i < n_domains; ++i)
    push_training_domain(set, gen_domain("train_" + std::to_string(i)),
                         seed + 7000 + i);
  for (std::size_t j = 0; j < n_test; ++j)
    set.test.push_back(gen_domain("test_" + std::to_string(j)));
  return set;
}

DomainSet gen_rotated_moons(std::size_t n_domains,
                            std::size_t samples_per_domain,
                            double rotation_step_degrees, double label_noise,
                            std::uint64_t seed) {
  if (n_domains < 1 || samples_per_domain < 1)
    throw std::invalid_argument("gen_rotated_moons: counts must be >= 1");
  if (label_noise < 0.0 || label_noise >= 0.5)
    throw std::invalid_argument("gen_rotated_moons: label_noise in [0, 0.5)");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  auto gen_domain = [&](const std::string& id, double degrees) {
    const double rad = degrees * std::numbers::pi / 180.0;
    const double c = std::cos(rad), s = std::sin(rad);
    Matrix x(samples_per_domain, 2);
    std::vector<std::size_t> labels(samples_per_domain);
    for (std::size_t i = 0; i < samples_per_domain; ++i) {
      const std::size_t cls = i % 2;
      const double t = uni(rng) * std::numbers::pi;
      double px, py;
      if (cls == 0) {
        px = std::cos(t);
        py = std::sin(t);
      } else {
        px = 1.0 - std::cos(t);
        py = 0.5 - std::sin(t);
      }
      px += 0.1 * gauss(rng);
      py += 0.1 * gauss(rng);
      x.at(i, 0) = c * px - s * py;
      x.at(i, 1) = s * px + c * py;
      labels[i] = (uni(rng) < label_noise) ? 1 - cls : cls;
    }
    Batch b = make_class_batch(std::move(x), labels, 2);
    return make_domain(id, std::move(b.inputs), std::move(b.targets));
  };

  DomainSet set;
  for (std::size_t i = 0; i < n_domains; ++i)
    push_training_domain(
        set,
        gen_domain("train_" + std::to_string(i),
                   static_cast<double>(i) * rotation_step_degrees),
        seed + 7000 + i);
  // test domain halfway between the last training rotation and the next one
  const double test_rot =
      (static_cast<double>(n_domains) - 0.5) * rotation_step_degrees;
  set.test.push_back(gen_domain("test_0", test_rot));
  return set;
}

std::pair<DomainDataset, DomainDataset> split_holdout(
    const DomainDataset& domain, double fraction, std::uint64_t seed) {
  if (fraction <= 0.0 || fraction >= 1.0)
    throw std::invalid_argument("split_holdout: fraction in (0, 1)");
  const std::size_t n = domain.size();
  const std::size_t n_val = static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(n)));
  if (n_val == 0 || n_val == n)
    throw std::invalid_argument(
        "split_holdout: domain too small for a nonempty split");

  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);

  auto take = [&](std::size_t begin, std::size_t end, const std::string& tag) {
    DomainDataset out;
    out.domain_id = domain.domain_id + tag;
    out.inputs = Matrix(end - begin, domain.inputs.cols);
    out.targets = Matrix(end - begin, domain.targets.cols);
    for (std::size_t i = begin; i < end; ++i) {
      for (std::size_t j = 0; j < domain.inputs.cols; ++j)
        out.inputs.at(i - begin, j) = domain.inputs.at(idx[i], j);
      for (std::size_t j = 0; j < domain.targets.cols; ++j)
        out.targets.at(i - begin, j) = domain.targets.at(idx[i], j);
    }
    return out;
  };
  return {take(n_val, n, ""), take(0, n_val, "_val")};
}

Batch mixup(const Batch& a, const Batch& b, double beta_param,
            std::uint64_t seed, std::optional<double> forced_lambda) {
  if (a.inputs.rows != b.inputs.rows || a.inputs.cols != b.inputs.cols ||
      a.targets.rows != b.targets.rows || a.targets.cols != b.targets.cols)
    throw std::invalid_argument("mixup: shape mismatch");
  std::mt19937_64 rng(seed);
  std::gamma_distribution<double> gamma(beta_param, 1.0);
  Batch out;
  out.inputs = Matrix(a.inputs.rows, a.inputs.cols);
  out.targets = Matrix(a.targets.rows, a.targets.cols);
  for (std::size_t i = 0; i < a.inputs.rows; ++i) {
    double lam;
    if (forced_lambda) {
      lam = *forced_lambda;
    } else {
      const double g1 = gamma(rng), g2 = gamma(rng);
      lam = (g1 + g2 > 0.0) ? g1 / (g1 + g2) : 0.5;
    }
    for (std::size_t j = 0; j < a.inputs.cols; ++j)
      out.inputs.at(i, j) =
          lam * a.inputs.at(i, j) + (1.0 - lam) * b.inputs.at(i, j);
    for (std::size_t j = 0; j < a.targets.cols; ++j)
      out.targets.at(i, j) =
          lam * a.targets.at(i, j) + (1.0 - lam) * b.targets.at(i, j);
  }
  return out;
}

void dump_domain_csv(const DomainDataset& domain, const std::string& path,
                     const std::string& role) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("dump_domain_csv: cannot open " + path);
  for (std::size_t j = 0; j < domain.inputs.cols; ++j)
    out << "x" << j << ",";
  for (std::size_t j = 0; j < domain.targets.cols; ++j)
    out << "y" << j << (j + 1 < domain.targets.cols ? "," : "\n");
  char buf[64];
  for (std::size_t i = 0; i < domain.size(); ++i) {
    for (std::size_t j = 0; j < domain.inputs.cols; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", domain.inputs.at(i, j));
      out << buf << ",";
    }
    for (std::size_t j = 0; j < domain.targets.cols; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", domain.targets.at(i, j));
      out << buf << (j + 1 < domain.targets.cols ? "," : "\n");
    }
  }
  nlohmann::json manifest{{"domain_id", domain.domain_id},
                          {"size", domain.size()},
                          {"role", role}};
  std::ofstream mout(path + ".json");
  mout << manifest.dump(2) << "\n";
}

DomainDataset load_domain_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_domain_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("load_domain_csv: empty file " + path);
  std::size_t n_x = 0, n_y = 0;
  {
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ',')) {
      if (!col.empty() && col[0] == 'x') ++n_x;
      else if (!col.empty() && col[0] == 'y') ++n_y;
    }
  }
  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) values.push_back(std::stod(cell));
    ++rows;
  }
  DomainDataset d;
  std::ifstream min(path + ".json");
  if (min) {
    nlohmann::json manifest = nlohmann::json::parse(min);
    d.domain_id = manifest.value("domain_id", "");
  }
  d.inputs = Matrix(rows, n_x);
  d.targets = Matrix(rows, n_y);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < n_x; ++j)
      d.inputs.at(i, j) = values[i * (n_x + n_y) + j];
    for (std::size_t j = 0; j < n_y; ++j)
      d.targets.at(i, j) = values[i * (n_x + n_y) + n_x + j];
  }
  return d;
}

}  // namespace pgrad
