#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "pgrad/linalg.hpp"

namespace pgrad {

enum class ModelKind { LinearRegression, Logistic, Mlp };
enum class Activation { Tanh, Relu };
enum class LossKind { Mse, CrossEntropy };

/// Describes one of the built-in differentiable models. All parameters live
/// in a single flat vector; the layout is layer-major, weights before biases.
struct ModelSpec {
  ModelKind kind = ModelKind::LinearRegression;
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden_dims;  // mlp only
  std::size_t output_dim = 1;
  Activation activation = Activation::Tanh;  // mlp only
  LossKind loss = LossKind::Mse;

  /// Layer sizes including input and output, e.g. {4, 8, 2} for a [4->8->2]
  /// mlp. Linear and logistic models are a single layer.
  std::vector<std::size_t> layer_dims() const;
};

std::size_t param_count(const ModelSpec& spec);

/// Per-layer view of a flat parameter vector.
struct LayerWeights {
  std::vector<Matrix> weights;  // (in x out) per layer
  std::vector<Vector> biases;
};

LayerWeights unflatten(const ModelSpec& spec, const Vector& params);
Vector flatten(const ModelSpec& spec, const LayerWeights& layers);

/// Glorot-uniform weights, zero biases. Deterministic for a fixed seed.
Vector init_params(const ModelSpec& spec, std::uint64_t seed);

struct Batch {
  Matrix inputs;   // batch x input_dim
  Matrix targets;  // batch x output_dim; one-hot (or soft) for classifiers
};

/// Builds a classification batch from integer labels. Labels must be below
/// n_classes.
Batch make_class_batch(Matrix inputs, const std::vector<std::size_t>& labels,
                       std::size_t n_classes);

double loss_only(const ModelSpec& spec, const Vector& params,
                 const Batch& batch);

/// Loss plus the analytic gradient via manual backprop.
std::pair<double, Vector> loss_and_grad(const ModelSpec& spec,
                                        const Vector& params,
                                        const Batch& batch);

/// Mean accuracy of a classifier, or negative mean squared error for a
/// regression model; both so that larger is better.
double eval_metric(const ModelSpec& spec, const Vector& params,
                   const Batch& batch);

struct AdamState {
  std::size_t step = 0;
  Vector first_moment;
  Vector second_moment;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState zero(std::size_t d) {
    AdamState s;
    s.first_moment.assign(d, 0.0);
    s.second_moment.assign(d, 0.0);
    return s;
  }
};

/// One bias-corrected Adam update. Mutates the state (step, moments) and
/// returns the new parameters.
Vector adam_step(AdamState& state, const Vector& params, const Vector& grad,
                 double alpha);

Vector sgd_step(const Vector& params, const Vector& grad, double alpha);

}  // namespace pgrad
