#include "pgrad/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace pgrad {

std::vector<std::size_t> ModelSpec::layer_dims() const {
  std::vector<std::size_t> dims{input_dim};
  if (kind == ModelKind::Mlp)
    dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
  dims.push_back(output_dim);
  return dims;
}

namespace {

void validate(const ModelSpec& spec) {
  for (std::size_t d : spec.layer_dims())
    if (d == 0) throw std::invalid_argument("model: zero-dimension layer");
  if (spec.kind == ModelKind::Mlp && spec.hidden_dims.size() > 3)
    throw std::invalid_argument("model: mlp depth limited to 4 layers");
  if (spec.kind == ModelKind::Logistic && spec.loss != LossKind::CrossEntropy)
    throw std::invalid_argument("model: logistic requires cross_entropy loss");
  if (spec.kind == ModelKind::LinearRegression && spec.loss != LossKind::Mse)
    throw std::invalid_argument("model: linear_regression requires mse loss");
}

double activate(Activation act, double x) {
  return act == Activation::Tanh ? std::tanh(x) : std::max(0.0, x);
}

double activate_deriv(Activation act, double pre, double post) {
  return act == Activation::Tanh ? 1.0 - post * post : (pre > 0.0 ? 1.0 : 0.0);
}

}  // namespace

std::size_t param_count(const ModelSpec& spec) {
  validate(spec);
  const auto dims = spec.layer_dims();
  std::size_t d = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l)
    d += dims[l] * dims[l + 1] + dims[l + 1];
  return d;
}

LayerWeights unflatten(const ModelSpec& spec, const Vector& params) {
  if (params.size() != param_count(spec))
    throw std::invalid_argument("unflatten: parameter length mismatch");
  const auto dims = spec.layer_dims();
  LayerWeights lw;
  std::size_t pos = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    Matrix w(dims[l], dims[l + 1]);
    std::copy_n(params.begin() + pos, w.data.size(), w.data.begin());
    pos += w.data.size();
    Vector b(params.begin() + pos, params.begin() + pos + dims[l + 1]);
    pos += dims[l + 1];
    lw.weights.push_back(std::move(w));
    lw.biases.push_back(std::move(b));
  }
  return lw;
}

Vector flatten(const ModelSpec& spec, const LayerWeights& layers) {
  Vector params;
  params.reserve(param_count(spec));
  for (std::size_t l = 0; l < layers.weights.size(); ++l) {
    params.insert(params.end(), layers.weights[l].data.begin(),
                  layers.weights[l].data.end());
    params.insert(params.end(), layers.biases[l].begin(),
                  layers.biases[l].end());
  }
  return params;
}

Vector init_params(const ModelSpec& spec, std::uint64_t seed) {
  validate(spec);
  const auto dims = spec.layer_dims();
  std::mt19937_64 rng(seed);
  Vector params;
  params.reserve(param_count(spec));
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const double limit =
        std::sqrt(6.0 / static_cast<double>(dims[l] + dims[l + 1]));
    std::uniform_real_distribution<double> uni(-limit, limit);
    for (std::size_t i = 0; i < dims[l] * dims[l + 1]; ++i)
      params.push_back(uni(rng));
    for (std::size_t i = 0; i < dims[l + 1]; ++i) params.push_back(0.0);
  }
  return params;
}

Batch make_class_batch(Matrix inputs, const std::vector<std::size_t>& labels,
                       std::size_t n_classes) {
  if (inputs.rows != labels.size())
    throw std::invalid_argument("make_class_batch: batch size mismatch");
  Matrix targets(labels.size(), n_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= n_classes)
      throw std::invalid_argument("make_class_batch: label out of range");
    targets.at(i, labels[i]) = 1.0;
  }
  return Batch{std::move(inputs), std::move(targets)};
}

namespace {

struct ForwardPass {
  std::vector<Matrix> pre;   // pre-activation per layer
  std::vector<Matrix> post;  // post-activation per layer (post.back() = output)
};

ForwardPass forward(const ModelSpec& spec, const LayerWeights& lw,
                    const Matrix& inputs) {
  ForwardPass fp;
  const std::size_t n_layers = lw.weights.size();
  Matrix act = inputs;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const Matrix& w = lw.weights[l];
    Matrix z(act.rows, w.cols);
    for (std::size_t i = 0; i < act.rows; ++i)
      for (std::size_t j = 0; j < w.cols; ++j) {
        double s = lw.biases[l][j];
        for (std::size_t c = 0; c < w.rows; ++c)
          s += act.at(i, c) * w.at(c, j);
        z.at(i, j) = s;
      }
    fp.pre.push_back(z);
    const bool last = (l + 1 == n_layers);
    if (!last) {
      for (double& x : z.data)
        x = activate(spec.activation, x);
    }
    fp.post.push_back(z);
    act = fp.post.back();
  }
  return fp;
}

// Loss value and d(loss)/d(output). Cross entropy goes through log-sum-exp.
std::pair<double, Matrix> loss_and_output_grad(const ModelSpec& spec,
                                               const Matrix& out,
                                               const Matrix& targets) {
  const double batch = static_cast<double>(out.rows);
  Matrix dout(out.rows, out.cols);
  double loss = 0.0;
  if (spec.loss == LossKind::Mse) {
    for (std::size_t i = 0; i < out.rows; ++i)
      for (std::size_t j = 0; j < out.cols; ++j) {
        const double diff = out.at(i, j) - targets.at(i, j);
        loss += 0.5 * diff * diff;
        dout.at(i, j) = diff / batch;
      }
    loss /= batch;
  } else {
    for (std::size_t i = 0; i < out.rows; ++i) {
      double zmax = out.at(i, 0);
      for (std::size_t j = 1; j < out.cols; ++j)
        zmax = std::max(zmax, out.at(i, j));
      double sumexp = 0.0;
      for (std::size_t j = 0; j < out.cols; ++j)
        sumexp += std::exp(out.at(i, j) - zmax);
      const double lse = zmax + std::log(sumexp);
      double target_mass = 0.0;
      for (std::size_t j = 0; j < out.cols; ++j) {
        const double y = targets.at(i, j);
        target_mass += y;
        loss += y * (lse - out.at(i, j));
      }
      for (std::size_t j = 0; j < out.cols; ++j) {
        const double p = std::exp(out.at(i, j) - lse);
        dout.at(i, j) = (p * target_mass - targets.at(i, j)) / batch;
      }
    }
    loss /= batch;
  }
  return {loss, dout};
}

}  // namespace

double loss_only(const ModelSpec& spec, const Vector& params,
                 const Batch& batch) {
  const LayerWeights lw = unflatten(spec, params);
  if (batch.inputs.cols != spec.input_dim)
    throw std::invalid_argument("loss: input dimension mismatch");
  const ForwardPass fp = forward(spec, lw, batch.inputs);
  return loss_and_output_grad(spec, fp.post.back(), batch.targets).first;
}

std::pair<double, Vector> loss_and_grad(const ModelSpec& spec,
                                        const Vector& params,
                                        const Batch& batch) {
  const LayerWeights lw = unflatten(spec, params);
  if (batch.inputs.cols != spec.input_dim)
    throw std::invalid_argument("loss_and_grad: input dimension mismatch");
  if (batch.inputs.rows == 0)
    throw std::invalid_argument("loss_and_grad: empty batch");
  if (batch.targets.rows != batch.inputs.rows ||
      batch.targets.cols != spec.output_dim)
    throw std::invalid_argument("loss_and_grad: target shape mismatch");

  const ForwardPass fp = forward(spec, lw, batch.inputs);
  auto [loss, delta] = loss_and_output_grad(spec, fp.post.back(), batch.targets);

  const std::size_t n_layers = lw.weights.size();
  LayerWeights grads;
  grads.weights.resize(n_layers);
  grads.biases.resize(n_layers);

  for (std::size_t li = n_layers; li-- > 0;) {
    const Matrix& act_in = (li == 0) ? batch.inputs : fp.post[li - 1];
    const Matrix& w = lw.weights[li];
    Matrix gw(w.rows, w.cols);
    Vector gb(w.cols, 0.0);
    for (std::size_t i = 0; i < delta.rows; ++i)
      for (std::size_t j = 0; j < w.cols; ++j) {
        const double d = delta.at(i, j);
        gb[j] += d;
        for (std::size_t c = 0; c < w.rows; ++c)
          gw.at(c, j) += act_in.at(i, c) * d;
      }
    grads.weights[li] = std::move(gw);
    grads.biases[li] = std::move(gb);

    if (li > 0) {
      Matrix prev(delta.rows, w.rows);
      for (std::size_t i = 0; i < delta.rows; ++i)
        for (std::size_t c = 0; c < w.rows; ++c) {
          double s = 0.0;
          for (std::size_t j = 0; j < w.cols; ++j)
            s += delta.at(i, j) * w.at(c, j);
          prev.at(i, c) = s * activate_deriv(spec.activation,
                                             fp.pre[li - 1].at(i, c),
                                             fp.post[li - 1].at(i, c));
        }
      delta = std::move(prev);
    }
  }
  return {loss, flatten(spec, grads)};
}

double eval_metric(const ModelSpec& spec, const Vector& params,
                   const Batch& batch) {
  const LayerWeights lw = unflatten(spec, params);
  const ForwardPass fp = forward(spec, lw, batch.inputs);
  const Matrix& out = fp.post.back();
  if (spec.loss == LossKind::CrossEntropy) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < out.rows; ++i) {
      std::size_t pred = 0, truth = 0;
      for (std::size_t j = 1; j < out.cols; ++j) {
        if (out.at(i, j) > out.at(i, pred)) pred = j;
        if (batch.targets.at(i, j) > batch.targets.at(i, truth)) truth = j;
      }
      if (pred == truth) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(out.rows);
  }
  double mse = 0.0;
  for (std::size_t i = 0; i < out.rows; ++i)
    for (std::size_t j = 0; j < out.cols; ++j) {
      const double diff = out.at(i, j) - batch.targets.at(i, j);
      mse += diff * diff;
    }
  return -mse / static_cast<double>(out.rows);
}

Vector adam_step(AdamState& state, const Vector& params, const Vector& grad,
                 double alpha) {
  if (alpha <= 0.0) throw std::invalid_argument("adam_step: alpha must be > 0");
  if (grad.size() != params.size() ||
      state.first_moment.size() != params.size())
    throw std::invalid_argument("adam_step: length mismatch");
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  Vector out(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.first_moment[i] =
        state.beta1 * state.first_moment[i] + (1.0 - state.beta1) * grad[i];
    state.second_moment[i] = state.beta2 * state.second_moment[i] +
                             (1.0 - state.beta2) * grad[i] * grad[i];
    const double mhat = state.first_moment[i] / bc1;
    const double vhat = state.second_moment[i] / bc2;
    out[i] = params[i] - alpha * mhat / (std::sqrt(vhat) + state.epsilon);
  }
  return out;
}

Vector sgd_step(const Vector& params, const Vector& grad, double alpha) {
  if (grad.size() != params.size())
    throw std::invalid_argument("sgd_step: length mismatch");
  Vector out(params.size());
  for (std::size_t i = 0; i < params.size(); ++i)
    out[i] = params[i] - alpha * grad[i];
  return out;
}

}  // namespace pgrad
