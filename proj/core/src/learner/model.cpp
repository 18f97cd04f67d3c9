#include "silofl/learner/model.hpp"

#include <cmath>
#include <string>

namespace silofl::learner {

namespace {

double stable_sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(-z*s)) with s = +-1, computed without overflow.
double bce_from_logit(double z, int label) {
  const double s = label == 1 ? 1.0 : -1.0;
  const double m = -s * z;
  return m > 0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m));
}

}  // namespace

std::vector<double> FrozenFeatureMap::apply(std::span<const double> x) const {
  if (x.size() != input_dim) {
    throw DimensionError("frozen map: input dimension mismatch");
  }
  std::vector<double> out(output_dim);
  for (std::size_t o = 0; o < output_dim; ++o) {
    double acc = bias[o];
    const double* row = weights.data() + o * input_dim;
    for (std::size_t i = 0; i < input_dim; ++i) {
      acc += row[i] * x[i];
    }
    out[o] = std::tanh(acc);
  }
  return out;
}

FrozenFeatureMap make_frozen_map(std::size_t input_dim,
                                 std::size_t output_dim,
                                 const prg::Seed& seed) {
  FrozenFeatureMap map;
  map.input_dim = input_dim;
  map.output_dim = output_dim;
  map.weights.resize(input_dim * output_dim);
  map.bias.resize(output_dim);
  prg::DeterministicRng rng(prg::derive_seed(seed, "frozen"), 0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(input_dim));
  rng.fill_gaussian(map.weights, scale);
  rng.fill_gaussian(map.bias, 0.1);
  return map;
}

Model::Model(ModelConfig config) : config_(std::move(config)) {
  std::size_t in = config_.input_dim;
  if (config_.frozen_features) {
    if (config_.frozen_features->input_dim != config_.input_dim) {
      throw DimensionError("model: frozen map does not match input_dim");
    }
    in = config_.frozen_features->output_dim;
  }
  layer_sizes_.push_back(in);
  if (config_.kind == ModelKind::kMlp) {
    for (int h : config_.hidden) {
      if (h < 1) throw ConfigError("model: hidden width must be positive");
      layer_sizes_.push_back(static_cast<std::size_t>(h));
    }
  }
  layer_sizes_.push_back(1);

  std::size_t count = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes_.size(); ++l) {
    count += layer_sizes_[l] * layer_sizes_[l + 1] + layer_sizes_[l + 1];
  }
  theta_.assign(count, 0.0);
}

void Model::init_params(const prg::Seed& seed) {
  prg::DeterministicRng rng(prg::derive_seed(seed, "model-init"), 0);
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes_.size(); ++l) {
    const std::size_t fan_in = layer_sizes_[l];
    const std::size_t fan_out = layer_sizes_[l + 1];
    const bool output_layer = (l + 2 == layer_sizes_.size());
    const double scale =
        output_layer ? 0.0 : 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < fan_in * fan_out; ++i) {
      theta_[off + i] = scale == 0.0 ? 0.0 : scale * rng.next_gaussian();
    }
    off += fan_in * fan_out + fan_out;  // biases stay zero
  }
}

std::vector<double> Model::effective_features(
    std::span<const double> x) const {
  if (config_.frozen_features) {
    return config_.frozen_features->apply(x);
  }
  return std::vector<double>(x.begin(), x.end());
}

double Model::predict_logit(std::span<const double> x) const {
  std::vector<double> act = effective_features(x);
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes_.size(); ++l) {
    const std::size_t in = layer_sizes_[l];
    const std::size_t out = layer_sizes_[l + 1];
    const bool output_layer = (l + 2 == layer_sizes_.size());
    std::vector<double> next(out);
    for (std::size_t o = 0; o < out; ++o) {
      double acc = theta_[off + in * out + o];  // bias
      const double* row = theta_.data() + off + o * in;
      for (std::size_t i = 0; i < in; ++i) {
        acc += row[i] * act[i];
      }
      next[o] = output_layer ? acc : std::tanh(acc);
    }
    act = std::move(next);
    off += in * out + out;
  }
  return act[0];
}

double Model::predict_probability(std::span<const double> x) const {
  return stable_sigmoid(predict_logit(x));
}

double Model::loss_and_gradient(std::span<const double> x, int label,
                                std::span<double> grad) const {
  if (grad.size() != theta_.size()) {
    throw DimensionError("loss_and_gradient: gradient buffer size mismatch");
  }
  // Forward pass keeping activations for backprop.
  std::vector<std::vector<double>> activations;
  activations.push_back(effective_features(x));
  std::size_t off = 0;
  std::vector<std::size_t> offsets;
  for (std::size_t l = 0; l + 1 < layer_sizes_.size(); ++l) {
    offsets.push_back(off);
    const std::size_t in = layer_sizes_[l];
    const std::size_t out = layer_sizes_[l + 1];
    const bool output_layer = (l + 2 == layer_sizes_.size());
    std::vector<double> next(out);
    const auto& act = activations.back();
    for (std::size_t o = 0; o < out; ++o) {
      double acc = theta_[off + in * out + o];
      const double* row = theta_.data() + off + o * in;
      for (std::size_t i = 0; i < in; ++i) {
        acc += row[i] * act[i];
      }
      next[o] = output_layer ? acc : std::tanh(acc);
    }
    activations.push_back(std::move(next));
    off += in * out + out;
  }

  const double logit = activations.back()[0];
  const double loss = bce_from_logit(logit, label);

  // Backward pass: d(loss)/d(logit) = p - y.
  std::vector<double> delta{stable_sigmoid(logit) -
                            (label == 1 ? 1.0 : 0.0)};
  for (std::size_t l = layer_sizes_.size() - 1; l-- > 0;) {
    const std::size_t in = layer_sizes_[l];
    const std::size_t out = layer_sizes_[l + 1];
    const std::size_t base = offsets[l];
    const auto& act = activations[l];
    for (std::size_t o = 0; o < out; ++o) {
      const double d = delta[o];
      double* wgrad = grad.data() + base + o * in;
      for (std::size_t i = 0; i < in; ++i) {
        wgrad[i] += d * act[i];
      }
      grad[base + in * out + o] += d;
    }
    if (l == 0) break;
    std::vector<double> prev(in, 0.0);
    for (std::size_t i = 0; i < in; ++i) {
      double acc = 0.0;
      for (std::size_t o = 0; o < out; ++o) {
        acc += theta_[base + o * in + i] * delta[o];
      }
      // tanh'(z) = 1 - tanh(z)^2, and act[i] is tanh(z).
      prev[i] = acc * (1.0 - act[i] * act[i]);
    }
    delta = std::move(prev);
  }
  return loss;
}

void clip_gradient(std::span<double> g, double bound) {
  double sq = 0.0;
  for (double v : g) sq += v * v;
  const double norm = std::sqrt(sq);
  if (norm > bound && norm > 0.0) {
    const double scale = bound / norm;
    for (double& v : g) v *= scale;
  }
}

std::vector<std::vector<double>> per_example_clipped_grads(
    const Model& model, std::span<const double> features,
    std::size_t feature_dim, std::span<const int> labels,
    std::span<const std::size_t> sample_indices, double clip_bound) {
  std::vector<std::vector<double>> grads;
  grads.reserve(sample_indices.size());
  for (std::size_t idx : sample_indices) {
    std::vector<double> g(model.param_count(), 0.0);
    const std::span<const double> x =
        features.subspan(idx * feature_dim, feature_dim);
    model.loss_and_gradient(x, labels[idx], g);
    for (double v : g) {
      if (!std::isfinite(v)) {
        throw NonFiniteGradient("gradient of sample " + std::to_string(idx) +
                                " is not finite");
      }
    }
    clip_gradient(g, clip_bound);
    grads.push_back(std::move(g));
  }
  return grads;
}

void dp_sgd_step(Model& model, std::span<const double> noisy_sum,
                 double batch_divisor, double learning_rate) {
  auto theta = model.mutable_params();
  if (noisy_sum.size() != theta.size()) {
    throw DimensionError("dp_sgd_step: update dimension mismatch");
  }
  if (!(batch_divisor > 0.0)) {
    throw ConfigError("dp_sgd_step: batch divisor must be positive");
  }
  const double scale = learning_rate / batch_divisor;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    theta[i] -= scale * noisy_sum[i];
  }
}

}  // namespace silofl::learner
