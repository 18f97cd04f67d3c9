#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "silofl/errors.hpp"
#include "silofl/prg.hpp"

namespace silofl::learner {

enum class ModelKind { kLogisticRegression, kMlp };

// Fixed random feature map (tanh of a seeded Gaussian linear layer),
// standing in for pretrained-and-frozen convolutional features: only the
// head on top of it is trained.
struct FrozenFeatureMap {
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  std::vector<double> weights;  // output_dim x input_dim, row-major
  std::vector<double> bias;

  std::vector<double> apply(std::span<const double> x) const;
};

FrozenFeatureMap make_frozen_map(std::size_t input_dim,
                                 std::size_t output_dim,
                                 const prg::Seed& seed);

struct ModelConfig {
  ModelKind kind = ModelKind::kLogisticRegression;
  std::vector<int> hidden;  // MLP hidden layer widths (empty for logistic)
  std::size_t input_dim = 0;
  std::optional<FrozenFeatureMap> frozen_features;
};

// Binary classifier with a flat parameter vector: logistic regression, or
// a tanh MLP with a logit output. tanh keeps the loss smooth enough for
// finite-difference gradient checks.
class Model {
 public:
  explicit Model(ModelConfig config);

  std::size_t param_count() const { return theta_.size(); }
  std::span<const double> params() const { return theta_; }
  std::span<double> mutable_params() { return theta_; }
  const ModelConfig& config() const { return config_; }

  // Seeded Gaussian init scaled by fan-in for hidden layers, zeros for
  // the output layer; identical seeds give identical starting points in
  // every regime.
  void init_params(const prg::Seed& seed);

  double predict_logit(std::span<const double> x) const;
  double predict_probability(std::span<const double> x) const;

  // Binary cross-entropy of one example; gradient accumulated into
  // `grad` (same layout as params). Returns the loss.
  double loss_and_gradient(std::span<const double> x, int label,
                           std::span<double> grad) const;

 private:
  ModelConfig config_;
  std::vector<std::size_t> layer_sizes_;  // [effective input, hidden..., 1]
  std::vector<double> theta_;

  std::vector<double> effective_features(std::span<const double> x) const;
};

// Scales g in place to norm `bound` when it exceeds it; gradients already
// within the bound are untouched.
void clip_gradient(std::span<double> g, double bound);

// Per-example clipped gradients for the listed samples (indices into the
// flat dataset arrays). Throws NonFiniteGradient on NaN/inf.
std::vector<std::vector<double>> per_example_clipped_grads(
    const Model& model, std::span<const double> features,
    std::size_t feature_dim, std::span<const int> labels,
    std::span<const std::size_t> sample_indices, double clip_bound);

// theta <- theta - lr * noisy_sum / batch_divisor. The divisor is the
// realized batch size under SWOR and the expected size gamma*n under
// Poisson sampling.
void dp_sgd_step(Model& model, std::span<const double> noisy_sum,
                 double batch_divisor, double learning_rate);

}  // namespace silofl::learner
