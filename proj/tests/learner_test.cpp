#include "silofl/learner/training.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "silofl/learner/dataset.hpp"
#include "silofl/learner/model.hpp"

using namespace silofl;
using namespace silofl::learner;

namespace {

prg::Seed test_seed(std::uint64_t tag) {
  prg::Seed base{};
  base[0] = 0x66;
  return prg::derive_seed(base, "learner:" + std::to_string(tag));
}

// Central finite differences over every parameter.
std::vector<double> fd_gradient(Model& model, std::span<const double> x,
                                int label) {
  std::vector<double> grad(model.param_count());
  auto theta = model.mutable_params();
  std::vector<double> scratch(model.param_count(), 0.0);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double h = 1e-5 * std::max(1.0, std::abs(theta[i]));
    const double orig = theta[i];
    theta[i] = orig + h;
    std::fill(scratch.begin(), scratch.end(), 0.0);
    const double up = model.loss_and_gradient(x, label, scratch);
    theta[i] = orig - h;
    std::fill(scratch.begin(), scratch.end(), 0.0);
    const double down = model.loss_and_gradient(x, label, scratch);
    theta[i] = orig;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

double rel_l2_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0;
  double ref = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    ref += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(ref), 1e-300);
}

ModelConfig logistic_config(std::size_t p) {
  ModelConfig config;
  config.kind = ModelKind::kLogisticRegression;
  config.input_dim = p;
  return config;
}

ModelConfig mlp_config(std::size_t p, std::vector<int> hidden) {
  ModelConfig config;
  config.kind = ModelKind::kMlp;
  config.hidden = std::move(hidden);
  config.input_dim = p;
  return config;
}

}  // namespace

TEST_CASE("analytic gradients match central finite differences") {
  std::mt19937_64 gen(1);
  std::normal_distribution<double> dist;
  for (int trial = 0; trial < 10; ++trial) {
    for (const auto& config :
         {logistic_config(7), mlp_config(5, {6}), mlp_config(4, {5, 3})}) {
      Model model(config);
      auto theta = model.mutable_params();
      for (auto& t : theta) t = 0.5 * dist(gen);
      std::vector<double> x(config.input_dim);
      for (auto& v : x) v = dist(gen);
      const int label = trial % 2;

      std::vector<double> grad(model.param_count(), 0.0);
      model.loss_and_gradient(x, label, grad);
      const auto fd = fd_gradient(model, x, label);
      CHECK(rel_l2_error(grad, fd) <= 1e-6);
    }
  }
}

TEST_CASE("frozen feature maps are part of the gradient path") {
  ModelConfig config = mlp_config(6, {4});
  config.frozen_features = make_frozen_map(6, 5, test_seed(2));
  config.input_dim = 6;
  Model model(config);
  model.init_params(test_seed(3));
  auto theta = model.mutable_params();
  std::mt19937_64 gen(4);
  std::normal_distribution<double> dist;
  for (auto& t : theta) t = 0.3 * dist(gen);
  std::vector<double> x(6);
  for (auto& v : x) v = dist(gen);
  std::vector<double> grad(model.param_count(), 0.0);
  model.loss_and_gradient(x, 1, grad);
  CHECK(rel_l2_error(grad, fd_gradient(model, x, 1)) <= 1e-6);
}

TEST_CASE("clipping scales exactly to the bound and leaves small ones") {
  std::vector<double> big{3.0, 4.0};  // norm 5
  clip_gradient(big, 2.5);
  CHECK(std::hypot(big[0], big[1]) == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(big[0] / big[1] == doctest::Approx(0.75).epsilon(1e-12));

  std::vector<double> small{0.3, 0.4};  // norm 0.5 < 1
  const auto before = small;
  clip_gradient(small, 1.0);
  CHECK(small == before);
}

TEST_CASE("per-example gradients respect the clip bound") {
  const auto data = make_synthetic(50, 8, 3.0, test_seed(5));
  Model model(logistic_config(8));
  model.init_params(test_seed(6));
  std::vector<std::size_t> indices;
  for (std::size_t i = 0; i < data.size(); ++i) indices.push_back(i);
  const double bound = 0.05;
  const auto grads = per_example_clipped_grads(
      model, data.features, data.feature_dim, data.labels, indices, bound);
  for (const auto& g : grads) {
    double norm = 0.0;
    for (double v : g) norm += v * v;
    CHECK(std::sqrt(norm) <= bound * (1 + 1e-12));
  }
}

TEST_CASE("non-finite inputs surface as NonFiniteGradient") {
  Dataset data = make_synthetic(4, 3, 1.0, test_seed(7));
  data.features[0] = std::numeric_limits<double>::infinity();
  Model model(logistic_config(3));
  const std::vector<std::size_t> indices{0};
  CHECK_THROWS_AS(
      per_example_clipped_grads(model, data.features, data.feature_dim,
                                data.labels, indices, 1.0),
      NonFiniteGradient);
}

TEST_CASE("dp_sgd_step applies lr times sum over divisor") {
  Model model(logistic_config(2));
  model.init_params(test_seed(8));
  const std::vector<double> zero(model.param_count(), 0.0);
  const auto before = std::vector<double>(model.params().begin(),
                                          model.params().end());
  dp_sgd_step(model, zero, 10.0, 0.5);
  CHECK(std::vector<double>(model.params().begin(), model.params().end()) ==
        before);

  std::vector<double> sum(model.param_count(), 2.0);
  dp_sgd_step(model, sum, 4.0, 0.5);
  for (std::size_t i = 0; i < model.param_count(); ++i) {
    CHECK(model.params()[i] ==
          doctest::Approx(before[i] - 0.25).epsilon(1e-12));
  }
  CHECK_THROWS_AS(dp_sgd_step(model, sum, 0.0, 0.5), ConfigError);
}

TEST_CASE("nonprivate full batch equals a vanilla gradient step") {
  auto data = make_synthetic(40, 5, 3.0, test_seed(9));
  partition_uniform(data, 4);

  TrainConfig config;
  config.regime = Regime::kNonprivate;
  config.model = logistic_config(5);
  config.batch.scheme = sampling::Scheme::kSwor;
  config.batch.batch_size = 40;
  config.steps = 1;
  config.learning_rate = 0.7;
  config.seed = test_seed(10);
  const auto report = run_training(config, data);

  Model oracle(config.model);
  oracle.init_params(config.seed);
  std::vector<double> grad_sum(oracle.param_count(), 0.0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    oracle.loss_and_gradient(data.row(i), data.labels[i], grad_sum);
  }
  dp_sgd_step(oracle, grad_sum, 40.0, 0.7);
  for (std::size_t i = 0; i < oracle.param_count(); ++i) {
    CHECK(report.final_params[i] ==
          doctest::Approx(oracle.params()[i]).epsilon(1e-12));
  }
}

TEST_CASE("zero steps return the initial model with zero epsilon") {
  auto data = make_synthetic(20, 4, 2.0, test_seed(11));
  partition_uniform(data, 2);
  TrainConfig config;
  config.regime = Regime::kDpSmc;
  config.model = logistic_config(4);
  config.batch.batch_size = 10;
  config.steps = 0;
  config.noise_multiplier = 2.0;
  config.seed = test_seed(12);
  const auto report = run_training(config, data);
  CHECK(report.epsilon == 0.0);
  Model init(config.model);
  init.init_params(config.seed);
  CHECK(report.final_params ==
        std::vector<double>(init.params().begin(), init.params().end()));
}

TEST_CASE("separable data trains to high accuracy without privacy") {
  auto data = make_synthetic(200, 6, 8.0, test_seed(13));
  partition_uniform(data, 4);
  TrainConfig config;
  config.regime = Regime::kNonprivate;
  config.model = logistic_config(6);
  config.batch.scheme = sampling::Scheme::kSwor;
  config.batch.batch_size = 200;
  config.steps = 200;
  config.learning_rate = 0.8;
  config.eval_every = 50;
  config.seed = test_seed(14);
  const auto report = run_training(config, data);
  CHECK(report.final_train_accuracy >= 0.99);
  CHECK(report.final_loss < report.train_curve.front().loss);
}

TEST_CASE("dp_smc and the trusted oracle stay quantization-close") {
  auto data = make_synthetic(80, 6, 4.0, test_seed(15));
  partition_uniform(data, 4);

  TrainConfig config;
  config.regime = Regime::kDpSmc;
  config.model = logistic_config(6);
  config.batch.scheme = sampling::Scheme::kSwor;
  config.batch.batch_size = 20;
  config.steps = 10;
  config.learning_rate = 0.2;
  config.clip_norm = 1.0;
  config.noise_multiplier = 0.8;
  config.seed = test_seed(16);
  config.record_trajectory = true;
  const auto smc = run_training(config, data);

  auto trusted = config;
  trusted.regime = Regime::kTrusted;
  trusted.record_trajectory = true;
  const auto oracle = run_training(trusted, data);

  REQUIRE(smc.trajectory.size() == oracle.trajectory.size());
  const double bound = config.steps * std::ldexp(1.0, -17);
  for (std::size_t t = 0; t < smc.trajectory.size(); ++t) {
    for (std::size_t i = 0; i < smc.trajectory[t].size(); ++i) {
      CHECK(std::abs(smc.trajectory[t][i] - oracle.trajectory[t][i]) <=
            bound);
    }
  }
}

TEST_CASE("poisson batches divide by the expected size") {
  auto data = make_synthetic(60, 4, 3.0, test_seed(17));
  partition_uniform(data, 3);
  TrainConfig config;
  config.regime = Regime::kTrusted;
  config.model = logistic_config(4);
  config.batch.scheme = sampling::Scheme::kPoisson;
  config.batch.gamma = 0.2;
  config.steps = 3;
  config.noise_multiplier = 0.5;
  config.seed = test_seed(18);
  const auto report = run_training(config, data);
  CHECK(report.sampling_fraction == doctest::Approx(0.2));
  CHECK(report.realized_batch_sizes.size() == 3);
  // Realized sizes vary round to round; the divisor is fixed at gamma*n.
  CHECK(report.steps == 3);
}

TEST_CASE("ldp reports the full per-party noise scale") {
  auto data = make_synthetic(40, 4, 3.0, test_seed(19));
  partition_uniform(data, 4);
  TrainConfig config;
  config.regime = Regime::kLdp;
  config.model = logistic_config(4);
  config.batch.batch_size = 20;
  config.steps = 2;
  config.clip_norm = 1.0;
  config.noise_multiplier = 2.0;
  config.seed = test_seed(20);
  const auto report = run_training(config, data);
  CHECK(report.per_party_sigma == doctest::Approx(2.0));
  CHECK(report.noise_mode == "local");
}

TEST_CASE("config validation rejects inconsistent setups") {
  auto data = make_synthetic(30, 4, 3.0, test_seed(21));
  partition_uniform(data, 3);
  TrainConfig config;
  config.model = logistic_config(4);
  config.batch.batch_size = 40;  // larger than the dataset
  CHECK_THROWS_AS(validate_train_config(config, data), ConfigError);
  config.batch.batch_size = 10;
  config.learning_rate = 0.0;
  CHECK_THROWS_AS(validate_train_config(config, data), ConfigError);
  config.learning_rate = 0.1;
  config.model.input_dim = 5;  // dataset has 4 features
  CHECK_THROWS_AS(validate_train_config(config, data), ConfigError);
}

TEST_CASE("dataset loaders round-trip csv and binary images") {
  auto data = make_synthetic(12, 6, 2.0, test_seed(22));
  // CSV writer inline: features then label.
  const std::string csv_path = "/tmp/silofl_test_data.csv";
  {
    std::ofstream out(csv_path, std::ios::trunc);
    out << "f0,f1,f2,f3,f4,f5,label\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
      for (double v : data.row(i)) out << v << ',';
      out << data.labels[i] << '\n';
    }
  }
  const auto csv = load_csv(csv_path);
  CHECK(csv.size() == data.size());
  CHECK(csv.feature_dim == 6);
  CHECK(csv.labels == data.labels);
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t j = 0; j < 6; ++j) {
      CHECK(csv.row(i)[j] == doctest::Approx(data.row(i)[j]).epsilon(1e-5));
    }
  }
  std::filesystem::remove(csv_path);

  Dataset img;
  img.feature_dim = 4;
  img.features = {0.0, 0.5, 1.0, 0.25, 1.0, 0.0, 0.75, 0.5};
  img.labels = {0, 1};
  img.partition = {{0, 2}};
  const std::string img_path = "/tmp/silofl_test_imgs.bin";
  save_image_binary(img_path, img, 2, 2, 1);
  const auto loaded = load_image_binary(img_path);
  CHECK(loaded.size() == 2);
  CHECK(loaded.feature_dim == 4);
  CHECK(loaded.labels == img.labels);
  for (std::size_t i = 0; i < loaded.features.size(); ++i) {
    CHECK(loaded.features[i] ==
          doctest::Approx(img.features[i]).epsilon(0.01));
  }
  std::filesystem::remove(img_path);
}

TEST_CASE("partitions must cover the dataset exactly") {
  auto data = make_synthetic(10, 3, 2.0, test_seed(23));
  CHECK_THROWS_AS(partition_explicit(data, {{0, 4}, {5, 10}}), ConfigError);
  CHECK_THROWS_AS(partition_explicit(data, {{0, 4}, {4, 9}}), ConfigError);
  partition_explicit(data, {{0, 4}, {4, 4}, {4, 10}});
  CHECK(data.party_count() == 3);
  CHECK(data.party_size(1) == 0);  // zero-sample parties are legal
}
