#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "silofl/dpnoise.hpp"
#include "silofl/fixedpoint.hpp"
#include "silofl/learner/dataset.hpp"
#include "silofl/learner/model.hpp"
#include "silofl/sampling.hpp"
#include "silofl/token.hpp"

namespace silofl::learner {

enum class Regime { kDpSmc, kTrusted, kLdp, kNonprivate };

// Substitution neighbours force clipping at C/2 so a swapped example still
// moves the sum by at most C; remove/add neighbours clip at C directly.
enum class NeighbourRelation { kRemoveAdd, kSubstitution };

enum class SumProtocol { kPairwise, kDca };

struct BatchConfig {
  sampling::Scheme scheme = sampling::Scheme::kSwor;
  std::size_t batch_size = 0;  // SWOR b
  double gamma = 0.0;          // Poisson rate
};

struct ProtocolConfig {
  SumProtocol protocol = SumProtocol::kPairwise;
  int compute_nodes = 2;  // DCA M
  // Optional DCA client -> node-subset assignment; privacy then needs one
  // honest node per subset.
  std::map<int, std::vector<int>> node_subsets;
  // Optional pairwise masking group size; groups aggregate independently
  // and the group sums add up.
  std::optional<int> group_size;
};

struct ProjectionConfig {
  std::size_t projection_dim = 0;  // k
  double delta_prime = 1e-6;
  bool resample_per_step = true;
};

struct TrainConfig {
  Regime regime = Regime::kNonprivate;
  ModelConfig model;
  BatchConfig batch;
  ProtocolConfig protocol;
  double learning_rate = 0.1;
  int steps = 100;
  double clip_norm = 1.0;        // sensitivity C
  double noise_multiplier = 1.0; // sigma / C
  double delta = 1e-5;
  dpnoise::NoiseMode noise_mode = dpnoise::NoiseMode::kTee;
  int colluders = 0;
  NeighbourRelation relation = NeighbourRelation::kRemoveAdd;
  std::optional<ProjectionConfig> projection;
  FixedPointCodec codec;
  prg::Seed seed{};
  int eval_every = 1;
  bool record_trajectory = false;
};

// Tokens tying protocol identities to local samples: party i's j-th token
// stands for its j-th local sample. shared_list is the mixed broadcast
// order every party selects batches from.
struct TokenAssignment {
  std::vector<Token> shared_list;
  std::vector<std::vector<Token>> per_party;
};

// Deterministic assignment for runs that skip the mixnet (the batch law
// is the same uniform subset regardless of list order).
TokenAssignment synthesize_tokens(const Dataset& data, const prg::Seed& seed);

struct StepMetrics {
  int step = 0;
  double loss = 0.0;
  double accuracy = 0.0;
};

struct PhaseTimings {
  double gradient_s = 0.0;
  double mask_s = 0.0;
  double transport_s = 0.0;
  double aggregate_s = 0.0;
};

struct TrainReport {
  std::vector<StepMetrics> train_curve;
  std::vector<StepMetrics> test_curve;
  double final_train_accuracy = 0.0;
  double final_test_accuracy = 0.0;
  double final_loss = 0.0;
  // Privacy bookkeeping (dpnoise result schema).
  double sigma_total = 0.0;
  double per_party_sigma = 0.0;
  int parties = 0;
  int colluders = 0;
  std::string noise_mode;
  int steps = 0;
  double sampling_fraction = 0.0;
  double epsilon = 0.0;  // +inf for nonprivate runs
  double delta = 0.0;
  double delta_total = 0.0;  // delta + projection delta'
  double clip_norm = 0.0;
  // Projection bookkeeping (zero when no projection is configured).
  std::size_t projection_dim = 0;
  double proj_sensitivity = 0.0;
  double proj_delta_prime = 0.0;
  // Communication bookkeeping.
  std::uint64_t uploaded_bytes = 0;
  double upload_reduction_factor = 1.0;
  PhaseTimings timings;
  std::vector<double> final_params;
  std::vector<std::vector<double>> trajectory;  // when record_trajectory
  std::vector<std::size_t> realized_batch_sizes;
};

void validate_train_config(const TrainConfig& config, const Dataset& train);

// Privacy and communication bookkeeping shared by the centralized and
// distributed engines (epsilon from the built-in accountant, sigma
// breakdown, sampling fraction, upload reduction).
void fill_report_metadata(TrainReport& report, const TrainConfig& config,
                          std::size_t dataset_size, int parties,
                          double sensitivity, double sigma_total,
                          double per_party_sigma);

// Single-process training engine covering all four regimes. dp_smc routes
// every step through the actual mask/share/fixed-point machinery; trusted,
// ldp and nonprivate aggregate in real arithmetic. The harness runs the
// same loop over real transports and must match this engine bit for bit
// given equal seeds.
TrainReport run_training(const TrainConfig& config, const Dataset& train,
                         const Dataset* test = nullptr,
                         const TokenAssignment* tokens = nullptr);

double evaluate_accuracy(const Model& model, const Dataset& data);
double evaluate_loss(const Model& model, const Dataset& data);

}  // namespace silofl::learner
