#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "silofl/fixedpoint.hpp"
#include "silofl/learner/training.hpp"
#include "silofl/prg.hpp"

namespace silofl::harness {

enum class PartyRole { kHonestTee, kHbc, kMalicious };

struct PartySpec {
  int party_id = 0;
  PartyRole role = PartyRole::kHbc;
  std::size_t local_samples = 0;  // n_i
  bool client = true;
  bool compute_node = false;
  bool aggregator = false;
  bool master = false;
};

enum class AdversaryBehavior {
  kRevealNoiseShare,
  kDropToken,
  kSubstituteMessage,
  kObserveAll,
};

struct AdversaryConfig {
  int party_id = 0;
  AdversaryBehavior behavior = AdversaryBehavior::kObserveAll;
  // Real-valued offset added to element 0 by substitute_message.
  double substitution_delta = 1.0;
};

struct DataConfig {
  enum class Kind { kSynthetic, kCsv, kImage };
  Kind kind = Kind::kSynthetic;
  std::size_t n = 2000;
  std::size_t features = 20;
  double separation = 4.0;
  std::size_t test_n = 1000;
  std::string path;
  int label_column = -1;
};

struct ExperimentConfig {
  std::string seed_text = "silofl";
  prg::Seed seed{};
  FixedPointCodec codec;
  std::vector<PartySpec> parties;
  learner::TrainConfig train;
  DataConfig data;
  // Width of the fixed random feature map, 0 for none; the map itself is
  // built once the dataset's feature count is known.
  int frozen_width = 0;
  std::string transport = "inmem";
  std::string token_list_path;
  std::string out_dir = "results";
  std::vector<AdversaryConfig> adversaries;
  int timeout_ms = 10000;
  nlohmann::json resolved;  // full resolved config, embedded in results

  std::vector<int> client_ids() const;
  std::vector<int> compute_node_ids() const;
  int master_id() const;
  int aggregator_id() const;
};

ExperimentConfig parse_experiment_config(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::string& path);

// Consistency checks run before any protocol message: exactly one master,
// role/protocol capability requirements, adversary targets malicious.
void validate_experiment_config(const ExperimentConfig& config);

AdversaryBehavior parse_behavior(const std::string& name);
std::string behavior_name(AdversaryBehavior behavior);

// Returns a copy with the behavior wired onto the named party. The party
// must be flagged malicious; honest-path code is untouched (adversaries
// act only through the message interface).
ExperimentConfig inject_adversary(ExperimentConfig config, int party_id,
                                  const std::string& behavior);

}  // namespace silofl::harness
