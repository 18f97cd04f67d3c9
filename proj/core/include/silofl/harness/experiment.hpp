#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "silofl/harness/adversary.hpp"
#include "silofl/harness/config.hpp"
#include "silofl/harness/transcript.hpp"
#include "silofl/learner/training.hpp"
#include "silofl/mixnet.hpp"

namespace silofl::harness {

struct MixnetOutcome {
  learner::TokenAssignment assignment;
  bool tamper_detected = false;
  std::string tamper_reason;
  bool loaded_from_file = false;
};

// Builds the shared token list with the configured parties (Alg-2 style:
// onion encrypt, sequential mixes, per-round verification), or loads a
// persisted list when the roster matches. Malicious mixers act through
// their published lists only.
MixnetOutcome make_token_list(const ExperimentConfig& config,
                              const learner::Dataset& data,
                              const mixnet::PublicKeyCipher& cipher);

learner::Dataset build_dataset(const ExperimentConfig& config);
learner::Dataset build_test_dataset(const ExperimentConfig& config);

// Resolves model dimensions against the loaded dataset (and builds the
// fixed random feature map when one is configured).
void bind_model_dims(ExperimentConfig& config, const learner::Dataset& data);

struct ExperimentResult {
  learner::TrainReport report;
  nlohmann::json result_json;
  bool aborted = false;
  std::string abort_reason;
  bool mixnet_tamper_detected = false;
  std::shared_ptr<Transcript> transcript;
  // reveal_noise_share adversaries: party id -> per-step noise shares.
  std::map<int, std::vector<std::vector<double>>> revealed_noise;
};

// Full experiment: dataset, token list, training, result files under
// config.out_dir (result.json plus curve CSVs). dp_smc and nonprivate
// configs run the threaded multi-party engine over the configured
// transport; trusted and ldp run the centralized reference engine.
ExperimentResult run_experiment(const ExperimentConfig& config);

// Transport endpoint count the distributed engine needs: one per party
// plus dedicated aggregation-role endpoints.
int distributed_endpoints(const ExperimentConfig& config);

// In-process distributed engine, exposed for oracle comparisons: same
// rounds, real transport, one thread per party.
ExperimentResult run_distributed_training(
    const ExperimentConfig& config, const learner::Dataset& train,
    const learner::Dataset* test, const learner::TokenAssignment* tokens,
    Transport& transport);

nlohmann::json report_to_json(const learner::TrainReport& report);

void write_result_files(const ExperimentConfig& config,
                        const ExperimentResult& result);

}  // namespace silofl::harness
