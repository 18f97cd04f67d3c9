#pragma once

#include <map>
#include <set>
#include <vector>

#include "silofl/dpnoise.hpp"
#include "silofl/harness/config.hpp"
#include "silofl/harness/transcript.hpp"
#include "silofl/harness/transport.hpp"

namespace silofl::harness {

// One secure-summation round over a real transport, with one thread per
// party and adversary behaviors applied strictly at the message
// interface. Used by graceful-degradation measurements and the
// transport-equivalence suite.
struct SecureRoundSpec {
  learner::SumProtocol protocol = learner::SumProtocol::kPairwise;
  int compute_nodes = 2;  // DCA
  FixedPointCodec codec;
  prg::Seed seed{};
  std::uint64_t round = 0;
  double per_party_sigma = 0.0;  // DP noise each client adds (0 = none)
  std::vector<std::vector<double>> payloads;  // one per client
  std::vector<AdversaryConfig> adversaries;
  std::set<int> silent_clients;  // induced drops: these clients never send
  int timeout_ms = 5000;
};

struct SecureRoundResult {
  std::vector<double> decoded_sum;
  // Noise shares published by reveal_noise_share adversaries.
  std::map<int, std::vector<double>> revealed_noise;
};

// Transport endpoint layout: clients 0..N-1, then DCA compute nodes, then
// the aggregating master last. Build the transport with this many
// endpoints.
int secure_round_endpoints(const SecureRoundSpec& spec);

SecureRoundResult run_secure_round(const SecureRoundSpec& spec,
                                   Transport& transport,
                                   Transcript* transcript = nullptr);

}  // namespace silofl::harness
