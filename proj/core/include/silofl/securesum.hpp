#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "silofl/fixedpoint.hpp"
#include "silofl/prg.hpp"

namespace silofl::securesum {

// --- Pairwise-mask summation (few fat clients) ------------------------------
//
// Every pair of parties shares a seed; each round both expand it to the same
// keystream and one side negates, so the masks cancel in the aggregate:
// k_ij + k_ji = 0 mod R. Key agreement is abstracted to pre-shared seeds.

struct PairwiseKeyring {
  int party_id = 0;
  // Peer id -> shared pair seed. seed(i,j) == seed(j,i) by construction.
  std::map<int, prg::Seed> pair_seeds;
};

// Builds the keyring for `party_id` among `party_ids`, deriving the seed for
// pair (i,j), i<j, as derive_seed(master, "pair:i:j").
PairwiseKeyring make_keyring(const prg::Seed& master, int party_id,
                             std::span<const int> party_ids);

// Sum over peers of k_ij mod R at the given round counter. Element e of the
// raw pair stream is keystream_word(seed, counter, e) reduced mod R; the
// lexicographically larger party of each pair negates its copy.
FixedVector derive_pairwise_masks(const PairwiseKeyring& keyring,
                                  std::uint64_t counter, std::size_t length,
                                  const FixedPointCodec& codec);

// y + sum of this party's masks mod R: the message sent to the aggregator.
FixedVector pairwise_encrypt(const FixedVector& y,
                             const PairwiseKeyring& keyring,
                             std::uint64_t counter);

// Modular sum of all N messages; the masks cancel and the payload sum
// remains. Aborts with IncompleteRound unless exactly `expected_count`
// messages arrived (the protocol has no dropout recovery).
FixedVector pairwise_aggregate(std::span<const FixedVector> messages,
                               std::size_t expected_count);

// --- Distributed Compute Algorithm (many thin clients) ----------------------

struct ShareSet {
  // Target compute node ids, parallel to `shares`. shares[0] carries the
  // payload; the rest are pure masks summing to the negation of shares[0]'s
  // mask, so everything adds back to y mod R.
  std::vector<int> node_ids;
  std::vector<FixedVector> shares;
  bool degenerate = false;  // true when only one node was requested
};

struct AggregateReport {
  int node_id = 0;
  FixedVector partial_sum;
  std::size_t contributor_count = 0;
};

// Additive share split of y across `node_count` nodes with ids 0..M-1.
ShareSet dca_make_shares(const FixedVector& y, int node_count,
                         prg::DeterministicRng& rng);

// Subset variant: shares only for the listed nodes (client-to-node
// assignment maps from config). Privacy then rests on one honest node
// per subset.
ShareSet dca_make_shares(const FixedVector& y, std::span<const int> node_ids,
                         prg::DeterministicRng& rng);

// Node-side sum q_l of all client messages addressed to this node.
AggregateReport dca_node_aggregate(std::span<const FixedVector> messages,
                                   std::size_t expected_count, int node_id);

// Final aggregator: sum of the q_l equals the payload sum mod R. Requires
// exactly one report per expected node.
FixedVector dca_finalize(std::span<const AggregateReport> reports,
                         std::size_t expected_nodes);

}  // namespace silofl::securesum
