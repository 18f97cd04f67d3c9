#include "silofl/securesum.hpp"

#include <algorithm>
#include <set>
#include <string>

#include "silofl/log.hpp"

namespace silofl::securesum {

PairwiseKeyring make_keyring(const prg::Seed& master, int party_id,
                             std::span<const int> party_ids) {
  PairwiseKeyring keyring;
  keyring.party_id = party_id;
  for (int peer : party_ids) {
    if (peer == party_id) continue;
    const int lo = std::min(party_id, peer);
    const int hi = std::max(party_id, peer);
    const std::string tag = "pair:" + std::to_string(lo) + ":" + std::to_string(hi);
    keyring.pair_seeds[peer] = prg::derive_seed(master, tag);
  }
  return keyring;
}

FixedVector derive_pairwise_masks(const PairwiseKeyring& keyring,
                                  std::uint64_t counter, std::size_t length,
                                  const FixedPointCodec& codec) {
  codec.validate();
  FixedVector total = zero_vector(length, codec);
  const std::uint64_t mask = codec.modulus_mask();
  for (const auto& [peer, seed] : keyring.pair_seeds) {
    const bool negate = keyring.party_id > peer;
    for (std::size_t e = 0; e < length; ++e) {
      std::uint64_t word = prg::keystream_word(seed, counter, e) & mask;
      if (negate) {
        word = (~word + 1) & mask;
      }
      total.values[e] = (total.values[e] + word) & mask;
    }
  }
  return total;
}

FixedVector pairwise_encrypt(const FixedVector& y,
                             const PairwiseKeyring& keyring,
                             std::uint64_t counter) {
  const FixedVector masks =
      derive_pairwise_masks(keyring, counter, y.size(), y.codec);
  return add_mod(y, masks);
}

FixedVector pairwise_aggregate(std::span<const FixedVector> messages,
                               std::size_t expected_count) {
  if (messages.empty() || messages.size() != expected_count) {
    throw IncompleteRound("pairwise_aggregate: got " +
                          std::to_string(messages.size()) + " of " +
                          std::to_string(expected_count) + " messages");
  }
  FixedVector total = messages[0];
  for (std::size_t i = 1; i < messages.size(); ++i) {
    total = add_mod(total, messages[i]);
  }
  return total;
}

ShareSet dca_make_shares(const FixedVector& y, int node_count,
                         prg::DeterministicRng& rng) {
  std::vector<int> ids(static_cast<std::size_t>(std::max(node_count, 0)));
  for (int l = 0; l < node_count; ++l) ids[static_cast<std::size_t>(l)] = l;
  return dca_make_shares(y, ids, rng);
}

ShareSet dca_make_shares(const FixedVector& y, std::span<const int> node_ids,
                         prg::DeterministicRng& rng) {
  if (node_ids.empty()) {
    throw ConfigError("dca_make_shares: at least one compute node required");
  }
  const std::size_t m = node_ids.size();
  const FixedPointCodec& codec = y.codec;
  const std::uint64_t mask = codec.modulus_mask();

  ShareSet out;
  out.node_ids.assign(node_ids.begin(), node_ids.end());
  out.degenerate = (m == 1);
  if (out.degenerate) {
    log::warn("dca_make_shares: single compute node, shares carry the "
              "payload in the clear");
  }

  // u_1..u_{m-1} uniform on [0,R); u_m balances them to zero mod R.
  out.shares.reserve(m);
  FixedVector balance = zero_vector(y.size(), codec);
  for (std::size_t l = 0; l + 1 < m; ++l) {
    FixedVector u = zero_vector(y.size(), codec);
    for (auto& v : u.values) {
      v = rng.next_u64() & mask;
    }
    balance = add_mod(balance, u);
    out.shares.push_back(std::move(u));
  }
  out.shares.push_back(negate_mod(balance));

  // Payload rides on the share addressed to the first listed node.
  out.shares[0] = add_mod(out.shares[0], y);
  return out;
}

AggregateReport dca_node_aggregate(std::span<const FixedVector> messages,
                                   std::size_t expected_count, int node_id) {
  if (messages.empty() || messages.size() != expected_count) {
    throw IncompleteRound("dca_node_aggregate: node " +
                          std::to_string(node_id) + " got " +
                          std::to_string(messages.size()) + " of " +
                          std::to_string(expected_count) + " messages");
  }
  AggregateReport report;
  report.node_id = node_id;
  report.contributor_count = messages.size();
  report.partial_sum = messages[0];
  for (std::size_t i = 1; i < messages.size(); ++i) {
    report.partial_sum = add_mod(report.partial_sum, messages[i]);
  }
  return report;
}

FixedVector dca_finalize(std::span<const AggregateReport> reports,
                         std::size_t expected_nodes) {
  if (reports.empty() || reports.size() != expected_nodes) {
    throw IncompleteRound("dca_finalize: got " +
                          std::to_string(reports.size()) + " of " +
                          std::to_string(expected_nodes) + " node reports");
  }
  std::set<int> seen;
  for (const auto& r : reports) {
    if (!seen.insert(r.node_id).second) {
      throw IncompleteRound("dca_finalize: duplicate report from node " +
                            std::to_string(r.node_id));
    }
  }
  FixedVector total = reports[0].partial_sum;
  for (std::size_t i = 1; i < reports.size(); ++i) {
    total = add_mod(total, reports[i].partial_sum);
  }
  return total;
}

}  // namespace silofl::securesum
