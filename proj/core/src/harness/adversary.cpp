#include "silofl/harness/adversary.hpp"

#include <atomic>
#include <thread>

#include "silofl/securesum.hpp"

namespace silofl::harness {

namespace {

struct SharedState {
  std::mutex mutex;
  std::map<int, std::vector<double>> revealed;
  std::exception_ptr failure;
  std::atomic<bool> failed{false};

  void record_failure() {
    if (!failed.exchange(true)) {
      std::lock_guard<std::mutex> lock(mutex);
      failure = std::current_exception();
    }
  }
};

}  // namespace

int secure_round_endpoints(const SecureRoundSpec& spec) {
  const auto clients = static_cast<int>(spec.payloads.size());
  const bool pairwise = spec.protocol == learner::SumProtocol::kPairwise;
  return clients + (pairwise ? 0 : spec.compute_nodes) + 1;
}

SecureRoundResult run_secure_round(const SecureRoundSpec& spec,
                                   Transport& raw_transport,
                                   Transcript* transcript) {
  const auto clients = static_cast<int>(spec.payloads.size());
  if (clients < 1) {
    throw ConfigError("run_secure_round: no clients");
  }
  const std::size_t dim = spec.payloads[0].size();
  for (const auto& p : spec.payloads) {
    if (p.size() != dim) {
      throw LengthMismatch("run_secure_round: payload dims differ");
    }
  }
  const bool pairwise = spec.protocol == learner::SumProtocol::kPairwise;
  const int nodes = pairwise ? 0 : spec.compute_nodes;
  const int node_base = clients;       // DCA node endpoints
  const int master = clients + nodes;  // aggregating master endpoint
  const auto timeout = std::chrono::milliseconds(spec.timeout_ms);

  std::unique_ptr<RecordingTransport> recording;
  Transport* transport = &raw_transport;
  if (transcript != nullptr) {
    recording = std::make_unique<RecordingTransport>(raw_transport, *transcript);
    transport = recording.get();
  }

  std::vector<int> client_ids(static_cast<std::size_t>(clients));
  for (int i = 0; i < clients; ++i) client_ids[static_cast<std::size_t>(i)] = i;

  SharedState shared;
  SecureRoundResult result;

  auto client_task = [&](int id) {
    try {
      if (spec.silent_clients.count(id) > 0) {
        return;  // induced dropout: contributes nothing this round
      }
      prg::DeterministicRng noise_rng(
          prg::derive_seed(spec.seed, "noise:" + std::to_string(id)),
          spec.round);
      std::vector<double> y = spec.payloads[static_cast<std::size_t>(id)];
      std::vector<double> noise(dim, 0.0);
      if (spec.per_party_sigma > 0.0) {
        noise_rng.fill_gaussian(noise, spec.per_party_sigma);
        for (std::size_t c = 0; c < dim; ++c) y[c] += noise[c];
      }
      double substitution = 0.0;
      for (const auto& adv : spec.adversaries) {
        if (adv.party_id != id) continue;
        switch (adv.behavior) {
          case AdversaryBehavior::kRevealNoiseShare: {
            std::lock_guard<std::mutex> lock(shared.mutex);
            shared.revealed[id] = noise;
            break;
          }
          case AdversaryBehavior::kSubstituteMessage:
            substitution = adv.substitution_delta;
            break;
          default:
            break;  // other behaviors act outside summation rounds
        }
      }
      FixedVector enc = encode_clamped(y, spec.codec);
      if (substitution != 0.0) {
        // Tampering happens on the wire value, after honest encoding.
        const std::vector<double> delta_vec{substitution};
        const FixedVector delta = encode_clamped(delta_vec, spec.codec);
        enc.values[0] = spec.codec.reduce(enc.values[0] + delta.values[0]);
      }
      WireHeader header;
      header.round = spec.round;
      header.sender = static_cast<std::uint32_t>(id);
      if (pairwise) {
        const auto keyring =
            securesum::make_keyring(spec.seed, id, client_ids);
        const FixedVector masked =
            securesum::pairwise_encrypt(enc, keyring, spec.round);
        header.protocol_id = kProtoPairwise;
        header.node = 0;
        transport->send(id, master, encode_vector_message(header, masked));
      } else {
        prg::DeterministicRng share_rng(
            prg::derive_seed(spec.seed, "share:" + std::to_string(id)),
            spec.round);
        const auto shares =
            securesum::dca_make_shares(enc, spec.compute_nodes, share_rng);
        for (std::size_t s = 0; s < shares.shares.size(); ++s) {
          header.protocol_id = kProtoDcaShare;
          header.node = static_cast<std::uint32_t>(shares.node_ids[s]);
          transport->send(id, node_base + shares.node_ids[s],
                          encode_vector_message(header, shares.shares[s]));
        }
      }
    } catch (...) {
      shared.record_failure();
    }
  };

  auto node_task = [&](int node_id) {
    try {
      std::vector<FixedVector> messages;
      for (int from = 0; from < clients; ++from) {
        auto bytes = transport->receive(node_base + node_id, from, timeout);
        messages.push_back(decode_vector_message(bytes, spec.codec));
      }
      const auto report = securesum::dca_node_aggregate(
          messages, static_cast<std::size_t>(clients), node_id);
      WireHeader header;
      header.protocol_id = kProtoNodeReport;
      header.round = spec.round;
      header.sender = static_cast<std::uint32_t>(node_base + node_id);
      header.node = static_cast<std::uint32_t>(node_id);
      transport->send(node_base + node_id, master,
                      encode_vector_message(header, report.partial_sum));
    } catch (...) {
      shared.record_failure();
    }
  };

  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(clients + nodes));
  for (int id = 0; id < clients; ++id) {
    threads.emplace_back(client_task, id);
  }
  for (int l = 0; l < nodes; ++l) {
    threads.emplace_back(node_task, l);
  }

  try {
    if (pairwise) {
      std::vector<FixedVector> messages;
      for (int from = 0; from < clients; ++from) {
        auto bytes = transport->receive(master, from, timeout);
        messages.push_back(decode_vector_message(bytes, spec.codec));
      }
      const FixedVector sum = securesum::pairwise_aggregate(
          messages, static_cast<std::size_t>(clients));
      result.decoded_sum = decode(sum);
    } else {
      std::vector<securesum::AggregateReport> reports;
      for (int l = 0; l < nodes; ++l) {
        auto bytes = transport->receive(master, node_base + l, timeout);
        securesum::AggregateReport report;
        report.node_id = l;
        report.contributor_count = static_cast<std::size_t>(clients);
        report.partial_sum = decode_vector_message(bytes, spec.codec);
        reports.push_back(std::move(report));
      }
      const FixedVector sum =
          securesum::dca_finalize(reports, static_cast<std::size_t>(nodes));
      result.decoded_sum = decode(sum);
    }
  } catch (const TransportTimeout& e) {
    for (auto& t : threads) t.join();
    throw IncompleteRound(e.what());
  } catch (...) {
    for (auto& t : threads) t.join();
    throw;
  }

  for (auto& t : threads) t.join();
  if (shared.failed.load()) {
    std::lock_guard<std::mutex> lock(shared.mutex);
    std::rethrow_exception(shared.failure);
  }
  result.revealed_noise = shared.revealed;
  return result;
}

}  // namespace silofl::harness
