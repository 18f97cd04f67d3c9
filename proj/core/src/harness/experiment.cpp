#include "silofl/harness/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <thread>

#include "silofl/log.hpp"
#include "silofl/projection.hpp"
#include "silofl/sampling.hpp"
#include "silofl/securesum.hpp"

namespace silofl::harness {

namespace {

using learner::Dataset;
using learner::Regime;
using learner::SumProtocol;
using learner::TokenAssignment;
using learner::TrainReport;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

prg::Seed client_seed(const prg::Seed& master, const char* role, int index) {
  return prg::derive_seed(master,
                          std::string(role) + ":" + std::to_string(index));
}

}  // namespace

Dataset build_dataset(const ExperimentConfig& config) {
  Dataset data;
  switch (config.data.kind) {
    case DataConfig::Kind::kSynthetic:
      data = learner::make_synthetic(config.data.n, config.data.features,
                                     config.data.separation, config.seed);
      break;
    case DataConfig::Kind::kCsv:
      data = learner::load_csv(config.data.path, config.data.label_column);
      break;
    case DataConfig::Kind::kImage:
      data = learner::load_image_binary(config.data.path);
      break;
  }
  // Partition by the client parties' declared sample counts; all-zero
  // counts mean a uniform split.
  std::vector<std::size_t> counts;
  for (const auto& p : config.parties) {
    if (p.client) counts.push_back(p.local_samples);
  }
  const bool all_zero =
      std::all_of(counts.begin(), counts.end(),
                  [](std::size_t c) { return c == 0; });
  if (all_zero) {
    learner::partition_uniform(data, counts.size());
  } else {
    std::size_t total = 0;
    for (std::size_t c : counts) total += c;
    if (total != data.size()) {
      throw ConfigError("party sample counts sum to " + std::to_string(total) +
                        " but the dataset has " + std::to_string(data.size()));
    }
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    std::size_t begin = 0;
    for (std::size_t c : counts) {
      ranges.emplace_back(begin, begin + c);
      begin += c;
    }
    learner::partition_explicit(data, std::move(ranges));
  }
  return data;
}

Dataset build_test_dataset(const ExperimentConfig& config) {
  if (config.data.kind != DataConfig::Kind::kSynthetic) {
    throw ConfigError("test split is only generated for synthetic data");
  }
  return learner::make_synthetic(config.data.test_n, config.data.features,
                                 config.data.separation,
                                 prg::derive_seed(config.seed, "testdata"));
}

void bind_model_dims(ExperimentConfig& config, const Dataset& data) {
  auto& model = config.train.model;
  model.input_dim = data.feature_dim;
  if (config.frozen_width > 0) {
    model.frozen_features = learner::make_frozen_map(
        data.feature_dim, static_cast<std::size_t>(config.frozen_width),
        prg::derive_seed(config.seed, "frozenmap"));
  }
}

MixnetOutcome make_token_list(const ExperimentConfig& config,
                              const Dataset& data,
                              const mixnet::PublicKeyCipher& cipher) {
  MixnetOutcome outcome;
  const auto clients = config.client_ids();
  const auto n_clients = clients.size();
  if (data.party_count() != n_clients) {
    throw ConfigError("dataset partition does not match client count");
  }

  // Per-client tokens, unique across the whole roster.
  std::vector<std::vector<Token>> per_party(n_clients);
  std::set<Token> all;
  for (std::size_t k = 0; k < n_clients; ++k) {
    prg::DeterministicRng rng(client_seed(config.seed, "token",
                                          static_cast<int>(k)), 0);
    auto& mine = per_party[k];
    while (mine.size() < data.party_size(k)) {
      Token t;
      for (std::size_t b = 0; b < kTokenBytes; b += 8) {
        const std::uint64_t w = rng.next_u64();
        for (std::size_t i = 0; i < 8; ++i) {
          t[b + i] = static_cast<std::uint8_t>(w >> (8 * i));
        }
      }
      if (!all.insert(t).second) {
        throw Error("token collision during setup");
      }
      mine.push_back(t);
    }
  }

  std::vector<std::uint64_t> counts;
  counts.reserve(n_clients);
  for (std::size_t k = 0; k < n_clients; ++k) {
    counts.push_back(data.party_size(k));
  }
  const auto roster = mixnet::roster_hash(clients, counts);

  // Reuse a persisted list when the roster matches exactly.
  if (!config.token_list_path.empty() &&
      std::filesystem::exists(config.token_list_path)) {
    const auto loaded = mixnet::load_token_list(config.token_list_path);
    if (loaded.roster != roster ||
        loaded.party_count != static_cast<int>(n_clients) ||
        loaded.tokens.size() != all.size()) {
      throw ConfigError("persisted token list does not match this roster: " +
                        config.token_list_path);
    }
    std::set<Token> on_list(loaded.tokens.begin(), loaded.tokens.end());
    for (const auto& party : per_party) {
      for (const auto& t : party) {
        if (on_list.find(t) == on_list.end()) {
          throw ConfigError("persisted token list is missing local tokens");
        }
      }
    }
    outcome.assignment.shared_list = loaded.tokens;
    outcome.assignment.per_party = std::move(per_party);
    outcome.loaded_from_file = true;
    return outcome;
  }

  // Fresh run of the mix: onion-encrypt under the client ordering, then
  // each client peels and shuffles in turn, with everyone checking the
  // published list after every step.
  std::vector<mixnet::KeyPair> keys;
  std::vector<std::vector<std::uint8_t>> public_keys;
  for (std::size_t k = 0; k < n_clients; ++k) {
    keys.push_back(cipher.keygen_from_seed(
        static_cast<int>(k), client_seed(config.seed, "pke",
                                         static_cast<int>(k))));
    public_keys.push_back(keys.back().public_key);
  }

  std::vector<std::vector<std::vector<std::uint8_t>>> onions(n_clients);
  for (std::size_t k = 0; k < n_clients; ++k) {
    for (const auto& t : per_party[k]) {
      onions[k].push_back(mixnet::onion_encrypt(t, public_keys, cipher));
    }
  }
  mixnet::TokenList list =
      mixnet::build_initial_list(onions, static_cast<int>(n_clients));
  const std::size_t expected = list.total_count;

  auto adversary_of = [&](int party_id) -> const AdversaryConfig* {
    for (const auto& a : config.adversaries) {
      if (a.party_id == party_id) return &a;
    }
    return nullptr;
  };

  for (std::size_t k = 0; k < n_clients; ++k) {
    prg::DeterministicRng mix_rng(client_seed(config.seed, "mix",
                                              static_cast<int>(k)), 0);
    try {
      list = mixnet::mix_step(list, keys[k], cipher, mix_rng);
    } catch (const DecryptionFailure& e) {
      // A corrupted ciphertext from an earlier mixer fails authentication
      // here; that is itself a detection.
      outcome.tamper_detected = true;
      outcome.tamper_reason =
          "at mix step " + std::to_string(k) + ": " + e.what();
      return outcome;
    }

    // Malicious mixers manipulate only the list they publish.
    if (const auto* adv = adversary_of(clients[k])) {
      if (adv->behavior == AdversaryBehavior::kDropToken) {
        list.entries.pop_back();
      } else if (adv->behavior == AdversaryBehavior::kSubstituteMessage) {
        auto& victim = list.entries.front();
        prg::DeterministicRng garbage(client_seed(config.seed, "garbage",
                                                  static_cast<int>(k)), 0);
        for (auto& byte : victim) {
          byte = static_cast<std::uint8_t>(garbage.next_u64());
        }
      }
    }

    // Every party checks the published list after every round.
    for (std::size_t v = 0; v < n_clients; ++v) {
      const auto verdict = mixnet::verify_round(list, per_party[v], expected);
      if (!verdict.clean()) {
        outcome.tamper_detected = true;
        outcome.tamper_reason = "after mix step " + std::to_string(k) + ": " +
                                verdict.reason;
        return outcome;
      }
    }
  }

  for (std::size_t v = 0; v < n_clients; ++v) {
    const auto verdict = mixnet::verify_round(list, per_party[v], expected);
    if (!verdict.clean()) {
      outcome.tamper_detected = true;
      outcome.tamper_reason = "at layer 0: " + verdict.reason;
      return outcome;
    }
  }

  outcome.assignment.shared_list = mixnet::plaintext_tokens(list);
  outcome.assignment.per_party = std::move(per_party);
  if (!config.token_list_path.empty()) {
    mixnet::save_token_list(config.token_list_path,
                            outcome.assignment.shared_list,
                            static_cast<int>(n_clients), roster);
  }
  return outcome;
}

// --- distributed engine -------------------------------------------------

int distributed_endpoints(const ExperimentConfig& config) {
  const int parties = static_cast<int>(config.parties.size());
  const bool pairwise =
      config.train.protocol.protocol == SumProtocol::kPairwise;
  return parties + (pairwise ? 1 : config.train.protocol.compute_nodes) + 1;
}

namespace {

struct EngineShared {
  std::atomic<bool> abort{false};
  std::mutex mutex;
  std::string abort_reason;
  std::map<int, std::vector<std::vector<double>>> revealed;
  learner::PhaseTimings timings;
  std::uint64_t uploaded_bytes = 0;

  void fail(const std::string& reason) {
    bool expected = false;
    if (abort.compare_exchange_strong(expected, true)) {
      std::lock_guard<std::mutex> lock(mutex);
      abort_reason = reason;
    }
  }
  void add_gradient_time(double s) {
    std::lock_guard<std::mutex> lock(mutex);
    timings.gradient_s += s;
  }
  void add_mask_time(double s) {
    std::lock_guard<std::mutex> lock(mutex);
    timings.mask_s += s;
  }
  void add_transport_time(double s) {
    std::lock_guard<std::mutex> lock(mutex);
    timings.transport_s += s;
  }
  void add_aggregate_time(double s) {
    std::lock_guard<std::mutex> lock(mutex);
    timings.aggregate_s += s;
  }
  void add_upload(std::uint64_t bytes) {
    std::lock_guard<std::mutex> lock(mutex);
    uploaded_bytes += bytes;
  }
};

}  // namespace

ExperimentResult run_distributed_training(const ExperimentConfig& config,
                                          const Dataset& train,
                                          const Dataset* test,
                                          const TokenAssignment* tokens,
                                          Transport& raw_transport) {
  const auto& tc = config.train;
  learner::validate_train_config(tc, train);

  const auto clients = config.client_ids();
  const auto n_clients = clients.size();
  const int master = config.master_id();
  const bool pairwise = tc.protocol.protocol == SumProtocol::kPairwise;
  const auto node_parties = config.compute_node_ids();
  const auto timeout = std::chrono::milliseconds(config.timeout_ms);

  // Role endpoints: a party's aggregation duties get their own transport
  // address (like a second port), so concurrent roles on one party never
  // contend for the same mailbox. Clients use their party id.
  const int parties_total = static_cast<int>(config.parties.size());
  const int aggregator_ep = parties_total;  // pairwise aggregator
  auto node_ep = [&](int node_id) { return parties_total + node_id; };
  const int master_ep =
      parties_total + (pairwise ? 1 : tc.protocol.compute_nodes);

  // Client index within the protocol (partition order) for each party id.
  std::map<int, int> client_index;
  for (std::size_t k = 0; k < n_clients; ++k) {
    client_index[clients[k]] = static_cast<int>(k);
  }

  ExperimentResult result;
  result.transcript = std::make_shared<Transcript>();
  RecordingTransport transport(raw_transport, *result.transcript);

  const bool private_run = tc.regime == Regime::kDpSmc;
  const double clip_bound =
      tc.regime == Regime::kNonprivate
          ? std::numeric_limits<double>::infinity()
          : tc.relation == learner::NeighbourRelation::kSubstitution
              ? tc.clip_norm / 2.0
              : tc.clip_norm;

  std::optional<projection::ProjectionSpec> pspec;
  if (tc.projection) {
    learner::Model probe(tc.model);
    pspec = projection::make_spec(probe.param_count(),
                                  tc.projection->projection_dim,
                                  prg::derive_seed(tc.seed, "projseed"),
                                  tc.clip_norm, tc.projection->delta_prime);
  }
  const double sensitivity =
      pspec ? pspec->proj_sensitivity : tc.clip_norm;
  const double sigma_total =
      private_run ? tc.noise_multiplier * sensitivity : 0.0;
  std::optional<dpnoise::NoisePlan> plan;
  if (private_run) {
    plan = dpnoise::plan_noise(sigma_total, static_cast<int>(n_clients),
                               tc.colluders, tc.noise_mode);
  }

  const bool swor = tc.batch.scheme == sampling::Scheme::kSwor;
  TokenAssignment fallback;
  const TokenAssignment* token_view = tokens;
  if (swor && token_view == nullptr) {
    fallback = learner::synthesize_tokens(train, tc.seed);
    token_view = &fallback;
  }
  const double batch_divisor =
      swor ? static_cast<double>(tc.batch.batch_size)
           : tc.batch.gamma * static_cast<double>(train.size());

  // Pairwise groups, keyed by client index (matches the centralized
  // engine's mask streams exactly).
  std::vector<std::vector<int>> groups;
  if (pairwise) {
    const std::size_t g = tc.protocol.group_size
                              ? static_cast<std::size_t>(*tc.protocol.group_size)
                              : n_clients;
    for (std::size_t begin = 0; begin < n_clients; begin += g) {
      const std::size_t end = std::min(begin + g, n_clients);
      std::vector<int> group;
      for (std::size_t k = begin; k < end; ++k) group.push_back(static_cast<int>(k));
      groups.push_back(std::move(group));
    }
  }
  auto group_of = [&](int k) -> const std::vector<int>& {
    for (const auto& group : groups) {
      if (std::find(group.begin(), group.end(), k) != group.end()) {
        return group;
      }
    }
    throw Error("client not in any pairwise group");
  };

  // DCA node assignment by client index; node l lives on party
  // node_parties[l].
  std::vector<std::vector<int>> node_assignment;
  std::vector<std::size_t> node_expected;
  if (!pairwise) {
    node_assignment.resize(n_clients);
    std::vector<int> all_nodes;
    for (int l = 0; l < tc.protocol.compute_nodes; ++l) all_nodes.push_back(l);
    node_expected.assign(static_cast<std::size_t>(tc.protocol.compute_nodes), 0);
    for (std::size_t k = 0; k < n_clients; ++k) {
      auto it = tc.protocol.node_subsets.find(static_cast<int>(k));
      node_assignment[k] =
          it != tc.protocol.node_subsets.end() ? it->second : all_nodes;
      for (int l : node_assignment[k]) {
        ++node_expected[static_cast<std::size_t>(l)];
      }
    }
  }

  EngineShared shared;
  TrainReport report;

  // Master-owned model and metrics.
  learner::Model master_model(tc.model);
  master_model.init_params(tc.seed);
  const std::size_t d = master_model.param_count();
  const std::size_t agg_dim = pspec ? pspec->projection_dim : d;

  auto record_metrics = [&](int step) {
    learner::StepMetrics m;
    m.step = step;
    m.loss = learner::evaluate_loss(master_model, train);
    m.accuracy = learner::evaluate_accuracy(master_model, train);
    report.train_curve.push_back(m);
    if (test != nullptr) {
      learner::StepMetrics t;
      t.step = step;
      t.loss = learner::evaluate_loss(master_model, *test);
      t.accuracy = learner::evaluate_accuracy(master_model, *test);
      report.test_curve.push_back(t);
    }
  };
  record_metrics(0);

  prg::Seed joint_seed{};
  if (swor) {
    // Setup-phase commit-reveal, modelled in-process: contributions and
    // the XOR combine are exactly what the message exchange would carry.
    joint_seed = [&] {
      std::vector<prg::Seed> contributions;
      for (std::size_t k = 0; k < n_clients; ++k) {
        prg::DeterministicRng rng(client_seed(tc.seed, "batchseed",
                                              static_cast<int>(k)), 0);
        prg::Seed s;
        for (std::size_t i = 0; i < s.size(); i += 8) {
          const std::uint64_t w = rng.next_u64();
          for (std::size_t b = 0; b < 8; ++b) {
            s[i + b] = static_cast<std::uint8_t>(w >> (8 * b));
          }
        }
        contributions.push_back(s);
      }
      return sampling::combine_contributions(contributions);
    }();
  }

  auto adversary_of = [&](int party_id) -> const AdversaryConfig* {
    for (const auto& a : config.adversaries) {
      if (a.party_id == party_id) return &a;
    }
    return nullptr;
  };

  // --- per-party thread bodies -------------------------------------------

  auto client_loop = [&](int party_id) {
    const int k = client_index.at(party_id);
    try {
      learner::Model model(tc.model);
      prg::DeterministicRng noise_rng(client_seed(tc.seed, "noise", k), 0);
      prg::DeterministicRng share_rng(client_seed(tc.seed, "share", k), 0);
      std::optional<securesum::PairwiseKeyring> keyring;
      if (pairwise) {
        keyring = securesum::make_keyring(tc.seed, k, group_of(k));
      }
      const auto* adv = adversary_of(party_id);

      for (int step = 0; step < tc.steps; ++step) {
        if (shared.abort.load()) return;
        // Receive the model broadcast.
        auto recv_start = Clock::now();
        const auto theta_bytes =
            transport.receive(party_id, master_ep, timeout);
        shared.add_transport_time(seconds_since(recv_start));
        const auto theta = decode_real_message(theta_bytes);
        std::copy(theta.begin(), theta.end(),
                  model.mutable_params().begin());

        // Local batch.
        std::vector<std::size_t> indices;
        const std::size_t base = train.partition[static_cast<std::size_t>(k)].first;
        if (swor) {
          sampling::BatchSpec spec;
          spec.scheme = sampling::Scheme::kSwor;
          spec.batch_size = tc.batch.batch_size;
          spec.joint_seed = joint_seed;
          spec.round = static_cast<std::uint64_t>(step);
          const auto selected =
              sampling::select_batch_swor(token_view->shared_list, spec);
          for (std::size_t j : sampling::local_batch(
                   selected, token_view->per_party[static_cast<std::size_t>(k)])) {
            indices.push_back(base + j);
          }
        } else {
          prg::DeterministicRng rng(client_seed(tc.seed, "poisson", k),
                                    static_cast<std::uint64_t>(step));
          for (std::size_t j : sampling::select_batch_poisson(
                   train.party_size(static_cast<std::size_t>(k)),
                   tc.batch.gamma, rng)) {
            indices.push_back(base + j);
          }
        }

        // Gradients and the local contribution vector.
        auto grad_start = Clock::now();
        const auto grads = learner::per_example_clipped_grads(
            model, train.features, train.feature_dim, train.labels, indices,
            clip_bound);
        std::vector<double> v;
        if (pspec) {
          const auto proj = projection::generate_projection(
              *pspec, tc.projection->resample_per_step
                          ? static_cast<std::uint64_t>(step)
                          : 0);
          v = projection::project_and_sum(
              grads, proj,
              private_run ? clip_bound
                          : std::numeric_limits<double>::infinity());
        } else {
          v.assign(d, 0.0);
          for (const auto& g : grads) {
            for (std::size_t c = 0; c < d; ++c) v[c] += g[c];
          }
        }
        shared.add_gradient_time(seconds_since(grad_start));

        // Noise share, encoding, protocol message(s).
        auto mask_start = Clock::now();
        if (plan) {
          auto noise = dpnoise::sample_noise_share(*plan, agg_dim, noise_rng);
          if (adv != nullptr &&
              adv->behavior == AdversaryBehavior::kRevealNoiseShare) {
            std::lock_guard<std::mutex> lock(shared.mutex);
            auto& mine = shared.revealed[party_id];
            mine.resize(static_cast<std::size_t>(tc.steps));
            mine[static_cast<std::size_t>(step)] = noise;
          }
          for (std::size_t c = 0; c < agg_dim; ++c) v[c] += noise[c];
        }
        FixedVector enc = encode_clamped(v, tc.codec);
        if (adv != nullptr &&
            adv->behavior == AdversaryBehavior::kSubstituteMessage) {
          const std::vector<double> delta_vec{adv->substitution_delta};
          const FixedVector delta = encode_clamped(delta_vec, tc.codec);
          enc.values[0] = tc.codec.reduce(enc.values[0] + delta.values[0]);
        }

        WireHeader header;
        header.round = static_cast<std::uint64_t>(step);
        header.sender = static_cast<std::uint32_t>(party_id);
        if (pairwise) {
          const FixedVector masked = securesum::pairwise_encrypt(
              enc, *keyring, static_cast<std::uint64_t>(step));
          header.protocol_id = kProtoPairwise;
          shared.add_mask_time(seconds_since(mask_start));
          transport.send(party_id, aggregator_ep,
                         encode_vector_message(header, masked));
          shared.add_upload(masked.size() * tc.codec.element_bytes());
        } else {
          const auto shares = securesum::dca_make_shares(
              enc, node_assignment[static_cast<std::size_t>(k)], share_rng);
          header.protocol_id = kProtoDcaShare;
          shared.add_mask_time(seconds_since(mask_start));
          for (std::size_t s = 0; s < shares.shares.size(); ++s) {
            header.node = static_cast<std::uint32_t>(shares.node_ids[s]);
            transport.send(party_id, node_ep(shares.node_ids[s]),
                           encode_vector_message(header, shares.shares[s]));
            shared.add_upload(shares.shares[s].size() *
                              tc.codec.element_bytes());
          }
        }
      }
    } catch (const std::exception& e) {
      shared.fail(std::string("client ") + std::to_string(party_id) + ": " +
                  e.what());
    }
  };

  auto aggregator_loop = [&](int party_id) {
    try {
      for (int step = 0; step < tc.steps; ++step) {
        if (shared.abort.load()) return;
        std::vector<FixedVector> messages;
        for (int from : clients) {
          auto recv_start = Clock::now();
          auto bytes = transport.receive(aggregator_ep, from, timeout);
          shared.add_transport_time(seconds_since(recv_start));
          messages.push_back(decode_vector_message(bytes, tc.codec));
        }
        auto agg_start = Clock::now();
        const FixedVector sum =
            securesum::pairwise_aggregate(messages, n_clients);
        shared.add_aggregate_time(seconds_since(agg_start));
        WireHeader header;
        header.protocol_id = kProtoNodeReport;
        header.round = static_cast<std::uint64_t>(step);
        header.sender = static_cast<std::uint32_t>(party_id);
        transport.send(aggregator_ep, master_ep,
                       encode_vector_message(header, sum));
      }
    } catch (const TransportTimeout& e) {
      shared.fail(std::string("aggregator: round incomplete: ") + e.what());
    } catch (const std::exception& e) {
      shared.fail(std::string("aggregator: ") + e.what());
    }
  };

  auto node_loop = [&](int party_id, int node_id) {
    try {
      for (int step = 0; step < tc.steps; ++step) {
        if (shared.abort.load()) return;
        std::vector<FixedVector> messages;
        for (std::size_t k = 0; k < n_clients; ++k) {
          const auto& nodes = node_assignment[k];
          if (std::find(nodes.begin(), nodes.end(), node_id) == nodes.end()) {
            continue;
          }
          auto recv_start = Clock::now();
          auto bytes = transport.receive(node_ep(node_id), clients[k], timeout);
          shared.add_transport_time(seconds_since(recv_start));
          messages.push_back(decode_vector_message(bytes, tc.codec));
        }
        auto agg_start = Clock::now();
        const auto node_report = securesum::dca_node_aggregate(
            messages, node_expected[static_cast<std::size_t>(node_id)],
            node_id);
        shared.add_aggregate_time(seconds_since(agg_start));
        WireHeader header;
        header.protocol_id = kProtoNodeReport;
        header.round = static_cast<std::uint64_t>(step);
        header.sender = static_cast<std::uint32_t>(party_id);
        header.node = static_cast<std::uint32_t>(node_id);
        transport.send(node_ep(node_id), master_ep,
                       encode_vector_message(header, node_report.partial_sum));
      }
    } catch (const TransportTimeout& e) {
      shared.fail("node " + std::to_string(node_id) +
                  ": round incomplete: " + e.what());
    } catch (const std::exception& e) {
      shared.fail("node " + std::to_string(node_id) + ": " + e.what());
    }
  };

  auto master_loop = [&]() {
    try {
      for (int step = 0; step < tc.steps; ++step) {
        if (shared.abort.load()) return;
        // Broadcast the current parameters to every client.
        WireHeader bcast;
        bcast.protocol_id = kProtoModelBroadcast;
        bcast.round = static_cast<std::uint64_t>(step);
        bcast.sender = static_cast<std::uint32_t>(master);
        const auto theta_msg =
            encode_real_message(bcast, master_model.params());
        for (int to : clients) {
          transport.send(master_ep, to, theta_msg);
        }

        // Collect the aggregated sum.
        FixedVector aggregate;
        if (pairwise) {
          auto recv_start = Clock::now();
          auto bytes = transport.receive(master_ep, aggregator_ep, timeout);
          shared.add_transport_time(seconds_since(recv_start));
          aggregate = decode_vector_message(bytes, tc.codec);
        } else {
          std::vector<securesum::AggregateReport> reports;
          for (std::size_t l = 0; l < node_parties.size(); ++l) {
            auto recv_start = Clock::now();
            auto bytes = transport.receive(master_ep,
                                           node_ep(static_cast<int>(l)),
                                           timeout);
            shared.add_transport_time(seconds_since(recv_start));
            securesum::AggregateReport r;
            r.node_id = static_cast<int>(l);
            r.contributor_count = node_expected[l];
            r.partial_sum = decode_vector_message(bytes, tc.codec);
            reports.push_back(std::move(r));
          }
          auto agg_start = Clock::now();
          aggregate = securesum::dca_finalize(reports, node_parties.size());
          shared.add_aggregate_time(seconds_since(agg_start));
        }

        auto agg_start = Clock::now();
        std::vector<double> noisy_sum = decode(aggregate);
        std::vector<double> update;
        if (pspec) {
          const auto proj = projection::generate_projection(
              *pspec, tc.projection->resample_per_step
                          ? static_cast<std::uint64_t>(step)
                          : 0);
          update = projection::reconstruct(noisy_sum, proj);
        } else {
          update = std::move(noisy_sum);
        }
        learner::dp_sgd_step(master_model, update, batch_divisor,
                             tc.learning_rate);
        shared.add_aggregate_time(seconds_since(agg_start));

        if ((step + 1) % tc.eval_every == 0 || step + 1 == tc.steps) {
          record_metrics(step + 1);
        }
      }
    } catch (const TransportTimeout& e) {
      shared.fail(std::string("master: round incomplete: ") + e.what());
    } catch (const std::exception& e) {
      shared.fail(std::string("master: ") + e.what());
    }
  };

  // Launch: one thread per party, running every role that party holds in
  // a fixed order (client work first, then aggregation duties).
  std::vector<std::thread> threads;
  for (const auto& p : config.parties) {
    const int id = p.party_id;
    const bool is_client = p.client;
    const bool is_aggregator = pairwise && p.aggregator;
    int node_id = -1;
    if (!pairwise) {
      const auto it =
          std::find(node_parties.begin(), node_parties.end(), id);
      if (it != node_parties.end()) {
        node_id = static_cast<int>(it - node_parties.begin());
      }
    }
    const bool is_master = (id == master);
    threads.emplace_back([&, id, is_client, is_aggregator, node_id,
                          is_master] {
      // Roles interleave per step, so run them as nested loops in one
      // thread only when the schedules cannot block each other; the safe
      // decomposition is separate sub-threads per role.
      std::vector<std::thread> roles;
      if (is_client) roles.emplace_back(client_loop, id);
      if (is_aggregator) roles.emplace_back(aggregator_loop, id);
      if (node_id >= 0) roles.emplace_back(node_loop, id, node_id);
      if (is_master) roles.emplace_back(master_loop);
      for (auto& r : roles) r.join();
    });
  }
  for (auto& t : threads) t.join();

  result.aborted = shared.abort.load();
  result.abort_reason = shared.abort_reason;
  result.revealed_noise = shared.revealed;

  // Post-run bookkeeping (simulation-side knowledge, outside the
  // protocol): realized batch sizes replayed from the seeds.
  for (int step = 0; step < tc.steps && !result.aborted; ++step) {
    std::size_t realized = 0;
    if (swor) {
      realized = tc.batch.batch_size;
    } else {
      for (std::size_t k = 0; k < n_clients; ++k) {
        prg::DeterministicRng rng(client_seed(tc.seed, "poisson",
                                              static_cast<int>(k)),
                                  static_cast<std::uint64_t>(step));
        realized += sampling::select_batch_poisson(
                        train.party_size(k), tc.batch.gamma, rng)
                        .size();
      }
    }
    report.realized_batch_sizes.push_back(realized);
  }

  report.final_train_accuracy = report.train_curve.back().accuracy;
  report.final_loss = report.train_curve.back().loss;
  if (test != nullptr && !report.test_curve.empty()) {
    report.final_test_accuracy = report.test_curve.back().accuracy;
  }
  report.final_params.assign(master_model.params().begin(),
                             master_model.params().end());
  report.timings = shared.timings;
  report.uploaded_bytes = shared.uploaded_bytes;

  learner::fill_report_metadata(report, tc, train.size(),
                                static_cast<int>(n_clients), sensitivity,
                                sigma_total,
                                plan ? plan->per_party_sigma : 0.0);
  result.report = std::move(report);
  return result;
}

// --- persistence ---------------------------------------------------------

namespace {

nlohmann::json curve_to_json(const std::vector<learner::StepMetrics>& curve) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& m : curve) {
    arr.push_back({{"step", m.step}, {"loss", m.loss},
                   {"accuracy", m.accuracy}});
  }
  return arr;
}

void write_curve_csv(const std::string& path,
                     const std::vector<learner::StepMetrics>& curve) {
  std::ofstream out(path, std::ios::trunc);
  out << "step,loss,accuracy\n";
  for (const auto& m : curve) {
    out << m.step << ',' << m.loss << ',' << m.accuracy << '\n';
  }
}

}  // namespace

nlohmann::json report_to_json(const TrainReport& report) {
  nlohmann::json j;
  j["train_curve"] = curve_to_json(report.train_curve);
  j["test_curve"] = curve_to_json(report.test_curve);
  j["final"] = {{"train_accuracy", report.final_train_accuracy},
                {"test_accuracy", report.final_test_accuracy},
                {"loss", report.final_loss}};
  j["privacy"] = {
      {"sigma", report.sigma_total},
      {"sigma_i", report.per_party_sigma},
      {"N", report.parties},
      {"T", report.colluders},
      {"mode", report.noise_mode},
      {"steps", report.steps},
      {"sampling_fraction", report.sampling_fraction},
      {"epsilon", std::isfinite(report.epsilon)
                      ? nlohmann::json(report.epsilon)
                      : nlohmann::json(nullptr)},
      {"delta", report.delta},
      {"delta_total", report.delta_total},
  };
  j["upload"] = {{"bytes", report.uploaded_bytes},
                 {"reduction_factor", report.upload_reduction_factor}};
  if (report.projection_dim > 0) {
    j["projection"] = {
        {"d", report.final_params.size()},
        {"k", report.projection_dim},
        {"clip_norm", report.clip_norm},
        {"proj_sensitivity", report.proj_sensitivity},
        {"delta_prime", report.proj_delta_prime},
    };
  }
  j["realized_batch_sizes"] = report.realized_batch_sizes;
  return j;
}

void write_result_files(const ExperimentConfig& config,
                        const ExperimentResult& result) {
  std::filesystem::create_directories(config.out_dir);
  const std::string base = config.out_dir + "/";
  std::ofstream out(base + "result.json", std::ios::trunc);
  out << result.result_json.dump(2) << "\n";
  write_curve_csv(base + "train_curve.csv", result.report.train_curve);
  if (!result.report.test_curve.empty()) {
    write_curve_csv(base + "test_curve.csv", result.report.test_curve);
  }
}

ExperimentResult run_experiment(const ExperimentConfig& raw_config) {
  ExperimentConfig config = raw_config;
  validate_experiment_config(config);
  Dataset train = build_dataset(config);
  bind_model_dims(config, train);
  std::optional<Dataset> test;
  if (config.data.kind == DataConfig::Kind::kSynthetic) {
    test = build_test_dataset(config);
  }

  ExperimentResult result;

  // Token list setup (SWOR only).
  std::optional<TokenAssignment> assignment;
  if (config.train.batch.scheme == sampling::Scheme::kSwor) {
    const mixnet::SealedBoxCipher cipher;
    auto outcome = make_token_list(config, train, cipher);
    if (outcome.tamper_detected) {
      result.aborted = true;
      result.mixnet_tamper_detected = true;
      result.abort_reason = "mixnet tampering detected " + outcome.tamper_reason;
      result.result_json = {{"schema_version", 1},
                            {"config", config.resolved},
                            {"aborted", true},
                            {"abort_reason", result.abort_reason}};
      write_result_files(config, result);
      return result;
    }
    assignment = std::move(outcome.assignment);
  }

  const auto regime = config.train.regime;
  if (regime == Regime::kDpSmc || regime == Regime::kNonprivate) {
    auto transport =
        make_transport(config.transport, distributed_endpoints(config));
    result = run_distributed_training(
        config, train, test ? &*test : nullptr,
        assignment ? &*assignment : nullptr, *transport);
  } else {
    result.report = learner::run_training(config.train, train,
                                          test ? &*test : nullptr,
                                          assignment ? &*assignment : nullptr);
  }

  result.result_json = {{"schema_version", 1},
                        {"config", config.resolved},
                        {"aborted", result.aborted},
                        {"result", report_to_json(result.report)}};
  if (result.aborted) {
    result.result_json["abort_reason"] = result.abort_reason;
  }
  // Timings live under their own key so reruns compare deterministically
  // after dropping it.
  result.result_json["timings"] = {
      {"gradient_s", result.report.timings.gradient_s},
      {"mask_s", result.report.timings.mask_s},
      {"transport_s", result.report.timings.transport_s},
      {"aggregate_s", result.report.timings.aggregate_s},
  };
  write_result_files(config, result);
  return result;
}

}  // namespace silofl::harness
