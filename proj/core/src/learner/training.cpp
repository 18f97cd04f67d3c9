#include "silofl/learner/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>

#include "silofl/projection.hpp"
#include "silofl/securesum.hpp"

namespace silofl::learner {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

prg::Seed seed_for_party(const prg::Seed& master, const char* role, int i) {
  return prg::derive_seed(master, std::string(role) + ":" + std::to_string(i));
}

prg::Seed rng_seed_bytes(prg::DeterministicRng& rng) {
  prg::Seed s;
  for (std::size_t i = 0; i < s.size(); i += 8) {
    const std::uint64_t w = rng.next_u64();
    for (std::size_t b = 0; b < 8; ++b) {
      s[i + b] = static_cast<std::uint8_t>(w >> (8 * b));
    }
  }
  return s;
}

// Commit-then-reveal joint seed: nobody controls the batch sequence alone.
prg::Seed agree_joint_seed(const prg::Seed& master, std::size_t parties) {
  std::vector<prg::Seed> contributions;
  std::vector<std::array<std::uint8_t, 32>> commitments;
  for (std::size_t i = 0; i < parties; ++i) {
    prg::DeterministicRng rng(seed_for_party(master, "batchseed",
                                             static_cast<int>(i)), 0);
    contributions.push_back(rng_seed_bytes(rng));
    commitments.push_back(sampling::commit_contribution(
        contributions.back(), static_cast<int>(i)));
  }
  for (std::size_t i = 0; i < parties; ++i) {
    if (!sampling::verify_contribution(commitments[i], contributions[i],
                                       static_cast<int>(i))) {
      throw Error("joint seed: commitment verification failed");
    }
  }
  return sampling::combine_contributions(contributions);
}

std::vector<std::vector<int>> pairwise_groups(std::size_t parties,
                                              std::optional<int> group_size) {
  std::vector<std::vector<int>> groups;
  const std::size_t g =
      group_size ? static_cast<std::size_t>(*group_size) : parties;
  for (std::size_t begin = 0; begin < parties; begin += g) {
    const std::size_t end = std::min(begin + g, parties);
    std::vector<int> group;
    for (std::size_t i = begin; i < end; ++i) group.push_back(static_cast<int>(i));
    groups.push_back(std::move(group));
  }
  for (const auto& group : groups) {
    if (group.size() < 2) {
      throw ConfigError("pairwise group of size 1: the lone party would "
                        "send its payload unmasked");
    }
  }
  return groups;
}

std::vector<std::vector<int>> dca_assignments(const ProtocolConfig& protocol,
                                              std::size_t parties) {
  const int m = protocol.compute_nodes;
  std::vector<std::vector<int>> assigned(parties);
  std::vector<int> all_nodes;
  for (int l = 0; l < m; ++l) all_nodes.push_back(l);
  std::vector<bool> node_used(static_cast<std::size_t>(m), false);
  for (std::size_t i = 0; i < parties; ++i) {
    auto it = protocol.node_subsets.find(static_cast<int>(i));
    assigned[i] = it != protocol.node_subsets.end() ? it->second : all_nodes;
    if (assigned[i].empty()) {
      throw ConfigError("dca: client " + std::to_string(i) +
                        " assigned to no compute node");
    }
    for (int l : assigned[i]) {
      if (l < 0 || l >= m) {
        throw ConfigError("dca: node id out of range in subset map");
      }
      node_used[static_cast<std::size_t>(l)] = true;
    }
  }
  for (int l = 0; l < m; ++l) {
    if (!node_used[static_cast<std::size_t>(l)]) {
      throw ConfigError("dca: compute node " + std::to_string(l) +
                        " has no assigned clients");
    }
  }
  return assigned;
}

}  // namespace

TokenAssignment synthesize_tokens(const Dataset& data, const prg::Seed& seed) {
  TokenAssignment assignment;
  assignment.per_party.resize(data.party_count());
  std::set<Token> all;
  for (std::size_t i = 0; i < data.party_count(); ++i) {
    prg::DeterministicRng rng(seed_for_party(seed, "token",
                                             static_cast<int>(i)), 0);
    auto& mine = assignment.per_party[i];
    while (mine.size() < data.party_size(i)) {
      Token t;
      for (std::size_t b = 0; b < kTokenBytes; b += 8) {
        const std::uint64_t w = rng.next_u64();
        for (std::size_t k = 0; k < 8; ++k) {
          t[b + k] = static_cast<std::uint8_t>(w >> (8 * k));
        }
      }
      if (all.insert(t).second) {
        mine.push_back(t);
      }
    }
  }
  for (const auto& party : assignment.per_party) {
    assignment.shared_list.insert(assignment.shared_list.end(), party.begin(),
                                  party.end());
  }
  prg::DeterministicRng mix_rng(prg::derive_seed(seed, "tokenmix"), 0);
  mix_rng.shuffle(assignment.shared_list);
  return assignment;
}

void validate_train_config(const TrainConfig& config, const Dataset& train) {
  config.codec.validate();
  if (train.party_count() < 2) {
    throw ConfigError("training needs at least two parties");
  }
  if (config.steps < 0) throw ConfigError("steps must be nonnegative");
  if (!(config.learning_rate > 0.0)) {
    throw ConfigError("learning rate must be positive");
  }
  if (config.batch.scheme == sampling::Scheme::kSwor) {
    if (config.batch.batch_size < 1 ||
        config.batch.batch_size > train.size()) {
      throw ConfigError("SWOR batch size must lie in [1, n]");
    }
  } else {
    if (!(config.batch.gamma > 0.0 && config.batch.gamma < 1.0)) {
      throw ConfigError("Poisson gamma must lie in (0,1)");
    }
  }
  if (config.regime != Regime::kNonprivate) {
    if (!(config.clip_norm > 0.0)) {
      throw ConfigError("clip norm must be positive");
    }
    if (!(config.noise_multiplier >= 0.0)) {
      throw ConfigError("noise multiplier must be nonnegative");
    }
    if (!(config.delta > 0.0 && config.delta < 1.0)) {
      throw ConfigError("delta must lie in (0,1)");
    }
  }
  if (config.model.input_dim != train.feature_dim &&
      !config.model.frozen_features) {
    throw ConfigError("model input_dim does not match dataset features");
  }

  if (config.regime == Regime::kDpSmc) {
    if (config.protocol.protocol == SumProtocol::kPairwise) {
      pairwise_groups(train.party_count(), config.protocol.group_size);
    } else {
      if (config.protocol.compute_nodes < 1) {
        throw ConfigError("dca needs at least one compute node");
      }
      dca_assignments(config.protocol, train.party_count());
    }
    // Aggregate-overflow headroom: the decoded sum must stay within
    // +-R/2 / 2^f, counting the batch's clipped mass plus a 10-sigma
    // noise allowance.
    const double clip_bound = config.relation == NeighbourRelation::kSubstitution
                                  ? config.clip_norm / 2.0
                                  : config.clip_norm;
    double sensitivity = config.clip_norm;
    if (config.projection) {
      sensitivity = projection::solve_sensitivity(
          config.projection->projection_dim, config.clip_norm,
          config.projection->delta_prime);
    }
    const double sigma_total = config.noise_multiplier * sensitivity;
    const double expected_batch =
        config.batch.scheme == sampling::Scheme::kSwor
            ? static_cast<double>(config.batch.batch_size)
            : config.batch.gamma * static_cast<double>(train.size());
    const double bound = expected_batch * std::max(clip_bound, sensitivity) +
                         10.0 * sigma_total;
    const double headroom =
        static_cast<double>(config.codec.half_modulus()) /
        config.codec.scale();
    if (bound >= headroom) {
      throw ConfigError(
          "codec headroom insufficient: aggregate bound " +
          std::to_string(bound) + " >= " + std::to_string(headroom) +
          "; raise modulus_bits or lower frac_bits/batch");
    }
  }
}

double evaluate_accuracy(const Model& model, const Dataset& data) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int pred = model.predict_logit(data.row(i)) > 0.0 ? 1 : 0;
    if (pred == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

double evaluate_loss(const Model& model, const Dataset& data) {
  double total = 0.0;
  std::vector<double> scratch(model.param_count(), 0.0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double z = model.predict_logit(data.row(i));
    const double s = data.labels[i] == 1 ? 1.0 : -1.0;
    const double m = -s * z;
    total += m > 0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m));
  }
  return total / static_cast<double>(data.size());
}

TrainReport run_training(const TrainConfig& config, const Dataset& train,
                         const Dataset* test, const TokenAssignment* tokens) {
  validate_train_config(config, train);
  const std::size_t parties = train.party_count();
  const auto n = static_cast<double>(train.size());

  Model model(config.model);
  model.init_params(config.seed);
  const std::size_t d = model.param_count();

  const bool private_run = config.regime != Regime::kNonprivate;
  const double clip_bound =
      !private_run ? std::numeric_limits<double>::infinity()
      : config.relation == NeighbourRelation::kSubstitution
          ? config.clip_norm / 2.0
          : config.clip_norm;

  // Projection setup: the k-dimensional path reuses the noise and
  // summation machinery unchanged, with sensitivity C~ instead of C.
  std::optional<projection::ProjectionSpec> pspec;
  if (config.projection) {
    pspec = projection::make_spec(d, config.projection->projection_dim,
                                  prg::derive_seed(config.seed, "projseed"),
                                  config.clip_norm,
                                  config.projection->delta_prime);
  }
  const std::size_t agg_dim = pspec ? pspec->projection_dim : d;
  const double sensitivity = pspec ? pspec->proj_sensitivity : config.clip_norm;
  const double sigma_total =
      private_run ? config.noise_multiplier * sensitivity : 0.0;

  // dp_smc parties follow the configured plan; the trusted baseline always
  // realises the trusted-aggregator noise level sigma^2 (tee split), drawn
  // from the same per-party streams so equal seeds couple the regimes.
  std::optional<dpnoise::NoisePlan> plan;
  if (private_run && config.regime != Regime::kLdp) {
    const auto mode = config.regime == Regime::kTrusted
                          ? dpnoise::NoiseMode::kTee
                          : config.noise_mode;
    const int colluders =
        config.regime == Regime::kTrusted ? 0 : config.colluders;
    plan = dpnoise::plan_noise(sigma_total, static_cast<int>(parties),
                               colluders, mode);
  }

  std::vector<prg::DeterministicRng> noise_rngs;
  std::vector<prg::DeterministicRng> share_rngs;
  for (std::size_t i = 0; i < parties; ++i) {
    noise_rngs.emplace_back(seed_for_party(config.seed, "noise",
                                           static_cast<int>(i)), 0);
    share_rngs.emplace_back(seed_for_party(config.seed, "share",
                                           static_cast<int>(i)), 0);
  }

  // Batch machinery.
  const bool swor = config.batch.scheme == sampling::Scheme::kSwor;
  TokenAssignment fallback;
  const TokenAssignment* token_view = tokens;
  prg::Seed joint_seed{};
  if (swor) {
    if (token_view == nullptr) {
      fallback = synthesize_tokens(train, config.seed);
      token_view = &fallback;
    }
    joint_seed = agree_joint_seed(config.seed, parties);
  }
  const double batch_divisor =
      swor ? static_cast<double>(config.batch.batch_size)
           : config.batch.gamma * n;

  // Secure-sum state (dp_smc only).
  const bool dp_smc = config.regime == Regime::kDpSmc;
  const bool use_pairwise =
      config.protocol.protocol == SumProtocol::kPairwise;
  std::vector<std::vector<int>> groups;
  std::vector<securesum::PairwiseKeyring> keyrings;
  std::vector<std::vector<int>> node_assignment;
  std::vector<std::size_t> node_expected;
  if (dp_smc) {
    if (use_pairwise) {
      groups = pairwise_groups(parties, config.protocol.group_size);
      keyrings.resize(parties);
      for (const auto& group : groups) {
        for (int i : group) {
          keyrings[static_cast<std::size_t>(i)] =
              securesum::make_keyring(config.seed, i, group);
        }
      }
    } else {
      node_assignment = dca_assignments(config.protocol, parties);
      node_expected.assign(
          static_cast<std::size_t>(config.protocol.compute_nodes), 0);
      for (const auto& nodes : node_assignment) {
        for (int l : nodes) ++node_expected[static_cast<std::size_t>(l)];
      }
    }
  }

  TrainReport report;
  fill_report_metadata(report, config, train.size(),
                       static_cast<int>(parties), sensitivity, sigma_total,
                       plan ? plan->per_party_sigma : 0.0);

  auto record_metrics = [&](int step) {
    StepMetrics m;
    m.step = step;
    m.loss = evaluate_loss(model, train);
    m.accuracy = evaluate_accuracy(model, train);
    report.train_curve.push_back(m);
    if (test != nullptr) {
      StepMetrics t;
      t.step = step;
      t.loss = evaluate_loss(model, *test);
      t.accuracy = evaluate_accuracy(model, *test);
      report.test_curve.push_back(t);
    }
  };
  record_metrics(0);

  const std::size_t payload_bytes_per_message =
      dp_smc ? agg_dim * config.codec.element_bytes() : agg_dim * 8;

  for (int step = 0; step < config.steps; ++step) {
    // --- batch selection -----------------------------------------------
    std::vector<std::vector<std::size_t>> batch_indices(parties);
    std::size_t realized = 0;
    if (swor) {
      sampling::BatchSpec spec;
      spec.scheme = sampling::Scheme::kSwor;
      spec.batch_size = config.batch.batch_size;
      spec.joint_seed = joint_seed;
      spec.round = static_cast<std::uint64_t>(step);
      const auto selected =
          sampling::select_batch_swor(token_view->shared_list, spec);
      for (std::size_t i = 0; i < parties; ++i) {
        const auto local =
            sampling::local_batch(selected, token_view->per_party[i]);
        const std::size_t base = train.partition[i].first;
        for (std::size_t j : local) batch_indices[i].push_back(base + j);
        realized += local.size();
      }
    } else {
      for (std::size_t i = 0; i < parties; ++i) {
        prg::DeterministicRng rng(seed_for_party(config.seed, "poisson",
                                                 static_cast<int>(i)),
                                  static_cast<std::uint64_t>(step));
        const auto local = sampling::select_batch_poisson(
            train.party_size(i), config.batch.gamma, rng);
        const std::size_t base = train.partition[i].first;
        for (std::size_t j : local) batch_indices[i].push_back(base + j);
        realized += local.size();
      }
    }
    report.realized_batch_sizes.push_back(realized);

    // --- per-party gradient vectors -------------------------------------
    auto grad_start = Clock::now();
    std::optional<projection::ProjectionMatrix> proj;
    if (pspec) {
      const std::uint64_t round =
          config.projection->resample_per_step
              ? static_cast<std::uint64_t>(step)
              : 0;
      proj = projection::generate_projection(*pspec, round);
    }
    std::vector<std::vector<double>> party_vectors(parties);
    for (std::size_t i = 0; i < parties; ++i) {
      const auto grads = per_example_clipped_grads(
          model, train.features, train.feature_dim, train.labels,
          batch_indices[i], clip_bound);
      if (pspec) {
        party_vectors[i] = projection::project_and_sum(
            grads, *proj, private_run ? clip_bound
                                      : std::numeric_limits<double>::infinity());
      } else {
        party_vectors[i].assign(d, 0.0);
        for (const auto& g : grads) {
          for (std::size_t c = 0; c < d; ++c) party_vectors[i][c] += g[c];
        }
      }
    }
    report.timings.gradient_s += seconds_since(grad_start);

    // --- aggregation per regime ------------------------------------------
    std::vector<double> noisy_sum(agg_dim, 0.0);
    if (dp_smc) {
      auto mask_start = Clock::now();
      std::vector<FixedVector> encodings;
      encodings.reserve(parties);
      for (std::size_t i = 0; i < parties; ++i) {
        auto share = dpnoise::sample_noise_share(*plan, agg_dim,
                                                 noise_rngs[i]);
        for (std::size_t c = 0; c < agg_dim; ++c) {
          share[c] += party_vectors[i][c];
        }
        encodings.push_back(encode_clamped(share, config.codec));
      }
      FixedVector aggregate = zero_vector(agg_dim, config.codec);
      if (use_pairwise) {
        std::vector<std::vector<FixedVector>> group_messages(groups.size());
        for (std::size_t gi = 0; gi < groups.size(); ++gi) {
          for (int i : groups[gi]) {
            group_messages[gi].push_back(securesum::pairwise_encrypt(
                encodings[static_cast<std::size_t>(i)],
                keyrings[static_cast<std::size_t>(i)],
                static_cast<std::uint64_t>(step)));
          }
        }
        report.timings.mask_s += seconds_since(mask_start);
        auto agg_start = Clock::now();
        for (std::size_t gi = 0; gi < groups.size(); ++gi) {
          aggregate = add_mod(aggregate, securesum::pairwise_aggregate(
                                             group_messages[gi],
                                             groups[gi].size()));
        }
        report.timings.aggregate_s += seconds_since(agg_start);
      } else {
        const auto m =
            static_cast<std::size_t>(config.protocol.compute_nodes);
        std::vector<std::vector<FixedVector>> node_messages(m);
        for (std::size_t i = 0; i < parties; ++i) {
          auto shares = securesum::dca_make_shares(
              encodings[i], node_assignment[i], share_rngs[i]);
          for (std::size_t s = 0; s < shares.node_ids.size(); ++s) {
            node_messages[static_cast<std::size_t>(shares.node_ids[s])]
                .push_back(std::move(shares.shares[s]));
          }
        }
        report.timings.mask_s += seconds_since(mask_start);
        auto agg_start = Clock::now();
        std::vector<securesum::AggregateReport> reports;
        for (std::size_t l = 0; l < m; ++l) {
          reports.push_back(securesum::dca_node_aggregate(
              node_messages[l], node_expected[l], static_cast<int>(l)));
        }
        aggregate = securesum::dca_finalize(reports, m);
        report.timings.aggregate_s += seconds_since(agg_start);
      }
      auto agg_start = Clock::now();
      noisy_sum = decode(aggregate);
      report.timings.aggregate_s += seconds_since(agg_start);
      report.uploaded_bytes +=
          static_cast<std::uint64_t>(payload_bytes_per_message) * parties *
          (use_pairwise ? 1 : static_cast<std::size_t>(
                                  config.protocol.compute_nodes));
    } else {
      auto mask_start = Clock::now();
      std::vector<std::vector<double>> contributions(parties);
      for (std::size_t i = 0; i < parties; ++i) {
        contributions[i] = party_vectors[i];
        if (config.regime == Regime::kLdp) {
          // Every party adds individually sufficient noise.
          std::vector<double> local(agg_dim, 0.0);
          noise_rngs[i].fill_gaussian(local, sigma_total);
          for (std::size_t c = 0; c < agg_dim; ++c) {
            contributions[i][c] += local[c];
          }
        } else if (config.regime == Regime::kTrusted) {
          auto share =
              dpnoise::sample_noise_share(*plan, agg_dim, noise_rngs[i]);
          for (std::size_t c = 0; c < agg_dim; ++c) {
            contributions[i][c] += share[c];
          }
        }
      }
      report.timings.mask_s += seconds_since(mask_start);
      auto agg_start = Clock::now();
      for (std::size_t i = 0; i < parties; ++i) {
        for (std::size_t c = 0; c < agg_dim; ++c) {
          noisy_sum[c] += contributions[i][c];
        }
      }
      report.timings.aggregate_s += seconds_since(agg_start);
      report.uploaded_bytes +=
          static_cast<std::uint64_t>(payload_bytes_per_message) * parties;
    }

    // --- update ----------------------------------------------------------
    auto agg_start = Clock::now();
    std::vector<double> update;
    if (pspec) {
      update = projection::reconstruct(noisy_sum, *proj);
    } else {
      update = std::move(noisy_sum);
    }
    dp_sgd_step(model, update, batch_divisor, config.learning_rate);
    report.timings.aggregate_s += seconds_since(agg_start);

    if (config.record_trajectory) {
      report.trajectory.emplace_back(model.params().begin(),
                                     model.params().end());
    }
    if ((step + 1) % config.eval_every == 0 || step + 1 == config.steps) {
      record_metrics(step + 1);
    }
  }

  report.final_train_accuracy = report.train_curve.back().accuracy;
  report.final_loss = report.train_curve.back().loss;
  if (test != nullptr) {
    report.final_test_accuracy = report.test_curve.back().accuracy;
  }
  report.final_params.assign(model.params().begin(), model.params().end());

  return report;
}


void fill_report_metadata(TrainReport& report, const TrainConfig& config,
                          std::size_t dataset_size, int parties,
                          double sensitivity, double sigma_total,
                          double per_party_sigma) {
  const bool private_run = config.regime != Regime::kNonprivate;
  report.clip_norm = private_run ? config.clip_norm : 0.0;
  report.sigma_total = sigma_total;
  report.per_party_sigma =
      config.regime == Regime::kLdp ? sigma_total : per_party_sigma;
  report.parties = parties;
  report.colluders = config.colluders;
  report.noise_mode =
      config.regime == Regime::kLdp ? "local"
      : !private_run               ? "none"
      : (config.regime == Regime::kTrusted ||
         config.noise_mode == dpnoise::NoiseMode::kTee)
          ? "tee"
          : "collusion_robust";
  report.steps = config.steps;
  report.sampling_fraction =
      config.batch.scheme == sampling::Scheme::kSwor
          ? static_cast<double>(config.batch.batch_size) /
                static_cast<double>(dataset_size)
          : config.batch.gamma;
  report.delta = private_run ? config.delta : 0.0;
  report.delta_total =
      report.delta +
      (config.projection && private_run ? config.projection->delta_prime : 0.0);
  if (config.projection) {
    Model probe(config.model);
    report.upload_reduction_factor =
        static_cast<double>(probe.param_count()) /
        static_cast<double>(config.projection->projection_dim);
    report.projection_dim = config.projection->projection_dim;
    report.proj_sensitivity = sensitivity;
    report.proj_delta_prime = config.projection->delta_prime;
  } else {
    report.upload_reduction_factor = 1.0;
  }
  if (!private_run) {
    report.epsilon = config.steps == 0
                         ? 0.0
                         : std::numeric_limits<double>::infinity();
  } else {
    dpnoise::MechanismParams params;
    params.clip_norm = sensitivity;
    params.noise_multiplier = config.noise_multiplier;
    params.delta = config.delta;
    params.steps = config.steps;
    params.sampling_fraction = report.sampling_fraction;
    report.epsilon = dpnoise::account_privacy(params);
  }
}

}  // namespace silofl::learner

