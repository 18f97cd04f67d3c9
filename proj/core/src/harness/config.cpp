#include "silofl/harness/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace silofl::harness {

namespace {

using nlohmann::json;

PartyRole parse_role(const std::string& name) {
  if (name == "honest_tee") return PartyRole::kHonestTee;
  if (name == "hbc") return PartyRole::kHbc;
  if (name == "malicious") return PartyRole::kMalicious;
  throw ConfigError("unknown party role: " + name);
}

std::string role_name(PartyRole role) {
  switch (role) {
    case PartyRole::kHonestTee: return "honest_tee";
    case PartyRole::kHbc: return "hbc";
    case PartyRole::kMalicious: return "malicious";
  }
  return "?";
}

learner::Regime parse_regime(const std::string& name) {
  if (name == "dp_smc") return learner::Regime::kDpSmc;
  if (name == "trusted") return learner::Regime::kTrusted;
  if (name == "ldp") return learner::Regime::kLdp;
  if (name == "nonprivate") return learner::Regime::kNonprivate;
  throw ConfigError("unknown regime: " + name);
}

std::string regime_name(learner::Regime regime) {
  switch (regime) {
    case learner::Regime::kDpSmc: return "dp_smc";
    case learner::Regime::kTrusted: return "trusted";
    case learner::Regime::kLdp: return "ldp";
    case learner::Regime::kNonprivate: return "nonprivate";
  }
  return "?";
}

}  // namespace

std::vector<int> ExperimentConfig::client_ids() const {
  std::vector<int> ids;
  for (const auto& p : parties) {
    if (p.client) ids.push_back(p.party_id);
  }
  return ids;
}

std::vector<int> ExperimentConfig::compute_node_ids() const {
  std::vector<int> ids;
  for (const auto& p : parties) {
    if (p.compute_node) ids.push_back(p.party_id);
  }
  return ids;
}

int ExperimentConfig::master_id() const {
  for (const auto& p : parties) {
    if (p.master) return p.party_id;
  }
  throw ConfigError("no master party configured");
}

int ExperimentConfig::aggregator_id() const {
  for (const auto& p : parties) {
    if (p.aggregator) return p.party_id;
  }
  throw ConfigError("no aggregator party configured");
}

AdversaryBehavior parse_behavior(const std::string& name) {
  if (name == "reveal_noise_share") return AdversaryBehavior::kRevealNoiseShare;
  if (name == "drop_token") return AdversaryBehavior::kDropToken;
  if (name == "substitute_message") return AdversaryBehavior::kSubstituteMessage;
  if (name == "observe_all") return AdversaryBehavior::kObserveAll;
  throw UnknownBehavior("unknown adversary behavior: " + name);
}

std::string behavior_name(AdversaryBehavior behavior) {
  switch (behavior) {
    case AdversaryBehavior::kRevealNoiseShare: return "reveal_noise_share";
    case AdversaryBehavior::kDropToken: return "drop_token";
    case AdversaryBehavior::kSubstituteMessage: return "substitute_message";
    case AdversaryBehavior::kObserveAll: return "observe_all";
  }
  return "?";
}

ExperimentConfig parse_experiment_config(const json& j) {
  ExperimentConfig config;

  config.seed_text = j.value("seed", std::string("silofl"));
  config.seed = prg::seed_from_string(config.seed_text);

  if (j.contains("codec")) {
    config.codec.modulus_bits = j["codec"].value("modulus_bits", 32);
    config.codec.frac_bits = j["codec"].value("frac_bits", 16);
  }
  config.codec.validate();

  // Protocol block first: capability defaults depend on it.
  const json protocol_j = j.value("protocol", json::object());
  const std::string protocol_kind = protocol_j.value("kind", std::string("pairwise"));
  auto& train = config.train;
  if (protocol_kind == "pairwise") {
    train.protocol.protocol = learner::SumProtocol::kPairwise;
    if (protocol_j.contains("group_size") &&
        !protocol_j["group_size"].is_null()) {
      train.protocol.group_size = protocol_j["group_size"].get<int>();
    }
  } else if (protocol_kind == "dca") {
    train.protocol.protocol = learner::SumProtocol::kDca;
    train.protocol.compute_nodes = protocol_j.value("compute_nodes", 2);
    if (protocol_j.contains("node_subsets")) {
      for (const auto& [key, value] : protocol_j["node_subsets"].items()) {
        train.protocol.node_subsets[std::stoi(key)] =
            value.get<std::vector<int>>();
      }
    }
  } else {
    throw ConfigError("unknown protocol kind: " + protocol_kind);
  }

  // Parties: explicit list, or a {count, samples_per_party} shorthand.
  const json parties_j = j.value("parties", json{{"count", 4},
                                                 {"samples_per_party", 100}});
  if (parties_j.is_array()) {
    for (const auto& pj : parties_j) {
      PartySpec p;
      p.party_id = pj.at("id").get<int>();
      p.role = parse_role(pj.value("role", std::string("hbc")));
      p.local_samples = pj.value("n_i", 0);
      if (pj.contains("capabilities")) {
        p.client = p.compute_node = p.aggregator = p.master = false;
        for (const auto& cap : pj["capabilities"]) {
          const std::string c = cap.get<std::string>();
          if (c == "client") p.client = true;
          else if (c == "compute_node") p.compute_node = true;
          else if (c == "aggregator") p.aggregator = true;
          else if (c == "master") p.master = true;
          else throw ConfigError("unknown capability: " + c);
        }
      }
      config.parties.push_back(p);
    }
  } else {
    const int count = parties_j.value("count", 4);
    const std::size_t samples = parties_j.value("samples_per_party", 100);
    const PartyRole role = parse_role(parties_j.value("roles", std::string("hbc")));
    for (int i = 0; i < count; ++i) {
      PartySpec p;
      p.party_id = i;
      p.role = role;
      p.local_samples = samples;
      p.client = true;
      config.parties.push_back(p);
    }
    // Default capability placement: party 0 is master (and pairwise
    // aggregator); the first M parties double as DCA compute nodes.
    config.parties[0].master = true;
    if (train.protocol.protocol == learner::SumProtocol::kPairwise) {
      config.parties[0].aggregator = true;
    } else {
      const int m = std::min<int>(train.protocol.compute_nodes, count);
      for (int i = 0; i < m; ++i) config.parties[static_cast<std::size_t>(i)].compute_node = true;
    }
  }

  // Data block.
  const json data_j = j.value("data", json{{"kind", "synthetic"}});
  const std::string data_kind = data_j.value("kind", std::string("synthetic"));
  if (data_kind == "synthetic") {
    config.data.kind = DataConfig::Kind::kSynthetic;
    config.data.features = data_j.value("features", 20);
    config.data.separation = data_j.value("separation", 4.0);
    config.data.test_n = data_j.value("test_n", 1000);
    std::size_t total = 0;
    for (const auto& p : config.parties) {
      if (p.client) total += p.local_samples;
    }
    config.data.n = data_j.value("n", total);
  } else if (data_kind == "csv") {
    config.data.kind = DataConfig::Kind::kCsv;
    config.data.path = data_j.at("path").get<std::string>();
    config.data.label_column = data_j.value("label_column", -1);
  } else if (data_kind == "image") {
    config.data.kind = DataConfig::Kind::kImage;
    config.data.path = data_j.at("path").get<std::string>();
  } else {
    throw ConfigError("unknown data kind: " + data_kind);
  }

  // Train block.
  const json train_j = j.value("train", json::object());
  train.regime = parse_regime(train_j.value("regime", std::string("nonprivate")));
  const json model_j = train_j.value("model", json{{"kind", "logistic_regression"}});
  const std::string model_kind = model_j.value("kind", std::string("logistic_regression"));
  if (model_kind == "logistic_regression") {
    train.model.kind = learner::ModelKind::kLogisticRegression;
  } else if (model_kind == "mlp") {
    train.model.kind = learner::ModelKind::kMlp;
    train.model.hidden = model_j.value("hidden", std::vector<int>{32});
  } else {
    throw ConfigError("unknown model kind: " + model_kind);
  }
  if (model_j.contains("frozen_features") &&
      !model_j["frozen_features"].is_null()) {
    config.frozen_width = model_j["frozen_features"].get<int>();
    if (config.frozen_width < 1) {
      throw ConfigError("frozen_features width must be positive");
    }
  }
  train.steps = train_j.value("steps", 100);
  train.learning_rate = train_j.value("learning_rate", 0.1);
  train.eval_every = train_j.value("eval_every", 1);
  train.clip_norm = train_j.value("clip_norm", 1.0);
  train.noise_multiplier = train_j.value("noise_multiplier", 1.0);
  train.delta = train_j.value("delta", 1e-5);
  train.colluders = train_j.value("colluders", 0);
  const std::string mode = train_j.value("noise_mode", std::string("tee"));
  if (mode == "tee") {
    train.noise_mode = dpnoise::NoiseMode::kTee;
  } else if (mode == "collusion_robust") {
    train.noise_mode = dpnoise::NoiseMode::kCollusionRobust;
  } else {
    throw ConfigError("unknown noise mode: " + mode);
  }
  const std::string relation =
      train_j.value("neighbour_relation", std::string("remove_add"));
  if (relation == "remove_add") {
    train.relation = learner::NeighbourRelation::kRemoveAdd;
  } else if (relation == "substitution") {
    train.relation = learner::NeighbourRelation::kSubstitution;
  } else {
    throw ConfigError("unknown neighbour relation: " + relation);
  }
  const json batch_j = train_j.value("batch", json{{"scheme", "swor"}, {"b", 32}});
  const std::string scheme = batch_j.value("scheme", std::string("swor"));
  if (scheme == "swor") {
    train.batch.scheme = sampling::Scheme::kSwor;
    train.batch.batch_size = batch_j.value("b", 32);
  } else if (scheme == "poisson") {
    train.batch.scheme = sampling::Scheme::kPoisson;
    train.batch.gamma = batch_j.value("gamma", 0.05);
  } else {
    throw ConfigError("unknown sampling scheme: " + scheme);
  }
  if (train_j.contains("projection") && !train_j["projection"].is_null()) {
    learner::ProjectionConfig proj;
    proj.projection_dim = train_j["projection"].value("k", 100);
    proj.delta_prime = train_j["projection"].value("delta_prime", 1e-6);
    proj.resample_per_step =
        train_j["projection"].value("resample_per_step", true);
    train.projection = proj;
  }
  train.codec = config.codec;
  train.seed = config.seed;

  if (config.data.kind == DataConfig::Kind::kSynthetic) {
    train.model.input_dim = config.data.features;
  }

  config.transport = j.value("transport", std::string("inmem"));
  config.token_list_path = j.value("token_list", std::string());
  config.out_dir = j.value("out", std::string("results"));
  config.timeout_ms = j.value("timeout_ms", 10000);

  if (j.contains("adversaries")) {
    for (const auto& aj : j["adversaries"]) {
      AdversaryConfig a;
      a.party_id = aj.at("party").get<int>();
      a.behavior = parse_behavior(aj.at("behavior").get<std::string>());
      a.substitution_delta = aj.value("delta", 1.0);
      config.adversaries.push_back(a);
    }
  }

  // Resolved config for the audit trail in result files.
  json resolved;
  resolved["seed"] = config.seed_text;
  resolved["codec"] = {{"modulus_bits", config.codec.modulus_bits},
                       {"frac_bits", config.codec.frac_bits}};
  json parties_out = json::array();
  for (const auto& p : config.parties) {
    json caps = json::array();
    if (p.client) caps.push_back("client");
    if (p.compute_node) caps.push_back("compute_node");
    if (p.aggregator) caps.push_back("aggregator");
    if (p.master) caps.push_back("master");
    parties_out.push_back({{"id", p.party_id},
                           {"role", role_name(p.role)},
                           {"n_i", p.local_samples},
                           {"capabilities", caps}});
  }
  resolved["parties"] = parties_out;
  resolved["protocol"] =
      train.protocol.protocol == learner::SumProtocol::kPairwise
          ? json{{"kind", "pairwise"},
                 {"group_size", train.protocol.group_size
                                    ? json(*train.protocol.group_size)
                                    : json(nullptr)}}
          : json{{"kind", "dca"},
                 {"compute_nodes", train.protocol.compute_nodes}};
  resolved["transport"] = config.transport;
  resolved["regime"] = regime_name(train.regime);
  resolved["train"] = {
      {"steps", train.steps},
      {"learning_rate", train.learning_rate},
      {"clip_norm", train.clip_norm},
      {"noise_multiplier", train.noise_multiplier},
      {"delta", train.delta},
      {"noise_mode", mode},
      {"colluders", train.colluders},
      {"neighbour_relation", relation},
      {"eval_every", train.eval_every},
      {"batch", scheme == "swor"
                    ? json{{"scheme", "swor"}, {"b", train.batch.batch_size}}
                    : json{{"scheme", "poisson"}, {"gamma", train.batch.gamma}}},
  };
  if (config.frozen_width > 0) {
    resolved["train"]["frozen_features"] = config.frozen_width;
  }
  if (train.projection) {
    resolved["train"]["projection"] = {
        {"k", train.projection->projection_dim},
        {"delta_prime", train.projection->delta_prime},
        {"resample_per_step", train.projection->resample_per_step}};
  }
  json adv_out = json::array();
  for (const auto& a : config.adversaries) {
    adv_out.push_back({{"party", a.party_id},
                       {"behavior", behavior_name(a.behavior)},
                       {"delta", a.substitution_delta}});
  }
  resolved["adversaries"] = adv_out;
  resolved["token_list"] = config.token_list_path;
  config.resolved = resolved;
  return config;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file: " + path);
  }
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config parse error: " + std::string(e.what()));
  }
  return parse_experiment_config(j);
}

void validate_experiment_config(const ExperimentConfig& config) {
  if (config.parties.empty()) {
    throw ConfigError("no parties configured");
  }
  std::set<int> ids;
  int masters = 0;
  for (const auto& p : config.parties) {
    if (!ids.insert(p.party_id).second) {
      throw ConfigError("duplicate party id " + std::to_string(p.party_id));
    }
    if (p.master) ++masters;
  }
  if (masters != 1) {
    throw ConfigError("exactly one master required, got " +
                      std::to_string(masters));
  }
  if (config.train.regime == learner::Regime::kDpSmc ||
      config.train.regime == learner::Regime::kNonprivate) {
    if (config.train.protocol.protocol == learner::SumProtocol::kPairwise) {
      bool has_aggregator = false;
      for (const auto& p : config.parties) has_aggregator |= p.aggregator;
      if (!has_aggregator) {
        throw ConfigError("pairwise protocol requires an aggregator party");
      }
    } else {
      const auto nodes = config.compute_node_ids();
      if (nodes.empty()) {
        throw ConfigError("dca requires at least one compute node");
      }
      if (static_cast<int>(nodes.size()) !=
          config.train.protocol.compute_nodes) {
        throw ConfigError("compute_node capabilities (" +
                          std::to_string(nodes.size()) +
                          ") do not match protocol compute_nodes (" +
                          std::to_string(config.train.protocol.compute_nodes) +
                          ")");
      }
    }
  }
  if (config.client_ids().size() < 2) {
    throw ConfigError("need at least two client parties");
  }
  for (const auto& a : config.adversaries) {
    const auto it = std::find_if(
        config.parties.begin(), config.parties.end(),
        [&](const PartySpec& p) { return p.party_id == a.party_id; });
    if (it == config.parties.end()) {
      throw ConfigError("adversary refers to unknown party " +
                        std::to_string(a.party_id));
    }
    if (it->role != PartyRole::kMalicious) {
      throw ConfigError("adversary target " + std::to_string(a.party_id) +
                        " is not flagged malicious");
    }
  }
}

ExperimentConfig inject_adversary(ExperimentConfig config, int party_id,
                                  const std::string& behavior) {
  AdversaryConfig a;
  a.party_id = party_id;
  a.behavior = parse_behavior(behavior);
  config.adversaries.push_back(a);
  validate_experiment_config(config);
  return config;
}

}  // namespace silofl::harness
