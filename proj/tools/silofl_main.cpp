// Command line front end: run experiments, analyze sampling amplification,
// solve projection sensitivities, and create token lists.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "silofl/harness/config.hpp"
#include "silofl/harness/experiment.hpp"
#include "silofl/mixnet.hpp"
#include "silofl/projection.hpp"
#include "silofl/sampling.hpp"

namespace {

int run_experiment_cmd(const std::string& config_path,
                       const std::string& out_override) {
  auto config = silofl::harness::load_experiment_config(config_path);
  if (!out_override.empty()) {
    config.out_dir = out_override;
  }
  const auto result = silofl::harness::run_experiment(config);
  if (result.aborted) {
    std::cerr << "experiment aborted: " << result.abort_reason << "\n";
    return 2;
  }
  std::cout << "final train accuracy " << result.report.final_train_accuracy;
  if (!result.report.test_curve.empty()) {
    std::cout << ", test accuracy " << result.report.final_test_accuracy;
  }
  if (std::isfinite(result.report.epsilon)) {
    std::cout << ", epsilon " << result.report.epsilon << " at delta "
              << result.report.delta_total;
  }
  std::cout << "\nresults written to " << config.out_dir << "/result.json\n";
  return 0;
}

int analyze_amplification_cmd(std::size_t n, std::size_t b,
                              std::vector<double> slacks,
                              std::vector<double> adv_fracs,
                              const std::string& out_path) {
  if (slacks.empty()) slacks = {0.0, 1e-6, 1e-4, 1e-2};
  if (adv_fracs.empty()) adv_fracs = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  const auto rows =
      silofl::sampling::amplification_curve(n, b, slacks, adv_fracs);
  if (out_path.empty()) {
    silofl::sampling::write_amplification_csv(std::cout, rows);
  } else {
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) {
      std::cerr << "cannot open " << out_path << "\n";
      return 1;
    }
    silofl::sampling::write_amplification_csv(out, rows);
    std::cout << "wrote " << rows.size() << " rows to " << out_path << "\n";
  }
  return 0;
}

int solve_sensitivity_cmd(std::size_t k, double c, double delta_prime) {
  const double solved =
      silofl::projection::solve_sensitivity(k, c, delta_prime);
  std::cout.precision(12);
  std::cout << solved << "\n";
  return 0;
}

int make_token_list_cmd(const std::string& config_path,
                        const std::string& out_path) {
  auto config = silofl::harness::load_experiment_config(config_path);
  if (!out_path.empty()) {
    config.token_list_path = out_path;
  }
  if (config.token_list_path.empty()) {
    std::cerr << "no token list path (give --out or set token_list)\n";
    return 1;
  }
  // Force regeneration rather than silently reusing a stale file.
  if (std::filesystem::exists(config.token_list_path)) {
    std::filesystem::remove(config.token_list_path);
  }
  silofl::harness::validate_experiment_config(config);
  const auto data = silofl::harness::build_dataset(config);
  const silofl::mixnet::SealedBoxCipher cipher;
  const auto outcome = silofl::harness::make_token_list(config, data, cipher);
  if (outcome.tamper_detected) {
    std::cerr << "mixnet tampering detected " << outcome.tamper_reason << "\n";
    return 2;
  }
  std::cout << "wrote " << outcome.assignment.shared_list.size()
            << " tokens to " << config.token_list_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentially private cross-silo federated learning "
               "simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path;

  auto* run = app.add_subcommand("run-experiment",
                                 "Run a full experiment from a JSON config");
  run->add_option("--config", config_path, "experiment config file")
      ->required();
  run->add_option("--out", out_path, "output directory override");

  std::size_t amp_n = 1000;
  std::size_t amp_b = 100;
  std::vector<double> amp_slacks;
  std::vector<double> amp_advs;
  std::string amp_out;
  auto* amp = app.add_subcommand(
      "analyze-amplification",
      "Effective sampling fractions under malicious parties (CSV)");
  amp->add_option("--n", amp_n, "total sample count");
  amp->add_option("--b", amp_b, "SWOR batch size");
  amp->add_option("--slack", amp_slacks, "delta slack grid");
  amp->add_option("--adv-frac", amp_advs, "adversary fraction grid");
  amp->add_option("--out", amp_out, "output CSV path (default stdout)");

  std::size_t sens_k = 1;
  double sens_c = 1.0;
  double sens_delta = 0.05;
  auto* sens = app.add_subcommand(
      "solve-sensitivity",
      "Smallest projection sensitivity satisfying the Gamma-quantile bound");
  sens->add_option("--k", sens_k, "projection dimension")->required();
  sens->add_option("--c", sens_c, "clip norm C")->required();
  sens->add_option("--delta-prime", sens_delta, "probability slack")
      ->required();

  auto* mk = app.add_subcommand("make-token-list",
                                "Run the mixnet and persist the token list");
  mk->add_option("--config", config_path, "experiment config file")
      ->required();
  mk->add_option("--out", out_path, "token list output path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      return run_experiment_cmd(config_path, out_path);
    }
    if (amp->parsed()) {
      return analyze_amplification_cmd(amp_n, amp_b, amp_slacks, amp_advs,
                                       amp_out);
    }
    if (sens->parsed()) {
      return solve_sensitivity_cmd(sens_k, sens_c, sens_delta);
    }
    if (mk->parsed()) {
      return make_token_list_cmd(config_path, out_path);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
