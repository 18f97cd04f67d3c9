#pragma once

#include <memory>
#include <string>
#include <vector>

#include "silofl/errors.hpp"
#include "silofl/prg.hpp"

namespace silofl::dpnoise {

enum class NoiseMode { kTee, kCollusionRobust };

// Per-party share of the total DP noise. Gaussians are infinitely
// divisible, so N independent N(0, sigma_i^2) shares sum to the target
// aggregate noise.
struct NoisePlan {
  double total_sigma = 0.0;   // target std of the aggregate noise
  int parties = 0;            // N
  int colluders = 0;          // T (collusion_robust mode only)
  double per_party_sigma = 0.0;
  NoiseMode mode = NoiseMode::kTee;

  // N * sigma_i^2: equals sigma^2 in tee mode, sigma^2 * N/(N-T-1) in
  // collusion-robust mode.
  double aggregate_variance() const {
    return parties * per_party_sigma * per_party_sigma;
  }
};

// tee: sigma_i^2 = sigma^2 / N (trusted-aggregator noise level).
// collusion_robust: sigma_i^2 = sigma^2 / (N - T - 1), the minimal noise
// that keeps the non-colluding parties' contributions protected against
// T colluders.
NoisePlan plan_noise(double sigma, int parties, int colluders, NoiseMode mode);

// i.i.d. Gaussian vector with std per_party_sigma, drawn from the party's
// own stream.
std::vector<double> sample_noise_share(const NoisePlan& plan, std::size_t dim,
                                       prg::DeterministicRng& rng);

struct MechanismParams {
  double clip_norm = 1.0;        // C
  double noise_multiplier = 1.0; // sigma / C
  double delta = 1e-5;
  double epsilon = 0.0;          // reported, filled by the accountant
  int steps = 1;
  double sampling_fraction = 1.0;
};

// Accountant interface. The built-in bound is deliberately conservative
// (no subsampling amplification); tighter numerical accountants can be
// plugged in behind this interface.
class PrivacyAccountant {
 public:
  virtual ~PrivacyAccountant() = default;
  virtual double epsilon(const MechanismParams& params) const = 0;
  virtual std::string name() const = 0;
};

// Composes `steps` Gaussian mechanisms exactly (the k-fold composition of
// a Gaussian mechanism is a Gaussian mechanism with noise multiplier
// z/sqrt(k)) and inverts the single-shot analytic Gaussian bound at the
// requested delta. Ignores sampling_fraction, which can only overstate
// epsilon.
class ConservativeAccountant final : public PrivacyAccountant {
 public:
  double epsilon(const MechanismParams& params) const override;
  std::string name() const override { return "conservative-gaussian"; }
};

// Convenience wrapper over the built-in accountant.
double account_privacy(const MechanismParams& params);

// Exact delta of a single Gaussian mechanism with noise multiplier z at
// privacy level eps (the analytic Gaussian mechanism curve). Exposed for
// verification; decreasing in both arguments.
double analytic_gaussian_delta(double noise_multiplier, double epsilon);

}  // namespace silofl::dpnoise
