#include "silofl/dpnoise.hpp"

#include <cmath>
#include <string>

namespace silofl::dpnoise {

namespace {

constexpr double kPi = 3.14159265358979323846;

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// log Phi(x), stable in the far lower tail where erfc underflows.
double log_norm_cdf(double x) {
  if (x > -10.0) {
    return std::log(norm_cdf(x));
  }
  const double x2 = x * x;
  // Asymptotic Mills-ratio expansion: Phi(x) ~ phi(x)/|x| * (1 - 1/x^2 + 3/x^4).
  const double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2);
  return -0.5 * x2 - std::log(-x) - 0.5 * std::log(2.0 * kPi) +
         std::log(series);
}

}  // namespace

NoisePlan plan_noise(double sigma, int parties, int colluders,
                     NoiseMode mode) {
  if (parties < 2) {
    throw ConfigError("plan_noise: at least two parties required");
  }
  if (sigma < 0.0) {
    throw ConfigError("plan_noise: sigma must be nonnegative");
  }
  NoisePlan plan;
  plan.total_sigma = sigma;
  plan.parties = parties;
  plan.colluders = colluders;
  plan.mode = mode;
  switch (mode) {
    case NoiseMode::kTee:
      plan.per_party_sigma = sigma / std::sqrt(static_cast<double>(parties));
      break;
    case NoiseMode::kCollusionRobust: {
      if (colluders < 0) {
        throw ConfigError("plan_noise: colluder count must be nonnegative");
      }
      const int honest_margin = parties - colluders - 1;
      if (honest_margin < 1) {
        throw DegenerateCollusion(
            "plan_noise: N - T - 1 = " + std::to_string(honest_margin) +
            ", no honest noise remains under " + std::to_string(colluders) +
            " colluders among " + std::to_string(parties));
      }
      plan.per_party_sigma =
          sigma / std::sqrt(static_cast<double>(honest_margin));
      break;
    }
  }
  return plan;
}

std::vector<double> sample_noise_share(const NoisePlan& plan, std::size_t dim,
                                       prg::DeterministicRng& rng) {
  std::vector<double> share(dim, 0.0);
  if (plan.per_party_sigma > 0.0) {
    rng.fill_gaussian(share, plan.per_party_sigma);
  }
  return share;
}

double analytic_gaussian_delta(double noise_multiplier, double epsilon) {
  const double z = noise_multiplier;
  const double a = 1.0 / (2.0 * z) - epsilon * z;
  const double b = -1.0 / (2.0 * z) - epsilon * z;
  // exp(eps + log Phi(b)) never overflows: the exponent peaks at zero.
  return norm_cdf(a) - std::exp(epsilon + log_norm_cdf(b));
}

double ConservativeAccountant::epsilon(const MechanismParams& params) const {
  if (params.steps < 0) {
    throw ConfigError("accountant: negative step count");
  }
  if (params.steps == 0) {
    return 0.0;  // the data are never touched
  }
  if (!(params.delta > 0.0 && params.delta < 1.0)) {
    throw UnachievableBudget("accountant: delta must lie in (0,1)");
  }
  if (!(params.noise_multiplier > 0.0)) {
    throw UnachievableBudget("accountant: noise multiplier must be positive");
  }
  if (!(params.sampling_fraction >= 0.0 && params.sampling_fraction <= 1.0)) {
    throw ConfigError("accountant: sampling fraction outside [0,1]");
  }

  // Exact Gaussian composition: k identical Gaussian mechanisms compose to
  // one with multiplier z/sqrt(k).
  const double z_eff =
      params.noise_multiplier / std::sqrt(static_cast<double>(params.steps));

  if (analytic_gaussian_delta(z_eff, 0.0) <= params.delta) {
    return 0.0;
  }
  double hi = 1.0;
  while (analytic_gaussian_delta(z_eff, hi) > params.delta) {
    hi *= 2.0;
    if (hi > 1e7) {
      throw UnachievableBudget(
          "accountant: epsilon bound diverges for noise multiplier " +
          std::to_string(params.noise_multiplier) + " over " +
          std::to_string(params.steps) + " steps at delta " +
          std::to_string(params.delta));
    }
  }
  double lo = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (analytic_gaussian_delta(z_eff, mid) > params.delta) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

double account_privacy(const MechanismParams& params) {
  return ConservativeAccountant{}.epsilon(params);
}

}  // namespace silofl::dpnoise
