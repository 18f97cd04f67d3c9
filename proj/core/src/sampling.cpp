#include "silofl/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <set>

namespace silofl::sampling {

namespace {

double log_choose(std::uint64_t n, std::uint64_t k) {
  if (k > n) return -std::numeric_limits<double>::infinity();
  return std::lgamma(static_cast<double>(n) + 1.0) -
         std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(n - k) + 1.0);
}

// Populations beyond this use the normal approximation; below it the CDF
// is an exact term-by-term summation of the pmf computed in log space.
constexpr std::uint64_t kExactPopulationLimit = 1'000'000;

}  // namespace

std::vector<Token> select_batch_swor(std::span<const Token> tokens,
                                     const BatchSpec& spec) {
  if (spec.scheme != Scheme::kSwor) {
    throw ConfigError("select_batch_swor: spec is not SWOR");
  }
  if (spec.batch_size > tokens.size()) {
    throw BatchTooLarge("select_batch_swor: b = " +
                        std::to_string(spec.batch_size) + " > n = " +
                        std::to_string(tokens.size()));
  }
  std::vector<std::size_t> order(tokens.size());
  std::iota(order.begin(), order.end(), 0);
  prg::DeterministicRng rng(prg::derive_seed(spec.joint_seed, "swor"),
                            spec.round);
  rng.shuffle(order);

  std::vector<Token> selected;
  selected.reserve(spec.batch_size);
  for (std::size_t i = 0; i < spec.batch_size; ++i) {
    selected.push_back(tokens[order[i]]);
  }
  std::sort(selected.begin(), selected.end());
  return selected;
}

std::vector<std::size_t> local_batch(std::span<const Token> selected,
                                     std::span<const Token> own_tokens) {
  // `selected` is sorted; binary-search each own token.
  std::vector<std::size_t> indices;
  for (std::size_t j = 0; j < own_tokens.size(); ++j) {
    if (std::binary_search(selected.begin(), selected.end(), own_tokens[j])) {
      indices.push_back(j);
    }
  }
  return indices;
}

std::vector<std::size_t> select_batch_poisson(std::size_t local_count,
                                              double gamma,
                                              prg::DeterministicRng& rng) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw ConfigError("select_batch_poisson: gamma must lie in (0,1)");
  }
  std::vector<std::size_t> indices;
  for (std::size_t j = 0; j < local_count; ++j) {
    if (rng.next_unit() < gamma) {
      indices.push_back(j);
    }
  }
  return indices;
}

std::array<std::uint8_t, 32> commit_contribution(const prg::Seed& contribution,
                                                 int party_id) {
  std::vector<std::uint8_t> msg;
  msg.reserve(12 + contribution.size());
  const char tag[] = "jointseed";
  msg.insert(msg.end(), tag, tag + sizeof(tag) - 1);
  for (int i = 0; i < 4; ++i) {
    msg.push_back(static_cast<std::uint8_t>(
        static_cast<std::uint32_t>(party_id) >> (8 * i)));
  }
  msg.insert(msg.end(), contribution.begin(), contribution.end());
  return prg::hash256(msg);
}

bool verify_contribution(const std::array<std::uint8_t, 32>& commitment,
                         const prg::Seed& contribution, int party_id) {
  return commit_contribution(contribution, party_id) == commitment;
}

prg::Seed combine_contributions(std::span<const prg::Seed> contributions) {
  if (contributions.empty()) {
    throw ConfigError("combine_contributions: no contributions");
  }
  prg::Seed joint{};
  for (const auto& c : contributions) {
    for (std::size_t i = 0; i < joint.size(); ++i) {
      joint[i] ^= c[i];
    }
  }
  return joint;
}

double hypergeometric_cdf(std::int64_t q, std::uint64_t population,
                          std::uint64_t successes, std::uint64_t draws) {
  if (successes > population || draws > population) {
    throw ConfigError("hypergeometric_cdf: successes/draws exceed population");
  }
  const std::int64_t lo =
      std::max<std::int64_t>(0, static_cast<std::int64_t>(draws) -
                                    static_cast<std::int64_t>(population -
                                                              successes));
  const std::int64_t hi = static_cast<std::int64_t>(std::min(draws, successes));
  if (q < lo) return 0.0;
  if (q >= hi) return 1.0;

  if (population > kExactPopulationLimit) {
    // Normal approximation with continuity correction, documented for
    // populations past the exact-summation limit.
    const double n = static_cast<double>(population);
    const double frac = static_cast<double>(successes) / n;
    const double b = static_cast<double>(draws);
    const double mean = b * frac;
    const double var = b * frac * (1.0 - frac) * (n - b) / (n - 1.0);
    const double zarg = (static_cast<double>(q) + 0.5 - mean) /
                        std::sqrt(std::max(var, 1e-300));
    return 0.5 * std::erfc(-zarg / std::sqrt(2.0));
  }

  const double log_denom = log_choose(population, draws);
  double cdf = 0.0;
  double compensation = 0.0;  // Kahan summation
  for (std::int64_t x = lo; x <= q; ++x) {
    const double log_pmf =
        log_choose(successes, static_cast<std::uint64_t>(x)) +
        log_choose(population - successes,
                   draws - static_cast<std::uint64_t>(x)) -
        log_denom;
    const double term = std::exp(log_pmf);
    const double y = term - compensation;
    const double t = cdf + y;
    compensation = (t - cdf) - y;
    cdf = t;
  }
  return std::min(cdf, 1.0);
}

std::int64_t hypergeometric_quantile(double p, std::uint64_t population,
                                     std::uint64_t successes,
                                     std::uint64_t draws) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ConfigError("hypergeometric_quantile: p outside [0,1]");
  }
  const std::int64_t lo =
      std::max<std::int64_t>(0, static_cast<std::int64_t>(draws) -
                                    static_cast<std::int64_t>(population -
                                                              successes));
  const std::int64_t hi = static_cast<std::int64_t>(std::min(draws, successes));

  if (population > kExactPopulationLimit) {
    const double n = static_cast<double>(population);
    const double frac = static_cast<double>(successes) / n;
    const double b = static_cast<double>(draws);
    const double mean = b * frac;
    const double var = b * frac * (1.0 - frac) * (n - b) / (n - 1.0);
    const double z = prg::inverse_normal_cdf(std::clamp(p, 1e-15, 1 - 1e-15));
    auto guess = static_cast<std::int64_t>(
        std::ceil(mean + z * std::sqrt(std::max(var, 1e-300)) - 0.5));
    return std::clamp(guess, lo, hi);
  }

  // Walk the support accumulating mass; the support is at most
  // min(draws, successes) wide.
  const double log_denom = log_choose(population, draws);
  double cdf = 0.0;
  double compensation = 0.0;
  for (std::int64_t x = lo; x <= hi; ++x) {
    const double log_pmf =
        log_choose(successes, static_cast<std::uint64_t>(x)) +
        log_choose(population - successes,
                   draws - static_cast<std::uint64_t>(x)) -
        log_denom;
    const double term = std::exp(log_pmf);
    const double y = term - compensation;
    const double t = cdf + y;
    compensation = (t - cdf) - y;
    cdf = t;
    if (cdf >= p) {
      return x;
    }
  }
  return hi;
}

double effective_fraction_swor(const AmplificationQuery& query) {
  if (query.honest == 0 || query.honest > query.population ||
      query.batch_size > query.population) {
    throw ConfigError("effective_fraction_swor: invalid query");
  }
  if (query.delta_slack < 0.0) {
    throw ConfigError("effective_fraction_swor: negative slack");
  }
  const double honest = static_cast<double>(query.honest);
  if (query.delta_slack == 0.0) {
    // Worst case: every batch draw lands on an honest sample.
    const double worst =
        static_cast<double>(std::min(query.batch_size, query.honest));
    return worst / honest;
  }
  const std::int64_t q = hypergeometric_quantile(
      1.0 - query.delta_slack, query.population, query.honest,
      query.batch_size);
  return std::min(static_cast<double>(q) / honest, 1.0);
}

double effective_fraction_poisson(double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw ConfigError("effective_fraction_poisson: gamma must lie in (0,1)");
  }
  return gamma;
}

std::vector<AmplificationRow> amplification_curve(
    std::size_t population, std::size_t batch_size,
    std::span<const double> delta_slacks,
    std::span<const double> adversary_fractions) {
  if (delta_slacks.empty() || adversary_fractions.empty()) {
    throw ConfigError("amplification_curve: empty grid");
  }
  const double gamma_matched =
      static_cast<double>(batch_size) / static_cast<double>(population);
  std::vector<AmplificationRow> rows;
  for (double adv : adversary_fractions) {
    if (!(adv >= 0.0 && adv < 1.0)) {
      throw ConfigError("amplification_curve: adversary fraction outside [0,1)");
    }
    const auto malicious = static_cast<std::size_t>(
        std::llround(adv * static_cast<double>(population)));
    const std::size_t honest = population - std::min(malicious, population - 1);
    for (double slack : delta_slacks) {
      AmplificationRow row;
      row.adversary_fraction = adv;
      row.slack = slack;
      row.swor_fraction = effective_fraction_swor(
          {population, honest, batch_size, slack});
      row.poisson_fraction = gamma_matched;
      rows.push_back(row);
    }
  }
  return rows;
}

void write_amplification_csv(std::ostream& out,
                             std::span<const AmplificationRow> rows) {
  out << "adv_frac,slack,swor_frac,poisson_frac\n";
  for (const auto& row : rows) {
    out << row.adversary_fraction << ',' << row.slack << ','
        << row.swor_fraction << ',' << row.poisson_fraction << '\n';
  }
}

}  // namespace silofl::sampling
