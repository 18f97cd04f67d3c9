#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

#include "silofl/errors.hpp"
#include "silofl/prg.hpp"
#include "silofl/token.hpp"

namespace silofl::sampling {

enum class Scheme { kSwor, kPoisson };

// A joint batch selection: the scheme plus the seed all parties agreed on.
// Identical (joint_seed, round, token list) yields the identical batch at
// every party, with no further communication.
struct BatchSpec {
  Scheme scheme = Scheme::kSwor;
  std::size_t batch_size = 0;  // SWOR b
  double gamma = 0.0;          // Poisson inclusion probability
  prg::Seed joint_seed{};
  std::uint64_t round = 0;
};

// Uniform size-b subset of the shared token list, via a Fisher-Yates
// shuffle driven by the keystream of (joint_seed, "swor") at stream id
// `round`. Returned sorted lexicographically (set semantics).
std::vector<Token> select_batch_swor(std::span<const Token> tokens,
                                     const BatchSpec& spec);

// Indices of this party's tokens that appear in the selected batch.
std::vector<std::size_t> local_batch(std::span<const Token> selected,
                                     std::span<const Token> own_tokens);

// Distributed Poisson sampling: each local sample joins independently with
// probability gamma. Needs no coordination and no shared seed.
std::vector<std::size_t> select_batch_poisson(std::size_t local_count,
                                              double gamma,
                                              prg::DeterministicRng& rng);

// --- Joint seed agreement (commit-then-reveal) -------------------------------
//
// Every party publishes a hash commitment to a random contribution, then
// reveals; the joint seed is the XOR of all contributions, so no single
// party controls it.

std::array<std::uint8_t, 32> commit_contribution(const prg::Seed& contribution,
                                                 int party_id);
bool verify_contribution(const std::array<std::uint8_t, 32>& commitment,
                         const prg::Seed& contribution, int party_id);
prg::Seed combine_contributions(std::span<const prg::Seed> contributions);

// --- Privacy-amplification analysis ------------------------------------------

// How many of the b SWOR draws landed on honest-held samples, under T
// malicious parties who know their own samples' batch membership.
struct AmplificationQuery {
  std::size_t population = 0;   // n
  std::size_t honest = 0;       // n_{not T}
  std::size_t batch_size = 0;   // b
  double delta_slack = 0.0;     // additional delta admitted for the bound
};

// P[X <= q] for X ~ Hypergeometric(population, successes, draws): exact
// log-space summation up to populations of 1e6, then a normal
// approximation with continuity correction.
double hypergeometric_cdf(std::int64_t q, std::uint64_t population,
                          std::uint64_t successes, std::uint64_t draws);

// Smallest q with P[X <= q] >= p.
std::int64_t hypergeometric_quantile(double p, std::uint64_t population,
                                     std::uint64_t successes,
                                     std::uint64_t draws);

// Effective sampling fraction for SWOR seen by the honest samples. Slack 0
// gives the worst case min(b, honest)/honest; slack delta' > 0 gives
// Q/honest with Q the (1-delta') hypergeometric quantile. The slack must
// be reported as additional delta.
double effective_fraction_swor(const AmplificationQuery& query);

// Poisson sampling is unaffected by malicious parties: the fraction is
// gamma itself.
double effective_fraction_poisson(double gamma);

struct AmplificationRow {
  double adversary_fraction = 0.0;
  double slack = 0.0;
  double swor_fraction = 0.0;
  double poisson_fraction = 0.0;
};

// Grid of effective fractions with Poisson matched to the SWOR mean batch
// (gamma = b/n). Rows ordered by (adversary fraction, slack).
std::vector<AmplificationRow> amplification_curve(
    std::size_t population, std::size_t batch_size,
    std::span<const double> delta_slacks,
    std::span<const double> adversary_fractions);

// CSV with header adv_frac,slack,swor_frac,poisson_frac.
void write_amplification_csv(std::ostream& out,
                             std::span<const AmplificationRow> rows);

}  // namespace silofl::sampling
