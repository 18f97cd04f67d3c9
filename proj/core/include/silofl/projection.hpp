#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "silofl/errors.hpp"
#include "silofl/prg.hpp"

namespace silofl::projection {

// Shared description of the random projection step. proj_sensitivity is
// the solved high-probability bound on ||P^T a||_2 for ||a||_2 <= clip_norm;
// delta_prime is the slack it costs, folded into the reported delta.
struct ProjectionSpec {
  std::size_t ambient_dim = 0;     // d
  std::size_t projection_dim = 0;  // k
  prg::Seed seed{};
  double clip_norm = 1.0;          // C
  double proj_sensitivity = 0.0;   // C~
  double delta_prime = 1e-6;

  void validate() const;
};

struct ProjectionMatrix {
  std::size_t rows = 0;  // d
  std::size_t cols = 0;  // k
  std::vector<double> data;  // row-major, rows x cols

  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

// Smallest C~ with P[Gamma(k/2, 2C^2/k) <= C~^2] >= 1 - delta', i.e.
// C~^2 = C^2/k times the (1-delta') quantile of chi-squared with k
// degrees of freedom. ||P^T a||^2 for ||a|| = C follows exactly that
// Gamma law under the independent coupling.
double solve_sensitivity(std::size_t k, double clip_norm, double delta_prime);

// Fills proj_sensitivity from the other fields.
ProjectionSpec make_spec(std::size_t ambient_dim, std::size_t projection_dim,
                         const prg::Seed& seed, double clip_norm,
                         double delta_prime);

// d x k matrix with entries i.i.d. N(0, 1/k), expanded deterministically
// from (spec.seed, round): every party holding the seed regenerates the
// identical matrix each optimisation step.
ProjectionMatrix generate_projection(const ProjectionSpec& spec,
                                     std::uint64_t round = 0);

// P^T (sum of the given clipped gradients). Each gradient must respect
// clip_norm; a violation indicates a learner bug, not a protocol input.
std::vector<double> project_and_sum(
    std::span<const std::vector<double>> gradients, const ProjectionMatrix& P,
    double clip_norm);

// P v: lifts the k-dimensional noisy sum back to d dimensions. Unbiased
// for the signal term over the draw of P.
std::vector<double> reconstruct(std::span<const double> noisy_projection,
                                const ProjectionMatrix& P);

}  // namespace silofl::projection
