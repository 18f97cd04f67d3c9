#include "silofl/projection.hpp"

#include <boost/math/distributions/gamma.hpp>

#include <cmath>
#include <string>

namespace silofl::projection {

void ProjectionSpec::validate() const {
  if (projection_dim < 1 || projection_dim > ambient_dim) {
    throw DimensionError("projection: need 1 <= k <= d, got k=" +
                         std::to_string(projection_dim) +
                         " d=" + std::to_string(ambient_dim));
  }
  if (!(clip_norm > 0.0)) {
    throw ConfigError("projection: clip norm must be positive");
  }
  if (!(delta_prime > 0.0 && delta_prime < 1.0)) {
    throw ConfigError("projection: delta' must lie in (0,1)");
  }
}

double solve_sensitivity(std::size_t k, double clip_norm, double delta_prime) {
  if (k < 1) {
    throw DimensionError("solve_sensitivity: k must be at least 1");
  }
  if (clip_norm < 0.0) {
    throw ConfigError("solve_sensitivity: negative clip norm");
  }
  if (!(delta_prime > 0.0 && delta_prime < 1.0)) {
    throw ConfigError("solve_sensitivity: delta' must lie in (0,1)");
  }
  if (clip_norm == 0.0) {
    return 0.0;
  }
  const double shape = static_cast<double>(k) / 2.0;
  const double scale =
      2.0 * clip_norm * clip_norm / static_cast<double>(k);
  boost::math::gamma_distribution<double> dist(shape, scale);
  return std::sqrt(boost::math::quantile(dist, 1.0 - delta_prime));
}

ProjectionSpec make_spec(std::size_t ambient_dim, std::size_t projection_dim,
                         const prg::Seed& seed, double clip_norm,
                         double delta_prime) {
  ProjectionSpec spec;
  spec.ambient_dim = ambient_dim;
  spec.projection_dim = projection_dim;
  spec.seed = seed;
  spec.clip_norm = clip_norm;
  spec.delta_prime = delta_prime;
  spec.proj_sensitivity =
      solve_sensitivity(projection_dim, clip_norm, delta_prime);
  spec.validate();
  return spec;
}

ProjectionMatrix generate_projection(const ProjectionSpec& spec,
                                     std::uint64_t round) {
  spec.validate();
  ProjectionMatrix P;
  P.rows = spec.ambient_dim;
  P.cols = spec.projection_dim;
  P.data.resize(P.rows * P.cols);
  prg::DeterministicRng rng(prg::derive_seed(spec.seed, "proj"), round);
  const double stddev =
      1.0 / std::sqrt(static_cast<double>(spec.projection_dim));
  rng.fill_gaussian(P.data, stddev);
  return P;
}

std::vector<double> project_and_sum(
    std::span<const std::vector<double>> gradients, const ProjectionMatrix& P,
    double clip_norm) {
  // Tolerate only float roundoff above the bound; anything more means the
  // learner failed to clip.
  const double bound = clip_norm * (1.0 + 1e-9);
  std::vector<double> total(P.rows, 0.0);
  for (const auto& g : gradients) {
    if (g.size() != P.rows) {
      throw DimensionError("project_and_sum: gradient dimension mismatch");
    }
    double sq = 0.0;
    for (double v : g) sq += v * v;
    if (std::sqrt(sq) > bound) {
      throw ClipViolation("project_and_sum: gradient norm " +
                          std::to_string(std::sqrt(sq)) + " exceeds clip " +
                          std::to_string(clip_norm));
    }
    for (std::size_t i = 0; i < g.size(); ++i) total[i] += g[i];
  }
  // Linearity: P^T applied once to the sum equals the sum of projections.
  std::vector<double> out(P.cols, 0.0);
  for (std::size_t i = 0; i < P.rows; ++i) {
    const double s = total[i];
    if (s == 0.0) continue;
    const double* row = P.data.data() + i * P.cols;
    for (std::size_t j = 0; j < P.cols; ++j) {
      out[j] += s * row[j];
    }
  }
  return out;
}

std::vector<double> reconstruct(std::span<const double> noisy_projection,
                                const ProjectionMatrix& P) {
  if (noisy_projection.size() != P.cols) {
    throw DimensionError("reconstruct: expected k = " +
                         std::to_string(P.cols) + " got " +
                         std::to_string(noisy_projection.size()));
  }
  std::vector<double> out(P.rows, 0.0);
  for (std::size_t i = 0; i < P.rows; ++i) {
    const double* row = P.data.data() + i * P.cols;
    double acc = 0.0;
    for (std::size_t j = 0; j < P.cols; ++j) {
      acc += row[j] * noisy_projection[j];
    }
    out[i] = acc;
  }
  return out;
}

}  // namespace silofl::projection
