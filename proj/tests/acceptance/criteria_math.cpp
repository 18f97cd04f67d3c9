// Criteria 5, 6, 10: amplification math, the Theorem-2 sensitivity
// solver, and gradient correctness.

#include <boost/math/distributions/gamma.hpp>

#include <cmath>
#include <random>

#include "../support/oracles.hpp"
#include "../support/stats.hpp"
#include "acceptance.hpp"
#include "silofl/learner/model.hpp"
#include "silofl/projection.hpp"
#include "silofl/sampling.hpp"

namespace silofl::acceptance {

namespace {

prg::Seed accept_seed(std::uint64_t tag) {
  prg::Seed base{};
  base[0] = 0xae;
  return prg::derive_seed(base, "accept3:" + std::to_string(tag));
}

void criterion_amplification_math(Check& check) {
  using namespace silofl::sampling;

  // Quantile routine against exhaustive enumeration for every n <= 12.
  double worst = 0.0;
  for (int n = 1; n <= 12; ++n) {
    for (int successes = 0; successes <= n; ++successes) {
      for (int draws = 0; draws <= n; ++draws) {
        const int lo = std::max(0, draws - (n - successes));
        const int hi = std::min(draws, successes);
        for (int q = lo; q <= hi; ++q) {
          const double expected =
              oracles::exhaustive_hypergeom_cdf(n, successes, draws, q);
          const double got = hypergeometric_cdf(
              q, static_cast<std::uint64_t>(n),
              static_cast<std::uint64_t>(successes),
              static_cast<std::uint64_t>(draws));
          worst = std::max(worst, std::abs(got - expected));
        }
      }
    }
  }
  check.require(worst <= 1e-12,
                "hypergeometric CDF deviates from enumeration by " +
                    std::to_string(worst));

  // Fig-1 orderings on a representative grid.
  const std::vector<double> slacks{0.0, 1e-6, 1e-4, 1e-2};
  const std::vector<double> advs{0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  const std::size_t population = 1000;
  const std::size_t batch = 100;
  const auto rows = amplification_curve(population, batch, slacks, advs);
  auto swor_at = [&](double adv, double slack) {
    for (const auto& r : rows) {
      if (r.adversary_fraction == adv && r.slack == slack) {
        return r.swor_fraction;
      }
    }
    check.require(false, "missing grid row");
    return 0.0;
  };
  const double gamma = static_cast<double>(batch) / population;
  for (const auto& r : rows) {
    check.require(std::abs(r.poisson_fraction - gamma) < 1e-12,
                  "poisson fraction is not flat at gamma");
    if (r.adversary_fraction == 0.0) {
      check.require(std::abs(r.swor_fraction - gamma) < 1e-12,
                    "honest-roster swor fraction must equal b/n");
    }
    if (r.adversary_fraction > 0.0) {
      check.require(r.swor_fraction >= r.poisson_fraction - 1e-12,
                    "swor beat poisson under adversaries");
    }
  }
  for (double adv : advs) {
    if (adv == 0.0) continue;
    const double honest =
        static_cast<double>(population) * (1.0 - adv);
    const double worst_case =
        std::min(static_cast<double>(batch), honest) / honest;
    check.require(std::abs(swor_at(adv, 0.0) - worst_case) < 1e-12,
                  "slack-0 fraction must be the worst case b/n_honest");
    for (std::size_t s = 1; s < slacks.size(); ++s) {
      check.require(
          swor_at(adv, slacks[s]) <= swor_at(adv, slacks[s - 1]) + 1e-12,
          "swor fraction must be nonincreasing in slack");
      check.require(swor_at(adv, slacks[s]) >= gamma - 1e-12,
                    "slack curves must stay at or above the poisson line");
    }
  }
  for (double slack : slacks) {
    for (std::size_t a = 1; a < advs.size(); ++a) {
      check.require(
          swor_at(advs[a], slack) >= swor_at(advs[a - 1], slack) - 1e-12,
          "swor fraction must be nondecreasing in the adversary fraction");
    }
  }
}

void criterion_sensitivity_solver(Check& check) {
  using namespace silofl::projection;

  // k=1, C=1, delta'=0.05 against the independent quadrature oracle.
  const double got = solve_sensitivity(1, 1.0, 0.05);
  const double oracle =
      std::sqrt(oracles::chi2_quantile_by_quadrature(0.95, 1));
  check.note("solved C~ = " + std::to_string(got) + ", quadrature oracle " +
             std::to_string(oracle));
  check.equal_within(got, oracle, 1e-4, "solver vs quadrature oracle");
  check.equal_within(got, 1.95996, 1e-4, "solver vs reference value");

  // Monte-Carlo coverage: the solved bound holds with probability at
  // least 1 - delta' (minus 3 binomial standard errors) at 1e5 draws.
  {
    const std::size_t d = 40;
    const std::size_t k = 20;
    const double delta_prime = 0.05;
    const double clip = 1.0;
    const double sensitivity = solve_sensitivity(k, clip, delta_prime);
    std::mt19937_64 gen(99);
    std::vector<double> z(d);
    for (auto& x : z) x = std::normal_distribution<double>()(gen);
    double norm = 0.0;
    for (double x : z) norm += x * x;
    norm = std::sqrt(norm);
    for (auto& x : z) x *= clip / norm;

    const auto spec = make_spec(d, k, accept_seed(700), clip, delta_prime);
    const int trials = 100000;
    int within = 0;
    const std::vector<std::vector<double>> one{z};
    for (int t = 0; t < trials; ++t) {
      const auto p = generate_projection(spec, static_cast<std::uint64_t>(t));
      const auto projected = project_and_sum(one, p, clip);
      double pn = 0.0;
      for (double v : projected) pn += v * v;
      if (std::sqrt(pn) <= sensitivity) ++within;
    }
    const double rate = static_cast<double>(within) / trials;
    const double se = std::sqrt(delta_prime * (1 - delta_prime) / trials);
    check.require(rate >= 1.0 - delta_prime - 3.0 * se,
                  "bound coverage " + std::to_string(rate) +
                      " below 1 - delta' - 3se");
  }

  // The projected norm squared follows Gamma(k/2, 2C^2/k)
  // (Kolmogorov-Smirnov at 1e4 samples).
  {
    const std::size_t d = 25;
    const std::size_t k = 5;
    const double clip = 1.0;
    std::mt19937_64 gen(100);
    std::vector<double> a(d);
    for (auto& x : a) x = std::normal_distribution<double>()(gen);
    double norm = 0.0;
    for (double x : a) norm += x * x;
    norm = std::sqrt(norm);
    for (auto& x : a) x *= clip / norm;

    const auto spec = make_spec(d, k, accept_seed(701), clip, 1e-6);
    std::vector<double> samples;
    const std::vector<std::vector<double>> one{a};
    for (int t = 0; t < 10000; ++t) {
      const auto p = generate_projection(spec, static_cast<std::uint64_t>(t));
      const auto projected = project_and_sum(one, p, clip);
      double pn = 0.0;
      for (double v : projected) pn += v * v;
      samples.push_back(pn);
    }
    boost::math::gamma_distribution<double> dist(
        static_cast<double>(k) / 2.0, 2.0 * clip * clip / k);
    const double p_value = teststats::ks_pvalue(
        samples, [&](double x) { return boost::math::cdf(dist, x); });
    check.require(p_value > 0.01,
                  "KS test of the Gamma law: p = " + std::to_string(p_value));
  }
}

void criterion_gradient_correctness(Check& check) {
  using namespace silofl::learner;
  std::mt19937_64 gen(7);
  std::normal_distribution<double> dist;

  int tested = 0;
  double worst = 0.0;
  while (tested < 100) {
    ModelConfig config;
    switch (tested % 3) {
      case 0:
        config.kind = ModelKind::kLogisticRegression;
        config.input_dim = 5 + tested % 7;
        break;
      case 1:
        config.kind = ModelKind::kMlp;
        config.hidden = {4 + tested % 4};
        config.input_dim = 4 + tested % 5;
        break;
      default:
        config.kind = ModelKind::kMlp;
        config.hidden = {5, 3};
        config.input_dim = 4;
        break;
    }
    Model model(config);
    auto theta = model.mutable_params();
    for (auto& t : theta) t = 0.4 * dist(gen);
    std::vector<double> x(config.input_dim);
    for (auto& v : x) v = dist(gen);
    const int label = tested % 2;

    std::vector<double> grad(model.param_count(), 0.0);
    model.loss_and_gradient(x, label, grad);

    std::vector<double> fd(model.param_count(), 0.0);
    std::vector<double> scratch(model.param_count(), 0.0);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double h = 1e-5 * std::max(1.0, std::abs(theta[i]));
      const double orig = theta[i];
      theta[i] = orig + h;
      std::fill(scratch.begin(), scratch.end(), 0.0);
      const double up = model.loss_and_gradient(x, label, scratch);
      theta[i] = orig - h;
      std::fill(scratch.begin(), scratch.end(), 0.0);
      const double down = model.loss_and_gradient(x, label, scratch);
      theta[i] = orig;
      fd[i] = (up - down) / (2.0 * h);
    }
    double diff = 0.0;
    double ref = 0.0;
    for (std::size_t i = 0; i < grad.size(); ++i) {
      diff += (grad[i] - fd[i]) * (grad[i] - fd[i]);
      ref += fd[i] * fd[i];
    }
    const double rel = std::sqrt(diff) / std::max(std::sqrt(ref), 1e-300);
    worst = std::max(worst, rel);
    ++tested;
  }
  check.require(worst <= 1e-6,
                "worst relative gradient error " + std::to_string(worst));
}

}  // namespace

void register_math_criteria() {
  register_criterion(5,
                     "hypergeometric quantiles match enumeration and the "
                     "amplification curve has the Fig-1 orderings",
                     criterion_amplification_math);
  register_criterion(6,
                     "the Theorem-2 sensitivity solver matches quadrature "
                     "and its bound covers the projected norm",
                     criterion_sensitivity_solver);
  register_criterion(10,
                     "per-example gradients match central finite "
                     "differences on 100 random (model, example) pairs",
                     criterion_gradient_correctness);
}

}  // namespace silofl::acceptance
