#pragma once

// Independent oracles: deliberately naive implementations used only to
// check the library's fast paths. They must not share code with what
// they verify.

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

namespace silofl::oracles {

// Exhaustive hypergeometric CDF by enumerating every size-b subset of an
// n-element population whose first `successes` elements are marked.
// Exact rational arithmetic in unsigned 128-bit counts; n <= 20.
inline double exhaustive_hypergeom_cdf(int n, int successes, int draws,
                                       int q) {
  if (n > 20) throw std::invalid_argument("enumeration limited to n <= 20");
  unsigned __int128 total = 0;
  unsigned __int128 at_most_q = 0;
  const std::uint32_t limit = 1u << n;
  for (std::uint32_t mask = 0; mask < limit; ++mask) {
    if (__builtin_popcount(mask) != draws) continue;
    ++total;
    const int hits =
        __builtin_popcount(mask & ((1u << successes) - 1u));
    if (hits <= q) ++at_most_q;
  }
  return static_cast<double>(at_most_q) / static_cast<double>(total);
}

// Adaptive Simpson quadrature.
inline double simpson(const std::function<double(double)>& f, double a,
                      double b, int depth, double fa, double fm, double fb,
                      double whole) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) < 1e-13) {
    return left + right;
  }
  return simpson(f, a, m, depth - 1, fa, flm, fm, left) +
         simpson(f, m, b, depth - 1, fm, frm, fb, right);
}

inline double integrate(const std::function<double(double)>& f, double a,
                        double b) {
  const double m = 0.5 * (a + b);
  const double fa = f(a);
  const double fm = f(m);
  const double fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson(f, a, b, 48, fa, fm, fb, whole);
}

// Chi-squared(k) CDF by direct quadrature of the density; independent of
// any incomplete-gamma implementation.
inline double chi2_cdf_by_quadrature(double x, int k) {
  if (x <= 0.0) return 0.0;
  const double half_k = 0.5 * static_cast<double>(k);
  const double log_norm =
      -half_k * std::log(2.0) - std::lgamma(half_k);
  auto density = [&](double t) {
    if (t <= 0.0) return 0.0;
    return std::exp(log_norm + (half_k - 1.0) * std::log(t) - 0.5 * t);
  };
  return integrate(density, 1e-12, x);
}

// (1-delta) quantile of chi-squared(k) by bisection over the quadrature
// CDF.
inline double chi2_quantile_by_quadrature(double p, int k) {
  double lo = 0.0;
  double hi = static_cast<double>(k) + 20.0 * std::sqrt(2.0 * k) + 20.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (chi2_cdf_by_quadrature(mid, k) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Modular sum of encodings via 128-bit integer arithmetic: the
// arbitrary-precision oracle for the secure-summation pipelines.
inline std::vector<std::uint64_t> modsum_oracle(
    const std::vector<std::vector<std::uint64_t>>& vectors,
    std::uint64_t modulus_mask) {
  std::vector<std::uint64_t> out(vectors.at(0).size(), 0);
  for (const auto& v : vectors) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      const unsigned __int128 s =
          static_cast<unsigned __int128>(out[i]) + v[i];
      out[i] = static_cast<std::uint64_t>(s) & modulus_mask;
    }
  }
  return out;
}

}  // namespace silofl::oracles
