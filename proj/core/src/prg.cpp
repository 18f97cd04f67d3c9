#include "silofl/prg.hpp"

#include <sodium.h>

#include <cmath>
#include <cstring>
#include <mutex>
#include <stdexcept>

namespace silofl::prg {

namespace {

void ensure_sodium() {
  static std::once_flag flag;
  std::call_once(flag, [] {
    if (sodium_init() < 0) {
      throw std::runtime_error("libsodium initialisation failed");
    }
  });
}

void store_le64(std::uint8_t* out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    out[i] = static_cast<std::uint8_t>(v >> (8 * i));
  }
}

std::uint64_t load_le64(const std::uint8_t* in) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) {
    v = (v << 8) | in[i];
  }
  return v;
}

}  // namespace

std::uint64_t keystream_word(const Seed& seed, std::uint64_t counter,
                             std::uint64_t index) {
  ensure_sodium();
  std::uint8_t msg[16];
  store_le64(msg, counter);
  store_le64(msg + 8, index);
  std::uint8_t out[8];
  crypto_generichash(out, sizeof out, msg, sizeof msg, seed.data(),
                     seed.size());
  return load_le64(out);
}

std::array<std::uint64_t, 8> keystream_block(const Seed& seed,
                                             std::uint64_t stream,
                                             std::uint64_t block) {
  ensure_sodium();
  std::uint8_t msg[16];
  store_le64(msg, stream);
  store_le64(msg + 8, block);
  std::uint8_t out[64];
  crypto_generichash(out, sizeof out, msg, sizeof msg, seed.data(),
                     seed.size());
  std::array<std::uint64_t, 8> words;
  for (int i = 0; i < 8; ++i) {
    words[i] = load_le64(out + 8 * i);
  }
  return words;
}

Seed derive_seed(const Seed& master, std::string_view tag) {
  ensure_sodium();
  Seed out;
  crypto_generichash(out.data(), out.size(),
                     reinterpret_cast<const std::uint8_t*>(tag.data()),
                     tag.size(), master.data(), master.size());
  return out;
}

std::array<std::uint8_t, 32> hash256(std::span<const std::uint8_t> data) {
  ensure_sodium();
  std::array<std::uint8_t, 32> out;
  crypto_generichash(out.data(), out.size(), data.data(), data.size(),
                     nullptr, 0);
  return out;
}

Seed seed_from_bytes(std::span<const std::uint8_t> data) {
  if (data.size() == kSeedBytes) {
    Seed s;
    std::memcpy(s.data(), data.data(), kSeedBytes);
    return s;
  }
  return hash256(data);
}

Seed seed_from_string(std::string_view text) {
  return seed_from_bytes(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

// Wichura's algorithm AS 241 (PPND16): max relative error about 1e-15
// over (0,1). Chosen over std::normal_distribution because the output
// must be bit-identical across platforms and library versions.
double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::domain_error("inverse_normal_cdf: p must lie in (0,1)");
  }
  static constexpr double a[8] = {
      3.3871328727963666080e0,  1.3314166789178437745e2,
      1.9715909503065514427e3,  1.3731693765509461125e4,
      4.5921953931549871457e4,  6.7265770927008700853e4,
      3.3430575583588128105e4,  2.5090809287301226727e3};
  static constexpr double b[8] = {
      1.0,                      4.2313330701600911252e1,
      6.8718700749205790830e2,  5.3941960214247511077e3,
      2.1213794301586595867e4,  3.9307895800092710610e4,
      2.8729085735721942674e4,  5.2264952788528545610e3};
  static constexpr double c[8] = {
      1.42343711074968357734e0,  4.63033784615654529590e0,
      5.76949722146069140550e0,  3.64784832476320460504e0,
      1.27045825245236838258e0,  2.41780725177450611770e-1,
      2.27238449892691845833e-2, 7.74545014278341407640e-4};
  static constexpr double d[8] = {
      1.0,                       2.05319162663775882187e0,
      1.67638483018380384940e0,  6.89767334985100004550e-1,
      1.48103976427480074590e-1, 1.51986665636164571966e-2,
      5.47593808499534494600e-4, 1.05075007164441684324e-9};
  static constexpr double e[8] = {
      6.65790464350110377720e0,  5.46378491116411436990e0,
      1.78482653991729133580e0,  2.96560571828504891230e-1,
      2.65321895265761230930e-2, 1.24266094738807843860e-3,
      2.71155556874348757815e-5, 2.01033439929228813265e-7};
  static constexpr double f[8] = {
      1.0,                       5.99832206555887937690e-1,
      1.36929880922735805310e-1, 1.48753612908506148525e-2,
      7.86869131145613259100e-4, 1.84631831751005468180e-6,
      1.42151175831644588870e-15, 0.0};

  auto ratio = [](const double (&num)[8], const double (&den)[8], double t) {
    double n = num[7];
    double m = den[7];
    for (int i = 6; i >= 0; --i) {
      n = n * t + num[i];
      m = m * t + den[i];
    }
    return n / m;
  };

  const double q = p - 0.5;
  double x;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    x = q * ratio(a, b, r);
  } else {
    double r = (q < 0.0) ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    const double val = r <= 5.0 ? ratio(c, d, r - 1.6) : ratio(e, f, r - 5.0);
    x = (q < 0.0) ? -val : val;
  }
  // Halley iteration against the exact CDF pins the estimate to full
  // double precision, including the far tails where the rational fit
  // drifts. Two steps suffice near the centre; the deep tail needs a few
  // more because the CDF varies double-exponentially there.
  for (int iter = 0; iter < 16 && 0.5 * x * x < 700.0; ++iter) {
    const double cdf = 0.5 * std::erfc(-x / std::sqrt(2.0));
    const double u = (cdf - p) * std::sqrt(2.0 * 3.14159265358979323846) *
                     std::exp(0.5 * x * x);
    const double step = u / (1.0 + 0.5 * x * u);
    x -= step;
    if (std::abs(step) <= 1e-14 * std::abs(x)) {
      break;
    }
  }
  return x;
}

DeterministicRng::DeterministicRng(Seed seed, std::uint64_t stream)
    : seed_(seed), stream_(stream) {}

std::uint64_t DeterministicRng::next_u64() {
  if (pos_ == 8) {
    buf_ = keystream_block(seed_, stream_, block_++);
    pos_ = 0;
  }
  return buf_[pos_++];
}

std::uint64_t DeterministicRng::next_below(std::uint64_t bound) {
  if (bound == 0) {
    throw std::domain_error("next_below: bound must be positive");
  }
  // Values below 2^64 mod bound would bias the low residues; reject them.
  const std::uint64_t threshold = (-bound) % bound;
  std::uint64_t v;
  do {
    v = next_u64();
  } while (v < threshold);
  return v % bound;
}

double DeterministicRng::next_unit() {
  // 53 random bits centred in (0,1); endpoints are unreachable.
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double DeterministicRng::next_gaussian() {
  return inverse_normal_cdf(next_unit());
}

void DeterministicRng::fill_gaussian(std::span<double> out, double stddev) {
  for (double& x : out) {
    x = stddev * next_gaussian();
  }
}

}  // namespace silofl::prg
