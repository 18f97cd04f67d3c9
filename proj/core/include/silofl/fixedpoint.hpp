#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "silofl/errors.hpp"

namespace silofl {

// Fixed-point encoding of reals as integers modulo R = 2^modulus_bits.
// A power-of-two modulus makes mask generation a matter of drawing
// uniform bit strings and reduces modular arithmetic to bit masking.
struct FixedPointCodec {
  int frac_bits = 16;
  int modulus_bits = 32;

  void validate() const {
    if (frac_bits < 1 || modulus_bits < 2 || modulus_bits > 64 ||
        modulus_bits < frac_bits + 2) {
      throw ConfigError(
          "codec requires 1 <= frac_bits, frac_bits + 2 <= modulus_bits <= "
          "64");
    }
  }

  // All-ones mask equal to R - 1; (x & mask) == x mod R.
  std::uint64_t modulus_mask() const {
    return modulus_bits == 64 ? ~std::uint64_t{0}
                              : (std::uint64_t{1} << modulus_bits) - 1;
  }

  std::uint64_t reduce(std::uint64_t x) const { return x & modulus_mask(); }

  // Half of R: values at or above it decode as negative.
  std::uint64_t half_modulus() const {
    return std::uint64_t{1} << (modulus_bits - 1);
  }

  double scale() const { return static_cast<double>(std::uint64_t{1} << frac_bits); }

  std::size_t element_bytes() const {
    return static_cast<std::size_t>((modulus_bits + 7) / 8);
  }

  bool operator==(const FixedPointCodec&) const = default;
};

struct FixedVector {
  FixedPointCodec codec;
  std::vector<std::uint64_t> values;

  std::size_t size() const { return values.size(); }
};

// Strict encoding: rejects values outside the representable range.
// value_i = round(x_i * 2^f) mod R, negatives as modular complement.
FixedVector encode(std::span<const double> x, const FixedPointCodec& codec);

// Clamping encoding for vectors that already carry DP noise: out-of-range
// values are clipped to the representable extremes. Post-processing, so
// the privacy guarantee is unaffected; raw data must use encode().
FixedVector encode_clamped(std::span<const double> x,
                           const FixedPointCodec& codec);

std::vector<double> decode(const FixedVector& v);

// Elementwise (a_i + b_i) mod R. Lengths and codecs must agree.
FixedVector add_mod(const FixedVector& a, const FixedVector& b);

// Additive inverse: negate_mod(encode(x)) == encode(-x).
FixedVector negate_mod(const FixedVector& a);

FixedVector zero_vector(std::size_t n, const FixedPointCodec& codec);

// Length-prefixed wire form: LE64 element count, then each element as
// ceil(modulus_bits/8) little-endian bytes. Codec parameters travel in
// the experiment config, never on the wire.
std::vector<std::uint8_t> serialize(const FixedVector& v);
FixedVector deserialize(std::span<const std::uint8_t> bytes,
                        const FixedPointCodec& codec);

// Raw element bytes without the length prefix (for framed wire messages
// that carry the length in their header).
void append_element_bytes(const FixedVector& v, std::vector<std::uint8_t>& out);
FixedVector elements_from_bytes(std::span<const std::uint8_t> bytes,
                                std::size_t count,
                                const FixedPointCodec& codec);

}  // namespace silofl
