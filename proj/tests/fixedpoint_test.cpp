#include "silofl/fixedpoint.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "support/oracles.hpp"

using namespace silofl;

namespace {

const FixedPointCodec kDefault{};  // f=16, m=32

FixedVector enc1(double x, const FixedPointCodec& codec = kDefault) {
  const std::vector<double> v{x};
  return encode(v, codec);
}

}  // namespace

TEST_CASE("encode maps the reference values") {
  CHECK(enc1(0.0).values[0] == 0);
  CHECK(enc1(1.5).values[0] == 98304);                // 1.5 * 2^16 exactly
  CHECK(enc1(-1.0).values[0] == 4294901760ull);       // 2^32 - 2^16
}

TEST_CASE("decode inverts encode on dyadic rationals") {
  CHECK(decode(enc1(3.25))[0] == 3.25);
  CHECK(decode(enc1(-7.0625))[0] == -7.0625);
}

TEST_CASE("1.5 plus -1.0 wraps to 0.5 through the modulus") {
  const auto sum = add_mod(enc1(1.5), enc1(-1.0));
  CHECK(decode(sum)[0] == 0.5);
}

TEST_CASE("pi round-trips within the quantization bound") {
  const double pi = 3.14159265358979323846;
  const double back = decode(enc1(pi))[0];
  CHECK(std::abs(back - pi) <= std::ldexp(1.0, -17));  // 2^-(f+1)
}

TEST_CASE("quantization error is at most half an lsb for random values") {
  std::mt19937_64 gen(42);
  std::uniform_real_distribution<double> dist(-1000.0, 1000.0);
  for (int i = 0; i < 2000; ++i) {
    const double x = dist(gen);
    CHECK(std::abs(decode(enc1(x))[0] - x) <= std::ldexp(1.0, -17));
  }
}

TEST_CASE("add_mod wraps around the modulus") {
  FixedPointCodec tiny;
  tiny.frac_bits = 2;
  tiny.modulus_bits = 8;  // R = 256
  FixedVector a{tiny, {255}};
  FixedVector b{tiny, {1}};
  CHECK(add_mod(a, b).values[0] == 0);
  FixedVector c{tiny, {3}};
  FixedVector d{tiny, {4}};
  CHECK(add_mod(c, d).values[0] == 7);
}

TEST_CASE("sum of 50 random encodings matches the wide-integer oracle") {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> dist(-100.0, 100.0);
  std::vector<std::vector<std::uint64_t>> raw;
  FixedVector acc = zero_vector(4, kDefault);
  long long exact[4] = {0, 0, 0, 0};
  for (int i = 0; i < 50; ++i) {
    std::vector<double> xs(4);
    for (auto& x : xs) x = dist(gen);
    const auto v = encode(xs, kDefault);
    raw.push_back(v.values);
    acc = add_mod(acc, v);
    for (int j = 0; j < 4; ++j) {
      exact[j] += std::llround(xs[static_cast<std::size_t>(j)] * 65536.0);
    }
  }
  const auto oracle = oracles::modsum_oracle(raw, kDefault.modulus_mask());
  CHECK(acc.values == oracle);
  const auto decoded = decode(acc);
  for (int j = 0; j < 4; ++j) {
    // 50 * 100 * 2^16 stays far from the wrap point, so the decoded sum is
    // the exact rational sum of the rounded inputs.
    CHECK(decoded[static_cast<std::size_t>(j)] ==
          static_cast<double>(exact[j]) / 65536.0);
  }
}

TEST_CASE("add_mod is a commutative group with negate_mod as inverse") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> dist(-50.0, 50.0);
  for (int i = 0; i < 200; ++i) {
    const auto a = enc1(dist(gen));
    const auto b = enc1(dist(gen));
    const auto c = enc1(dist(gen));
    CHECK(add_mod(a, b).values == add_mod(b, a).values);
    CHECK(add_mod(add_mod(a, b), c).values == add_mod(a, add_mod(b, c)).values);
    CHECK(add_mod(a, negate_mod(a)).values[0] == 0);
  }
  // encode(-x) is the additive inverse of encode(x).
  for (double x : {0.5, 13.625, 99.0}) {
    CHECK(negate_mod(enc1(x)).values == enc1(-x).values);
  }
}

TEST_CASE("encode rejects values out of range, clamped variant clips") {
  FixedPointCodec codec;
  codec.frac_bits = 16;
  codec.modulus_bits = 32;
  const double too_big = 40000.0;  // 2^15 = 32768 is the limit
  CHECK_THROWS_AS(enc1(too_big, codec), OverflowError);
  CHECK_THROWS_AS(enc1(std::nan(""), codec), OverflowError);
  const std::vector<double> v{too_big, -too_big};
  const auto clamped = encode_clamped(v, codec);
  CHECK(decode(clamped)[0] == doctest::Approx(32767.99998).epsilon(1e-6));
  CHECK(decode(clamped)[1] == doctest::Approx(-32767.99998).epsilon(1e-6));
}

TEST_CASE("mismatched operands are rejected") {
  FixedPointCodec other;
  other.frac_bits = 8;
  other.modulus_bits = 32;
  const std::vector<double> xs{1.0, 2.0};
  const std::vector<double> ys{1.0};
  CHECK_THROWS_AS(add_mod(encode(xs, kDefault), encode(ys, kDefault)),
                  LengthMismatch);
  CHECK_THROWS_AS(add_mod(encode(ys, kDefault), encode(ys, other)),
                  CodecMismatch);
}

TEST_CASE("codec invariants are enforced") {
  FixedPointCodec bad;
  bad.frac_bits = 31;
  bad.modulus_bits = 32;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad.frac_bits = 16;
  bad.modulus_bits = 70;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("serialization round-trips across codec widths") {
  std::mt19937_64 gen(5);
  for (int m : {8, 16, 24, 32, 40, 56, 64}) {
    FixedPointCodec codec;
    codec.frac_bits = 4;
    codec.modulus_bits = m;
    FixedVector v;
    v.codec = codec;
    for (int i = 0; i < 17; ++i) {
      v.values.push_back(gen() & codec.modulus_mask());
    }
    const auto bytes = serialize(v);
    CHECK(bytes.size() == 8 + 17 * codec.element_bytes());
    const auto back = deserialize(bytes, codec);
    CHECK(back.values == v.values);
  }
  CHECK_THROWS_AS(deserialize(std::vector<std::uint8_t>{1, 2}, kDefault),
                  LengthMismatch);
}
