#include "silofl/fixedpoint.hpp"

#include <cmath>
#include <string>

namespace silofl {

namespace {

// Round to nearest (ties away from zero) and reduce mod R, or report
// whether the value fits the signed headroom |v| < R/2.
std::uint64_t encode_one(double x, const FixedPointCodec& codec, bool clamp) {
  if (!std::isfinite(x)) {
    if (!clamp) {
      throw OverflowError("encode: non-finite value");
    }
    x = x > 0 ? 1.0 : -1.0;  // clamped below to the range edge
    x *= 9e18;
  }
  const double scaled = x * codec.scale();
  const double half = static_cast<double>(codec.half_modulus());
  if (scaled >= half || scaled <= -half) {
    if (!clamp) {
      throw OverflowError("encode: value " + std::to_string(x) +
                          " exceeds representable range for f=" +
                          std::to_string(codec.frac_bits) +
                          ", m=" + std::to_string(codec.modulus_bits));
    }
    const std::uint64_t extreme = codec.half_modulus() - 1;
    return scaled > 0 ? extreme : codec.reduce(~extreme + 1);  // -(R/2-1)
  }
  const auto rounded = static_cast<std::int64_t>(std::llround(scaled));
  return codec.reduce(static_cast<std::uint64_t>(rounded));
}

FixedVector encode_impl(std::span<const double> x,
                        const FixedPointCodec& codec, bool clamp) {
  codec.validate();
  FixedVector out;
  out.codec = codec;
  out.values.reserve(x.size());
  for (double xi : x) {
    out.values.push_back(encode_one(xi, codec, clamp));
  }
  return out;
}

}  // namespace

FixedVector encode(std::span<const double> x, const FixedPointCodec& codec) {
  return encode_impl(x, codec, /*clamp=*/false);
}

FixedVector encode_clamped(std::span<const double> x,
                           const FixedPointCodec& codec) {
  return encode_impl(x, codec, /*clamp=*/true);
}

std::vector<double> decode(const FixedVector& v) {
  const auto& codec = v.codec;
  std::vector<double> out;
  out.reserve(v.values.size());
  const std::uint64_t half = codec.half_modulus();
  const double inv_scale = 1.0 / codec.scale();
  for (std::uint64_t u : v.values) {
    double signed_value;
    if (u >= half) {
      // Modular complement: interpret [R/2, R) as negative.
      signed_value = -static_cast<double>(codec.reduce(~u + 1));
    } else {
      signed_value = static_cast<double>(u);
    }
    out.push_back(signed_value * inv_scale);
  }
  return out;
}

FixedVector add_mod(const FixedVector& a, const FixedVector& b) {
  if (a.codec != b.codec) {
    throw CodecMismatch("add_mod: codecs differ");
  }
  if (a.values.size() != b.values.size()) {
    throw LengthMismatch("add_mod: lengths differ (" +
                         std::to_string(a.values.size()) + " vs " +
                         std::to_string(b.values.size()) + ")");
  }
  FixedVector out;
  out.codec = a.codec;
  out.values.resize(a.values.size());
  const std::uint64_t mask = a.codec.modulus_mask();
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    out.values[i] = (a.values[i] + b.values[i]) & mask;
  }
  return out;
}

FixedVector negate_mod(const FixedVector& a) {
  FixedVector out;
  out.codec = a.codec;
  out.values.resize(a.values.size());
  const std::uint64_t mask = a.codec.modulus_mask();
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    out.values[i] = (~a.values[i] + 1) & mask;
  }
  return out;
}

FixedVector zero_vector(std::size_t n, const FixedPointCodec& codec) {
  FixedVector out;
  out.codec = codec;
  out.values.assign(n, 0);
  return out;
}

std::vector<std::uint8_t> serialize(const FixedVector& v) {
  std::vector<std::uint8_t> out;
  const std::uint64_t n = v.values.size();
  out.reserve(8 + n * v.codec.element_bytes());
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<std::uint8_t>(n >> (8 * i)));
  }
  append_element_bytes(v, out);
  return out;
}

FixedVector deserialize(std::span<const std::uint8_t> bytes,
                        const FixedPointCodec& codec) {
  if (bytes.size() < 8) {
    throw LengthMismatch("deserialize: truncated length prefix");
  }
  std::uint64_t n = 0;
  for (int i = 7; i >= 0; --i) {
    n = (n << 8) | bytes[static_cast<std::size_t>(i)];
  }
  return elements_from_bytes(bytes.subspan(8), n, codec);
}

void append_element_bytes(const FixedVector& v,
                          std::vector<std::uint8_t>& out) {
  const std::size_t width = v.codec.element_bytes();
  for (std::uint64_t u : v.values) {
    for (std::size_t i = 0; i < width; ++i) {
      out.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
    }
  }
}

FixedVector elements_from_bytes(std::span<const std::uint8_t> bytes,
                                std::size_t count,
                                const FixedPointCodec& codec) {
  codec.validate();
  const std::size_t width = codec.element_bytes();
  if (bytes.size() != count * width) {
    throw LengthMismatch("element payload size mismatch");
  }
  FixedVector out;
  out.codec = codec;
  out.values.reserve(count);
  for (std::size_t e = 0; e < count; ++e) {
    std::uint64_t u = 0;
    for (std::size_t i = width; i-- > 0;) {
      u = (u << 8) | bytes[e * width + i];
    }
    out.values.push_back(codec.reduce(u));
  }
  return out;
}

}  // namespace silofl
