#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace silofl::prg {

// All deterministic randomness in the library is expanded from 32-byte
// seeds with BLAKE2b. The input framings below are frozen: golden test
// vectors depend on them, and every party must derive identical values.

inline constexpr std::size_t kSeedBytes = 32;
using Seed = std::array<std::uint8_t, kSeedBytes>;

// One keystream word: BLAKE2b(key=seed, msg=LE64(counter) || LE64(index)),
// 8-byte digest read little-endian. This is the framing used for pairwise
// summation masks, one hash per vector element.
std::uint64_t keystream_word(const Seed& seed, std::uint64_t counter,
                             std::uint64_t index);

// 64-byte keystream block: BLAKE2b(key=seed, msg=LE64(stream) || LE64(block)),
// yielding eight little-endian u64 words per hash. Used where throughput
// matters (share generation, projection matrices, shuffles).
std::array<std::uint64_t, 8> keystream_block(const Seed& seed,
                                             std::uint64_t stream,
                                             std::uint64_t block);

// Domain-separated subseed: BLAKE2b-256(key=master, msg=tag bytes).
// Tags are human-readable, e.g. "noise:3" or "pair:0:7".
Seed derive_seed(const Seed& master, std::string_view tag);

// BLAKE2b-256 over arbitrary bytes (unkeyed). Used for commitments,
// roster hashes and transcript chaining.
std::array<std::uint8_t, 32> hash256(std::span<const std::uint8_t> data);

Seed seed_from_bytes(std::span<const std::uint8_t> data);
Seed seed_from_string(std::string_view text);

// Standard normal quantile: Wichura's AS 241 estimate polished by Halley
// iteration on the exact erfc-based CDF. Full double precision for
// p down to about 1e-30 (far below anything a 53-bit uniform can produce).
// Deterministic, unlike std::normal_distribution.
double inverse_normal_cdf(double p);

// Buffered deterministic generator over keystream_block. One instance per
// (seed, stream) pair; streams with distinct ids never overlap.
class DeterministicRng {
 public:
  DeterministicRng(Seed seed, std::uint64_t stream);

  std::uint64_t next_u64();
  // Uniform on [0, bound) without modulo bias (rejection sampling).
  std::uint64_t next_below(std::uint64_t bound);
  // Uniform on (0, 1), never returning an exact endpoint.
  double next_unit();
  // Standard normal via inverse-CDF of next_unit().
  double next_gaussian();

  void fill_gaussian(std::span<double> out, double stddev);

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  Seed seed_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 8> buf_{};
  std::size_t pos_ = 8;  // empty buffer
};

}  // namespace silofl::prg
