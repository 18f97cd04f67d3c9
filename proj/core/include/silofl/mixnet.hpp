#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "silofl/errors.hpp"
#include "silofl/prg.hpp"
#include "silofl/token.hpp"

namespace silofl::mixnet {

struct KeyPair {
  std::vector<std::uint8_t> public_key;
  std::vector<std::uint8_t> secret_key;
  int party_id = 0;
};

// Randomized, authenticated public-key encryption. The mix logic is
// cipher-agnostic; production deployments can swap in their own scheme.
class PublicKeyCipher {
 public:
  virtual ~PublicKeyCipher() = default;
  virtual KeyPair keygen(int party_id) const = 0;
  virtual KeyPair keygen_from_seed(int party_id,
                                   const prg::Seed& seed) const = 0;
  virtual std::vector<std::uint8_t> encrypt(
      std::span<const std::uint8_t> public_key,
      std::span<const std::uint8_t> plaintext) const = 0;
  // Throws DecryptionFailure when authentication fails (tampering).
  virtual std::vector<std::uint8_t> decrypt(
      const KeyPair& keys, std::span<const std::uint8_t> ciphertext) const = 0;
  virtual std::size_t ciphertext_overhead() const = 0;
  virtual std::string name() const = 0;
};

// libsodium sealed boxes (X25519 + XSalsa20-Poly1305): anonymous,
// randomized, authenticated. Default cipher for the mix.
class SealedBoxCipher final : public PublicKeyCipher {
 public:
  KeyPair keygen(int party_id) const override;
  KeyPair keygen_from_seed(int party_id,
                           const prg::Seed& seed) const override;
  std::vector<std::uint8_t> encrypt(
      std::span<const std::uint8_t> public_key,
      std::span<const std::uint8_t> plaintext) const override;
  std::vector<std::uint8_t> decrypt(
      const KeyPair& keys,
      std::span<const std::uint8_t> ciphertext) const override;
  std::size_t ciphertext_overhead() const override;
  std::string name() const override { return "sealed-box"; }
};

// The shared list as it moves through the mix. At layers_remaining = N the
// entries are full onions; each mix peels one layer until plaintext
// tokens remain at zero.
struct TokenList {
  std::vector<std::vector<std::uint8_t>> entries;
  int layers_remaining = 0;
  std::size_t total_count = 0;
};

// Fresh uniform tokens for one party's local samples.
std::vector<Token> generate_tokens(std::size_t count,
                                   prg::DeterministicRng& rng);

// Enc_k1(Enc_k2(...Enc_kN(token)...)) over the agreed party ordering;
// the outermost layer belongs to the first mixer.
std::vector<std::uint8_t> onion_encrypt(
    const Token& token,
    std::span<const std::vector<std::uint8_t>> ordered_public_keys,
    const PublicKeyCipher& cipher);

// All parties' published onions in one list. Entries must have a common
// length (uniform token size keeps onion sizes from leaking ownership).
TokenList build_initial_list(
    std::span<const std::vector<std::vector<std::uint8_t>>> per_party_onions,
    int layer_count);

// One mixer's turn: peel this party's layer from every entry, then apply
// a fresh uniform permutation. Count is preserved; authentication
// failures surface as DecryptionFailure.
TokenList mix_step(const TokenList& list, const KeyPair& keys,
                   const PublicKeyCipher& cipher, prg::DeterministicRng& rng);

enum class Verdict { kClean, kTampered };

struct RoundVerdict {
  Verdict verdict = Verdict::kClean;
  std::string reason;
  bool clean() const { return verdict == Verdict::kClean; }
};

// Integrity check each party runs after every mix it can observe: the
// count must never change, and at layer 0 all of the party's own tokens
// must be present (plus global uniqueness). Intermediate entries are
// ciphertexts, so ownership checks are deferred to layer 0.
RoundVerdict verify_round(const TokenList& list,
                          std::span<const Token> own_tokens,
                          std::size_t expected_count);

// Plaintext tokens of a fully mixed list (layers_remaining must be 0).
std::vector<Token> plaintext_tokens(const TokenList& list);

// Binds a token list to the party roster (ids and sample counts); reuse
// of a persisted list is allowed only with an identical roster.
std::array<std::uint8_t, 32> roster_hash(std::span<const int> party_ids,
                                         std::span<const std::uint64_t> counts);

// Persisted form: magic, version, n, N, roster hash, then n 16-byte
// tokens in the final broadcast order.
void save_token_list(const std::string& path, std::span<const Token> tokens,
                     int party_count,
                     const std::array<std::uint8_t, 32>& roster);

struct LoadedTokenList {
  std::vector<Token> tokens;
  int party_count = 0;
  std::array<std::uint8_t, 32> roster{};
};

LoadedTokenList load_token_list(const std::string& path);

}  // namespace silofl::mixnet
