#include "silofl/mixnet.hpp"

#include <sodium.h>

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>

namespace silofl::mixnet {

namespace {

void ensure_sodium() {
  if (sodium_init() < 0) {
    throw Error("libsodium initialisation failed");
  }
}

constexpr char kMagic[4] = {'S', 'F', 'T', 'L'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

}  // namespace

KeyPair SealedBoxCipher::keygen(int party_id) const {
  ensure_sodium();
  KeyPair kp;
  kp.party_id = party_id;
  kp.public_key.resize(crypto_box_PUBLICKEYBYTES);
  kp.secret_key.resize(crypto_box_SECRETKEYBYTES);
  crypto_box_keypair(kp.public_key.data(), kp.secret_key.data());
  return kp;
}

KeyPair SealedBoxCipher::keygen_from_seed(int party_id,
                                          const prg::Seed& seed) const {
  ensure_sodium();
  static_assert(prg::kSeedBytes == crypto_box_SEEDBYTES);
  KeyPair kp;
  kp.party_id = party_id;
  kp.public_key.resize(crypto_box_PUBLICKEYBYTES);
  kp.secret_key.resize(crypto_box_SECRETKEYBYTES);
  crypto_box_seed_keypair(kp.public_key.data(), kp.secret_key.data(),
                          seed.data());
  return kp;
}

std::vector<std::uint8_t> SealedBoxCipher::encrypt(
    std::span<const std::uint8_t> public_key,
    std::span<const std::uint8_t> plaintext) const {
  ensure_sodium();
  if (public_key.size() != crypto_box_PUBLICKEYBYTES) {
    throw ConfigError("sealed-box: bad public key size");
  }
  std::vector<std::uint8_t> ct(plaintext.size() + crypto_box_SEALBYTES);
  crypto_box_seal(ct.data(), plaintext.data(), plaintext.size(),
                  public_key.data());
  return ct;
}

std::vector<std::uint8_t> SealedBoxCipher::decrypt(
    const KeyPair& keys, std::span<const std::uint8_t> ciphertext) const {
  ensure_sodium();
  if (ciphertext.size() < crypto_box_SEALBYTES) {
    throw DecryptionFailure("sealed-box: ciphertext too short");
  }
  std::vector<std::uint8_t> pt(ciphertext.size() - crypto_box_SEALBYTES);
  if (crypto_box_seal_open(pt.data(), ciphertext.data(), ciphertext.size(),
                           keys.public_key.data(),
                           keys.secret_key.data()) != 0) {
    throw DecryptionFailure("sealed-box: authentication failed");
  }
  return pt;
}

std::size_t SealedBoxCipher::ciphertext_overhead() const {
  return crypto_box_SEALBYTES;
}

std::vector<Token> generate_tokens(std::size_t count,
                                   prg::DeterministicRng& rng) {
  std::set<Token> seen;
  std::vector<Token> tokens;
  tokens.reserve(count);
  while (tokens.size() < count) {
    Token t;
    for (std::size_t i = 0; i < kTokenBytes; i += 8) {
      const std::uint64_t w = rng.next_u64();
      for (std::size_t b = 0; b < 8; ++b) {
        t[i + b] = static_cast<std::uint8_t>(w >> (8 * b));
      }
    }
    if (seen.insert(t).second) {
      tokens.push_back(t);
    }
  }
  return tokens;
}

std::vector<std::uint8_t> onion_encrypt(
    const Token& token,
    std::span<const std::vector<std::uint8_t>> ordered_public_keys,
    const PublicKeyCipher& cipher) {
  if (ordered_public_keys.empty()) {
    throw ConfigError("onion_encrypt: no public keys");
  }
  std::vector<std::uint8_t> layer(token.begin(), token.end());
  for (std::size_t i = ordered_public_keys.size(); i-- > 0;) {
    layer = cipher.encrypt(ordered_public_keys[i], layer);
  }
  return layer;
}

TokenList build_initial_list(
    std::span<const std::vector<std::vector<std::uint8_t>>> per_party_onions,
    int layer_count) {
  TokenList list;
  list.layers_remaining = layer_count;
  for (const auto& party : per_party_onions) {
    for (const auto& onion : party) {
      list.entries.push_back(onion);
    }
  }
  list.total_count = list.entries.size();
  if (list.total_count == 0) {
    throw ConfigError("build_initial_list: empty list");
  }
  // Uniform entry sizes, so position in the published list is the only
  // ownership information and the mix removes it.
  const std::size_t size0 = list.entries.front().size();
  for (const auto& e : list.entries) {
    if (e.size() != size0) {
      throw ConfigError("build_initial_list: onion sizes differ");
    }
  }
  return list;
}

TokenList mix_step(const TokenList& list, const KeyPair& keys,
                   const PublicKeyCipher& cipher,
                   prg::DeterministicRng& rng) {
  if (list.layers_remaining <= 0) {
    throw ConfigError("mix_step: no layers left to peel");
  }
  TokenList out;
  out.layers_remaining = list.layers_remaining - 1;
  out.total_count = list.total_count;
  out.entries.reserve(list.entries.size());
  for (const auto& entry : list.entries) {
    out.entries.push_back(cipher.decrypt(keys, entry));
  }
  rng.shuffle(out.entries);
  return out;
}

RoundVerdict verify_round(const TokenList& list,
                          std::span<const Token> own_tokens,
                          std::size_t expected_count) {
  RoundVerdict v;
  if (list.entries.size() != expected_count ||
      list.total_count != expected_count) {
    v.verdict = Verdict::kTampered;
    v.reason = "count changed: " + std::to_string(list.entries.size()) +
               " entries, expected " + std::to_string(expected_count);
    return v;
  }
  if (list.layers_remaining > 0) {
    return v;  // entries are still ciphertexts; only the count is checkable
  }
  std::set<std::vector<std::uint8_t>> plain;
  for (const auto& e : list.entries) {
    if (e.size() != kTokenBytes) {
      v.verdict = Verdict::kTampered;
      v.reason = "malformed plaintext token";
      return v;
    }
    if (!plain.insert(e).second) {
      v.verdict = Verdict::kTampered;
      v.reason = "duplicate token on final list";
      return v;
    }
  }
  for (const auto& tok : own_tokens) {
    if (plain.find(std::vector<std::uint8_t>(tok.begin(), tok.end())) ==
        plain.end()) {
      v.verdict = Verdict::kTampered;
      v.reason = "own token missing from final list";
      return v;
    }
  }
  return v;
}

std::vector<Token> plaintext_tokens(const TokenList& list) {
  if (list.layers_remaining != 0) {
    throw ConfigError("plaintext_tokens: list still has encrypted layers");
  }
  std::vector<Token> tokens;
  tokens.reserve(list.entries.size());
  for (const auto& e : list.entries) {
    if (e.size() != kTokenBytes) {
      throw Error("plaintext_tokens: malformed token entry");
    }
    Token t;
    std::copy(e.begin(), e.end(), t.begin());
    tokens.push_back(t);
  }
  return tokens;
}

std::array<std::uint8_t, 32> roster_hash(
    std::span<const int> party_ids, std::span<const std::uint64_t> counts) {
  if (party_ids.size() != counts.size()) {
    throw ConfigError("roster_hash: ids and counts differ in length");
  }
  std::vector<std::uint8_t> buf;
  for (std::size_t i = 0; i < party_ids.size(); ++i) {
    put_u32(buf, static_cast<std::uint32_t>(party_ids[i]));
    put_u64(buf, counts[i]);
  }
  return prg::hash256(buf);
}

void save_token_list(const std::string& path, std::span<const Token> tokens,
                     int party_count,
                     const std::array<std::uint8_t, 32>& roster) {
  std::vector<std::uint8_t> buf;
  buf.insert(buf.end(), kMagic, kMagic + 4);
  put_u32(buf, kVersion);
  put_u64(buf, tokens.size());
  put_u32(buf, static_cast<std::uint32_t>(party_count));
  buf.insert(buf.end(), roster.begin(), roster.end());
  for (const auto& t : tokens) {
    buf.insert(buf.end(), t.begin(), t.end());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error("save_token_list: cannot open " + path);
  }
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
}

LoadedTokenList load_token_list(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error("load_token_list: cannot open " + path);
  }
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
  if (buf.size() < 4 + 4 + 8 + 4 + 32 ||
      std::memcmp(buf.data(), kMagic, 4) != 0) {
    throw Error("load_token_list: not a token list file");
  }
  std::size_t off = 4;
  const std::uint32_t version = get_u32(buf.data() + off);
  off += 4;
  if (version != kVersion) {
    throw Error("load_token_list: unsupported version " +
                std::to_string(version));
  }
  const std::uint64_t n = get_u64(buf.data() + off);
  off += 8;
  LoadedTokenList loaded;
  loaded.party_count = static_cast<int>(get_u32(buf.data() + off));
  off += 4;
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(off),
            buf.begin() + static_cast<std::ptrdiff_t>(off + 32),
            loaded.roster.begin());
  off += 32;
  if (buf.size() != off + n * kTokenBytes) {
    throw Error("load_token_list: truncated token payload");
  }
  loaded.tokens.resize(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    std::copy_n(buf.begin() + static_cast<std::ptrdiff_t>(off + i * kTokenBytes),
                kTokenBytes, loaded.tokens[i].begin());
  }
  return loaded;
}

}  // namespace silofl::mixnet
