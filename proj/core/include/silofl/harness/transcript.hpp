#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "silofl/harness/transport.hpp"

namespace silofl::harness {

// Append-only log of every message the transport carried. Entry hashes
// chain, so the log itself is tamper-evident.
class Transcript {
 public:
  struct Entry {
    std::uint64_t round = 0;
    std::uint32_t protocol_id = 0;
    int sender = 0;
    int receiver = 0;
    std::size_t byte_length = 0;
    std::array<std::uint8_t, 32> message_hash{};
    std::array<std::uint8_t, 32> chain_hash{};
  };

  void record(int sender, int receiver,
              std::span<const std::uint8_t> message);

  std::vector<Entry> entries() const;
  // Recomputes the chain and compares; false means the log was edited.
  bool verify_chain() const;

 private:
  mutable std::mutex mutex_;
  std::vector<Entry> entries_;
};

// Transport decorator feeding the transcript. Protocol code is unaware
// of the recording.
class RecordingTransport final : public Transport {
 public:
  RecordingTransport(Transport& inner, Transcript& transcript)
      : inner_(inner), transcript_(transcript) {}

  void send(int from, int to, std::vector<std::uint8_t> bytes) override {
    transcript_.record(from, to, bytes);
    inner_.send(from, to, std::move(bytes));
  }
  std::vector<std::uint8_t> receive(
      int to, int from, std::chrono::milliseconds timeout) override {
    return inner_.receive(to, from, timeout);
  }
  std::string name() const override { return inner_.name(); }

 private:
  Transport& inner_;
  Transcript& transcript_;
};

}  // namespace silofl::harness
