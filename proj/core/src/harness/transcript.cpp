#include "silofl/harness/transcript.hpp"

#include "silofl/prg.hpp"

namespace silofl::harness {

namespace {

std::array<std::uint8_t, 32> chain_entry(
    const std::array<std::uint8_t, 32>& prev, const Transcript::Entry& e) {
  std::vector<std::uint8_t> buf;
  buf.insert(buf.end(), prev.begin(), prev.end());
  auto put_u64 = [&](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  put_u64(e.round);
  put_u64(e.protocol_id);
  put_u64(static_cast<std::uint64_t>(e.sender));
  put_u64(static_cast<std::uint64_t>(e.receiver));
  put_u64(e.byte_length);
  buf.insert(buf.end(), e.message_hash.begin(), e.message_hash.end());
  return prg::hash256(buf);
}

}  // namespace

void Transcript::record(int sender, int receiver,
                        std::span<const std::uint8_t> message) {
  Entry e;
  e.sender = sender;
  e.receiver = receiver;
  e.byte_length = message.size();
  e.message_hash = prg::hash256(message);
  if (message.size() >= kWireHeaderBytes) {
    const WireHeader h = decode_header(message);
    e.round = h.round;
    e.protocol_id = h.protocol_id;
  }
  std::lock_guard<std::mutex> lock(mutex_);
  const std::array<std::uint8_t, 32> prev =
      entries_.empty() ? std::array<std::uint8_t, 32>{}
                       : entries_.back().chain_hash;
  e.chain_hash = chain_entry(prev, e);
  entries_.push_back(e);
}

std::vector<Transcript::Entry> Transcript::entries() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return entries_;
}

bool Transcript::verify_chain() const {
  std::lock_guard<std::mutex> lock(mutex_);
  std::array<std::uint8_t, 32> prev{};
  for (const auto& e : entries_) {
    if (chain_entry(prev, e) != e.chain_hash) {
      return false;
    }
    prev = e.chain_hash;
  }
  return true;
}

}  // namespace silofl::harness
