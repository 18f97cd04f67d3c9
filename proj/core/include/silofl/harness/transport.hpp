#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <queue>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "silofl/errors.hpp"
#include "silofl/fixedpoint.hpp"

namespace silofl::harness {

// Wire header preceding every payload, all little-endian:
// u32 protocol id, u64 round, u32 sender, u32 node, u64 vector length.
struct WireHeader {
  std::uint32_t protocol_id = 0;
  std::uint64_t round = 0;
  std::uint32_t sender = 0;
  std::uint32_t node = 0;
  std::uint64_t vector_length = 0;
};

inline constexpr std::size_t kWireHeaderBytes = 4 + 8 + 4 + 4 + 8;

// Protocol ids used by the experiment engine.
enum WireProtocol : std::uint32_t {
  kProtoPairwise = 1,
  kProtoDcaShare = 2,
  kProtoNodeReport = 3,
  kProtoModelBroadcast = 4,
  kProtoSeedCommit = 5,
  kProtoSeedReveal = 6,
  kProtoMixList = 7,
};

std::vector<std::uint8_t> encode_message(const WireHeader& header,
                                         std::span<const std::uint8_t> payload);
WireHeader decode_header(std::span<const std::uint8_t> message);
std::span<const std::uint8_t> message_payload(
    std::span<const std::uint8_t> message);

// Framed helpers for the two payload kinds the engine sends.
std::vector<std::uint8_t> encode_vector_message(const WireHeader& header,
                                                const FixedVector& v);
FixedVector decode_vector_message(std::span<const std::uint8_t> message,
                                  const FixedPointCodec& codec);
std::vector<std::uint8_t> encode_real_message(WireHeader header,
                                              std::span<const double> values);
std::vector<double> decode_real_message(std::span<const std::uint8_t> message);

// Reliable, ordered, per-(sender,receiver) delivery. Both implementations
// pass the identical protocol test suite; protocol code never sees which
// one is underneath.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send(int from, int to, std::vector<std::uint8_t> bytes) = 0;
  // Blocks until a message from `from` addressed to `to` arrives; throws
  // TransportTimeout after `timeout`.
  virtual std::vector<std::uint8_t> receive(
      int to, int from, std::chrono::milliseconds timeout) = 0;
  virtual std::string name() const = 0;
};

// Shared mailbox machinery: a queue per ordered pair.
class MailboxTransport : public Transport {
 public:
  explicit MailboxTransport(int parties);
  std::vector<std::uint8_t> receive(int to, int from,
                                    std::chrono::milliseconds timeout) override;

 protected:
  void deliver(int from, int to, std::vector<std::uint8_t> bytes);
  int party_count() const { return parties_; }

 private:
  int parties_;
  std::mutex mutex_;
  std::condition_variable arrived_;
  std::map<std::pair<int, int>, std::queue<std::vector<std::uint8_t>>> boxes_;
};

class InMemoryTransport final : public MailboxTransport {
 public:
  explicit InMemoryTransport(int parties) : MailboxTransport(parties) {}
  void send(int from, int to, std::vector<std::uint8_t> bytes) override;
  std::string name() const override { return "inmem"; }
};

// Localhost TCP mesh: every unordered pair shares one full-duplex socket;
// a single poll()-based reader thread demultiplexes frames into the same
// mailboxes the in-memory transport uses.
class TcpTransport final : public MailboxTransport {
 public:
  explicit TcpTransport(int parties);
  ~TcpTransport() override;
  void send(int from, int to, std::vector<std::uint8_t> bytes) override;
  std::string name() const override { return "tcp"; }

 private:
  struct Link;
  std::vector<std::unique_ptr<Link>> links_;   // indexed by pair
  std::map<std::pair<int, int>, Link*> link_by_pair_;
  std::thread reader_;
  int wake_pipe_[2] = {-1, -1};
  std::mutex stop_mutex_;
  bool stopping_ = false;

  void reader_loop();
};

std::unique_ptr<Transport> make_transport(const std::string& kind,
                                          int parties);

}  // namespace silofl::harness
