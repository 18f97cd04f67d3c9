#include "silofl/harness/transport.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>

namespace silofl::harness {

namespace {

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

std::vector<std::uint8_t> encode_message(
    const WireHeader& header, std::span<const std::uint8_t> payload) {
  std::vector<std::uint8_t> out;
  out.reserve(kWireHeaderBytes + payload.size());
  put_u32(out, header.protocol_id);
  put_u64(out, header.round);
  put_u32(out, header.sender);
  put_u32(out, header.node);
  put_u64(out, header.vector_length);
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

WireHeader decode_header(std::span<const std::uint8_t> message) {
  if (message.size() < kWireHeaderBytes) {
    throw LengthMismatch("wire message shorter than header");
  }
  WireHeader h;
  h.protocol_id = get_u32(message.data());
  h.round = get_u64(message.data() + 4);
  h.sender = get_u32(message.data() + 12);
  h.node = get_u32(message.data() + 16);
  h.vector_length = get_u64(message.data() + 20);
  return h;
}

std::span<const std::uint8_t> message_payload(
    std::span<const std::uint8_t> message) {
  if (message.size() < kWireHeaderBytes) {
    throw LengthMismatch("wire message shorter than header");
  }
  return message.subspan(kWireHeaderBytes);
}

std::vector<std::uint8_t> encode_vector_message(const WireHeader& header,
                                                const FixedVector& v) {
  WireHeader h = header;
  h.vector_length = v.size();
  std::vector<std::uint8_t> payload;
  payload.reserve(v.size() * v.codec.element_bytes());
  append_element_bytes(v, payload);
  return encode_message(h, payload);
}

FixedVector decode_vector_message(std::span<const std::uint8_t> message,
                                  const FixedPointCodec& codec) {
  const WireHeader h = decode_header(message);
  return elements_from_bytes(message_payload(message),
                             static_cast<std::size_t>(h.vector_length), codec);
}

std::vector<std::uint8_t> encode_real_message(WireHeader header,
                                              std::span<const double> values) {
  header.vector_length = values.size();
  std::vector<std::uint8_t> payload;
  payload.reserve(values.size() * 8);
  for (double x : values) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, 8);
    put_u64(payload, bits);
  }
  return encode_message(header, payload);
}

std::vector<double> decode_real_message(
    std::span<const std::uint8_t> message) {
  const WireHeader h = decode_header(message);
  const auto payload = message_payload(message);
  if (payload.size() != h.vector_length * 8) {
    throw LengthMismatch("real-vector payload size mismatch");
  }
  std::vector<double> values(h.vector_length);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::uint64_t bits = get_u64(payload.data() + 8 * i);
    std::memcpy(&values[i], &bits, 8);
  }
  return values;
}

MailboxTransport::MailboxTransport(int parties) : parties_(parties) {
  if (parties < 1) {
    throw ConfigError("transport: need at least one party");
  }
}

void MailboxTransport::deliver(int from, int to,
                               std::vector<std::uint8_t> bytes) {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    boxes_[{from, to}].push(std::move(bytes));
  }
  arrived_.notify_all();
}

std::vector<std::uint8_t> MailboxTransport::receive(
    int to, int from, std::chrono::milliseconds timeout) {
  std::unique_lock<std::mutex> lock(mutex_);
  auto& box = boxes_[{from, to}];
  if (!arrived_.wait_for(lock, timeout, [&] { return !box.empty(); })) {
    throw TransportTimeout("receive: no message from " + std::to_string(from) +
                           " to " + std::to_string(to) + " within " +
                           std::to_string(timeout.count()) + "ms");
  }
  auto bytes = std::move(box.front());
  box.pop();
  return bytes;
}

void InMemoryTransport::send(int from, int to,
                             std::vector<std::uint8_t> bytes) {
  deliver(from, to, std::move(bytes));
}

// --- TCP ---------------------------------------------------------------

struct TcpTransport::Link {
  int fd = -1;
  std::mutex write_mutex;
  // Reader-side reassembly buffer.
  std::vector<std::uint8_t> pending;
};

namespace {

void write_all(int fd, const std::uint8_t* data, std::size_t len) {
  std::size_t off = 0;
  while (off < len) {
    const ssize_t n = ::write(fd, data + off, len - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error("tcp write failed: " + std::string(std::strerror(errno)));
    }
    off += static_cast<std::size_t>(n);
  }
}

}  // namespace

TcpTransport::TcpTransport(int parties) : MailboxTransport(parties) {
  // One listener per party on an ephemeral loopback port; party i connects
  // to every j > i and announces the pair in a tiny hello frame.
  std::vector<int> listeners(static_cast<std::size_t>(parties), -1);
  std::vector<std::uint16_t> ports(static_cast<std::size_t>(parties), 0);
  for (int p = 0; p < parties; ++p) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw Error("tcp: socket() failed");
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
        ::listen(fd, parties) != 0) {
      throw Error("tcp: bind/listen failed");
    }
    socklen_t len = sizeof addr;
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    listeners[static_cast<std::size_t>(p)] = fd;
    ports[static_cast<std::size_t>(p)] = ntohs(addr.sin_port);
  }

  // Establish the mesh. Connections are made serially; each hello frame
  // carries (i, j) so the acceptor knows which pair the socket serves.
  for (int i = 0; i < parties; ++i) {
    for (int j = i + 1; j < parties; ++j) {
      const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
      if (fd < 0) throw Error("tcp: socket() failed");
      sockaddr_in addr{};
      addr.sin_family = AF_INET;
      addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
      addr.sin_port = htons(ports[static_cast<std::size_t>(j)]);
      if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        throw Error("tcp: connect failed");
      }
      std::uint8_t hello[8];
      for (int b = 0; b < 4; ++b) {
        hello[b] = static_cast<std::uint8_t>(static_cast<std::uint32_t>(i) >> (8 * b));
        hello[4 + b] = static_cast<std::uint8_t>(static_cast<std::uint32_t>(j) >> (8 * b));
      }
      write_all(fd, hello, sizeof hello);

      const int accepted =
          ::accept(listeners[static_cast<std::size_t>(j)], nullptr, nullptr);
      if (accepted < 0) throw Error("tcp: accept failed");
      std::uint8_t peer_hello[8];
      std::size_t got = 0;
      while (got < sizeof peer_hello) {
        const ssize_t n = ::read(accepted, peer_hello + got, sizeof peer_hello - got);
        if (n <= 0) throw Error("tcp: hello read failed");
        got += static_cast<std::size_t>(n);
      }
      // Both endpoints feed the same Link: the connecting side keeps the
      // write end `fd`, the reader thread polls `accepted`... both ends
      // live in this process, so the Link holds both descriptors via two
      // entries keyed by direction.
      auto link = std::make_unique<Link>();
      link->fd = fd;
      auto accepted_link = std::make_unique<Link>();
      accepted_link->fd = accepted;
      link_by_pair_[{i, j}] = link.get();      // i writes here
      link_by_pair_[{j, i}] = accepted_link.get();  // j writes here
      links_.push_back(std::move(link));
      links_.push_back(std::move(accepted_link));
    }
  }
  for (int fd : listeners) ::close(fd);

  if (::pipe(wake_pipe_) != 0) throw Error("tcp: pipe failed");
  reader_ = std::thread([this] { reader_loop(); });
}

TcpTransport::~TcpTransport() {
  {
    std::lock_guard<std::mutex> lock(stop_mutex_);
    stopping_ = true;
  }
  const char byte = 'x';
  [[maybe_unused]] ssize_t n = ::write(wake_pipe_[1], &byte, 1);
  if (reader_.joinable()) reader_.join();
  for (auto& link : links_) {
    if (link->fd >= 0) ::close(link->fd);
  }
  ::close(wake_pipe_[0]);
  ::close(wake_pipe_[1]);
}

void TcpTransport::send(int from, int to, std::vector<std::uint8_t> bytes) {
  auto it = link_by_pair_.find({from, to});
  if (it == link_by_pair_.end()) {
    throw ConfigError("tcp: unknown party pair");
  }
  Link* link = it->second;
  // Frame: u32 length, u32 from, u32 to, payload.
  std::vector<std::uint8_t> frame;
  frame.reserve(12 + bytes.size());
  put_u32(frame, static_cast<std::uint32_t>(bytes.size()));
  put_u32(frame, static_cast<std::uint32_t>(from));
  put_u32(frame, static_cast<std::uint32_t>(to));
  frame.insert(frame.end(), bytes.begin(), bytes.end());
  std::lock_guard<std::mutex> lock(link->write_mutex);
  write_all(link->fd, frame.data(), frame.size());
}

void TcpTransport::reader_loop() {
  std::vector<pollfd> fds;
  for (;;) {
    {
      std::lock_guard<std::mutex> lock(stop_mutex_);
      if (stopping_) return;
    }
    fds.clear();
    fds.push_back({wake_pipe_[0], POLLIN, 0});
    for (auto& link : links_) {
      fds.push_back({link->fd, POLLIN, 0});
    }
    if (::poll(fds.data(), fds.size(), 100) < 0) {
      if (errno == EINTR) continue;
      return;
    }
    if (fds[0].revents & POLLIN) {
      continue;  // wake for shutdown check
    }
    for (std::size_t k = 1; k < fds.size(); ++k) {
      if (!(fds[k].revents & POLLIN)) continue;
      Link* link = links_[k - 1].get();
      std::uint8_t chunk[65536];
      const ssize_t n = ::read(link->fd, chunk, sizeof chunk);
      if (n <= 0) continue;
      link->pending.insert(link->pending.end(), chunk, chunk + n);
      // Extract complete frames.
      while (link->pending.size() >= 12) {
        const std::uint32_t len = get_u32(link->pending.data());
        if (link->pending.size() < 12 + static_cast<std::size_t>(len)) break;
        const int from = static_cast<int>(get_u32(link->pending.data() + 4));
        const int to = static_cast<int>(get_u32(link->pending.data() + 8));
        std::vector<std::uint8_t> payload(
            link->pending.begin() + 12,
            link->pending.begin() + 12 + static_cast<std::ptrdiff_t>(len));
        link->pending.erase(
            link->pending.begin(),
            link->pending.begin() + 12 + static_cast<std::ptrdiff_t>(len));
        deliver(from, to, std::move(payload));
      }
    }
  }
}

std::unique_ptr<Transport> make_transport(const std::string& kind,
                                          int parties) {
  if (kind == "inmem") {
    return std::make_unique<InMemoryTransport>(parties);
  }
  if (kind == "tcp") {
    return std::make_unique<TcpTransport>(parties);
  }
  throw ConfigError("unknown transport kind: " + kind);
}

}  // namespace silofl::harness
