#pragma once

// Message-passing layer for the farm: framed messages, a per-rank endpoint
// interface, and the three collectives the farm needs (sequential distribute,
// rank-ordered gather, master-coordinated barrier). Topology is a star: every
// message has the master (rank 0) as one of its ends.

#include <array>
#include <chrono>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "bsf/bytes.hpp"

namespace bsf {

enum class Tag : std::uint8_t { Job = 0, Result = 1, Barrier = 2, Control = 3 };

std::string_view to_string(Tag t);

struct Message {
  Tag tag = Tag::Control;
  Bytes payload;

  friend bool operator==(const Message&, const Message&) = default;
};

struct Rank {
  int id = 0;
  int world_size = 2;

  Rank(int id, int world_size);

  bool is_master() const noexcept { return id == 0; }
  int workers() const noexcept { return world_size - 1; }
};

inline constexpr int kMasterRank = 0;
inline constexpr std::size_t kFrameHeaderSize = 5;

/// Wire frame: 4-byte big-endian payload length, 1-byte tag, payload.
Bytes encode_frame(const Message& m);

struct FrameHeader {
  std::uint32_t length;
  Tag tag;
};

FrameHeader decode_frame_header(std::span<const std::uint8_t, kFrameHeaderSize> header);

/// Decodes exactly one frame occupying all of `frame`.
Message decode_frame(ByteView frame);

/// Incremental decoder for a byte stream carrying back-to-back frames.
class FrameDecoder {
 public:
  void feed(ByteView bytes);
  std::optional<Message> next();
  std::size_t buffered() const noexcept { return buf_.size() - pos_; }

 private:
  Bytes buf_;
  std::size_t pos_ = 0;
};

using Timeout = std::optional<std::chrono::milliseconds>;

inline constexpr std::chrono::milliseconds kDefaultTimeout{30'000};

/// One rank's view of the world. Owned by exactly one execution context.
class Endpoint {
 public:
  virtual ~Endpoint() = default;

  virtual Rank rank() const = 0;

  /// FIFO per (sender, receiver) pair. Throws TransportFailure if the peer is gone.
  virtual void send(int to, Message m) = 0;
  /// Blocks until the next message from `from` arrives; TransportFailure on
  /// disconnect or when the timeout (if any) expires.
  virtual Message recv(int from, Timeout timeout) = 0;

  /// Seconds on this rank's clock: wall time for real backends, virtual time
  /// for the cost-accounting backend.
  virtual double now() const = 0;

  /// Releases the rank; peers blocked on it observe a disconnect.
  virtual void close() = 0;

  Message recv(int from) { return recv(from, default_timeout()); }

  Timeout default_timeout() const { return timeout_; }
  void set_default_timeout(Timeout t) { timeout_ = t; }

  std::uint64_t next_barrier_epoch() noexcept { return ++barrier_epoch_; }

 private:
  Timeout timeout_ = kDefaultTimeout;
  std::uint64_t barrier_epoch_ = 0;
};

/// Master sends `job` to workers 1..K, one after another in rank order.
void distribute(Endpoint& master, const Message& job);

/// Master collects one Result message from each worker; index i holds rank i+1.
std::vector<Message> gather(Endpoint& master, Timeout timeout);
inline std::vector<Message> gather(Endpoint& master) { return gather(master, master.default_timeout()); }

/// Star barrier: workers report the epoch, master replies once all arrived.
void barrier(Endpoint& ep, Timeout timeout);
inline void barrier(Endpoint& ep) { barrier(ep, ep.default_timeout()); }

/// Receives from `from` and checks the tag.
Message expect(Endpoint& ep, int from, Tag tag, Timeout timeout);

}  // namespace bsf
