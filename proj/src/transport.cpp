#include "bsf/transport.hpp"

#include <string>

#include "bsf/errors.hpp"

namespace bsf {

std::string_view to_string(Tag t) {
  switch (t) {
    case Tag::Job: return "Job";
    case Tag::Result: return "Result";
    case Tag::Barrier: return "Barrier";
    case Tag::Control: return "Control";
  }
  return "?";
}

Rank::Rank(int id_, int world_size_) : id(id_), world_size(world_size_) {
  if (world_size < 2) throw InvalidParameter("world needs a master and at least one worker");
  if (id < 0 || id >= world_size) {
    throw InvalidParameter("rank " + std::to_string(id) + " outside world of size " + std::to_string(world_size));
  }
}

Bytes encode_frame(const Message& m) {
  if (m.payload.size() > 0xFFFFFFFFu) throw InvalidParameter("payload exceeds 2^32-1 bytes");
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(m.payload.size())).u8(static_cast<std::uint8_t>(m.tag)).raw(m.payload);
  return std::move(w).take();
}

FrameHeader decode_frame_header(std::span<const std::uint8_t, kFrameHeaderSize> header) {
  ByteReader r(header);
  const auto length = r.u32();
  const auto tag = r.u8();
  if (tag > static_cast<std::uint8_t>(Tag::Control)) {
    throw InvalidParameter("unknown frame tag " + std::to_string(tag));
  }
  return {length, static_cast<Tag>(tag)};
}

Message decode_frame(ByteView frame) {
  if (frame.size() < kFrameHeaderSize) throw InvalidParameter("frame shorter than its header");
  const auto header = decode_frame_header(frame.first<kFrameHeaderSize>());
  if (frame.size() - kFrameHeaderSize != header.length) {
    throw InvalidParameter("frame length field " + std::to_string(header.length) + " disagrees with " +
                           std::to_string(frame.size() - kFrameHeaderSize) + " payload bytes");
  }
  const auto body = frame.subspan(kFrameHeaderSize);
  return {header.tag, Bytes(body.begin(), body.end())};
}

void FrameDecoder::feed(ByteView bytes) {
  if (pos_ > 0 && pos_ == buf_.size()) {
    buf_.clear();
    pos_ = 0;
  }
  buf_.insert(buf_.end(), bytes.begin(), bytes.end());
}

std::optional<Message> FrameDecoder::next() {
  if (buffered() < kFrameHeaderSize) return std::nullopt;
  const auto view = ByteView(buf_).subspan(pos_);
  const auto header = decode_frame_header(view.first<kFrameHeaderSize>());
  if (view.size() - kFrameHeaderSize < header.length) return std::nullopt;
  const auto body = view.subspan(kFrameHeaderSize, header.length);
  Message m{header.tag, Bytes(body.begin(), body.end())};
  pos_ += kFrameHeaderSize + header.length;
  return m;
}

Message expect(Endpoint& ep, int from, Tag tag, Timeout timeout) {
  auto m = ep.recv(from, timeout);
  if (m.tag != tag) {
    throw TransportFailure("rank " + std::to_string(ep.rank().id) + " expected " + std::string(to_string(tag)) +
                           " from rank " + std::to_string(from) + ", got " + std::string(to_string(m.tag)));
  }
  return m;
}

void distribute(Endpoint& master, const Message& job) {
  const auto self = master.rank();
  if (!self.is_master()) throw InvalidParameter("distribute must be called by the master");
  for (int w = 1; w < self.world_size; ++w) master.send(w, job);
}

std::vector<Message> gather(Endpoint& master, Timeout timeout) {
  const auto self = master.rank();
  if (!self.is_master()) throw InvalidParameter("gather must be called by the master");
  std::vector<Message> results;
  results.reserve(static_cast<std::size_t>(self.workers()));
  // Per-pair FIFO channels: reading rank by rank yields rank order no matter
  // which worker finished first.
  for (int w = 1; w < self.world_size; ++w) results.push_back(expect(master, w, Tag::Result, timeout));
  return results;
}

void barrier(Endpoint& ep, Timeout timeout) {
  const auto self = ep.rank();
  const auto epoch = ep.next_barrier_epoch();
  const auto stamp = [epoch] { return Message{Tag::Barrier, std::move(ByteWriter{}.u64(epoch)).take()}; };
  const auto check = [&](const Message& m, int peer) {
    ByteReader r(m.payload);
    const auto got = r.u64();
    if (got != epoch) {
      throw TransportFailure("barrier epoch mismatch with rank " + std::to_string(peer) + ": expected " +
                             std::to_string(epoch) + ", got " + std::to_string(got));
    }
  };
  try {
    if (self.is_master()) {
      for (int w = 1; w < self.world_size; ++w) check(expect(ep, w, Tag::Barrier, timeout), w);
      for (int w = 1; w < self.world_size; ++w) ep.send(w, stamp());
    } else {
      ep.send(kMasterRank, stamp());
      check(expect(ep, kMasterRank, Tag::Barrier, timeout), kMasterRank);
    }
  } catch (const TransportTimeout& e) {
    throw BarrierTimeout(std::string("barrier #") + std::to_string(epoch) + " timed out: " + e.what());
  }
}

}  // namespace bsf
