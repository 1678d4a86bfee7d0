#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bsf/errors.hpp"

namespace bsf {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

/// Appends big-endian scalars to a byte buffer.
class ByteWriter {
 public:
  ByteWriter() = default;
  explicit ByteWriter(Bytes initial) : buf_(std::move(initial)) {}

  ByteWriter& u8(std::uint8_t v) {
    buf_.push_back(v);
    return *this;
  }
  ByteWriter& u16(std::uint16_t v) { return put(v, 2); }
  ByteWriter& u32(std::uint32_t v) { return put(v, 4); }
  ByteWriter& u64(std::uint64_t v) { return put(v, 8); }
  ByteWriter& f64(double v) { return u64(std::bit_cast<std::uint64_t>(v)); }

  ByteWriter& f64s(std::span<const double> values) {
    u32(static_cast<std::uint32_t>(values.size()));
    for (double v : values) f64(v);
    return *this;
  }

  ByteWriter& raw(ByteView bytes) {
    buf_.insert(buf_.end(), bytes.begin(), bytes.end());
    return *this;
  }

  Bytes take() && { return std::move(buf_); }
  const Bytes& bytes() const& { return buf_; }

 private:
  ByteWriter& put(std::uint64_t v, int width) {
    for (int shift = (width - 1) * 8; shift >= 0; shift -= 8) {
      buf_.push_back(static_cast<std::uint8_t>(v >> shift));
    }
    return *this;
  }

  Bytes buf_;
};

/// Reads big-endian scalars; throws InvalidParameter on truncation.
class ByteReader {
 public:
  explicit ByteReader(ByteView bytes) : bytes_(bytes) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(u64()); }

  std::vector<double> f64s() {
    const auto n = u32();
    if (remaining() / 8 < n) throw InvalidParameter("truncated vector payload");
    std::vector<double> out(n);
    for (auto& v : out) v = f64();
    return out;
  }

  ByteView rest() {
    auto out = bytes_.subspan(pos_);
    pos_ = bytes_.size();
    return out;
  }

  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  std::uint64_t get(std::size_t width) {
    if (remaining() < width) throw InvalidParameter("truncated payload");
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < width; ++i) v = (v << 8) | bytes_[pos_ + i];
    pos_ += width;
    return v;
  }

  ByteView bytes_;
  std::size_t pos_ = 0;
};

}  // namespace bsf
