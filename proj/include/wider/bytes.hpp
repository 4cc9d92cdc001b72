#pragma once

#include <algorithm>
#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wider/errors.hpp"

namespace wider {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

std::string to_hex(ByteView bytes);
Bytes from_hex(std::string_view hex);

/// Fixed-width byte string. The tag type keeps hashes and addresses from
/// being mixed up at compile time.
template <std::size_t N, typename Tag>
struct FixedBytes {
  static constexpr std::size_t size() noexcept { return N; }

  std::array<std::uint8_t, N> bytes{};

  static FixedBytes from(ByteView v) {
    if (v.size() != N) throw Error(ErrorCode::DecodeError, "expected " + std::to_string(N) + " bytes");
    FixedBytes out;
    std::copy(v.begin(), v.end(), out.bytes.begin());
    return out;
  }
  static FixedBytes from_hex(std::string_view hex) { return from(wider::from_hex(hex)); }
  static FixedBytes filled(std::uint8_t b) {
    FixedBytes out;
    out.bytes.fill(b);
    return out;
  }

  bool is_zero() const noexcept {
    return std::all_of(bytes.begin(), bytes.end(), [](std::uint8_t b) { return b == 0; });
  }
  std::string hex() const { return to_hex(bytes); }
  ByteView view() const noexcept { return bytes; }
  std::uint8_t operator[](std::size_t i) const noexcept { return bytes[i]; }
  std::uint8_t& operator[](std::size_t i) noexcept { return bytes[i]; }

  friend auto operator<=>(const FixedBytes&, const FixedBytes&) = default;
};

struct HashTag {};
struct AddressTag {};

/// 32-byte digest. The all-zero value is the null hash (genesis parent,
/// coinbase sender reference).
using Hash256 = FixedBytes<32, HashTag>;
/// 20-byte account address; all-zero is the coinbase sender sentinel.
using Address = FixedBytes<20, AddressTag>;

struct FixedBytesHasher {
  template <std::size_t N, typename Tag>
  std::size_t operator()(const FixedBytes<N, Tag>& v) const noexcept {
    // inputs are hash outputs or hash-derived, so the leading bytes are uniform
    std::size_t h;
    static_assert(N >= sizeof(h));
    std::memcpy(&h, v.bytes.data(), sizeof(h));
    return h;
  }
};

/// Big-endian append-only encoder.
class ByteWriter {
 public:
  ByteWriter() = default;
  explicit ByteWriter(std::size_t reserve) { buf_.reserve(reserve); }

  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) { put_be(v, 2); }
  void u32(std::uint32_t v) { put_be(v, 4); }
  void u64(std::uint64_t v) { put_be(v, 8); }
  void raw(ByteView v) { buf_.insert(buf_.end(), v.begin(), v.end()); }
  template <std::size_t N, typename Tag>
  void fixed(const FixedBytes<N, Tag>& v) { raw(v.bytes); }

  std::size_t size() const noexcept { return buf_.size(); }
  const Bytes& bytes() const& noexcept { return buf_; }
  Bytes take() && { return std::move(buf_); }

 private:
  void put_be(std::uint64_t v, int width) {
    for (int i = width - 1; i >= 0; --i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  Bytes buf_;
};

/// Big-endian decoder over a borrowed buffer; throws DecodeError on underrun.
class ByteReader {
 public:
  explicit ByteReader(ByteView data) : data_(data) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get_be(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get_be(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get_be(4)); }
  std::uint64_t u64() { return get_be(8); }
  ByteView raw(std::size_t n) {
    need(n);
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  template <typename T>
  T fixed() { return T::from(raw(T::size())); }

  std::size_t remaining() const noexcept { return data_.size() - pos_; }
  std::size_t position() const noexcept { return pos_; }
  bool done() const noexcept { return pos_ == data_.size(); }
  void expect_done() const {
    if (!done()) throw Error(ErrorCode::DecodeError, "trailing bytes");
  }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw Error(ErrorCode::DecodeError, "truncated input");
  }
  std::uint64_t get_be(std::size_t width) {
    need(width);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < width; ++i) v = (v << 8) | data_[pos_ + i];
    pos_ += width;
    return v;
  }
  ByteView data_;
  std::size_t pos_ = 0;
};

}  // namespace wider

template <std::size_t N, typename Tag>
struct std::hash<wider::FixedBytes<N, Tag>> {
  std::size_t operator()(const wider::FixedBytes<N, Tag>& v) const noexcept {
    return wider::FixedBytesHasher{}(v);
  }
};
