#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>

#include "wider/bytes.hpp"

namespace wider {

/// Bit `i` of an address, most significant bit of byte 0 first.
inline bool address_bit(const Address& a, std::size_t i) noexcept {
  return (a[i / 8] >> (7 - i % 8)) & 1;
}

/// Address prefix of length d (0..160) naming the subchains a node hosts.
/// The empty prefix hosts everything.
class ShardAssignment {
 public:
  static constexpr std::size_t kMaxDepth = 160;

  ShardAssignment() = default;
  /// Parses a string of '0'/'1' characters.
  static ShardAssignment from_string(std::string_view bits);
  /// The first `depth` bits of `address`.
  static ShardAssignment of_address(const Address& address, std::size_t depth);

  std::size_t depth() const noexcept { return depth_; }
  bool bit(std::size_t i) const noexcept { return (bits_[i / 8] >> (7 - i % 8)) & 1; }

  bool hosts(const Address& address) const noexcept;
  bool is_prefix_of(const ShardAssignment& other) const noexcept;
  /// Throws MaxDepth at depth 160.
  ShardAssignment child(bool bit) const;
  std::pair<ShardAssignment, ShardAssignment> split() const { return {child(false), child(true)}; }

  /// "0101"; the root prints as an empty string.
  std::string to_string() const;

  /// Length byte followed by ceil(d/8) packed bytes, unused low bits zero.
  void encode(ByteWriter& w) const;
  static ShardAssignment decode(ByteReader& r);

  friend bool operator==(const ShardAssignment&, const ShardAssignment&) = default;
  friend auto operator<=>(const ShardAssignment&, const ShardAssignment&) = default;

 private:
  std::uint8_t depth_ = 0;
  std::array<std::uint8_t, 20> bits_{};
};

inline bool hosts(const ShardAssignment& assignment, const Address& address) noexcept {
  return assignment.hosts(address);
}

inline std::pair<ShardAssignment, ShardAssignment> split(const ShardAssignment& assignment) {
  return assignment.split();
}

}  // namespace wider
