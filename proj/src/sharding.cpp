#include "wider/sharding.hpp"

namespace wider {

ShardAssignment ShardAssignment::from_string(std::string_view bits) {
  ShardAssignment out;
  for (char c : bits) {
    if (c != '0' && c != '1') throw Error(ErrorCode::DecodeError, "prefix must be a string of 0 and 1");
    out = out.child(c == '1');
  }
  return out;
}

ShardAssignment ShardAssignment::of_address(const Address& address, std::size_t depth) {
  if (depth > kMaxDepth) throw Error(ErrorCode::MaxDepth);
  ShardAssignment out;
  for (std::size_t i = 0; i < depth; ++i) out = out.child(address_bit(address, i));
  return out;
}

bool ShardAssignment::hosts(const Address& address) const noexcept {
  const std::size_t full = depth_ / 8;
  for (std::size_t i = 0; i < full; ++i) {
    if (bits_[i] != address[i]) return false;
  }
  if (const std::size_t rest = depth_ % 8; rest != 0) {
    const auto mask = static_cast<std::uint8_t>(0xff << (8 - rest));
    if ((address[full] & mask) != bits_[full]) return false;
  }
  return true;
}

bool ShardAssignment::is_prefix_of(const ShardAssignment& other) const noexcept {
  if (depth_ > other.depth_) return false;
  for (std::size_t i = 0; i < depth_; ++i) {
    if (bit(i) != other.bit(i)) return false;
  }
  return true;
}

ShardAssignment ShardAssignment::child(bool b) const {
  if (depth_ >= kMaxDepth) throw Error(ErrorCode::MaxDepth, "prefix already covers the whole address");
  ShardAssignment out = *this;
  if (b) out.bits_[depth_ / 8] |= static_cast<std::uint8_t>(1u << (7 - depth_ % 8));
  ++out.depth_;
  return out;
}

std::string ShardAssignment::to_string() const {
  std::string s;
  s.reserve(depth_);
  for (std::size_t i = 0; i < depth_; ++i) s.push_back(bit(i) ? '1' : '0');
  return s;
}

void ShardAssignment::encode(ByteWriter& w) const {
  w.u8(depth_);
  w.raw(ByteView(bits_).first((depth_ + 7) / 8));
}

ShardAssignment ShardAssignment::decode(ByteReader& r) {
  ShardAssignment out;
  const std::uint8_t depth = r.u8();
  if (depth > kMaxDepth) throw Error(ErrorCode::DecodeError, "prefix longer than an address");
  ByteView packed = r.raw((depth + 7) / 8);
  std::copy(packed.begin(), packed.end(), out.bits_.begin());
  if (depth % 8 != 0) {
    const auto unused = static_cast<std::uint8_t>(0xff >> (depth % 8));
    if (out.bits_[depth / 8] & unused) throw Error(ErrorCode::DecodeError, "nonzero padding bits");
  }
  out.depth_ = depth;
  return out;
}

}  // namespace wider
