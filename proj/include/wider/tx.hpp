#pragma once

#include <cstdint>
#include <variant>

#include "wider/bytes.hpp"
#include "wider/crypto.hpp"

namespace wider {

/// Outgoing transfer on the sender's subchain.
struct SendTx {
  Hash256 tx_hash;
  Hash256 parent_hash;
  std::uint64_t height = 0;
  Address current_address;
  Address recipient_address;
  std::uint64_t amount = 0;
  std::uint64_t timestamp = 0;
  Signature signature;

  friend bool operator==(const SendTx&, const SendTx&) = default;
};

/// Claim on the recipient's subchain. It references the send being claimed and
/// a main block that confirms it. A null sender_address together with a null
/// sender_tx_hash marks a claim of the referenced block's coinbase subsidy.
struct ReceiveTx {
  Hash256 tx_hash;
  Hash256 parent_hash;
  std::uint64_t height = 0;
  Address current_address;
  Address sender_address;
  Hash256 sender_tx_hash;
  Hash256 main_block_hash;
  std::uint64_t amount = 0;
  std::uint64_t timestamp = 0;
  Signature signature;

  bool is_coinbase_claim() const noexcept { return sender_address.is_zero() && sender_tx_hash.is_zero(); }

  friend bool operator==(const ReceiveTx&, const ReceiveTx&) = default;
};

using SubchainTx = std::variant<SendTx, ReceiveTx>;

enum class TxKind : std::uint8_t { Send = 0x01, Receive = 0x02 };

// Wire sizes: tag byte, then the fields in table order.
inline constexpr std::size_t kSendPreimageSize = 1 + 32 + 8 + 20 + 20 + 8 + 8;              // 97
inline constexpr std::size_t kReceivePreimageSize = 1 + 32 + 8 + 20 + 20 + 32 + 32 + 8 + 8;  // 161
inline constexpr std::size_t kSendEncodedSize = kSendPreimageSize + 32 + 64;                 // 193
inline constexpr std::size_t kReceiveEncodedSize = kReceivePreimageSize + 32 + 64;           // 257

// Field accessors shared by both kinds.
TxKind kind_of(const SubchainTx& tx) noexcept;
const Hash256& tx_hash_of(const SubchainTx& tx) noexcept;
const Hash256& parent_of(const SubchainTx& tx) noexcept;
std::uint64_t height_of(const SubchainTx& tx) noexcept;
const Address& address_of(const SubchainTx& tx) noexcept;
std::uint64_t amount_of(const SubchainTx& tx) noexcept;
std::uint64_t timestamp_of(const SubchainTx& tx) noexcept;
const Signature& signature_of(const SubchainTx& tx) noexcept;
inline bool is_send(const SubchainTx& tx) noexcept { return std::holds_alternative<SendTx>(tx); }

std::size_t encoded_size(const SubchainTx& tx) noexcept;

/// Full canonical encoding: tag | tx_hash | preimage fields | signature.
Bytes encode_tx(const SubchainTx& tx);
void encode_tx(const SubchainTx& tx, ByteWriter& w);
/// Inverse of encode_tx; throws DecodeError on unknown tag, truncation or
/// trailing bytes.
SubchainTx decode_tx(ByteView bytes);
SubchainTx decode_tx(ByteReader& r);

/// Signing preimage: tag | fields, without tx_hash and signature.
Bytes signing_preimage(const SubchainTx& tx);
Hash256 tx_digest(const SubchainTx& tx);

/// Fills tx_hash and signature. Throws KeyMismatch when the key does not
/// belong to current_address.
SubchainTx sign_tx(SubchainTx tx, const KeyPair& key);

/// Context-free validity: tx_hash is the digest and the signature recovers to
/// current_address.
bool verify_tx(const SubchainTx& tx) noexcept;

}  // namespace wider
