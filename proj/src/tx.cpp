#include "wider/tx.hpp"

namespace wider {

namespace {

template <typename F>
decltype(auto) visit_common(const SubchainTx& tx, F&& f) {
  return std::visit([&](const auto& t) -> decltype(auto) { return f(t); }, tx);
}

void write_preimage(const SendTx& t, ByteWriter& w) {
  w.u8(static_cast<std::uint8_t>(TxKind::Send));
  w.fixed(t.parent_hash);
  w.u64(t.height);
  w.fixed(t.current_address);
  w.fixed(t.recipient_address);
  w.u64(t.amount);
  w.u64(t.timestamp);
}

void write_preimage(const ReceiveTx& t, ByteWriter& w) {
  w.u8(static_cast<std::uint8_t>(TxKind::Receive));
  w.fixed(t.parent_hash);
  w.u64(t.height);
  w.fixed(t.current_address);
  w.fixed(t.sender_address);
  w.fixed(t.sender_tx_hash);
  w.fixed(t.main_block_hash);
  w.u64(t.amount);
  w.u64(t.timestamp);
}

}  // namespace

TxKind kind_of(const SubchainTx& tx) noexcept { return is_send(tx) ? TxKind::Send : TxKind::Receive; }
const Hash256& tx_hash_of(const SubchainTx& tx) noexcept {
  return visit_common(tx, [](const auto& t) -> const Hash256& { return t.tx_hash; });
}
const Hash256& parent_of(const SubchainTx& tx) noexcept {
  return visit_common(tx, [](const auto& t) -> const Hash256& { return t.parent_hash; });
}
std::uint64_t height_of(const SubchainTx& tx) noexcept {
  return visit_common(tx, [](const auto& t) { return t.height; });
}
const Address& address_of(const SubchainTx& tx) noexcept {
  return visit_common(tx, [](const auto& t) -> const Address& { return t.current_address; });
}
std::uint64_t amount_of(const SubchainTx& tx) noexcept {
  return visit_common(tx, [](const auto& t) { return t.amount; });
}
std::uint64_t timestamp_of(const SubchainTx& tx) noexcept {
  return visit_common(tx, [](const auto& t) { return t.timestamp; });
}
const Signature& signature_of(const SubchainTx& tx) noexcept {
  return visit_common(tx, [](const auto& t) -> const Signature& { return t.signature; });
}

std::size_t encoded_size(const SubchainTx& tx) noexcept {
  return is_send(tx) ? kSendEncodedSize : kReceiveEncodedSize;
}

void encode_tx(const SubchainTx& tx, ByteWriter& w) {
  // tag | tx_hash | fields | signature; the preimage writer emits the tag first
  ByteWriter pre(kReceivePreimageSize);
  std::visit([&](const auto& t) { write_preimage(t, pre); }, tx);
  const Bytes& p = pre.bytes();
  w.u8(p[0]);
  w.fixed(tx_hash_of(tx));
  w.raw(ByteView(p).subspan(1));
  w.fixed(signature_of(tx));
}

Bytes encode_tx(const SubchainTx& tx) {
  ByteWriter w(encoded_size(tx));
  encode_tx(tx, w);
  return std::move(w).take();
}

SubchainTx decode_tx(ByteReader& r) {
  auto tag = r.u8();
  if (tag == static_cast<std::uint8_t>(TxKind::Send)) {
    SendTx t;
    t.tx_hash = r.fixed<Hash256>();
    t.parent_hash = r.fixed<Hash256>();
    t.height = r.u64();
    t.current_address = r.fixed<Address>();
    t.recipient_address = r.fixed<Address>();
    t.amount = r.u64();
    t.timestamp = r.u64();
    t.signature = r.fixed<Signature>();
    return t;
  }
  if (tag == static_cast<std::uint8_t>(TxKind::Receive)) {
    ReceiveTx t;
    t.tx_hash = r.fixed<Hash256>();
    t.parent_hash = r.fixed<Hash256>();
    t.height = r.u64();
    t.current_address = r.fixed<Address>();
    t.sender_address = r.fixed<Address>();
    t.sender_tx_hash = r.fixed<Hash256>();
    t.main_block_hash = r.fixed<Hash256>();
    t.amount = r.u64();
    t.timestamp = r.u64();
    t.signature = r.fixed<Signature>();
    return t;
  }
  throw Error(ErrorCode::DecodeError, "unknown transaction tag " + std::to_string(tag));
}

SubchainTx decode_tx(ByteView bytes) {
  ByteReader r(bytes);
  SubchainTx tx = decode_tx(r);
  r.expect_done();
  return tx;
}

Bytes signing_preimage(const SubchainTx& tx) {
  ByteWriter w(kReceivePreimageSize);
  std::visit([&](const auto& t) { write_preimage(t, w); }, tx);
  return std::move(w).take();
}

Hash256 tx_digest(const SubchainTx& tx) { return sha256(signing_preimage(tx)); }

SubchainTx sign_tx(SubchainTx tx, const KeyPair& key) {
  if (key.address != address_of(tx)) {
    throw Error(ErrorCode::KeyMismatch, "key address " + key.address.hex() + " does not own " +
                                            address_of(tx).hex());
  }
  Hash256 digest = tx_digest(tx);
  Signature sig = sign_digest(digest, key.secret);
  std::visit(
      [&](auto& t) {
        t.tx_hash = digest;
        t.signature = sig;
      },
      tx);
  return tx;
}

bool verify_tx(const SubchainTx& tx) noexcept {
  try {
    Hash256 digest = tx_digest(tx);
    if (digest != tx_hash_of(tx)) return false;
    auto signer = recover_signer(digest, signature_of(tx));
    return signer && *signer == address_of(tx);
  } catch (...) {
    return false;
  }
}

}  // namespace wider
