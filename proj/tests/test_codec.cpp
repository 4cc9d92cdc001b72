#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "wider/tx.hpp"

using namespace wider;

namespace {

SecretKey seed_of(std::uint8_t b) {
  SecretKey s;
  s.fill(b);
  return s;
}

template <typename T>
T random_fixed(std::mt19937_64& rng) {
  T out;
  for (auto& b : out.bytes) b = static_cast<std::uint8_t>(rng());
  return out;
}

SubchainTx random_tx(std::mt19937_64& rng) {
  if (rng() & 1) {
    SendTx t;
    t.tx_hash = random_fixed<Hash256>(rng);
    t.parent_hash = random_fixed<Hash256>(rng);
    t.height = rng();
    t.current_address = random_fixed<Address>(rng);
    t.recipient_address = random_fixed<Address>(rng);
    t.amount = rng();
    t.timestamp = rng();
    t.signature = random_fixed<Signature>(rng);
    return t;
  }
  ReceiveTx t;
  t.tx_hash = random_fixed<Hash256>(rng);
  t.parent_hash = random_fixed<Hash256>(rng);
  t.height = rng();
  t.current_address = random_fixed<Address>(rng);
  t.sender_address = random_fixed<Address>(rng);
  t.sender_tx_hash = random_fixed<Hash256>(rng);
  t.main_block_hash = random_fixed<Hash256>(rng);
  t.amount = rng();
  t.timestamp = rng();
  t.signature = random_fixed<Signature>(rng);
  return t;
}

SendTx unsigned_send(const KeyPair& from, const Address& to, std::uint64_t amount) {
  SendTx t;
  t.height = 1;
  t.current_address = from.address;
  t.recipient_address = to;
  t.amount = amount;
  t.timestamp = 1'700'000'000;
  return t;
}

}  // namespace

TEST_CASE("keygen is deterministic for a seed and matches an independent derivation") {
  auto a = keygen(seed_of(0x01));
  auto b = keygen(seed_of(0x01));
  CHECK(a.address == b.address);
  CHECK(a.public_key == b.public_key);
  // compressed point and address computed with Python's `cryptography` + hashlib
  CHECK(to_hex(a.public_key) == "031b84c5567b126440995d3ed5aaba0565d71e1834604819ff9c17f5e9d5dd078f");
  CHECK(a.address.hex() == "6ac0a76fcdaa55ed820926232b26f5132dc0cb41");
}

TEST_CASE("keygen rejects zero and out-of-range scalars") {
  try {
    keygen(seed_of(0x00));
    FAIL("expected InvalidSeed");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidSeed);
  }
  CHECK_THROWS_AS(keygen(seed_of(0xff)), Error);
}

TEST_CASE("unseeded keygen yields distinct addresses") {
  CHECK(keygen().address != keygen().address);
}

TEST_CASE("encoding lengths are constants per tag") {
  CHECK(encode_tx(SendTx{}).size() == 193);
  CHECK(encode_tx(ReceiveTx{}).size() == 257);
  CHECK(signing_preimage(SendTx{}).size() == 97);
  CHECK(signing_preimage(ReceiveTx{}).size() == 161);
  CHECK(encode_tx(ReceiveTx{}).size() > encode_tx(SendTx{}).size());
}

TEST_CASE("all-zero send encodes to zeros after the tag") {
  Bytes enc = encode_tx(SendTx{});
  REQUIRE(enc.size() == kSendEncodedSize);
  CHECK(enc[0] == 0x01);
  CHECK(std::all_of(enc.begin() + 1, enc.end(), [](auto b) { return b == 0; }));
  CHECK(encode_tx(ReceiveTx{})[0] == 0x02);
}

TEST_CASE("digest of all-zero preimages matches an independent SHA-256") {
  // python3 hashlib.sha256(bytes([1]) + bytes(96)) / (bytes([2]) + bytes(160))
  CHECK(tx_digest(SendTx{}).hex() == "d57a85c0063030b53f51d75232d6419f35ac86e5d8807898889463effcf29b7c");
  CHECK(tx_digest(ReceiveTx{}).hex() == "0639da134c95274c57fc1ce1899e31e5ebc7531040b4bae4f54ca29d9f797c1d");
}

TEST_CASE("decode(encode(tx)) round-trips on random transactions") {
  std::mt19937_64 rng(42);
  for (int i = 0; i < 10'000; ++i) {
    SubchainTx tx = random_tx(rng);
    Bytes enc = encode_tx(tx);
    REQUIRE(enc.size() == encoded_size(tx));
    SubchainTx back = decode_tx(enc);
    REQUIRE(back == tx);
    REQUIRE(encode_tx(back) == enc);
  }
}

TEST_CASE("decode rejects unknown tags, truncation and trailing bytes") {
  Bytes enc = encode_tx(SendTx{});
  Bytes bad_tag = enc;
  bad_tag[0] = 0x03;
  CHECK_THROWS_AS(decode_tx(bad_tag), Error);
  CHECK_THROWS_AS(decode_tx(ByteView(enc).first(enc.size() - 1)), Error);
  Bytes longer = enc;
  longer.push_back(0);
  CHECK_THROWS_AS(decode_tx(longer), Error);
}

TEST_CASE("every preimage byte feeds the digest") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 20; ++i) {
    SubchainTx tx = random_tx(rng);
    Bytes enc = encode_tx(tx);
    Hash256 base = tx_digest(tx);
    const std::size_t pre_end = enc.size() - 64;
    for (std::size_t pos = 0; pos < pre_end; ++pos) {
      if (pos >= 1 && pos < 33) continue;  // tx_hash is not part of the preimage
      if (pos == 0) continue;              // flipping the tag changes the layout
      Bytes mutated = enc;
      mutated[pos] ^= 0x01;
      REQUIRE(tx_digest(decode_tx(mutated)) != base);
    }
  }
}

TEST_CASE("digest is stable under re-encoding and differs by amount") {
  auto k = keygen(seed_of(0x02));
  SendTx a = unsigned_send(k, Address::filled(9), 10);
  SendTx b = a;
  b.amount = 11;
  CHECK(tx_digest(a) == tx_digest(decode_tx(encode_tx(a))));
  CHECK(tx_digest(a) != tx_digest(b));
}

TEST_CASE("sign then verify, and wrong key is refused") {
  auto k = keygen(seed_of(0x03));
  auto other = keygen(seed_of(0x04));
  SubchainTx signed_tx = sign_tx(unsigned_send(k, other.address, 5), k);
  CHECK(verify_tx(signed_tx));
  CHECK(tx_hash_of(signed_tx) == tx_digest(signed_tx));
  // deterministic nonces: same content, same bytes
  CHECK(encode_tx(sign_tx(unsigned_send(k, other.address, 5), k)) == encode_tx(signed_tx));

  try {
    sign_tx(unsigned_send(k, other.address, 5), other);
    FAIL("expected KeyMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::KeyMismatch);
  }
}

TEST_CASE("tampered recipient with original signature is rejected") {
  auto k = keygen(seed_of(0x05));
  SubchainTx tx = sign_tx(unsigned_send(k, Address::filled(1), 5), k);
  std::get<SendTx>(tx).recipient_address = Address::filled(2);
  CHECK_FALSE(verify_tx(tx));
  // even with the hash recomputed the signature no longer matches
  std::get<SendTx>(tx).tx_hash = tx_digest(tx);
  CHECK_FALSE(verify_tx(tx));
}

TEST_CASE("random single-bit flips of a signed encoding are rejected") {
  auto k = keygen(seed_of(0x06));
  ReceiveTx rx;
  rx.height = 3;
  rx.parent_hash = Hash256::filled(0x11);
  rx.current_address = k.address;
  rx.sender_address = Address::filled(0x22);
  rx.sender_tx_hash = Hash256::filled(0x33);
  rx.main_block_hash = Hash256::filled(0x44);
  rx.amount = 40;
  rx.timestamp = 99;
  Bytes enc = encode_tx(sign_tx(rx, k));
  std::mt19937_64 rng(11);
  int rejected = 0;
  for (int i = 0; i < 100; ++i) {
    Bytes mutated = enc;
    std::size_t bit = rng() % ((enc.size() - 1) * 8) + 8;  // keep the tag byte
    mutated[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    rejected += verify_tx(decode_tx(mutated)) ? 0 : 1;
  }
  CHECK(rejected == 100);
}

TEST_CASE("coinbase claim signed by the claimant verifies") {
  auto miner = keygen(seed_of(0x07));
  ReceiveTx rx;
  rx.height = 1;
  rx.current_address = miner.address;
  rx.main_block_hash = Hash256::filled(0x55);
  rx.amount = 50ULL * 100'000'000ULL;
  CHECK(rx.is_coinbase_claim());
  CHECK(verify_tx(sign_tx(rx, miner)));
}

TEST_CASE("high-s signatures are not canonical") {
  auto k = keygen(seed_of(0x08));
  SubchainTx tx = sign_tx(unsigned_send(k, Address::filled(1), 5), k);
  // s' = n - s produces an equally valid ECDSA signature that must be refused
  static const std::array<std::uint8_t, 32> n = {
      0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xfe,
      0xba, 0xae, 0xdc, 0xe6, 0xaf, 0x48, 0xa0, 0x3b, 0xbf, 0xd2, 0x5e, 0x8c, 0xd0, 0x36, 0x41, 0x41};
  auto& sig = std::get<SendTx>(tx).signature;
  int borrow = 0;
  for (int i = 31; i >= 0; --i) {
    int v = n[i] - sig.bytes[32 + i] - borrow;
    borrow = v < 0;
    sig.bytes[32 + i] = static_cast<std::uint8_t>(v + (borrow ? 256 : 0));
  }
  CHECK_FALSE(verify_tx(tx));
}
