#include "wider/crypto.hpp"

#include <openssl/rand.h>
#include <openssl/sha.h>
#include <secp256k1.h>
#include <secp256k1_preallocated.h>
#include <secp256k1_recovery.h>

#include <cstdlib>
#include <memory>

namespace wider {

namespace {

// The vendored library carries a versioned symbol prefix.
using Context = rustsecp256k1_v0_10_0_context;

struct ContextHolder {
  ContextHolder() {
    std::size_t size = rustsecp256k1_v0_10_0_context_preallocated_size(SECP256K1_CONTEXT_NONE);
    memory.reset(static_cast<unsigned char*>(std::aligned_alloc(64, (size + 63) / 64 * 64)));
    ctx = rustsecp256k1_v0_10_0_context_preallocated_create(memory.get(), SECP256K1_CONTEXT_NONE);
    std::array<unsigned char, 32> blind{};
    random_bytes(blind);
    [[maybe_unused]] int randomized = rustsecp256k1_v0_10_0_context_randomize(ctx, blind.data());
  }
  ~ContextHolder() { rustsecp256k1_v0_10_0_context_preallocated_destroy(ctx); }

  struct FreeDeleter {
    void operator()(unsigned char* p) const { std::free(p); }
  };
  std::unique_ptr<unsigned char, FreeDeleter> memory;
  Context* ctx = nullptr;
};

// Read-only after construction; libsecp256k1 allows concurrent use of a
// const context.
const Context* context() {
  static const ContextHolder holder;
  return holder.ctx;
}

}  // namespace

Hash256 sha256(ByteView data) {
  Hash256 out;
  SHA256(data.data(), data.size(), out.bytes.data());
  return out;
}

Hash256 sha256d(ByteView data) {
  Hash256 first = sha256(data);
  return sha256(first.bytes);
}

void random_bytes(std::span<std::uint8_t> out) {
  if (RAND_bytes(out.data(), static_cast<int>(out.size())) != 1) {
    throw Error(ErrorCode::Io, "RAND_bytes failed");
  }
}

Address address_of(const PublicKey& pub) {
  Hash256 h = sha256(pub);
  Address a;
  std::copy(h.bytes.end() - Address::size(), h.bytes.end(), a.bytes.begin());
  return a;
}

KeyPair keygen(const std::optional<SecretKey>& seed) {
  KeyPair kp;
  if (seed) {
    if (!rustsecp256k1_v0_10_0_ec_seckey_verify(context(), seed->data())) {
      throw Error(ErrorCode::InvalidSeed, "scalar is zero or not below the curve order");
    }
    kp.secret = *seed;
  } else {
    do {
      random_bytes(kp.secret);
    } while (!rustsecp256k1_v0_10_0_ec_seckey_verify(context(), kp.secret.data()));
  }
  rustsecp256k1_v0_10_0_pubkey pk;
  if (!rustsecp256k1_v0_10_0_ec_pubkey_create(context(), &pk, kp.secret.data())) {
    throw Error(ErrorCode::InvalidSeed, "public key derivation failed");
  }
  std::size_t len = kp.public_key.size();
  rustsecp256k1_v0_10_0_ec_pubkey_serialize(context(), kp.public_key.data(), &len, &pk,
                                            SECP256K1_EC_COMPRESSED);
  kp.address = address_of(kp.public_key);
  return kp;
}

Signature sign_digest(const Hash256& digest, const SecretKey& secret) {
  rustsecp256k1_v0_10_0_ecdsa_recoverable_signature rsig;
  std::array<unsigned char, 32> extra{};
  for (std::uint32_t attempt = 0;; ++attempt) {
    // attempt 0 is plain RFC6979; later attempts feed the counter as extra entropy
    const unsigned char* ndata = nullptr;
    if (attempt > 0) {
      for (int i = 0; i < 4; ++i) extra[i] = static_cast<unsigned char>(attempt >> (8 * i));
      ndata = extra.data();
    }
    if (!rustsecp256k1_v0_10_0_ecdsa_sign_recoverable(context(), &rsig, digest.bytes.data(),
                                                      secret.data(), nullptr, ndata)) {
      throw Error(ErrorCode::InvalidSeed, "signing failed");
    }
    Signature out;
    int recid = -1;
    rustsecp256k1_v0_10_0_ecdsa_recoverable_signature_serialize_compact(context(), out.bytes.data(),
                                                                        &recid, &rsig);
    if (recid == 0) return out;
  }
}

std::optional<Address> recover_signer(const Hash256& digest, const Signature& sig) {
  const Context* ctx = context();
  rustsecp256k1_v0_10_0_ecdsa_signature plain;
  if (!rustsecp256k1_v0_10_0_ecdsa_signature_parse_compact(ctx, &plain, sig.bytes.data())) {
    return std::nullopt;
  }
  // normalize returns 1 when the input was high-s
  if (rustsecp256k1_v0_10_0_ecdsa_signature_normalize(ctx, nullptr, &plain)) return std::nullopt;

  rustsecp256k1_v0_10_0_ecdsa_recoverable_signature rsig;
  if (!rustsecp256k1_v0_10_0_ecdsa_recoverable_signature_parse_compact(ctx, &rsig, sig.bytes.data(),
                                                                       0)) {
    return std::nullopt;
  }
  rustsecp256k1_v0_10_0_pubkey pk;
  if (!rustsecp256k1_v0_10_0_ecdsa_recover(ctx, &pk, &rsig, digest.bytes.data())) {
    return std::nullopt;
  }
  PublicKey pub;
  std::size_t len = pub.size();
  rustsecp256k1_v0_10_0_ec_pubkey_serialize(ctx, pub.data(), &len, &pk, SECP256K1_EC_COMPRESSED);
  return address_of(pub);
}

}  // namespace wider
