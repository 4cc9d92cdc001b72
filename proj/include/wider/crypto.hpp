#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "wider/bytes.hpp"

namespace wider {

Hash256 sha256(ByteView data);
/// SHA-256 applied twice; used for main block header hashes.
Hash256 sha256d(ByteView data);

struct SignatureTag {};
/// Compact ECDSA signature r||s, low-s, recovery id 0 (see sign_digest).
using Signature = FixedBytes<64, SignatureTag>;

using SecretKey = std::array<std::uint8_t, 32>;
using PublicKey = std::array<std::uint8_t, 33>;

/// Address = last 20 bytes of SHA-256 over the compressed public key.
Address address_of(const PublicKey& pub);

struct KeyPair {
  SecretKey secret{};
  PublicKey public_key{};
  Address address{};
};

/// Deterministic when seeded (the seed is the secret scalar); otherwise drawn
/// from the OS CSPRNG. Throws InvalidSeed for 0 or scalars >= the curve order.
KeyPair keygen(const std::optional<SecretKey>& seed = std::nullopt);

/// RFC6979 signature over a 32-byte digest. Nonces are re-derived with an
/// extra-entropy counter until the low-s signature has recovery id 0, so the
/// 64 signature bytes alone determine the signer's public key.
Signature sign_digest(const Hash256& digest, const SecretKey& secret);

/// Recovers the signer's address; nullopt when the signature is malformed,
/// high-s, or not recoverable with recovery id 0.
std::optional<Address> recover_signer(const Hash256& digest, const Signature& sig);

void random_bytes(std::span<std::uint8_t> out);

}  // namespace wider
