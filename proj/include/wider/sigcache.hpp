#pragma once

#include <cstdint>
#include <unordered_set>

#include "wider/tx.hpp"

namespace wider {

/// Remembers encodings whose signature already verified, keyed by the
/// SHA-256 of the full encoding so any byte change misses the cache.
class SignatureCache {
 public:
  explicit SignatureCache(std::size_t limit = 1u << 20) : limit_(limit) {}

  bool check(const SubchainTx& tx);
  void clear() { ok_.clear(); }

  std::uint64_t hits() const noexcept { return hits_; }
  std::uint64_t misses() const noexcept { return misses_; }

 private:
  std::size_t limit_;
  std::unordered_set<Hash256> ok_;
  std::uint64_t hits_ = 0;
  std::uint64_t misses_ = 0;
};

}  // namespace wider
