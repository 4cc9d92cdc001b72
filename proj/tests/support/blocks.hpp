#pragma once

#include <algorithm>
#include <vector>

#include "support/fixtures.hpp"
#include "wider/mainchain.hpp"
#include "wider/sharding.hpp"

namespace wider::testing {

inline MainBlock mine_block(const Hash256& parent, std::uint64_t height, std::vector<ConfirmationRecord> records,
                            Address miner = {}, std::uint64_t timestamp = 1) {
  MainBlock b;
  b.header.parent_block_hash = parent;
  b.header.height = height;
  b.header.timestamp = timestamp;
  b.header.miner_address = miner;
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& c) { return a.address < c.address; });
  b.confirmations = std::move(records);
  b.header.confirmations_root = confirmations_root(b.confirmations);
  return *seal(std::move(b));
}

inline ConfirmationRecord record_of(const Account& a) { return {a.address(), a.tip(), a.height()}; }

/// First account index at or after `from` whose address starts with `bit`.
inline std::uint64_t account_with_bit(bool bit, std::uint64_t from = 1) {
  for (std::uint64_t n = from;; ++n) {
    if (address_bit(Account(n).address(), 0) == bit) return n;
  }
}

}  // namespace wider::testing
