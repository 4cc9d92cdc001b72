#pragma once

#include <filesystem>

#include "wider/mainchain.hpp"

namespace wider {

/// A confirmed send or a mined block that the account may claim.
struct Inflow {
  Address sender;  // null for a coinbase
  Hash256 send_hash;
  std::uint64_t amount = 0;
  Hash256 block;  // confirming block, or the mined block for a coinbase
  std::uint64_t depth = 0;

  bool is_coinbase() const noexcept { return sender.is_zero() && send_hash.is_zero(); }
};

/// What the owner knows about its account at one moment.
struct AccountView {
  Address address;
  SubchainState head;  // confirmed state with the pending tail applied
  std::uint64_t confirmed_balance = 0;
  std::vector<SubchainTx> pending;
  std::vector<Inflow> inflows;  // claimable, oldest first
  std::uint64_t maturity = 6;

  std::uint64_t spendable() const noexcept { return head.balance; }
  std::uint64_t mature_claimable() const noexcept;
};

/// Candidate inflows are filtered against the head's claim sets and given
/// depths from `chain`; orphaned blocks drop out.
AccountView make_account_view(const SubchainState& confirmed, const SubchainState& head,
                              std::vector<SubchainTx> pending, const std::vector<Inflow>& candidates,
                              const ChainView& chain);

/// Signs the next send and advances `view.head`. Throws
/// InsufficientBalance or KeyMismatch.
SendTx build_send(AccountView& view, const Address& recipient, std::uint64_t amount, const KeyPair& key,
                  std::uint64_t timestamp);
/// Throws Immature or AlreadyClaimed.
ReceiveTx build_claim(AccountView& view, const Inflow& inflow, const KeyPair& key, std::uint64_t timestamp);

/// Every mature inflow (oldest first), then the sends, as one contiguous
/// extension of the tail. All or nothing: InsufficientBalance leaves the
/// view untouched. Timestamps count up from `timestamp`.
std::vector<SubchainTx> batch_settle(AccountView& view, const std::vector<std::pair<Address, std::uint64_t>>& sends,
                                     const KeyPair& key, std::uint64_t timestamp);

/// Key files hold the secret scalar as 64 hex characters.
void write_key_file(const std::filesystem::path& path, const SecretKey& secret);
KeyPair read_key_file(const std::filesystem::path& path);

}  // namespace wider
