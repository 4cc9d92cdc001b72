#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "wider/tx.hpp"

namespace wider {

/// Ledger state of one account's subchain after applying its transactions in
/// height order. tip_height 0 is the empty chain.
struct SubchainState {
  Address address;
  Hash256 tip_hash;
  std::uint64_t tip_height = 0;
  std::uint64_t balance = 0;
  std::set<Hash256> claimed_sends;
  std::set<Hash256> claimed_coinbases;
  std::uint64_t confirmed_height = 0;

  static SubchainState genesis(const Address& address, std::uint64_t allocation = 0) {
    SubchainState s;
    s.address = address;
    s.balance = allocation;
    return s;
  }

  friend bool operator==(const SubchainState&, const SubchainState&) = default;
};

/// Main block as seen by claim validation.
struct BlockRef {
  std::uint64_t height = 0;
  /// 1 for the snapshot tip, 2 for its parent, and so on.
  std::uint64_t depth = 0;
  Address miner;
};

/// Read access to one main-chain snapshot for the duration of a verification
/// pass: block membership and depth, per-block confirmations, and lookup of
/// confirmed sends on other subchains.
class ClaimContext {
 public:
  virtual ~ClaimContext() = default;

  virtual std::uint64_t maturity() const = 0;
  /// nullopt when the block is not on the snapshot's canonical chain.
  virtual std::optional<BlockRef> canonical_block(const Hash256& block) const = 0;
  /// Tip height recorded for `address` by `block`, if the block carries a record for it.
  virtual std::optional<std::uint64_t> confirmed_tip(const Hash256& block, const Address& address) const = 0;
  /// The send with this hash on the sender's subchain, as served by a host.
  virtual std::optional<SendTx> find_send(const Address& sender, const Hash256& tx_hash) const = 0;
  virtual std::uint64_t coinbase_amount(std::uint64_t height) const = 0;
  virtual std::uint64_t genesis_allocation(const Address& address) const = 0;
  /// Signature check hook so callers can plug in a verified-signature cache.
  virtual bool check_signature(const SubchainTx& tx) const { return verify_tx(tx); }
};

/// Consecutive, hash-linked slice of a subchain covering heights
/// (from_height, from_height + txs.size()].
struct SubchainFragment {
  Address address;
  std::uint64_t from_height = 0;
  std::vector<SubchainTx> txs;

  std::uint64_t to_height() const noexcept { return from_height + txs.size(); }

  friend bool operator==(const SubchainFragment&, const SubchainFragment&) = default;
};

/// Framing: address(20) | from_height(u64) | count(u32) | canonical tx encodings.
Bytes encode_fragment(const SubchainFragment& frag);
void encode_fragment(const SubchainFragment& frag, ByteWriter& w);
SubchainFragment decode_fragment(ByteView bytes);
SubchainFragment decode_fragment(ByteReader& r);

/// Structural check: every tx belongs to the fragment's address, heights are
/// consecutive from from_height + 1, parents chain. Throws FragmentMisaligned
/// or BadLink.
void check_fragment_links(const SubchainFragment& frag);

/// The state-transform function. Throws the specific rejection reason and
/// leaves `state` unchanged on error.
void apply_tx_in_place(SubchainState& state, const SubchainTx& tx, const ClaimContext& ctx);
SubchainState apply_tx(SubchainState state, const SubchainTx& tx, const ClaimContext& ctx);

/// Full-history oracle: left fold of apply_tx from the genesis state. Errors
/// carry the offending height.
SubchainState replay(const Address& address, std::span<const SubchainTx> txs, const ClaimContext& ctx);

/// Incremental verification of a fragment on top of a known state.
SubchainState verify_fragment(SubchainState state, const SubchainFragment& frag, const ClaimContext& ctx);

/// Owner fork: keep base + tail[..fork_height] and append new_tail. `base`
/// carries the current confirmed_height; forks below it throw ConfirmedFrozen.
SubchainState try_replace_tail(const SubchainState& base, std::span<const SubchainTx> tail,
                               std::uint64_t fork_height, const SubchainFragment& new_tail,
                               const ClaimContext& ctx);

SubchainState mark_confirmed(SubchainState state, std::uint64_t height);

}  // namespace wider
