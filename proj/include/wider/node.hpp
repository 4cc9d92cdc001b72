#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <unordered_map>

#include "wider/chainstate.hpp"
#include "wider/sharding.hpp"
#include "wider/sigcache.hpp"
#include "wider/store.hpp"
#include "wider/transport.hpp"

namespace wider {

/// Serialized sizes of what a node keeps; storage-engine overhead excluded.
struct StorageReport {
  std::uint64_t main_chain_bytes = 0;
  std::uint64_t subchain_bytes = 0;
  std::uint64_t blocks = 0;
  std::uint64_t subchains = 0;
  std::uint64_t subchain_txs = 0;

  friend bool operator==(const StorageReport&, const StorageReport&) = default;
};

enum class TxOutcome {
  Accepted,   // stored in the hosted subchain's pending tail
  Duplicate,  // byte-identical to a stored tx; nothing changed
  Relayed,    // not hosted here: signature checked only
};

struct NodeCounters {
  std::uint64_t blocks_connected = 0;
  std::uint64_t blocks_rejected = 0;
  std::uint64_t txs_accepted = 0;
  std::uint64_t txs_relayed = 0;
  std::uint64_t txs_rejected = 0;
  std::uint64_t fragments_fetched = 0;
  std::uint64_t records_verified = 0;
  std::uint64_t records_skipped = 0;
};

/// Keeps the whole main chain and the subchains its shard prefix covers.
///
/// Hosted subchains are fully verified: pending txs go through the state
/// transform against the current head, and block records for hosted
/// addresses are verified fragment by fragment. Records for other
/// addresses only get the main-chain record checks.
class Node {
 public:
  using RemoteFragment = std::function<SubchainFragment(const Address&, std::uint64_t from, std::uint64_t to)>;
  using RemoteSend = std::function<std::optional<SendTx>(const Address&, const Hash256&)>;

  Node(ChainParams params, ShardAssignment assignment, NodeStore store = {});
  /// Reopens a persistent node and rebuilds its state from the store.
  static Node open(ChainParams params, ShardAssignment assignment, const std::filesystem::path& dir);

  Node(Node&&) = default;

  /// Access to other hosts for fragments and sends this node does not hold.
  void set_remote(RemoteFragment fragments, RemoteSend sends);

  const ShardAssignment& assignment() const noexcept { return assignment_; }
  bool hosts(const Address& address) const noexcept { return assignment_.hosts(address); }
  const ChainView& view() const noexcept { return chain_.view(); }
  const ChainState& chain() const noexcept { return chain_; }
  const NodeCounters& counters() const noexcept { return counters_; }
  SignatureCache& signatures() noexcept { return sigs_; }
  /// Claim checks against the current canonical view, sends looked up
  /// locally first and then remotely.
  ViewClaimContext claim_context() const { return context(view()); }

  ChainState::Result ingest_block(const MainBlock& block);
  std::size_t retry_deferred();

  /// Duplicate-hash check, signature, then (for hosted senders) the state
  /// transform on top of the pending tail.
  TxOutcome accept_pending_tx(const SubchainTx& tx);
  /// A batch for one address. A batch that forks the pending tail replaces
  /// it when it reaches a strictly higher tip; otherwise TailConflict.
  std::size_t accept_fragment(const SubchainFragment& fragment);

  /// Throws NotHosted or RangeUnavailable.
  SubchainFragment serve_fragment(const Address& address, std::uint64_t from_height, std::uint64_t to_height) const;
  std::optional<SendTx> serve_send(const Address& sender, const Hash256& tx_hash) const;

  /// nullopt for addresses this node does not host.
  std::optional<SubchainState> confirmed_state(const Address& address) const;
  std::optional<SubchainState> head_state(const Address& address) const;
  /// Every stored tx of a subchain, in height order.
  std::vector<SubchainTx> stored_txs(const Address& address) const;
  std::vector<Address> stored_addresses() const;

  StorageReport storage_report() const;
  const NodeStore& store() const noexcept { return store_; }

  /// Narrows the prefix after a split; data outside it stays until compact().
  void narrow(const ShardAssignment& child);
  /// Drops subchains outside the prefix and rewrites the log. Returns how
  /// many subchains were removed.
  std::size_t compact();

  /// Overlay glue: NewTx carries an encoded fragment, NewBlock a block.
  void handle(const Envelope& env);

 private:
  struct Hosted {
    std::vector<SubchainTx> txs;  // txs[i] has height i + 1
    SubchainState head;
  };
  struct SeenEntry {
    Hash256 encoding_hash;
    Address address;
    std::uint64_t height = 0;
  };
  class Oracle;

  SubchainState base_state(const Address& address) const;
  Hosted& hosted_entry(const Address& address);
  ViewClaimContext context(const ChainView& view) const;
  std::optional<SendTx> find_send(const Address& sender, const Hash256& tx_hash) const;
  std::vector<RecordDelta> validate(const MainBlock& block, const ChainView& view);
  ChainState::Listener listener();
  void on_connected(const MainBlock& block, const std::vector<RecordDelta>& deltas);
  void on_disconnected(const MainBlock& block);

  void store_tx(WriteBatch& batch, const SubchainTx& tx, const Hash256& encoding_hash);
  void drop_txs_above(WriteBatch& batch, Hosted& h, std::uint64_t height);
  /// Re-derives the head from the confirmed state, truncating pending txs
  /// that no longer apply.
  void rebuild_head(WriteBatch& batch, const Address& address);
  void write_state(WriteBatch& batch, const Address& address);
  void commit(WriteBatch& batch);

  ShardAssignment assignment_;
  ChainState chain_;
  NodeStore store_;
  std::map<Address, Hosted> hosted_;
  std::unordered_map<Hash256, SeenEntry> seen_;
  SignatureCache sigs_;
  RemoteFragment remote_fragment_;
  RemoteSend remote_send_;
  std::map<Address, SubchainFragment> fetched_;
  NodeCounters counters_;
  bool replaying_ = false;
};

}  // namespace wider
