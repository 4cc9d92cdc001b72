#pragma once

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <stop_token>
#include <unordered_map>

#include "wider/node.hpp"

namespace wider {

/// Pending subchain tails, one per address, each valid on top of the
/// address's confirmed state at the time it was last checked.
class TxPool {
 public:
  struct Tail {
    SubchainState base;  // confirmed state the tail extends
    std::vector<SubchainTx> txs;
    SubchainState head;
    std::uint64_t arrival = 0;
  };
  using StateLookup = std::function<SubchainState(const Address&)>;

  explicit TxPool(std::size_t capacity = 100'000) : capacity_(capacity) {}

  /// Appends to or replaces the sender's tail. `base` is the sender's
  /// confirmed state. Errors as for a node's pending tail, plus PoolFull.
  /// Returns false for a byte-identical duplicate.
  bool insert(const SubchainTx& tx, const SubchainState& base, const ClaimContext& ctx);
  /// A run of txs for one address; a fork of the tail replaces it when it
  /// reaches a strictly higher tip. Returns how many txs were added.
  std::size_t insert_fragment(const SubchainFragment& fragment, const SubchainState& base, const ClaimContext& ctx);

  /// The confirmed state moved (block connected): drops the confirmed
  /// prefix and re-checks what is left.
  void confirm(const Address& address, const SubchainState& confirmed, const ClaimContext& ctx);
  /// Re-checks every tail from scratch; tails that no longer apply are cut
  /// back to their longest valid prefix.
  void revalidate(const StateLookup& confirmed, const ClaimContext& ctx);

  const Tail* find(const Address& address) const;
  std::size_t size() const noexcept { return tails_.size(); }
  std::size_t tx_count() const noexcept { return tx_index_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  std::uint64_t evictions() const noexcept { return evictions_; }
  const std::map<Address, Tail>& tails() const noexcept { return tails_; }

  /// Addresses in template order: longest tail first, then earliest arrival.
  std::vector<Address> selection_order() const;

 private:
  struct Indexed {
    Hash256 encoding_hash;
    Address address;
  };

  Tail& tail_for(const Address& address, const SubchainState& base);
  void drop_above(Tail& tail, std::uint64_t height);
  void erase(std::map<Address, Tail>::iterator it);
  void index(const SubchainTx& tx);
  void check_duplicate(const SubchainTx& tx) const;
  /// Cuts the tail at the first tx that fails on top of `tail.base`.
  void recheck(Tail& tail, const ClaimContext& ctx);

  std::size_t capacity_;
  std::map<Address, Tail> tails_;
  std::unordered_map<Hash256, Indexed> tx_index_;
  std::uint64_t next_arrival_ = 0;
  std::uint64_t evictions_ = 0;
};

struct BlockTemplate {
  Hash256 parent;
  std::uint64_t height = 0;
  std::vector<ConfirmationRecord> records;  // sorted by address
  Address miner;
  std::uint32_t difficulty_bits = kEasiestBits;
  std::uint64_t timestamp = 0;
  std::uint64_t txs_covered = 0;

  /// header + 60 bytes per record, whatever the tail lengths.
  std::size_t encoded_size() const noexcept { return kBlockOverhead + kRecordSize * records.size(); }
  MainBlock unsealed() const;
};

BlockTemplate build_template(const TxPool& pool, const ChainView& view, const Address& miner,
                             std::size_t limit_bytes, std::uint64_t timestamp = 0);

struct TxVerdict {
  bool valid = false;
  std::optional<ErrorCode> error;

  friend bool operator==(const TxVerdict&, const TxVerdict&) = default;
};

/// Signature and digest checks split over `workers` threads working on
/// disjoint index ranges. Output order matches input order.
std::vector<TxVerdict> verify_batch(std::span<const SubchainTx> txs, std::size_t workers);

struct MinerConfig {
  Address address;
  std::uint32_t difficulty_bits = kEasiestBits;
  std::size_t pool_capacity = 100'000;
  std::size_t workers = 1;
};

/// A miner keeps a full verifying node of its own (root prefix) so every
/// tail it confirms has passed the state transform, plus the pool the
/// templates are drawn from.
class Miner {
 public:
  using Publish = std::function<void(const MainBlock&)>;

  Miner(ChainParams params, MinerConfig config);

  Node& node() noexcept { return node_; }
  const Node& node() const noexcept { return node_; }
  const TxPool& pool() const noexcept { return pool_; }
  const MinerConfig& config() const noexcept { return config_; }

  /// Admits a tx run into the node and the pool. Returns txs added to the pool.
  std::size_t submit(const SubchainFragment& fragment);
  /// A block from elsewhere; a new tip cancels the seal in progress.
  ChainState::Result ingest(const MainBlock& block);
  /// Overlay glue for NewTx and NewBlock.
  void handle(const Envelope& env);

  BlockTemplate make_template(std::uint64_t timestamp) const;
  /// Builds a template on the current tip and seals it. Connects the block
  /// locally before returning it; nullopt if cancelled or the tip moved.
  std::optional<MainBlock> mine_once(std::uint64_t timestamp, std::stop_token stop = {});
  /// Mines until `stop`, publishing each block; `pause` runs between blocks.
  void mine_loop(std::stop_token stop, const Publish& publish, const std::function<void()>& pause = {});

  std::uint64_t blocks_mined() const noexcept { return mined_; }
  /// Network inputs dropped by handle().
  std::uint64_t rejected() const noexcept { return rejected_; }

 private:
  void after_connect(const ChainState::Result& result);
  BlockTemplate template_locked(std::uint64_t timestamp) const;

  MinerConfig config_;
  Node node_;
  TxPool pool_;
  mutable std::mutex mutex_;
  std::stop_source tip_changed_;
  std::uint64_t mined_ = 0;
  std::uint64_t rejected_ = 0;
};

}  // namespace wider
