#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <cstdint>
#include <functional>
#include <optional>
#include <stop_token>
#include <unordered_map>
#include <utility>
#include <vector>

#include "wider/subchain.hpp"

namespace wider {

using U256 = boost::multiprecision::uint256_t;
using U512 = boost::multiprecision::uint512_t;

inline constexpr std::size_t kRecordSize = 20 + 32 + 8;
inline constexpr std::size_t kHeaderSize = 32 + 8 + 8 + 20 + 32 + 4 + 8;
/// Header plus the u32 record count.
inline constexpr std::size_t kBlockOverhead = kHeaderSize + 4;
inline constexpr std::uint32_t kEasiestBits = 0x207fffff;

/// Binds an address to its latest subchain tip.
struct ConfirmationRecord {
  Address address;
  Hash256 tip_hash;
  std::uint64_t tip_height = 0;

  friend bool operator==(const ConfirmationRecord&, const ConfirmationRecord&) = default;
};

struct BlockHeader {
  Hash256 parent_block_hash;
  std::uint64_t height = 0;
  std::uint64_t timestamp = 0;
  Address miner_address;
  Hash256 confirmations_root;
  std::uint32_t difficulty_bits = kEasiestBits;
  std::uint64_t nonce = 0;

  friend bool operator==(const BlockHeader&, const BlockHeader&) = default;
};

/// Main chain block. Carries confirmation records, sorted strictly by
/// address, instead of transactions.
struct MainBlock {
  BlockHeader header;
  std::vector<ConfirmationRecord> confirmations;

  Hash256 hash() const;
  std::size_t encoded_size() const noexcept { return kBlockOverhead + kRecordSize * confirmations.size(); }

  friend bool operator==(const MainBlock&, const MainBlock&) = default;
};

void encode_record(const ConfirmationRecord& rec, ByteWriter& w);
Bytes encode_header(const BlockHeader& header);
Bytes encode_block(const MainBlock& block);
MainBlock decode_block(ByteView bytes);
MainBlock decode_block(ByteReader& r);

/// SHA-256 over the concatenated record encodings.
Hash256 confirmations_root(std::span<const ConfirmationRecord> records);

/// Compact difficulty expansion: mantissa * 256^(exponent - 3). Throws
/// MalformedBits for exponents outside [3, 32], a zero mantissa, or the sign bit.
U256 target(std::uint32_t difficulty_bits);
bool meets_target(const Hash256& block_hash, std::uint32_t difficulty_bits);
/// 2^256 / (target + 1).
U256 block_work(std::uint32_t difficulty_bits);

/// Searches nonces (bumping the timestamp on nonce exhaustion) until the hash
/// meets the target. Returns nullopt if `abort` fires first; the stop token is
/// polled every `check_every` attempts.
std::optional<MainBlock> seal(MainBlock block, std::stop_token abort = {}, std::uint64_t check_every = 4096);

struct ChainParams {
  std::uint32_t difficulty_bits = kEasiestBits;
  std::size_t block_size_limit = 1'000'000;
  std::uint64_t subsidy = 50ULL * 100'000'000ULL;
  std::uint64_t maturity = 6;
  std::uint64_t genesis_timestamp = 0;
  /// Genesis supply as pre-confirmed subchain balances, in any order.
  std::vector<std::pair<Address, std::uint64_t>> allocations;

  /// floor((limit - overhead) / record size).
  std::size_t capacity() const noexcept {
    return block_size_limit < kBlockOverhead ? 0 : (block_size_limit - kBlockOverhead) / kRecordSize;
  }
};

/// Constant subsidy for every non-genesis height.
std::uint64_t coinbase_amount(const ChainParams& params, std::uint64_t height) noexcept;

/// Height-0 block whose confirmations_root commits to the sorted allocation list.
MainBlock make_genesis(const ChainParams& params);

/// A confirmation as it appears on the canonical chain.
struct ConfirmationEntry {
  std::uint64_t block_height = 0;
  Hash256 block_hash;
  Hash256 tip_hash;
  std::uint64_t tip_height = 0;

  friend bool operator==(const ConfirmationEntry&, const ConfirmationEntry&) = default;
};

struct Reorg {
  /// Blocks removed from the canonical chain, highest first.
  std::vector<Hash256> disconnected;
  /// Blocks added to the canonical chain, lowest first.
  std::vector<Hash256> connected;

  bool is_reorg() const noexcept { return !disconnected.empty(); }
};

/// Block tree plus an index over its heaviest valid chain. Single writer;
/// copy the view to hand a snapshot to readers.
class ChainView {
 public:
  explicit ChainView(ChainParams params);

  const ChainParams& params() const noexcept { return params_; }
  const Hash256& genesis_hash() const noexcept { return canonical_.front(); }
  std::uint64_t genesis_allocation(const Address& address) const;

  bool contains(const Hash256& hash) const { return blocks_.contains(hash); }
  const MainBlock* find(const Hash256& hash) const;
  bool is_invalid(const Hash256& hash) const;
  std::size_t block_count() const noexcept { return blocks_.size(); }

  const Hash256& tip() const noexcept { return canonical_.back(); }
  std::uint64_t tip_height() const noexcept { return canonical_.size() - 1; }
  const std::vector<Hash256>& canonical_chain() const noexcept { return canonical_; }
  bool is_canonical(const Hash256& hash) const;
  /// Depth on the canonical chain (tip = 1), nullopt when off-chain.
  std::optional<std::uint64_t> depth(const Hash256& hash) const;
  U512 cumulative_work(const Hash256& hash) const;

  std::optional<ConfirmationEntry> latest_confirmation(const Address& address) const;
  /// Earliest canonical block whose record for `address` reaches `height`.
  std::optional<ConfirmationEntry> first_confirming(const Address& address, std::uint64_t height) const;
  /// Latest confirmation of `address` on the branch ending at `block_hash`,
  /// which may be a side branch.
  std::optional<ConfirmationEntry> confirmation_as_of(const Hash256& block_hash, const Address& address) const;
  const std::unordered_map<Address, std::vector<ConfirmationEntry>>& confirmation_index() const noexcept {
    return index_;
  }

  /// Stores a block without moving the canonical tip. Returns false when it
  /// is already known. Throws UnknownParent, or BadPoW when the hash misses
  /// the target.
  bool add_block(MainBlock block);
  /// Heaviest valid tip; the earliest-seen block wins ties.
  const Hash256& best_tip() const noexcept { return best_; }
  /// Moves the canonical chain to end at `tip`, updating the confirmation index.
  Reorg set_canonical(const Hash256& tip);
  /// add_block, then follow the heaviest chain.
  Reorg extend(MainBlock block);
  /// Excludes a block and its descendants from fork choice. The caller moves
  /// the tip afterwards if needed.
  void invalidate(const Hash256& hash);
  /// Clears the invalid mark from a block and its descendants.
  void reconsider(const Hash256& hash);

 private:
  struct Entry {
    MainBlock block;
    U512 work;
    std::uint64_t seq = 0;
    bool invalid = false;
  };

  void connect_index(const Hash256& hash);
  void disconnect_index(const Hash256& hash);
  void recompute_best();

  ChainParams params_;
  std::unordered_map<Address, std::uint64_t> allocations_;
  std::unordered_map<Hash256, Entry> blocks_;
  std::unordered_map<Hash256, std::vector<Hash256>> children_;
  std::vector<Hash256> canonical_;
  std::unordered_map<Hash256, std::uint64_t> canonical_height_;
  std::unordered_map<Address, std::vector<ConfirmationEntry>> index_;
  Hash256 best_;
  std::uint64_t next_seq_ = 0;
};

/// ClaimContext over a view's canonical chain. Send lookup and the signature
/// check are supplied by the owner (local store, remote fetch, cache).
class ViewClaimContext : public ClaimContext {
 public:
  using SendLookup = std::function<std::optional<SendTx>(const Address&, const Hash256&)>;
  using SignatureCheck = std::function<bool(const SubchainTx&)>;

  ViewClaimContext(const ChainView& view, SendLookup lookup, SignatureCheck check = {})
      : view_(view), lookup_(std::move(lookup)), check_(std::move(check)) {}

  std::uint64_t maturity() const override { return view_.params().maturity; }
  std::optional<BlockRef> canonical_block(const Hash256& block) const override;
  std::optional<std::uint64_t> confirmed_tip(const Hash256& block, const Address& address) const override;
  std::optional<SendTx> find_send(const Address& sender, const Hash256& tx_hash) const override;
  std::uint64_t coinbase_amount(std::uint64_t height) const override;
  std::uint64_t genesis_allocation(const Address& address) const override;
  bool check_signature(const SubchainTx& tx) const override;

 private:
  const ChainView& view_;
  SendLookup lookup_;
  SignatureCheck check_;
};

/// Per-record verification strategy used by validate_block.
class ShardOracle {
 public:
  virtual ~ShardOracle() = default;
  /// Verifies the fragment (previous_height, record.tip_height] of the
  /// record's subchain and returns the new confirmed state, or nullopt when
  /// this verifier does not check the address.
  virtual std::optional<SubchainState> verify_record(const ConfirmationRecord& record, std::uint64_t previous_height,
                                                     const ClaimContext& ctx) = 0;
};

/// ShardOracle backed by a confirmed-state lookup and a fragment source.
class FragmentShardOracle : public ShardOracle {
 public:
  using StateLookup = std::function<std::optional<SubchainState>(const Address&)>;
  using FragmentFetch =
      std::function<std::optional<SubchainFragment>(const Address&, std::uint64_t from, std::uint64_t to)>;

  FragmentShardOracle(StateLookup state, FragmentFetch fetch) : state_(std::move(state)), fetch_(std::move(fetch)) {}

  std::optional<SubchainState> verify_record(const ConfirmationRecord& record, std::uint64_t previous_height,
                                             const ClaimContext& ctx) override;

 private:
  StateLookup state_;
  FragmentFetch fetch_;
};

struct RecordDelta {
  Address address;
  std::uint64_t previous_height = 0;
  std::uint64_t new_height = 0;
  /// Present when the record's subchain was fully verified.
  std::optional<SubchainState> state;
};

/// Context-free checks: size limit, sorted unique records, confirmations
/// root, difficulty bits and proof of work.
void check_block_structure(const MainBlock& block, const ChainParams& params);

/// Full validation of a block extending the view's canonical tip. The claim
/// context must describe that same tip. Subchain errors are tagged with the
/// offending address.
std::vector<RecordDelta> validate_block(const MainBlock& block, const ChainView& view, ShardOracle& oracle,
                                        const ClaimContext& ctx);

}  // namespace wider
