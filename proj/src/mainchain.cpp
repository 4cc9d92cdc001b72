#include "wider/mainchain.hpp"

#include <algorithm>
#include <deque>
#include <map>

namespace wider {

namespace {

U256 hash_value(const Hash256& h) {
  U256 v;
  boost::multiprecision::import_bits(v, h.bytes.begin(), h.bytes.end());
  return v;
}

Hash256 allocations_root(const std::vector<std::pair<Address, std::uint64_t>>& allocations) {
  std::map<Address, std::uint64_t> sorted;
  for (const auto& [address, amount] : allocations) {
    if (!sorted.emplace(address, amount).second) {
      throw Error(ErrorCode::ConfigInvalid, "duplicate genesis allocation for " + address.hex());
    }
  }
  ByteWriter w(sorted.size() * 28);
  for (const auto& [address, amount] : sorted) {
    w.fixed(address);
    w.u64(amount);
  }
  return sha256(w.bytes());
}

const ConfirmationRecord* find_record(const MainBlock& block, const Address& address) {
  auto it = std::lower_bound(block.confirmations.begin(), block.confirmations.end(), address,
                             [](const ConfirmationRecord& r, const Address& a) { return r.address < a; });
  if (it == block.confirmations.end() || it->address != address) return nullptr;
  return &*it;
}

}  // namespace

// ---- encoding ---------------------------------------------------------------

void encode_record(const ConfirmationRecord& rec, ByteWriter& w) {
  w.fixed(rec.address);
  w.fixed(rec.tip_hash);
  w.u64(rec.tip_height);
}

namespace {
void write_header(const BlockHeader& h, ByteWriter& w) {
  w.fixed(h.parent_block_hash);
  w.u64(h.height);
  w.u64(h.timestamp);
  w.fixed(h.miner_address);
  w.fixed(h.confirmations_root);
  w.u32(h.difficulty_bits);
  w.u64(h.nonce);
}
}  // namespace

Bytes encode_header(const BlockHeader& header) {
  ByteWriter w(kHeaderSize);
  write_header(header, w);
  return std::move(w).take();
}

Bytes encode_block(const MainBlock& block) {
  ByteWriter w(block.encoded_size());
  write_header(block.header, w);
  w.u32(static_cast<std::uint32_t>(block.confirmations.size()));
  for (const auto& rec : block.confirmations) encode_record(rec, w);
  return std::move(w).take();
}

MainBlock decode_block(ByteReader& r) {
  MainBlock b;
  b.header.parent_block_hash = r.fixed<Hash256>();
  b.header.height = r.u64();
  b.header.timestamp = r.u64();
  b.header.miner_address = r.fixed<Address>();
  b.header.confirmations_root = r.fixed<Hash256>();
  b.header.difficulty_bits = r.u32();
  b.header.nonce = r.u64();
  std::uint32_t count = r.u32();
  if (count > r.remaining() / kRecordSize) throw Error(ErrorCode::DecodeError, "record count too large");
  b.confirmations.resize(count);
  for (auto& rec : b.confirmations) {
    rec.address = r.fixed<Address>();
    rec.tip_hash = r.fixed<Hash256>();
    rec.tip_height = r.u64();
  }
  return b;
}

MainBlock decode_block(ByteView bytes) {
  ByteReader r(bytes);
  MainBlock b = decode_block(r);
  r.expect_done();
  return b;
}

Hash256 MainBlock::hash() const { return sha256d(encode_header(header)); }

Hash256 confirmations_root(std::span<const ConfirmationRecord> records) {
  ByteWriter w(records.size() * kRecordSize);
  for (const auto& rec : records) encode_record(rec, w);
  return sha256(w.bytes());
}

// ---- proof of work ----------------------------------------------------------

U256 target(std::uint32_t difficulty_bits) {
  const std::uint32_t exponent = difficulty_bits >> 24;
  const std::uint32_t mantissa = difficulty_bits & 0x007fffffU;
  if (exponent < 3 || exponent > 32) throw Error(ErrorCode::MalformedBits, "exponent out of range");
  if (difficulty_bits & 0x00800000U) throw Error(ErrorCode::MalformedBits, "sign bit set");
  if (mantissa == 0) throw Error(ErrorCode::MalformedBits, "zero mantissa");
  U256 t = mantissa;
  t <<= 8 * (exponent - 3);
  return t;
}

bool meets_target(const Hash256& block_hash, std::uint32_t difficulty_bits) {
  return hash_value(block_hash) <= target(difficulty_bits);
}

U256 block_work(std::uint32_t difficulty_bits) {
  U512 numerator = U512(1) << 256;
  return static_cast<U256>(numerator / (U512(target(difficulty_bits)) + 1));
}

std::optional<MainBlock> seal(MainBlock block, std::stop_token abort, std::uint64_t check_every) {
  const U256 goal = target(block.header.difficulty_bits);
  if (check_every == 0) check_every = 1;
  for (std::uint64_t attempt = 0;; ++attempt) {
    if (hash_value(block.hash()) <= goal) return block;
    if (attempt % check_every == 0 && abort.stop_requested()) return std::nullopt;
    if (++block.header.nonce == 0) ++block.header.timestamp;
  }
}

// ---- params / genesis -------------------------------------------------------

std::uint64_t coinbase_amount(const ChainParams& params, std::uint64_t height) noexcept {
  return height == 0 ? 0 : params.subsidy;
}

MainBlock make_genesis(const ChainParams& params) {
  MainBlock g;
  g.header.height = 0;
  g.header.timestamp = params.genesis_timestamp;
  g.header.confirmations_root = allocations_root(params.allocations);
  g.header.difficulty_bits = params.difficulty_bits;
  auto sealed = seal(std::move(g));
  return std::move(*sealed);
}

// ---- chain view -------------------------------------------------------------

ChainView::ChainView(ChainParams params) : params_(std::move(params)) {
  for (const auto& [address, amount] : params_.allocations) allocations_[address] += amount;
  MainBlock genesis = make_genesis(params_);
  Hash256 h = genesis.hash();
  Entry e{std::move(genesis), U512(block_work(params_.difficulty_bits)), next_seq_++, false};
  blocks_.emplace(h, std::move(e));
  canonical_.push_back(h);
  canonical_height_[h] = 0;
  best_ = h;
}

std::uint64_t ChainView::genesis_allocation(const Address& address) const {
  auto it = allocations_.find(address);
  return it == allocations_.end() ? 0 : it->second;
}

const MainBlock* ChainView::find(const Hash256& hash) const {
  auto it = blocks_.find(hash);
  return it == blocks_.end() ? nullptr : &it->second.block;
}

bool ChainView::is_invalid(const Hash256& hash) const {
  auto it = blocks_.find(hash);
  return it != blocks_.end() && it->second.invalid;
}

bool ChainView::is_canonical(const Hash256& hash) const { return canonical_height_.contains(hash); }

std::optional<std::uint64_t> ChainView::depth(const Hash256& hash) const {
  auto it = canonical_height_.find(hash);
  if (it == canonical_height_.end()) return std::nullopt;
  return tip_height() - it->second + 1;
}

U512 ChainView::cumulative_work(const Hash256& hash) const {
  auto it = blocks_.find(hash);
  return it == blocks_.end() ? U512(0) : it->second.work;
}

std::optional<ConfirmationEntry> ChainView::latest_confirmation(const Address& address) const {
  auto it = index_.find(address);
  if (it == index_.end() || it->second.empty()) return std::nullopt;
  return it->second.back();
}

std::optional<ConfirmationEntry> ChainView::first_confirming(const Address& address, std::uint64_t height) const {
  auto it = index_.find(address);
  if (it == index_.end()) return std::nullopt;
  for (const auto& e : it->second) {
    if (e.tip_height >= height) return e;
  }
  return std::nullopt;
}

std::optional<ConfirmationEntry> ChainView::confirmation_as_of(const Hash256& block_hash,
                                                               const Address& address) const {
  Hash256 cursor = block_hash;
  while (!is_canonical(cursor)) {
    auto it = blocks_.find(cursor);
    if (it == blocks_.end()) return std::nullopt;
    const MainBlock& b = it->second.block;
    if (const auto* rec = find_record(b, address)) {
      return ConfirmationEntry{b.header.height, cursor, rec->tip_hash, rec->tip_height};
    }
    cursor = b.header.parent_block_hash;
  }
  const std::uint64_t fork_height = canonical_height_.at(cursor);
  auto it = index_.find(address);
  if (it == index_.end()) return std::nullopt;
  const auto& entries = it->second;
  for (auto e = entries.rbegin(); e != entries.rend(); ++e) {
    if (e->block_height <= fork_height) return *e;
  }
  return std::nullopt;
}

bool ChainView::add_block(MainBlock block) {
  Hash256 h = block.hash();
  if (blocks_.contains(h)) return false;
  auto parent = blocks_.find(block.header.parent_block_hash);
  if (parent == blocks_.end()) throw Error(ErrorCode::UnknownParent, block.header.parent_block_hash.hex());
  if (block.header.height != parent->second.block.header.height + 1) {
    throw Error(ErrorCode::BadLink, "block height does not follow its parent");
  }
  if (!meets_target(h, block.header.difficulty_bits)) throw Error(ErrorCode::BadPoW, "hash above target");

  Entry e;
  e.work = parent->second.work + U512(block_work(block.header.difficulty_bits));
  e.invalid = parent->second.invalid;
  e.seq = next_seq_++;
  e.block = std::move(block);
  children_[e.block.header.parent_block_hash].push_back(h);
  const bool heavier = !e.invalid && e.work > blocks_.at(best_).work;
  blocks_.emplace(h, std::move(e));
  if (heavier) best_ = h;
  return true;
}

void ChainView::connect_index(const Hash256& hash) {
  const MainBlock& b = blocks_.at(hash).block;
  for (const auto& rec : b.confirmations) {
    index_[rec.address].push_back({b.header.height, hash, rec.tip_hash, rec.tip_height});
  }
  canonical_height_[hash] = canonical_.size();
  canonical_.push_back(hash);
}

void ChainView::disconnect_index(const Hash256& hash) {
  const MainBlock& b = blocks_.at(hash).block;
  for (const auto& rec : b.confirmations) {
    auto it = index_.find(rec.address);
    it->second.pop_back();
    if (it->second.empty()) index_.erase(it);
  }
  canonical_height_.erase(hash);
  canonical_.pop_back();
}

Reorg ChainView::set_canonical(const Hash256& tip) {
  Reorg reorg;
  if (!blocks_.contains(tip)) throw Error(ErrorCode::UnknownParent, tip.hex());
  std::vector<Hash256> branch;
  Hash256 cursor = tip;
  while (!is_canonical(cursor)) {
    branch.push_back(cursor);
    cursor = blocks_.at(cursor).block.header.parent_block_hash;
  }
  const std::uint64_t fork_height = canonical_height_.at(cursor);
  while (tip_height() > fork_height) {
    reorg.disconnected.push_back(canonical_.back());
    disconnect_index(canonical_.back());
  }
  for (auto it = branch.rbegin(); it != branch.rend(); ++it) {
    connect_index(*it);
    reorg.connected.push_back(*it);
  }
  return reorg;
}

Reorg ChainView::extend(MainBlock block) {
  add_block(std::move(block));
  if (best_ == tip()) return {};
  return set_canonical(best_);
}

void ChainView::invalidate(const Hash256& hash) {
  if (!blocks_.contains(hash) || hash == genesis_hash()) return;
  std::deque<Hash256> queue{hash};
  while (!queue.empty()) {
    Hash256 h = queue.front();
    queue.pop_front();
    blocks_.at(h).invalid = true;
    if (auto c = children_.find(h); c != children_.end()) queue.insert(queue.end(), c->second.begin(), c->second.end());
  }
  recompute_best();
}

void ChainView::reconsider(const Hash256& hash) {
  if (!blocks_.contains(hash)) return;
  std::deque<Hash256> queue{hash};
  while (!queue.empty()) {
    Hash256 h = queue.front();
    queue.pop_front();
    blocks_.at(h).invalid = false;
    if (auto c = children_.find(h); c != children_.end()) queue.insert(queue.end(), c->second.begin(), c->second.end());
  }
  recompute_best();
}

void ChainView::recompute_best() {
  const Entry* best = nullptr;
  for (const auto& [h, e] : blocks_) {
    if (e.invalid) continue;
    if (!best || e.work > best->work || (e.work == best->work && e.seq < best->seq)) {
      best = &e;
      best_ = h;
    }
  }
}

// ---- claim context ----------------------------------------------------------

std::optional<BlockRef> ViewClaimContext::canonical_block(const Hash256& block) const {
  auto d = view_.depth(block);
  if (!d) return std::nullopt;
  const MainBlock* b = view_.find(block);
  return BlockRef{b->header.height, *d, b->header.miner_address};
}

std::optional<std::uint64_t> ViewClaimContext::confirmed_tip(const Hash256& block, const Address& address) const {
  const MainBlock* b = view_.find(block);
  if (!b) return std::nullopt;
  const auto* rec = find_record(*b, address);
  if (!rec) return std::nullopt;
  return rec->tip_height;
}

std::optional<SendTx> ViewClaimContext::find_send(const Address& sender, const Hash256& tx_hash) const {
  return lookup_ ? lookup_(sender, tx_hash) : std::nullopt;
}

std::uint64_t ViewClaimContext::coinbase_amount(std::uint64_t height) const {
  return wider::coinbase_amount(view_.params(), height);
}

std::uint64_t ViewClaimContext::genesis_allocation(const Address& address) const {
  return view_.genesis_allocation(address);
}

bool ViewClaimContext::check_signature(const SubchainTx& tx) const {
  return check_ ? check_(tx) : verify_tx(tx);
}

// ---- validation -------------------------------------------------------------

std::optional<SubchainState> FragmentShardOracle::verify_record(const ConfirmationRecord& record,
                                                                std::uint64_t previous_height,
                                                                const ClaimContext& ctx) {
  auto state = state_(record.address);
  if (!state) return std::nullopt;
  if (state->tip_height != previous_height) {
    throw Error(ErrorCode::TipMismatch, "local confirmed state at height " + std::to_string(state->tip_height) +
                                            ", chain says " + std::to_string(previous_height));
  }
  auto frag = fetch_(record.address, previous_height, record.tip_height);
  if (!frag || frag->from_height != previous_height || frag->to_height() != record.tip_height) {
    throw Error(ErrorCode::PartialFetch, "fragment unavailable");
  }
  check_fragment_links(*frag);
  SubchainState next = verify_fragment(std::move(*state), *frag, ctx);
  if (next.tip_hash != record.tip_hash) throw Error(ErrorCode::TipMismatch, "record tip hash differs");
  return mark_confirmed(std::move(next), record.tip_height);
}

void check_block_structure(const MainBlock& block, const ChainParams& params) {
  if (block.header.difficulty_bits != params.difficulty_bits) throw Error(ErrorCode::BadPoW, "unexpected difficulty");
  if (!meets_target(block.hash(), block.header.difficulty_bits)) throw Error(ErrorCode::BadPoW, "hash above target");
  if (block.encoded_size() > params.block_size_limit) {
    throw Error(ErrorCode::Oversize, std::to_string(block.encoded_size()) + " bytes");
  }
  for (std::size_t i = 1; i < block.confirmations.size(); ++i) {
    if (!(block.confirmations[i - 1].address < block.confirmations[i].address)) {
      throw Error(ErrorCode::UnsortedRecords, "at record " + std::to_string(i));
    }
  }
  if (confirmations_root(block.confirmations) != block.header.confirmations_root) {
    throw Error(ErrorCode::RootMismatch);
  }
}

std::vector<RecordDelta> validate_block(const MainBlock& block, const ChainView& view, ShardOracle& oracle,
                                        const ClaimContext& ctx) {
  const MainBlock* parent = view.find(block.header.parent_block_hash);
  if (!parent) throw Error(ErrorCode::UnknownParent, block.header.parent_block_hash.hex());
  if (block.header.parent_block_hash != view.tip()) {
    throw Error(ErrorCode::TipMismatch, "parent is not the canonical tip");
  }
  if (block.header.height != parent->header.height + 1) {
    throw Error(ErrorCode::BadLink, "block height does not follow its parent");
  }
  check_block_structure(block, view.params());

  std::vector<RecordDelta> deltas;
  deltas.reserve(block.confirmations.size());
  for (const auto& rec : block.confirmations) {
    try {
      auto prev = view.latest_confirmation(rec.address);
      std::uint64_t prev_height = prev ? prev->tip_height : 0;
      if (rec.tip_height <= prev_height) {
        throw Error(ErrorCode::StaleConfirmation,
                    "height " + std::to_string(rec.tip_height) + " already confirmed up to " + std::to_string(prev_height));
      }
      deltas.push_back({rec.address, prev_height, rec.tip_height, oracle.verify_record(rec, prev_height, ctx)});
    } catch (Error& e) {
      throw std::move(e).for_address(rec.address.hex());
    }
  }
  return deltas;
}

}  // namespace wider
