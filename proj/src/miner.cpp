#include "wider/miner.hpp"

#include <algorithm>
#include <thread>

namespace wider {

const TxPool::Tail* TxPool::find(const Address& address) const {
  auto it = tails_.find(address);
  return it == tails_.end() ? nullptr : &it->second;
}

TxPool::Tail& TxPool::tail_for(const Address& address, const SubchainState& base) {
  if (auto it = tails_.find(address); it != tails_.end()) return it->second;
  if (capacity_ == 0) throw Error(ErrorCode::PoolFull, "pool capacity is zero");
  if (tails_.size() >= capacity_) {
    auto oldest = std::min_element(tails_.begin(), tails_.end(), [](const auto& a, const auto& b) {
      return a.second.arrival < b.second.arrival;
    });
    erase(oldest);
    ++evictions_;
  }
  Tail t;
  t.base = base;
  t.head = base;
  t.arrival = next_arrival_++;
  return tails_.emplace(address, std::move(t)).first->second;
}

void TxPool::index(const SubchainTx& tx) {
  tx_index_[tx_hash_of(tx)] = {sha256(encode_tx(tx)), address_of(tx)};
}

void TxPool::drop_above(Tail& tail, std::uint64_t height) {
  while (!tail.txs.empty() && height_of(tail.txs.back()) > height) {
    tx_index_.erase(tx_hash_of(tail.txs.back()));
    tail.txs.pop_back();
  }
}

void TxPool::erase(std::map<Address, Tail>::iterator it) {
  for (const auto& tx : it->second.txs) tx_index_.erase(tx_hash_of(tx));
  tails_.erase(it);
}

void TxPool::check_duplicate(const SubchainTx& tx) const {
  auto it = tx_index_.find(tx_hash_of(tx));
  if (it != tx_index_.end() && it->second.encoding_hash != sha256(encode_tx(tx))) {
    throw Error(ErrorCode::DuplicateHashConflict, "tx hash " + tx_hash_of(tx).hex() + " already pooled");
  }
}

bool TxPool::insert(const SubchainTx& tx, const SubchainState& base, const ClaimContext& ctx) {
  return insert_fragment({address_of(tx), height_of(tx) - 1, {tx}}, base, ctx) > 0;
}

std::size_t TxPool::insert_fragment(const SubchainFragment& frag, const SubchainState& base,
                                    const ClaimContext& ctx) {
  if (frag.txs.empty()) return 0;
  check_fragment_links(frag);
  const std::uint64_t top = frag.to_height();
  if (top <= base.tip_height) return 0;

  auto existing = tails_.find(frag.address);
  if (existing != tails_.end() &&
      (existing->second.base.tip_height != base.tip_height || existing->second.base.tip_hash != base.tip_hash)) {
    confirm(frag.address, base, ctx);
    existing = tails_.find(frag.address);
  }
  const bool had_tail = existing != tails_.end();
  const std::uint64_t head_height = had_tail ? existing->second.head.tip_height : base.tip_height;

  // skip txs the tail already holds, byte for byte
  std::size_t i = 0;
  while (i < frag.txs.size() && height_of(frag.txs[i]) <= base.tip_height) ++i;
  if (i > 0 && parent_of(frag.txs[i]) != base.tip_hash) {
    throw Error(ErrorCode::ConfirmedFrozen, "fork below the confirmed height");
  }
  if (had_tail) {
    const Tail& t = existing->second;
    while (i < frag.txs.size() && height_of(frag.txs[i]) <= head_height) {
      const SubchainTx& held = t.txs[height_of(frag.txs[i]) - t.base.tip_height - 1];
      if (tx_hash_of(held) != tx_hash_of(frag.txs[i]) || encode_tx(held) != encode_tx(frag.txs[i])) break;
      ++i;
    }
  }
  for (std::size_t k = i; k < frag.txs.size(); ++k) check_duplicate(frag.txs[k]);
  if (i == frag.txs.size()) return 0;

  const std::uint64_t first = height_of(frag.txs[i]);
  if (first <= base.tip_height) throw Error(ErrorCode::ConfirmedFrozen, "fork below the confirmed height");
  if (first > head_height + 1) throw Error(ErrorCode::BadLink, "gap above the pooled tail");

  const bool replacing = first <= head_height;
  if (replacing && top <= head_height) throw Error(ErrorCode::TailConflict, "replacement does not reach a higher tip");

  // validate on a copy so a failure leaves the tail untouched
  SubchainState state = base;
  std::vector<SubchainTx> kept;
  if (had_tail) {
    const Tail& t = existing->second;
    kept.assign(t.txs.begin(), t.txs.begin() + static_cast<std::ptrdiff_t>(first - 1 - base.tip_height));
    state = kept.empty() ? base : t.head;
    if (replacing) {
      state = base;
      for (const auto& tx : kept) apply_tx_in_place(state, tx, ctx);
    }
  }
  for (std::size_t k = i; k < frag.txs.size(); ++k) apply_tx_in_place(state, frag.txs[k], ctx);

  Tail& tail = tail_for(frag.address, base);
  drop_above(tail, first - 1);
  for (std::size_t k = i; k < frag.txs.size(); ++k) {
    tail.txs.push_back(frag.txs[k]);
    index(frag.txs[k]);
  }
  tail.head = std::move(state);
  return frag.txs.size() - i;
}

void TxPool::recheck(Tail& tail, const ClaimContext& ctx) {
  SubchainState state = tail.base;
  for (std::size_t k = 0; k < tail.txs.size(); ++k) {
    if (parent_of(tail.txs[k]) != state.tip_hash || height_of(tail.txs[k]) != state.tip_height + 1) {
      drop_above(tail, state.tip_height);
      break;
    }
    try {
      apply_tx_in_place(state, tail.txs[k], ctx);
    } catch (const Error&) {
      drop_above(tail, state.tip_height);
      break;
    }
  }
  tail.head = std::move(state);
}

void TxPool::confirm(const Address& address, const SubchainState& confirmed, const ClaimContext& ctx) {
  auto it = tails_.find(address);
  if (it == tails_.end()) return;
  Tail& t = it->second;
  // drop the confirmed prefix; the rest must continue from the new tip
  std::size_t cut = 0;
  while (cut < t.txs.size() && height_of(t.txs[cut]) <= confirmed.tip_height) {
    tx_index_.erase(tx_hash_of(t.txs[cut]));
    ++cut;
  }
  t.txs.erase(t.txs.begin(), t.txs.begin() + static_cast<std::ptrdiff_t>(cut));
  t.base = confirmed;
  recheck(t, ctx);
  if (t.txs.empty()) erase(it);
}

void TxPool::revalidate(const StateLookup& confirmed, const ClaimContext& ctx) {
  for (auto it = tails_.begin(); it != tails_.end();) {
    Tail& t = it->second;
    SubchainState base = confirmed(it->first);
    if (base.tip_height < t.base.tip_height) {
      // rolled back below the tail: the gap is unknown here
      auto next = std::next(it);
      erase(it);
      it = next;
      continue;
    }
    auto next = std::next(it);
    if (base.tip_height > t.base.tip_height || base.tip_hash != t.base.tip_hash) {
      confirm(it->first, base, ctx);
    } else {
      t.base = base;
      recheck(t, ctx);
      if (t.txs.empty()) erase(it);
    }
    it = next;
  }
}

std::vector<Address> TxPool::selection_order() const {
  std::vector<const std::pair<const Address, Tail>*> entries;
  entries.reserve(tails_.size());
  for (const auto& e : tails_) {
    if (!e.second.txs.empty()) entries.push_back(&e);
  }
  std::sort(entries.begin(), entries.end(), [](const auto* a, const auto* b) {
    if (a->second.txs.size() != b->second.txs.size()) return a->second.txs.size() > b->second.txs.size();
    return a->second.arrival < b->second.arrival;
  });
  std::vector<Address> out;
  out.reserve(entries.size());
  for (const auto* e : entries) out.push_back(e->first);
  return out;
}

MainBlock BlockTemplate::unsealed() const {
  MainBlock b;
  b.header.parent_block_hash = parent;
  b.header.height = height;
  b.header.timestamp = timestamp;
  b.header.difficulty_bits = difficulty_bits;
  b.header.miner_address = miner;
  b.confirmations = records;
  b.header.confirmations_root = confirmations_root(records);
  return b;
}

BlockTemplate build_template(const TxPool& pool, const ChainView& view, const Address& miner,
                             std::size_t limit_bytes, std::uint64_t timestamp) {
  BlockTemplate t;
  t.parent = view.tip();
  t.height = view.tip_height() + 1;
  t.miner = miner;
  t.difficulty_bits = view.params().difficulty_bits;
  t.timestamp = timestamp;
  const std::size_t capacity = limit_bytes < kBlockOverhead ? 0 : (limit_bytes - kBlockOverhead) / kRecordSize;
  for (const Address& a : pool.selection_order()) {
    if (t.records.size() >= capacity) break;
    const auto* tail = pool.find(a);
    t.records.push_back({a, tail->head.tip_hash, tail->head.tip_height});
    t.txs_covered += tail->txs.size();
  }
  std::sort(t.records.begin(), t.records.end(), [](const auto& x, const auto& y) { return x.address < y.address; });
  return t;
}

std::vector<TxVerdict> verify_batch(std::span<const SubchainTx> txs, std::size_t workers) {
  if (workers == 0) throw Error(ErrorCode::ConfigInvalid, "workers must be at least 1");
  std::vector<TxVerdict> out(txs.size());
  auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      if (tx_digest(txs[i]) != tx_hash_of(txs[i])) {
        out[i] = {false, ErrorCode::DecodeError};
      } else if (!verify_tx(txs[i])) {
        out[i] = {false, ErrorCode::InvalidSignature};
      } else {
        out[i] = {true, std::nullopt};
      }
    }
  };
  workers = std::min(workers, std::max<std::size_t>(1, txs.size()));
  if (workers == 1) {
    run(0, txs.size());
    return out;
  }
  std::vector<std::jthread> group;
  group.reserve(workers);
  const std::size_t chunk = txs.size() / workers;
  const std::size_t extra = txs.size() % workers;
  std::size_t begin = 0;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t end = begin + chunk + (w < extra ? 1 : 0);
    group.emplace_back(run, begin, end);
    begin = end;
  }
  group.clear();  // joins
  return out;
}

Miner::Miner(ChainParams params, MinerConfig config)
    : config_(config), node_(std::move(params), ShardAssignment{}), pool_(config.pool_capacity) {}

std::size_t Miner::submit(const SubchainFragment& fragment) {
  std::scoped_lock lock(mutex_);
  node_.accept_fragment(fragment);
  auto ctx = node_.claim_context();
  return pool_.insert_fragment(fragment, *node_.confirmed_state(fragment.address), ctx);
}

void Miner::after_connect(const ChainState::Result& result) {
  if (result.reorg.connected.empty() && result.reorg.disconnected.empty()) return;
  auto ctx = node_.claim_context();
  if (result.reorg.is_reorg()) {
    pool_.revalidate([this](const Address& a) { return *node_.confirmed_state(a); }, ctx);
  } else {
    for (const auto& h : result.reorg.connected) {
      for (const auto& r : node_.view().find(h)->confirmations) pool_.confirm(r.address, *node_.confirmed_state(r.address), ctx);
    }
  }
  tip_changed_.request_stop();
  tip_changed_ = std::stop_source{};
}

ChainState::Result Miner::ingest(const MainBlock& block) {
  std::scoped_lock lock(mutex_);
  auto result = node_.ingest_block(block);
  after_connect(result);
  return result;
}

void Miner::handle(const Envelope& env) {
  try {
    switch (env.kind) {
      case MessageKind::NewTx:
        submit(decode_fragment(env.payload));
        break;
      case MessageKind::NewBlock:
        ingest(decode_block(env.payload));
        break;
      default:
        break;
    }
  } catch (const Error&) {
    ++rejected_;
  }
}

BlockTemplate Miner::make_template(std::uint64_t timestamp) const {
  std::scoped_lock lock(mutex_);
  return template_locked(timestamp);
}

BlockTemplate Miner::template_locked(std::uint64_t timestamp) const {
  BlockTemplate t = build_template(pool_, node_.view(), config_.address, node_.view().params().block_size_limit,
                                   timestamp);
  t.difficulty_bits = config_.difficulty_bits;
  return t;
}

std::optional<MainBlock> Miner::mine_once(std::uint64_t timestamp, std::stop_token stop) {
  BlockTemplate t;
  std::stop_token tip_token;
  {
    std::scoped_lock lock(mutex_);
    t = template_locked(timestamp);
    tip_token = tip_changed_.get_token();
  }
  std::stop_source abort;
  std::stop_callback on_stop(stop, [&abort] { abort.request_stop(); });
  std::stop_callback on_tip(tip_token, [&abort] { abort.request_stop(); });
  auto sealed = seal(t.unsealed(), abort.get_token());
  if (!sealed) return std::nullopt;

  std::scoped_lock lock(mutex_);
  if (node_.view().tip() != t.parent) return std::nullopt;
  auto result = node_.ingest_block(*sealed);
  if (result.status != ChainState::Status::Connected) {
    throw Error(ErrorCode::InvariantViolation, "own block did not connect: " +
                                                   (result.error ? std::string(result.error->what()) : std::string("no error")));
  }
  after_connect(result);
  ++mined_;
  return sealed;
}

void Miner::mine_loop(std::stop_token stop, const Publish& publish, const std::function<void()>& pause) {
  std::uint64_t ts = 0;
  while (!stop.stop_requested()) {
    if (auto block = mine_once(++ts, stop)) publish(*block);
    if (pause) pause();
  }
}

}  // namespace wider
