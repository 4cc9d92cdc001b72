#include "wider/node.hpp"

#include <algorithm>

namespace wider {

namespace {

Bytes tx_key(const Address& address, std::uint64_t height) {
  ByteWriter w(28);
  w.fixed(address);
  w.u64(height);
  return std::move(w).take();
}

Bytes height_key(std::uint64_t height) {
  ByteWriter w(8);
  w.u64(height);
  return std::move(w).take();
}

template <std::size_t N, typename Tag>
Bytes key_of(const FixedBytes<N, Tag>& v) {
  return Bytes(v.bytes.begin(), v.bytes.end());
}

Bytes pair_key(const Address& address, const Hash256& h) {
  ByteWriter w(52);
  w.fixed(address);
  w.fixed(h);
  return std::move(w).take();
}

Bytes encode_state(const SubchainState& s) {
  ByteWriter w(32 + 8 + 8 + 8);
  w.fixed(s.tip_hash);
  w.u64(s.tip_height);
  w.u64(s.balance);
  w.u64(s.confirmed_height);
  return std::move(w).take();
}

const Bytes kAssignmentKey{'a', 's', 's', 'i', 'g', 'n'};

}  // namespace

class Node::Oracle : public ShardOracle {
 public:
  explicit Oracle(Node& node) : node_(node) {}

  std::optional<SubchainState> verify_record(const ConfirmationRecord& record, std::uint64_t previous_height,
                                             const ClaimContext& ctx) override {
    if (!node_.hosts(record.address)) {
      ++node_.counters_.records_skipped;
      return std::nullopt;
    }
    SubchainState base = node_.base_state(record.address);
    if (base.tip_height != previous_height) {
      throw Error(ErrorCode::TipMismatch, "local confirmed height " + std::to_string(base.tip_height) +
                                              ", chain says " + std::to_string(previous_height));
    }
    SubchainFragment frag;
    auto it = node_.hosted_.find(record.address);
    const bool local = it != node_.hosted_.end() && it->second.txs.size() >= record.tip_height &&
                       tx_hash_of(it->second.txs[record.tip_height - 1]) == record.tip_hash;
    if (local) {
      const auto& txs = it->second.txs;
      frag = {record.address, previous_height,
              {txs.begin() + static_cast<std::ptrdiff_t>(previous_height),
               txs.begin() + static_cast<std::ptrdiff_t>(record.tip_height)}};
    } else {
      if (!node_.remote_fragment_) throw Error(ErrorCode::PartialFetch, "no local copy and no remote access");
      try {
        frag = node_.remote_fragment_(record.address, previous_height, record.tip_height);
      } catch (const Error& e) {
        throw Error(ErrorCode::PartialFetch, std::string(to_string(e.code())) + " from remote host");
      }
      ++node_.counters_.fragments_fetched;
      node_.fetched_[record.address] = frag;
    }
    SubchainState next = verify_fragment(std::move(base), frag, ctx);
    if (next.tip_hash != record.tip_hash) throw Error(ErrorCode::TipMismatch, "record tip hash differs");
    ++node_.counters_.records_verified;
    return mark_confirmed(std::move(next), record.tip_height);
  }

 private:
  Node& node_;
};

Node::Node(ChainParams params, ShardAssignment assignment, NodeStore store)
    : assignment_(assignment), chain_(std::move(params)), store_(std::move(store)) {
  ByteWriter w;
  assignment_.encode(w);
  Bytes encoded = std::move(w).take();
  WriteBatch b;
  if (store_.get(Keyspace::Meta, kAssignmentKey) != encoded) b.put(Keyspace::Meta, kAssignmentKey, std::move(encoded));
  if (!store_.contains(Keyspace::Canonical, height_key(0))) {
    b.put(Keyspace::Canonical, height_key(0), key_of(view().genesis_hash()));
  }
  store_.apply(b);
}

Node Node::open(ChainParams params, ShardAssignment assignment, const std::filesystem::path& dir) {
  Node node(std::move(params), assignment, NodeStore::open(dir));
  node.replaying_ = true;

  node.store_.scan(Keyspace::Txs, {}, [&node](ByteView key, ByteView value) {
    ByteReader kr(key);
    const Address address = kr.fixed<Address>();
    const std::uint64_t height = kr.u64();
    SubchainTx tx = decode_tx(value);
    Hosted& h = node.hosted_entry(address);
    if (height != h.txs.size() + 1 || height_of(tx) != height) {
      throw Error(ErrorCode::InvariantViolation, "stored subchain has a gap at " + address.hex());
    }
    node.seen_[tx_hash_of(tx)] = {sha256(value), address, height};
    h.txs.push_back(std::move(tx));
  });

  std::vector<MainBlock> blocks;
  node.store_.scan(Keyspace::Blocks, {}, [&blocks](ByteView, ByteView value) { blocks.push_back(decode_block(value)); });
  std::sort(blocks.begin(), blocks.end(), [](const MainBlock& a, const MainBlock& b) {
    return a.header.height < b.header.height;
  });
  for (const auto& b : blocks) node.ingest_block(b);

  node.replaying_ = false;
  WriteBatch batch;
  for (auto& [address, h] : node.hosted_) node.rebuild_head(batch, address);
  node.commit(batch);
  return node;
}

void Node::set_remote(RemoteFragment fragments, RemoteSend sends) {
  remote_fragment_ = std::move(fragments);
  remote_send_ = std::move(sends);
}

SubchainState Node::base_state(const Address& address) const {
  if (auto s = chain_.confirmed(address)) return *s;
  return SubchainState::genesis(address, view().genesis_allocation(address));
}

Node::Hosted& Node::hosted_entry(const Address& address) {
  auto it = hosted_.find(address);
  if (it != hosted_.end()) return it->second;
  Hosted h;
  h.head = base_state(address);
  return hosted_.emplace(address, std::move(h)).first->second;
}

ViewClaimContext Node::context(const ChainView& v) const {
  auto* self = const_cast<Node*>(this);
  return ViewClaimContext(
      v, [self](const Address& a, const Hash256& h) { return self->find_send(a, h); },
      [self](const SubchainTx& tx) { return self->sigs_.check(tx); });
}

std::optional<SendTx> Node::find_send(const Address& sender, const Hash256& tx_hash) const {
  if (auto local = serve_send(sender, tx_hash)) return local;
  if (remote_send_) return remote_send_(sender, tx_hash);
  return std::nullopt;
}

std::vector<RecordDelta> Node::validate(const MainBlock& block, const ChainView& v) {
  fetched_.clear();
  Oracle oracle(*this);
  auto ctx = context(v);
  return validate_block(block, v, oracle, ctx);
}

ChainState::Listener Node::listener() {
  return {[this](const MainBlock& b, const std::vector<RecordDelta>& d) { on_connected(b, d); },
          [this](const MainBlock& b) { on_disconnected(b); }};
}

ChainState::Result Node::ingest_block(const MainBlock& block) {
  const Hash256 hash = block.hash();
  auto result = chain_.submit(
      block, [this](const MainBlock& b, const ChainView& v) { return validate(b, v); }, listener());
  if (result.status == ChainState::Status::Rejected) {
    ++counters_.blocks_rejected;
  } else if (result.status != ChainState::Status::Duplicate && !store_.contains(Keyspace::Blocks, hash.bytes)) {
    WriteBatch b;
    b.put(Keyspace::Blocks, key_of(hash), encode_block(block));
    commit(b);
  }
  if (result.reorg.is_reorg() && !replaying_) {
    // pending claims may reference orphaned blocks
    WriteBatch b;
    for (auto& [address, h] : hosted_) rebuild_head(b, address);
    commit(b);
  }
  return result;
}

std::size_t Node::retry_deferred() {
  return chain_.retry_deferred([this](const MainBlock& b, const ChainView& v) { return validate(b, v); },
                               listener());
}

void Node::on_connected(const MainBlock& block, const std::vector<RecordDelta>& deltas) {
  ++counters_.blocks_connected;
  WriteBatch b;
  const Hash256 hash = block.hash();
  if (!store_.contains(Keyspace::Blocks, hash.bytes)) b.put(Keyspace::Blocks, key_of(hash), encode_block(block));
  b.put(Keyspace::Canonical, height_key(block.header.height), key_of(hash));
  for (const auto& d : deltas) {
    if (!d.state) continue;
    Hosted& h = hosted_entry(d.address);
    if (auto f = fetched_.find(d.address); f != fetched_.end()) {
      drop_txs_above(b, h, f->second.from_height);
      for (const auto& tx : f->second.txs) store_tx(b, tx, sha256(encode_tx(tx)));
      fetched_.erase(f);
    }
    for (std::uint64_t k = d.previous_height; k < d.new_height; ++k) {
      if (const auto* rx = std::get_if<ReceiveTx>(&h.txs[k])) {
        if (rx->is_coinbase_claim()) {
          b.put(Keyspace::ClaimedCoinbases, pair_key(d.address, rx->main_block_hash), {});
        } else {
          b.put(Keyspace::ClaimedSends, pair_key(d.address, rx->sender_tx_hash), {});
        }
      }
    }
    write_state(b, d.address);
    if (!replaying_) rebuild_head(b, d.address);
  }
  commit(b);
}

void Node::on_disconnected(const MainBlock& block) {
  WriteBatch b;
  b.erase(Keyspace::Canonical, height_key(block.header.height));
  for (const auto& rec : block.confirmations) {
    if (!hosts(rec.address)) continue;
    auto it = hosted_.find(rec.address);
    if (it == hosted_.end()) continue;
    const std::uint64_t restored = base_state(rec.address).tip_height;
    const auto& txs = it->second.txs;
    for (std::uint64_t k = restored; k < std::min<std::uint64_t>(rec.tip_height, txs.size()); ++k) {
      if (const auto* rx = std::get_if<ReceiveTx>(&txs[k])) {
        b.erase(rx->is_coinbase_claim() ? Keyspace::ClaimedCoinbases : Keyspace::ClaimedSends,
                pair_key(rec.address, rx->is_coinbase_claim() ? rx->main_block_hash : rx->sender_tx_hash));
      }
    }
    write_state(b, rec.address);
    if (!replaying_) rebuild_head(b, rec.address);
  }
  commit(b);
}

void Node::store_tx(WriteBatch& batch, const SubchainTx& tx, const Hash256& encoding_hash) {
  const Address& address = address_of(tx);
  Hosted& h = hosted_entry(address);
  const std::uint64_t height = height_of(tx);
  if (height != h.txs.size() + 1) throw Error(ErrorCode::InvariantViolation, "non-contiguous store");
  batch.put(Keyspace::Txs, tx_key(address, height), encode_tx(tx));
  batch.put(Keyspace::Seen, key_of(tx_hash_of(tx)), key_of(encoding_hash));
  seen_[tx_hash_of(tx)] = {encoding_hash, address, height};
  h.txs.push_back(tx);
}

void Node::drop_txs_above(WriteBatch& batch, Hosted& h, std::uint64_t height) {
  while (h.txs.size() > height) {
    const SubchainTx& tx = h.txs.back();
    batch.erase(Keyspace::Txs, tx_key(address_of(tx), height_of(tx)));
    batch.erase(Keyspace::Seen, key_of(tx_hash_of(tx)));
    seen_.erase(tx_hash_of(tx));
    h.txs.pop_back();
  }
}

void Node::rebuild_head(WriteBatch& batch, const Address& address) {
  Hosted& h = hosted_entry(address);
  SubchainState s = base_state(address);
  if (h.txs.size() < s.tip_height) {
    throw Error(ErrorCode::InvariantViolation, "confirmed height above stored subchain for " + address.hex());
  }
  if (h.txs.size() > s.tip_height) {
    auto ctx = context(view());
    for (std::uint64_t k = s.tip_height; k < h.txs.size(); ++k) {
      try {
        apply_tx_in_place(s, h.txs[k], ctx);
      } catch (const Error&) {
        drop_txs_above(batch, h, k);
        break;
      }
    }
  }
  h.head = std::move(s);
}

void Node::write_state(WriteBatch& batch, const Address& address) {
  if (auto s = chain_.confirmed(address)) {
    batch.put(Keyspace::States, key_of(address), encode_state(*s));
  } else {
    batch.erase(Keyspace::States, key_of(address));
  }
}

void Node::commit(WriteBatch& batch) {
  if (!replaying_) store_.apply(batch);
  batch = WriteBatch{};
}

TxOutcome Node::accept_pending_tx(const SubchainTx& tx) {
  const Bytes enc = encode_tx(tx);
  const Hash256 encoding_hash = sha256(enc);
  if (auto it = seen_.find(tx_hash_of(tx)); it != seen_.end()) {
    if (it->second.encoding_hash == encoding_hash) return TxOutcome::Duplicate;
    throw Error(ErrorCode::DuplicateHashConflict, "tx hash " + tx_hash_of(tx).hex() + " already names another tx");
  }
  if (!sigs_.check(tx)) throw Error(ErrorCode::InvalidSignature);

  const Address& address = address_of(tx);
  if (!hosts(address)) {
    ++counters_.txs_relayed;
    return TxOutcome::Relayed;
  }
  Hosted& h = hosted_entry(address);
  const std::uint64_t height = height_of(tx);
  if (height <= base_state(address).tip_height) {
    throw Error(ErrorCode::ConfirmedFrozen, "height " + std::to_string(height) + " is already confirmed");
  }
  if (height <= h.head.tip_height) throw Error(ErrorCode::TailConflict, "a different tx is pending at this height");
  if (height > h.head.tip_height + 1) throw Error(ErrorCode::BadLink, "gap above the pending tail");

  auto ctx = context(view());
  SubchainState next = apply_tx(h.head, tx, ctx);
  WriteBatch b;
  store_tx(b, tx, encoding_hash);
  h.head = std::move(next);
  commit(b);
  ++counters_.txs_accepted;
  return TxOutcome::Accepted;
}

std::size_t Node::accept_fragment(const SubchainFragment& frag) {
  if (!hosts(frag.address)) {
    for (const auto& tx : frag.txs) accept_pending_tx(tx);
    return 0;
  }
  check_fragment_links(frag);
  Hosted& h = hosted_entry(frag.address);

  // skip what is already stored
  std::size_t i = 0;
  while (i < frag.txs.size() && height_of(frag.txs[i]) <= h.txs.size()) {
    const SubchainTx& stored = h.txs[height_of(frag.txs[i]) - 1];
    if (tx_hash_of(stored) != tx_hash_of(frag.txs[i]) || encode_tx(stored) != encode_tx(frag.txs[i])) break;
    ++i;
  }

  if (i < frag.txs.size() && height_of(frag.txs[i]) <= h.txs.size()) {
    const std::uint64_t fork = height_of(frag.txs[i]) - 1;
    const SubchainState confirmed = base_state(frag.address);
    if (fork < confirmed.tip_height) throw Error(ErrorCode::ConfirmedFrozen, "fork below the confirmed height");
    if (frag.to_height() <= h.head.tip_height) {
      throw Error(ErrorCode::TailConflict, "replacement does not reach a higher tip");
    }
    SubchainFragment tail_frag{frag.address, fork, {frag.txs.begin() + static_cast<std::ptrdiff_t>(i), frag.txs.end()}};
    for (const auto& tx : tail_frag.txs) {
      auto it = seen_.find(tx_hash_of(tx));
      if (it != seen_.end() && it->second.encoding_hash != sha256(encode_tx(tx))) {
        throw Error(ErrorCode::DuplicateHashConflict, "tx hash " + tx_hash_of(tx).hex() + " already names another tx");
      }
    }
    std::span<const SubchainTx> old_tail(h.txs.begin() + static_cast<std::ptrdiff_t>(confirmed.tip_height), h.txs.end());
    auto ctx = context(view());
    SubchainState next = try_replace_tail(confirmed, old_tail, fork, tail_frag, ctx);
    WriteBatch b;
    drop_txs_above(b, h, fork);
    for (const auto& tx : tail_frag.txs) store_tx(b, tx, sha256(encode_tx(tx)));
    h.head = std::move(next);
    commit(b);
    counters_.txs_accepted += tail_frag.txs.size();
    return tail_frag.txs.size();
  }

  std::size_t accepted = 0;
  for (; i < frag.txs.size(); ++i) {
    if (accept_pending_tx(frag.txs[i]) == TxOutcome::Accepted) ++accepted;
  }
  return accepted;
}

SubchainFragment Node::serve_fragment(const Address& address, std::uint64_t from_height,
                                      std::uint64_t to_height) const {
  if (!hosts(address)) throw Error(ErrorCode::NotHosted, address.hex());
  auto it = hosted_.find(address);
  const std::size_t size = it == hosted_.end() ? 0 : it->second.txs.size();
  if (from_height > to_height || to_height > size) {
    throw Error(ErrorCode::RangeUnavailable, "(" + std::to_string(from_height) + ", " + std::to_string(to_height) +
                                                 "] with " + std::to_string(size) + " stored");
  }
  const auto& txs = it->second.txs;
  return {address, from_height,
          {txs.begin() + static_cast<std::ptrdiff_t>(from_height), txs.begin() + static_cast<std::ptrdiff_t>(to_height)}};
}

std::optional<SendTx> Node::serve_send(const Address& sender, const Hash256& tx_hash) const {
  auto it = seen_.find(tx_hash);
  if (it == seen_.end() || it->second.address != sender) return std::nullopt;
  const auto& txs = hosted_.at(sender).txs;
  if (const auto* s = std::get_if<SendTx>(&txs[it->second.height - 1]); s && s->tx_hash == tx_hash) return *s;
  return std::nullopt;
}

std::optional<SubchainState> Node::confirmed_state(const Address& address) const {
  if (!hosts(address)) return std::nullopt;
  return base_state(address);
}

std::optional<SubchainState> Node::head_state(const Address& address) const {
  if (!hosts(address)) return std::nullopt;
  auto it = hosted_.find(address);
  return it == hosted_.end() ? base_state(address) : it->second.head;
}

std::vector<SubchainTx> Node::stored_txs(const Address& address) const {
  auto it = hosted_.find(address);
  return it == hosted_.end() ? std::vector<SubchainTx>{} : it->second.txs;
}

std::vector<Address> Node::stored_addresses() const {
  std::vector<Address> out;
  for (const auto& [address, h] : hosted_) {
    if (!h.txs.empty()) out.push_back(address);
  }
  return out;
}

StorageReport Node::storage_report() const {
  StorageReport r;
  r.main_chain_bytes = store_.value_bytes(Keyspace::Blocks);
  r.blocks = store_.count(Keyspace::Blocks);
  r.subchain_bytes = store_.value_bytes(Keyspace::Txs);
  r.subchain_txs = store_.count(Keyspace::Txs);
  r.subchains = stored_addresses().size();
  return r;
}

void Node::narrow(const ShardAssignment& child) {
  if (!assignment_.is_prefix_of(child)) throw Error(ErrorCode::ConfigInvalid, "new prefix must extend the current one");
  assignment_ = child;
  ByteWriter w;
  assignment_.encode(w);
  WriteBatch b;
  b.put(Keyspace::Meta, kAssignmentKey, std::move(w).take());
  commit(b);
}

std::size_t Node::compact() {
  WriteBatch b;
  std::size_t removed = 0;
  for (auto it = hosted_.begin(); it != hosted_.end();) {
    if (hosts(it->first)) {
      ++it;
      continue;
    }
    const Address address = it->first;
    drop_txs_above(b, it->second, 0);
    b.erase(Keyspace::States, key_of(address));
    for (Keyspace ks : {Keyspace::ClaimedSends, Keyspace::ClaimedCoinbases}) {
      store_.scan(ks, address.bytes, [&b, ks](ByteView key, ByteView) { b.erase(ks, Bytes(key.begin(), key.end())); });
    }
    it = hosted_.erase(it);
    ++removed;
  }
  commit(b);
  store_.compact();
  return removed;
}

void Node::handle(const Envelope& env) {
  try {
    switch (env.kind) {
      case MessageKind::NewTx:
        accept_fragment(decode_fragment(env.payload));
        break;
      case MessageKind::NewBlock:
        ingest_block(decode_block(env.payload));
        break;
      default:
        return;
    }
  } catch (const Error&) {
    ++counters_.txs_rejected;
  }
  if (!chain_.deferred().empty()) retry_deferred();
}

}  // namespace wider
