#include "wider/sim.hpp"

#include <bit>
#include <chrono>
#include <ostream>
#include <random>

#include "wider/overlay.hpp"
#include "wider/wallet.hpp"

namespace wider {

namespace {

constexpr std::uint64_t kMicros = 1'000'000;

[[noreturn]] void invariant(const std::string& what) { throw Error(ErrorCode::InvariantViolation, what); }

KeyPair derive_key(std::uint64_t seed, std::uint64_t index) {
  ByteWriter w;
  w.raw(Bytes{'a', 'c', 'c', 't'});
  w.u64(seed);
  w.u64(index);
  Hash256 h = sha256(w.bytes());
  SecretKey s{};
  std::copy(h.bytes.begin(), h.bytes.end(), s.begin());
  return keygen(s);
}

std::vector<KeyPair> make_accounts(const SimConfig& cfg) {
  const ShardAssignment prefix = ShardAssignment::from_string(cfg.address_prefix);
  std::vector<KeyPair> keys;
  keys.reserve(cfg.accounts);
  for (std::uint64_t i = 0; keys.size() < cfg.accounts; ++i) {
    KeyPair k = derive_key(cfg.seed, i);
    if (prefix.hosts(k.address)) keys.push_back(std::move(k));
  }
  return keys;
}

/// Picks `k` distinct entries; rng() % n keeps the draw identical across
/// standard libraries.
std::vector<std::size_t> pick(std::vector<std::size_t> pool, std::size_t k, std::mt19937_64& rng) {
  k = std::min(k, pool.size());
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

class Simulation {
 public:
  explicit Simulation(const SimConfig& cfg)
      : cfg_(cfg),
        keys_(make_accounts(cfg)),
        params_(make_params()),
        tree_(TreeTopology::complete(cfg.nodes, cfg.neighbors)),
        transport_(cfg.seed, cfg.latency),
        overlay_(tree_, transport_),
        miner_(params_, MinerConfig{keys_.front().address, cfg.difficulty_bits}),
        rng_(cfg.seed * 0x9e3779b97f4a7c15ULL + 1) {
    for (std::size_t i = 0; i < keys_.size(); ++i) index_.emplace(keys_[i].address, i);
    inflows_.resize(keys_.size());
    pending_tip_.assign(keys_.size(), 0);
    active_.assign(keys_.size(), false);

    for (NodeId id = 0; id < tree_.size(); ++id) {
      nodes_.push_back(std::make_unique<Node>(params_, tree_.assignment(id)));
      Node& n = *nodes_.back();
      overlay_.on_message(id, [&n](const Envelope& env) { n.handle(env); });
      overlay_.serve(
          id, [&n](const Address& a, std::uint64_t from, std::uint64_t to) { return n.serve_fragment(a, from, to); },
          [&n](const Address& a, const Hash256& h) { return n.serve_send(a, h); });
      wire(n, id);
    }
    miner_client_ = overlay_.attach_client(tree_.root());
    overlay_.on_message(miner_client_, [this](const Envelope& env) { miner_.handle(env); });
    wire(miner_.node(), tree_.root());
  }

  SimReport run() {
    SimReport report;
    report.config = cfg_;
    report.capacity = params_.capacity();
    const Micros interval = static_cast<Micros>(cfg_.interval_s) * kMicros;
    for (std::size_t i = 0; i < cfg_.blocks; ++i) {
      transport_.run_until(static_cast<Micros>(i) * interval + interval / 2);
      account_blocks(report);
      settle_round();
      transport_.run_until(static_cast<Micros>(i + 1) * interval);
      mine(static_cast<std::uint64_t>(i + 1) * cfg_.interval_s);
      overlay_.forget_reports();
    }
    transport_.run_until(static_cast<Micros>(cfg_.blocks) * interval + interval / 2);
    account_blocks(report);

    for (const auto& row : report.blocks) {
      report.total_records += row.records;
      report.total_txs += row.txs;
      report.total_sends += row.sends;
    }
    report.tps = cfg_.blocks == 0 ? 0.0
                                  : static_cast<double>(report.total_sends) /
                                        static_cast<double>(cfg_.blocks * cfg_.interval_s);
    for (NodeId id = 0; id < tree_.size(); ++id) {
      report.nodes.push_back({id, tree_.assignment(id).to_string(), nodes_[id]->storage_report()});
    }
    report.active_accounts = static_cast<std::uint64_t>(std::count(active_.begin(), active_.end(), true));
    report.subchains = full().storage_report().subchains;
    report.messages_delivered = transport_.delivered();
    report.fragment_requests = overlay_.rpc_stats().requests;
    report.pool_evictions = miner_.pool().evictions();
    report.trace_digest = sha256(transport_.trace()).hex();

    check_agreement();
    report.conservation = conservation();
    if (!report.conservation.holds()) invariant("conservation does not hold");
    if (report.active_accounts != report.subchains) invariant("subchain count differs from active accounts");
    if (miner_.rejected() != 0) invariant("miner dropped " + std::to_string(miner_.rejected()) + " inputs");
    if (cfg_.oracle_check) replay_oracle();
    return report;
  }

 private:
  ChainParams make_params() const {
    ChainParams p;
    p.difficulty_bits = cfg_.difficulty_bits;
    p.block_size_limit = cfg_.block_size;
    p.maturity = cfg_.maturity;
    for (const auto& k : keys_) p.allocations.emplace_back(k.address, cfg_.funds);
    return p;
  }

  void wire(Node& n, NodeId id) {
    n.set_remote(
        [this, id](const Address& a, std::uint64_t from, std::uint64_t to) {
          return overlay_.request_fragment(id, a, from, to, id).fragment;
        },
        [this, id](const Address& a, const Hash256& h) { return overlay_.request_send(id, a, h); });
  }

  Node& full() { return *nodes_.front(); }

  /// Rows for newly canonical blocks, and the inflows they create.
  void account_blocks(SimReport& report) {
    const ChainView& view = full().view();
    const auto& chain = view.canonical_chain();
    for (std::uint64_t h = processed_ + 1; h < chain.size(); ++h) {
      const MainBlock& b = *view.find(chain[h]);
      BlockRow row{h, b.confirmations.size(), 0, 0, b.encoded_size()};
      for (const auto& r : b.confirmations) {
        std::uint64_t& last = last_confirmed_[r.address];
        for (const auto& tx : full().serve_fragment(r.address, last, r.tip_height).txs) {
          ++row.txs;
          if (const auto* s = std::get_if<SendTx>(&tx)) {
            ++row.sends;
            if (auto it = index_.find(s->recipient_address); it != index_.end()) {
              inflows_[it->second].push_back({s->current_address, s->tx_hash, s->amount, chain[h], 0});
            }
          }
        }
        last = r.tip_height;
      }
      if (auto it = index_.find(b.header.miner_address); it != index_.end()) {
        inflows_[it->second].push_back({{}, {}, coinbase_amount(params_, h), chain[h], 0});
      }
      report.blocks.push_back(row);
    }
    processed_ = chain.size() - 1;
  }

  void settle_round() {
    std::vector<std::size_t> idle;
    for (std::size_t a = 0; a < keys_.size(); ++a) {
      if (full().confirmed_state(keys_[a].address)->tip_height >= pending_tip_[a]) idle.push_back(a);
    }
    const std::uint64_t now_s = static_cast<std::uint64_t>(transport_.now() / kMicros);
    for (std::size_t a : pick(std::move(idle), cfg_.width, rng_)) {
      const Address& addr = keys_[a].address;
      const SubchainState confirmed = *full().confirmed_state(addr);
      AccountView view = make_account_view(confirmed, confirmed, {}, inflows_[a], full().view());
      std::vector<std::pair<Address, std::uint64_t>> sends;
      for (std::size_t k = 0; k < cfg_.avg_txs; ++k) {
        sends.emplace_back(keys_[rng() % keys_.size()].address, 1 + rng() % 1000);
      }
      const std::uint64_t from = view.head.tip_height;
      std::vector<SubchainTx> txs = batch_settle(view, sends, keys_[a], now_s);
      inflows_[a] = view.inflows;
      pending_tip_[a] = view.head.tip_height;
      active_[a] = true;

      SubchainFragment frag{addr, from, std::move(txs)};
      const NodeId origin = tree_.nodes_path(addr).back();
      try {
        nodes_[origin]->accept_fragment(frag);
      } catch (const Error& e) {
        invariant(std::string("wallet batch refused by its host: ") + e.what());
      }
      overlay_.publish(origin, MessageKind::NewTx, encode_fragment(frag));
    }
  }

  std::uint64_t rng() { return rng_(); }

  void mine(std::uint64_t timestamp) {
    auto block = miner_.mine_once(timestamp);
    if (!block) invariant("miner produced no block");
    overlay_.publish(miner_client_, MessageKind::NewBlock, encode_block(*block));
  }

  void check_agreement() {
    const Hash256 tip = miner_.node().view().tip();
    for (NodeId id = 0; id < nodes_.size(); ++id) {
      const Node& n = *nodes_[id];
      if (n.view().tip() != tip) invariant("node " + std::to_string(id) + " is on a different tip");
      for (const auto& k : keys_) {
        if (!n.hosts(k.address)) continue;
        if (n.confirmed_state(k.address) != full().confirmed_state(k.address)) {
          invariant("node " + std::to_string(id) + " disagrees on " + k.address.hex());
        }
      }
    }
  }

  Conservation conservation() {
    Conservation c;
    const std::uint64_t tip = full().view().tip_height();
    c.genesis = cfg_.funds * keys_.size();
    for (std::uint64_t h = 1; h <= tip; ++h) c.subsidies += coinbase_amount(params_, h);

    std::unordered_map<Hash256, std::pair<Address, std::uint64_t>> sends;
    std::uint64_t claimed_coinbase = 0;
    for (const auto& k : keys_) {
      const SubchainState s = *full().confirmed_state(k.address);
      c.balances += s.balance;
      for (const auto& tx : full().serve_fragment(k.address, 0, s.tip_height).txs) {
        if (const auto* send = std::get_if<SendTx>(&tx)) sends[send->tx_hash] = {send->recipient_address, send->amount};
      }
      for (const auto& block : s.claimed_coinbases) {
        claimed_coinbase += coinbase_amount(params_, full().view().find(block)->header.height);
      }
    }
    for (const auto& [hash, dest] : sends) {
      auto recipient = full().confirmed_state(dest.first);
      if (!recipient || !recipient->claimed_sends.contains(hash)) c.in_flight += dest.second;
    }
    c.unclaimed_coinbase = c.subsidies - claimed_coinbase;
    return c;
  }

  void replay_oracle() {
    std::unordered_map<Hash256, SendTx> sends;
    std::vector<std::vector<SubchainTx>> chains(keys_.size());
    for (std::size_t a = 0; a < keys_.size(); ++a) {
      const auto s = *full().confirmed_state(keys_[a].address);
      chains[a] = full().serve_fragment(keys_[a].address, 0, s.tip_height).txs;
      for (const auto& tx : chains[a]) {
        if (const auto* send = std::get_if<SendTx>(&tx)) sends.emplace(send->tx_hash, *send);
      }
    }
    ViewClaimContext ctx(full().view(), [&sends](const Address& sender, const Hash256& h) -> std::optional<SendTx> {
      auto it = sends.find(h);
      if (it == sends.end() || it->second.current_address != sender) return std::nullopt;
      return it->second;
    });
    for (std::size_t a = 0; a < keys_.size(); ++a) {
      if (chains[a].empty()) continue;
      const SubchainState expected =
          mark_confirmed(replay(keys_[a].address, chains[a], ctx), chains[a].size());
      if (expected != *full().confirmed_state(keys_[a].address)) {
        invariant("replay oracle disagrees on " + keys_[a].address.hex());
      }
    }
  }

  SimConfig cfg_;
  std::vector<KeyPair> keys_;
  ChainParams params_;
  TreeTopology tree_;
  SimTransport transport_;
  Overlay overlay_;
  std::vector<std::unique_ptr<Node>> nodes_;
  Miner miner_;
  NodeId miner_client_ = 0;
  std::mt19937_64 rng_;

  std::unordered_map<Address, std::size_t> index_;
  std::vector<std::vector<Inflow>> inflows_;
  std::vector<std::uint64_t> pending_tip_;
  std::vector<bool> active_;
  std::unordered_map<Address, std::uint64_t> last_confirmed_;
  std::uint64_t processed_ = 0;
};

nlohmann::ordered_json storage_json(const StorageReport& s) {
  return {{"main_chain_bytes", s.main_chain_bytes},
          {"subchain_bytes", s.subchain_bytes},
          {"blocks", s.blocks},
          {"subchains", s.subchains},
          {"subchain_txs", s.subchain_txs}};
}

}  // namespace

void SimConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::ConfigInvalid, what); };
  if (accounts == 0) fail("accounts must be positive");
  if (width > accounts) fail("width exceeds the account count");
  if (avg_txs == 0) fail("avg_txs must be positive");
  if (interval_s == 0) fail("interval must be positive");
  if (nodes == 0) fail("need at least one node");
  if (neighbors == 0) fail("neighbor count must be positive");
  if (latency.min_ms > latency.max_ms) fail("latency min exceeds max");
  if (workers == 0) fail("workers must be positive");
  if (block_size < kBlockOverhead) fail("block size below the block overhead");
  if (address_prefix.find_first_not_of("01") != std::string::npos) fail("address prefix must be bits");
  // a settle round must drain before the next block
  const std::uint64_t worst_rtt = 2 * (2 * static_cast<std::uint64_t>(std::bit_width(nodes)) + 2) * latency.max_ms;
  if (worst_rtt * 1000 >= interval_s * kMicros / 2) fail("interval too short for the network latency");
}

void apply_profile(SimConfig& cfg, std::string_view profile) {
  if (profile == "bitcoin-like") {
    cfg.block_size = 1'000'000;
    cfg.interval_s = 600;
  } else if (profile == "ethereum-like") {
    cfg.block_size = 40'000;
    cfg.interval_s = 15;
  } else {
    throw Error(ErrorCode::ConfigInvalid, "unknown profile " + std::string(profile));
  }
}

SimReport run_sim(const SimConfig& cfg) {
  cfg.validate();
  return Simulation(cfg).run();
}

nlohmann::ordered_json to_json(const SimReport& r) {
  const SimConfig& c = r.config;
  nlohmann::ordered_json j;
  j["schema"] = 1;
  j["config"] = {{"seed", c.seed},
                 {"accounts", c.accounts},
                 {"width", c.width},
                 {"avg_txs", c.avg_txs},
                 {"block_size", c.block_size},
                 {"interval_s", c.interval_s},
                 {"blocks", c.blocks},
                 {"nodes", c.nodes},
                 {"neighbors", c.neighbors},
                 {"latency_ms", {c.latency.min_ms, c.latency.max_ms}},
                 {"difficulty_bits", c.difficulty_bits},
                 {"maturity", c.maturity},
                 {"workers", c.workers},
                 {"address_prefix", c.address_prefix}};
  j["capacity"] = r.capacity;
  j["totals"] = {{"records", r.total_records}, {"txs", r.total_txs}, {"sends", r.total_sends}, {"tps", r.tps}};
  j["active_accounts"] = r.active_accounts;
  j["subchains"] = r.subchains;
  auto& blocks = j["blocks"] = nlohmann::ordered_json::array();
  for (const auto& b : r.blocks) {
    blocks.push_back({{"height", b.height}, {"records", b.records}, {"txs", b.txs}, {"sends", b.sends}, {"bytes", b.bytes}});
  }
  auto& nodes = j["nodes"] = nlohmann::ordered_json::array();
  for (const auto& n : r.nodes) nodes.push_back({{"id", n.id}, {"prefix", n.prefix}, {"storage", storage_json(n.storage)}});
  const Conservation& k = r.conservation;
  j["conservation"] = {{"genesis", k.genesis},
                       {"subsidies", k.subsidies},
                       {"balances", k.balances},
                       {"in_flight", k.in_flight},
                       {"unclaimed_coinbase", k.unclaimed_coinbase},
                       {"holds", k.holds()}};
  j["network"] = {{"messages_delivered", r.messages_delivered}, {"fragment_requests", r.fragment_requests}};
  j["pool_evictions"] = r.pool_evictions;
  j["trace_digest"] = r.trace_digest;
  return j;
}

void write_csv(const SimReport& report, std::ostream& out) {
  out << "height,records,txs,sends,bytes\n";
  for (const auto& b : report.blocks) {
    out << b.height << ',' << b.records << ',' << b.txs << ',' << b.sends << ',' << b.bytes << '\n';
  }
}

VerifyBench bench_verify(std::size_t n_txs, const std::vector<std::size_t>& worker_counts, std::uint64_t seed) {
  constexpr std::size_t kSenders = 64;
  std::vector<KeyPair> keys;
  for (std::size_t i = 0; i < std::min(kSenders, n_txs); ++i) keys.push_back(derive_key(seed, i));
  std::vector<SubchainTx> txs;
  txs.reserve(n_txs);
  std::vector<Hash256> tips(keys.size());
  std::vector<std::uint64_t> heights(keys.size(), 0);
  for (std::size_t i = 0; i < n_txs; ++i) {
    const std::size_t k = i % keys.size();
    SendTx t;
    t.parent_hash = tips[k];
    t.height = ++heights[k];
    t.current_address = keys[k].address;
    t.recipient_address = keys[(k + 1) % keys.size()].address;
    t.amount = 1 + i % 1000;
    t.timestamp = i;
    txs.push_back(sign_tx(t, keys[k]));
    tips[k] = tx_hash_of(txs.back());
  }

  VerifyBench bench;
  std::optional<std::vector<TxVerdict>> first;
  for (std::size_t w : worker_counts) {
    const auto start = std::chrono::steady_clock::now();
    auto verdicts = verify_batch(txs, w);
    const std::chrono::duration<double> took = std::chrono::steady_clock::now() - start;
    const auto valid = static_cast<std::size_t>(std::count_if(verdicts.begin(), verdicts.end(), [](const auto& v) {
      return v.valid;
    }));
    bench.rows.push_back({w, took.count(), valid});
    if (!first) {
      first = std::move(verdicts);
    } else if (verdicts != *first) {
      bench.identical_verdicts = false;
    }
  }
  return bench;
}

void write_csv(const VerifyBench& bench, std::ostream& out) {
  out << "workers,seconds,valid\n";
  for (const auto& r : bench.rows) out << r.workers << ',' << r.seconds << ',' << r.valid << '\n';
}

std::vector<StorageRow> bench_storage(const SimConfig& cfg) {
  if (cfg.nodes < 4) throw Error(ErrorCode::ConfigInvalid, "storage bench needs a tree with depth-2 nodes (>= 4)");
  SimReport r = run_sim(cfg);
  std::vector<StorageRow> rows;
  for (std::size_t depth = 0; depth <= 2; ++depth) {
    for (const auto& n : r.nodes) {
      if (n.prefix.size() == depth) {
        rows.push_back({depth, n.prefix, n.storage.main_chain_bytes, n.storage.subchain_bytes});
        break;
      }
    }
  }
  return rows;
}

void write_csv(const std::vector<StorageRow>& rows, std::ostream& out) {
  out << "depth,prefix,main_bytes,subchain_bytes\n";
  for (const auto& r : rows) out << r.depth << ',' << r.prefix << ',' << r.main_bytes << ',' << r.subchain_bytes << '\n';
}

}  // namespace wider
