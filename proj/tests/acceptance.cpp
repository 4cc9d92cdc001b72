// Acceptance checks. `acceptance` runs every criterion; `acceptance N` runs
// one. Each criterion prints a single PASS or FAIL line.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include "support/blocks.hpp"
#include "wider/miner.hpp"
#include "wider/node.hpp"
#include "wider/overlay.hpp"
#include "wider/sim.hpp"
#include "wider/wallet.hpp"

using namespace wider;
using namespace wider::testing;
using Clock = std::chrono::steady_clock;

namespace {

constexpr int kHostPrecondition = 77;

struct Outcome {
  bool pass = false;
  std::string detail;
  /// The criterion presumes hardware this host lacks.
  bool host_limited = false;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::optional<ErrorCode> attempt(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

SubchainFragment slice(const Account& a, std::uint64_t from, std::uint64_t to) {
  return {a.address(), from,
          std::vector<SubchainTx>(a.txs.begin() + static_cast<std::ptrdiff_t>(from),
                                  a.txs.begin() + static_cast<std::ptrdiff_t>(to))};
}

// 1 ------------------------------------------------------------------------

Outcome conservation_suite() {
  const auto t0 = Clock::now();
  int held = 0;
  std::string failures;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 rng(seed);
    SimConfig c;
    c.seed = seed;
    c.accounts = 200 + rng() % 801;
    c.block_size = kBlockOverhead + 20 * kRecordSize;
    // odd seeds stay under the 20-record capacity, even seeds go over it
    c.width = seed % 2 ? 1 + rng() % 20 : 21 + rng() % 40;
    c.avg_txs = 1 + rng() % 2;
    c.blocks = 30 + rng() % 71;
    c.interval_s = 15;
    try {
      const SimReport r = run_sim(c);
      if (r.conservation.holds() && r.blocks.size() == c.blocks) {
        ++held;
      } else {
        failures += fmt(" seed %llu off by %lld;", static_cast<unsigned long long>(seed),
                        static_cast<long long>(r.conservation.genesis + r.conservation.subsidies -
                                               r.conservation.balances - r.conservation.in_flight -
                                               r.conservation.unclaimed_coinbase));
      }
    } catch (const std::exception& e) {
      failures += fmt(" seed %llu: %s;", static_cast<unsigned long long>(seed), e.what());
    }
  }
  const double secs = seconds_since(t0);
  return {held == 20 && secs < 300, fmt("%d/20 sims exact, %.1f s (budget 300 s)", held, secs) + failures};
}

// 2 ------------------------------------------------------------------------

Outcome oracle_equivalence() {
  std::mt19937_64 rng(2024);
  int equal = 0;
  std::size_t fragments = 0, longest = 0;
  for (int i = 0; i < 100; ++i) {
    FakeChain chain;
    std::vector<Account> helpers;
    for (int h = 0; h < 3; ++h) helpers.emplace_back(1000 + 10 * i + h);
    Account owner(static_cast<std::uint64_t>(i + 1));
    chain.allocations[owner.address()] = rng() % 3 ? 1 + rng() % 100'000 : 0;
    const std::size_t length = 1 + rng() % 200;
    grow_random_chain(owner, length, chain, rng, helpers);
    longest = std::max(longest, length);

    std::vector<std::uint64_t> cuts{0, length};
    for (std::size_t k = rng() % 6; k > 0; --k) cuts.push_back(rng() % (length + 1));
    std::sort(cuts.begin(), cuts.end());

    SubchainState composed = SubchainState::genesis(owner.address(), chain.genesis_allocation(owner.address()));
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      composed = verify_fragment(composed, slice(owner, cuts[k], cuts[k + 1]), chain);
      ++fragments;
    }
    if (composed == replay(owner.address(), owner.txs, chain)) ++equal;
  }
  return {equal == 100, fmt("%d/100 subchains equal field-for-field (%zu fragments, longest %zu txs)", equal,
                            fragments, longest)};
}

// 3 ------------------------------------------------------------------------

struct Corpus {
  struct Row {
    int attacks = 0, caught = 0, controls = 0, accepted = 0;
  };
  std::map<std::string, Row> rows;
  std::vector<std::string> misses;

  void attack(const std::string& kind, ErrorCode expected, std::optional<ErrorCode> got) {
    auto& r = rows[kind];
    ++r.attacks;
    if (got == expected) {
      ++r.caught;
    } else {
      misses.push_back(kind + " gave " + (got ? std::string(to_string(*got)) : "success"));
    }
  }
  void control(const std::string& kind, bool ok) {
    auto& r = rows[kind];
    ++r.controls;
    if (ok) {
      ++r.accepted;
    } else {
      misses.push_back(kind + " control refused");
    }
  }
  void control(const std::string& kind, std::optional<ErrorCode> got) {
    control(kind, !got.has_value());
    if (got) misses.back() += std::string(" with ") + std::string(to_string(*got));
  }
};

/// A funded payer whose send to `payee` is confirmed by a block `depth` deep.
struct Transfer {
  FakeChain chain;
  Account payer, payee;
  SendTx send;
  Hash256 block;

  Transfer(std::uint64_t n, std::uint64_t amount, std::uint64_t depth = 6) : payer(n), payee(n + 1) {
    chain.allocations[payer.address()] = amount + 1000;
    send = payer.send(payee.address(), amount);
    chain.publish(send);
    block = chain.add_block(1, {{payer.address(), 1}});
    chain.tip_height = depth;
  }
  SubchainState payee_state() const { return SubchainState::genesis(payee.address()); }
};

void subchain_corpus(Corpus& c, std::mt19937_64& rng, std::uint64_t k) {
  const std::uint64_t base = 100 + 10 * k;

  {  // overspend
    FakeChain chain;
    Account a(base);
    const std::uint64_t funds = 100 + rng() % 10'000;
    chain.allocations[a.address()] = funds;
    std::uint64_t left = funds;
    for (int i = static_cast<int>(rng() % 4); i > 0; --i) {
      const std::uint64_t amt = 1 + rng() % (left / 4 + 1);
      a.send(Address::filled(9), amt);
      left -= amt;
    }
    Account bad = a, good = a;
    bad.send(Address::filled(9), left + 1 + rng() % 100);
    good.send(Address::filled(9), left);
    c.attack("overspend", ErrorCode::InsufficientBalance, attempt([&] { replay(bad.address(), bad.txs, chain); }));
    c.control("overspend", attempt([&] { replay(good.address(), good.txs, chain); }));
  }
  {  // double claim of a send, or of a coinbase
    Transfer t(base + 1, 1 + rng() % 500);
    if (k % 2 == 0) {
      Account bad = t.payee;
      bad.claim(t.send, t.block);
      Account good = bad;
      bad.claim(t.send, t.block);
      SendTx second = t.payer.send(t.payee.address(), 7);
      t.chain.publish(second);
      Hash256 b2 = t.chain.add_block(2, {{t.payer.address(), 2}});
      t.chain.tip_height = 8;
      good.claim(second, b2);
      c.attack("double claim", ErrorCode::DoubleClaim, attempt([&] { replay(bad.address(), bad.txs, t.chain); }));
      c.control("double claim", attempt([&] { replay(good.address(), good.txs, t.chain); }));
    } else {
      Hash256 cb1 = t.chain.add_block(2, {}, t.payee.address());
      Hash256 cb2 = t.chain.add_block(3, {}, t.payee.address());
      t.chain.tip_height = 9;
      Account bad = t.payee;
      bad.claim_coinbase(cb1, t.chain.subsidy);
      Account good = bad;
      bad.claim_coinbase(cb1, t.chain.subsidy);
      good.claim_coinbase(cb2, t.chain.subsidy);
      c.attack("double claim", ErrorCode::DoubleClaim, attempt([&] { replay(bad.address(), bad.txs, t.chain); }));
      c.control("double claim", attempt([&] { replay(good.address(), good.txs, t.chain); }));
    }
  }
  {  // wrong recipient
    Transfer t(base + 3, 1 + rng() % 500);
    Account thief(base + 5);
    thief.claim(t.send, t.block);
    Account good = t.payee;
    good.claim(t.send, t.block);
    c.attack("wrong recipient", ErrorCode::WrongRecipient,
             attempt([&] { replay(thief.address(), thief.txs, t.chain); }));
    c.control("wrong recipient", attempt([&] { replay(good.address(), good.txs, t.chain); }));
  }
  {  // amount mismatch
    const std::uint64_t amount = 2 + rng() % 500;
    Transfer t(base + 6, amount);
    Account bad = t.payee, good = t.payee;
    const std::uint64_t claimed = rng() % 2 ? amount + 1 + rng() % 50 : amount - 1 - rng() % (amount - 1);
    bad.claim_raw(t.payer.address(), t.send.tx_hash, t.block, claimed);
    good.claim(t.send, t.block);
    c.attack("amount mismatch", ErrorCode::AmountMismatch, attempt([&] { replay(bad.address(), bad.txs, t.chain); }));
    c.control("amount mismatch", attempt([&] { replay(good.address(), good.txs, t.chain); }));
  }
  {  // immature claim, at the state transform and in the wallet
    const std::uint64_t shallow = 1 + rng() % 5;
    Transfer t(base + 7, 1 + rng() % 500, shallow);
    Account claimant = t.payee;
    claimant.claim(t.send, t.block);
    c.attack("immature claim", ErrorCode::UnconfirmedSend,
             attempt([&] { replay(claimant.address(), claimant.txs, t.chain); }));
    t.chain.tip_height = 6 + rng() % 5;
    c.control("immature claim", attempt([&] { replay(claimant.address(), claimant.txs, t.chain); }));

    KeyPair key = keygen(seed_for(base + 8));
    AccountView v;
    v.address = key.address;
    v.head = SubchainState::genesis(key.address);
    Inflow in{t.payer.address(), t.send.tx_hash, t.send.amount, t.block, shallow};
    c.attack("immature claim", ErrorCode::Immature, attempt([&] { build_claim(v, in, key, 1); }));
    in.depth = 6;
    c.control("immature claim", attempt([&] { build_claim(v, in, key, 1); }));
  }
  {  // owner fork below the confirmation freeze
    FakeChain chain;
    Account a(base + 9);
    chain.allocations[a.address()] = 1'000'000;
    const std::uint64_t length = 4 + rng() % 8;
    for (std::uint64_t i = 0; i < length; ++i) a.send(Address::filled(3), 1 + rng() % 100);
    const std::uint64_t confirmed = 2 + rng() % (length - 2);
    const SubchainState base_state =
        mark_confirmed(replay(a.address(), std::span(a.txs).first(confirmed), chain), confirmed);
    const std::span<const SubchainTx> tail(a.txs.begin() + static_cast<std::ptrdiff_t>(confirmed), a.txs.end());

    auto fork_at = [&](std::uint64_t height) {
      Account f = a;
      f.txs.resize(height);
      f.clock += 1000;
      while (f.height() <= length) f.send(Address::filled(4), 1);
      return slice(f, height, f.height());
    };
    const std::uint64_t below = rng() % confirmed;
    c.attack("below-freeze fork", ErrorCode::ConfirmedFrozen,
             attempt([&] { try_replace_tail(base_state, tail, below, fork_at(below), chain); }));
    const std::uint64_t at = confirmed + rng() % (length - confirmed + 1);
    c.control("below-freeze fork", attempt([&] { try_replace_tail(base_state, tail, at, fork_at(at), chain); }));
  }
}

void node_corpus(Corpus& c, std::mt19937_64& rng, std::uint64_t k) {
  const std::uint64_t base = 5000 + 50 * k;
  const std::size_t cap = 1 + rng() % 5;
  std::vector<Account> payers;
  ChainParams params;
  params.block_size_limit = kBlockOverhead + cap * kRecordSize;
  for (std::size_t i = 0; i <= cap; ++i) {
    payers.emplace_back(base + i);
    params.allocations.emplace_back(payers.back().address(), 1000);
  }
  Node node(params, ShardAssignment{});
  std::uint64_t ts = 1;
  auto next = [&](std::vector<ConfirmationRecord> recs) {
    return mine_block(node.view().tip(), node.view().tip_height() + 1, std::move(recs), Address::filled(0xcc), ts++);
  };
  auto rejected_with = [&](const MainBlock& b) -> std::optional<ErrorCode> {
    auto r = node.ingest_block(b);
    if (r.status == ChainState::Status::Connected) return std::nullopt;
    return r.error ? std::optional(r.error->code()) : std::optional(ErrorCode::InvariantViolation);
  };

  {  // forged duplicate hash
    Account& a = payers[0];
    SendTx s = a.send(Address::filled(7), 1 + rng() % 50);
    c.control("forged duplicate hash", node.accept_pending_tx(s) == TxOutcome::Accepted);
    SendTx forged = s;
    forged.amount += 1 + rng() % 10;
    c.attack("forged duplicate hash", ErrorCode::DuplicateHashConflict,
             attempt([&] { node.accept_pending_tx(forged); }));
  }
  for (std::size_t i = 1; i <= cap; ++i) node.accept_pending_tx(payers[i].send(Address::filled(7), 1));

  std::vector<ConfirmationRecord> all;
  for (const auto& p : payers) all.push_back(record_of(p));
  {  // oversize: cap + 1 records where cap fit
    c.attack("oversize block", ErrorCode::Oversize, rejected_with(next(all)));
    std::vector<ConfirmationRecord> fits(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(cap));
    MainBlock ok = next(fits);
    // bad proof of work on a copy of the block that is about to be accepted
    MainBlock weak = ok;
    do {
      ++weak.header.nonce;
    } while (meets_target(weak.hash(), weak.header.difficulty_bits));
    c.attack("bad pow", ErrorCode::BadPoW, rejected_with(weak));
    MainBlock wrong_bits = ok;
    wrong_bits.header.difficulty_bits = 0x2000ffff;
    wrong_bits = *seal(wrong_bits);
    c.attack("bad pow", ErrorCode::BadPoW, rejected_with(wrong_bits));
    c.control("oversize block", rejected_with(ok));
    c.control("bad pow", node.view().tip() == ok.hash());
  }
  {  // stale confirmation: the same tip again
    Account& a = payers[0];
    c.attack("stale confirmation", ErrorCode::StaleConfirmation, rejected_with(next({record_of(a)})));
    node.accept_pending_tx(a.send(Address::filled(7), 1));
    c.control("stale confirmation", rejected_with(next({record_of(a)})));
  }
  {  // overspend carried in a block: the node holds the honest tail, the block lies
    Account& a = payers[cap];
    Account liar = a;
    liar.send(Address::filled(8), 10'000);
    Node other(params, ShardAssignment{});
    other.set_remote(
        [&](const Address& addr, std::uint64_t from, std::uint64_t to) {
          return addr == liar.address() ? slice(liar, from, to) : node.serve_fragment(addr, from, to);
        },
        [&](const Address& addr, const Hash256& hash) { return node.serve_send(addr, hash); });
    for (const auto& h : node.view().canonical_chain()) {
      if (h != node.view().genesis_hash()) other.ingest_block(*node.view().find(h));
    }
    MainBlock lie = mine_block(other.view().tip(), other.view().tip_height() + 1, {record_of(liar)}, {}, ts++);
    auto r = other.ingest_block(lie);
    c.attack("overspend", ErrorCode::InsufficientBalance,
             r.status == ChainState::Status::Connected ? std::nullopt : std::optional(r.error->code()));
  }
}

Outcome safety_rejections() {
  Corpus c;
  std::mt19937_64 rng(99);
  for (std::uint64_t k = 0; k < 12; ++k) {
    subchain_corpus(c, rng, k);
    node_corpus(c, rng, k);
  }
  int attacks = 0, caught = 0, controls = 0, accepted = 0;
  std::string per_kind;
  for (const auto& [kind, r] : c.rows) {
    attacks += r.attacks;
    caught += r.caught;
    controls += r.controls;
    accepted += r.accepted;
    per_kind += fmt(" %s %d/%d;", kind.c_str(), r.caught, r.attacks);
  }
  std::string detail = fmt("%d/%d attacks rejected with the expected error, %d/%d controls accepted;", caught,
                           attacks, accepted, controls) +
                       per_kind;
  for (const auto& m : c.misses) detail += " MISS " + m + ";";
  return {caught == attacks && accepted == controls && c.rows.size() == 10, detail};
}

// 4 ------------------------------------------------------------------------

Outcome saturation_law() {
  constexpr std::size_t kCap = 20;
  bool ok = true;
  std::string detail;
  ChainParams p;
  p.block_size_limit = kBlockOverhead + kCap * kRecordSize + 59;  // the spare 59 bytes cannot hold a record
  ok &= p.capacity() == kCap;
  p.block_size_limit = 1'000'000;
  ok &= p.capacity() == 16'664;
  p.block_size_limit = 40'000;
  ok &= p.capacity() == 664;

  for (std::size_t avg : {1, 2}) {
    for (std::size_t w : {1, 7, 20, 21, 33, 60}) {
      SimConfig c;
      c.accounts = 150;
      c.width = w;
      c.avg_txs = avg;
      c.block_size = kBlockOverhead + kCap * kRecordSize + 59;
      c.interval_s = 15;
      c.blocks = 10;
      const SimReport r = run_sim(c);
      const std::size_t per_block = std::min(w, kCap);
      bool row_ok = r.capacity == kCap;
      for (const auto& b : r.blocks) row_ok &= b.records == per_block && b.sends == per_block * avg;
      row_ok &= r.total_sends == per_block * avg * c.blocks;
      const double expected = static_cast<double>(per_block * avg) / static_cast<double>(c.interval_s);
      row_ok &= std::abs(r.tps - expected) <= 1e-12 * expected;
      detail += fmt(" W=%zu a=%zu tps %.4f%s;", w, avg, r.tps, row_ok ? "" : " MISMATCH");
      ok &= row_ok;
    }
  }
  const VerifyBench floor = bench_verify(4000, {4}, 3);
  const double rate = 4000 / floor.rows.front().seconds;
  ok &= rate > 1000 && floor.rows.front().valid == 4000;
  return {ok, fmt("capacity law holds (20, 16664, 664); verify floor %.0f tx/s with 4 workers;", rate) + detail};
}

// 5 ------------------------------------------------------------------------

Outcome parallel_verification() {
  const auto t0 = Clock::now();
  const VerifyBench b = bench_verify(10'000, {1, 4}, 5);
  const double t1 = b.rows[0].seconds, t4 = b.rows[1].seconds;
  const double ratio = t4 / t1;
  const double secs = seconds_since(t0);
  const unsigned threads = std::thread::hardware_concurrency();
  Outcome o{ratio <= 0.6 && b.identical_verdicts && secs < 120,
            fmt("t(1)=%.3f s t(4)=%.3f s ratio %.2f (limit 0.60), verdicts %s, %.1f s total, host threads %u", t1, t4,
                ratio, b.identical_verdicts ? "identical" : "DIFFER", secs, threads)};
  if (!o.pass && threads < 4) {
    o.host_limited = true;
    o.detail += "; the criterion presumes at least 4 cores";
  }
  return o;
}

// 6 ------------------------------------------------------------------------

Outcome storage_sharding() {
  SimConfig c;
  c.seed = 6;
  c.accounts = 2400;
  c.width = 400;
  c.blocks = 8;
  c.nodes = 7;
  const auto rows = bench_storage(c);
  const double half = double(rows[1].subchain_bytes) / double(rows[0].subchain_bytes);
  const double quarter = double(rows[2].subchain_bytes) / double(rows[0].subchain_bytes);
  const bool main_equal = rows[0].main_bytes == rows[1].main_bytes && rows[1].main_bytes == rows[2].main_bytes;
  // Shares of the seed-6 account addresses under "0" and "00", derived
  // independently with Python's hashlib and cryptography packages.
  constexpr double kShareHalf = 1195.0 / 2400, kShareQuarter = 584.0 / 2400;
  const bool tracks_shares = std::abs(half - kShareHalf) <= 0.05 && std::abs(quarter - kShareQuarter) <= 0.05;
  return {half >= 0.40 && half <= 0.60 && quarter >= 0.15 && quarter <= 0.35 && main_equal && tracks_shares,
          fmt("2400 accounts (address shares %.3f / %.3f): half %.3f, quarter %.3f of %llu full-node subchain bytes; main bytes %s (%llu)",
              kShareHalf, kShareQuarter, half, quarter, static_cast<unsigned long long>(rows[0].subchain_bytes), main_equal ? "identical" : "DIFFER",
              static_cast<unsigned long long>(rows[0].main_bytes))};
}

// 7 ------------------------------------------------------------------------

/// Every tree shape of `n` nodes in which a lone child takes the 0 branch,
/// encoded in preorder as child counts.
void shapes(std::size_t n, std::vector<std::vector<int>>& out) {
  std::function<std::vector<std::vector<int>>(std::size_t)> gen = [&](std::size_t size) {
    std::vector<std::vector<int>> res;
    if (size == 0) return res;
    if (size == 1) return std::vector<std::vector<int>>{{0}};
    for (auto& sub : gen(size - 1)) {
      sub.insert(sub.begin(), 1);
      res.push_back(std::move(sub));
    }
    for (std::size_t left = 1; left + 1 < size; ++left) {
      for (const auto& l : gen(left)) {
        for (const auto& r : gen(size - 1 - left)) {
          std::vector<int> s{2};
          s.insert(s.end(), l.begin(), l.end());
          s.insert(s.end(), r.begin(), r.end());
          res.push_back(std::move(s));
        }
      }
    }
    return res;
  };
  out = gen(n);
}

TreeTopology build(const std::vector<int>& shape) {
  TreeTopology t(2);
  std::size_t pos = 0;
  std::function<void(NodeId)> grow = [&](NodeId id) {
    const int kids = shape[pos++];
    for (int i = 0; i < kids; ++i) grow(t.join(id).id);
  };
  grow(TreeTopology::root());
  return t;
}

TreeTopology random_tree(std::size_t nodes, std::mt19937_64& rng) {
  TreeTopology t(2);
  while (t.size() < nodes) {
    const NodeId p = rng() % t.size();
    if (t.children(p).size() < 2) t.join(p);
  }
  return t;
}

/// (failed node, origin) pairs whose broadcast missed an alive node.
std::size_t sweep(const TreeTopology& t, std::size_t& broadcasts) {
  std::size_t misses = 0;
  for (NodeId dead = 0; dead < t.size(); ++dead) {
    SimTransport transport(dead);
    Overlay overlay(t, transport);
    overlay.set_alive(dead, false);
    for (NodeId origin = 0; origin < t.size(); ++origin) {
      if (origin == dead) continue;
      ++broadcasts;
      auto rep = overlay.broadcast(origin, Envelope::make(MessageKind::Hello, {static_cast<std::uint8_t>(origin)}));
      if (rep.hops.size() != t.size() - 1) ++misses;
    }
  }
  return misses;
}

Outcome broadcast_resilience() {
  const auto t0 = Clock::now();
  std::size_t trees = 0, broadcasts = 0, misses = 0;
  for (std::size_t n : {7, 15, 31}) {
    misses += sweep(TreeTopology::complete(n, 2), broadcasts);
    ++trees;
  }
  std::vector<std::vector<int>> all7;
  shapes(7, all7);
  for (const auto& s : all7) {
    misses += sweep(build(s), broadcasts);
    ++trees;
  }
  std::mt19937_64 rng(7);
  for (std::size_t n : {15, 31}) {
    for (int i = 0; i < 150; ++i) {
      misses += sweep(random_tree(n, rng), broadcasts);
      ++trees;
    }
  }
  const double secs = seconds_since(t0);
  return {misses == 0 && secs < 60 && all7.size() == 51,
          fmt("%zu trees (complete 7/15/31, all %zu shapes of 7, 300 random of 15 and 31), %zu broadcasts, %zu "
              "missed an alive node, %.1f s",
              trees, all7.size(), broadcasts, misses, secs)};
}

// 8 ------------------------------------------------------------------------

std::unordered_map<Address, std::vector<ConfirmationEntry>> scan_index(const ChainView& view) {
  std::unordered_map<Address, std::vector<ConfirmationEntry>> out;
  for (const auto& h : view.canonical_chain()) {
    if (h == view.genesis_hash()) continue;
    const MainBlock* b = view.find(h);
    for (const auto& r : b->confirmations) out[r.address].push_back({b->header.height, h, r.tip_hash, r.tip_height});
  }
  return out;
}

Outcome reorg_correctness() {
  std::vector<std::string> failed;
  int checks = 0;
  auto expect = [&](bool cond, const std::string& what) {
    ++checks;
    if (!cond) failed.push_back(what);
  };
  const Address miner_a = Address::filled(0xa1), miner_b = Address::filled(0xb1);

  // Part one, maturity 6: a 2-block reorg orphans the block confirming a send.
  {
    Account alice(1), bob(2);
    ChainParams params;
    params.allocations = {{alice.address(), 1000}};
    Node node(params, ShardAssignment{});
    auto index_ok = [&] { return node.view().confirmation_index() == scan_index(node.view()); };
    std::uint64_t ts = 1;

    MainBlock p1 = mine_block(node.view().tip(), 1, {}, miner_a, ts++);
    node.ingest_block(p1);
    SendTx s = alice.send(bob.address(), 40);
    expect(node.accept_pending_tx(s) == TxOutcome::Accepted, "send accepted");
    MainBlock a2 = mine_block(p1.hash(), 2, {record_of(alice)}, miner_a, ts++);
    MainBlock a3 = mine_block(a2.hash(), 3, {}, miner_a, ts++);
    expect(node.ingest_block(a2).status == ChainState::Status::Connected, "a2 connects");
    expect(node.ingest_block(a3).status == ChainState::Status::Connected, "a3 connects");
    expect(index_ok(), "index before reorg");

    Account bob_on_a = bob;
    ReceiveTx claim_a = bob_on_a.claim(s, a2.hash());
    expect(attempt([&] { node.accept_pending_tx(claim_a); }) == ErrorCode::UnconfirmedSend,
           "claim on a block 2 deep refused");

    MainBlock b2 = mine_block(p1.hash(), 2, {record_of(alice)}, miner_b, 100);
    MainBlock b3 = mine_block(b2.hash(), 3, {}, miner_b, 101);
    MainBlock b4 = mine_block(b3.hash(), 4, {}, miner_b, 102);
    expect(node.ingest_block(b2).status == ChainState::Status::SideBranch, "b2 side branch");
    expect(node.ingest_block(b3).status == ChainState::Status::SideBranch, "b3 ties, first seen stays");
    auto r = node.ingest_block(b4);
    expect(r.status == ChainState::Status::Connected && r.reorg.disconnected.size() == 2, "b4 reorgs two blocks");
    expect(!node.view().is_canonical(a2.hash()) && !node.view().is_canonical(a3.hash()), "a-branch orphaned");
    expect(index_ok(), "index after reorg");
    expect(node.view().latest_confirmation(alice.address())->block_hash == b2.hash(), "alice re-confirmed by b2");
    expect(node.confirmed_state(alice.address())->balance == 960, "alice debited once");

    Account bob_on_b = bob;
    ReceiveTx claim_b = bob_on_b.claim(s, b2.hash());
    std::uint64_t h = 5;
    Hash256 tip = b4.hash();
    for (; h <= 6; ++h) {  // b2 reaches depth 4, then 5
      MainBlock b = mine_block(tip, h, {}, miner_b, ts++);
      node.ingest_block(b);
      tip = b.hash();
    }
    expect(node.view().depth(b2.hash()) == 5u, "b2 at depth 5");
    expect(attempt([&] { node.accept_pending_tx(claim_b); }) == ErrorCode::UnconfirmedSend, "depth 5 refused");
    MainBlock b7 = mine_block(tip, 7, {}, miner_b, ts++);
    node.ingest_block(b7);
    expect(node.view().depth(b2.hash()) == 6u, "b2 at depth 6");
    expect(attempt([&] { node.accept_pending_tx(claim_a); }) == ErrorCode::UnconfirmedSend,
           "claim on orphaned block refused at any depth");
    expect(node.accept_pending_tx(claim_b) == TxOutcome::Accepted, "depth 6 claim accepted");
    expect(node.ingest_block(mine_block(b7.hash(), 8, {record_of(bob_on_b)}, miner_b, ts++)).status ==
               ChainState::Status::Connected,
           "claim confirmed");
    expect(node.confirmed_state(bob.address())->balance == 40, "bob credited");
    expect(index_ok(), "index at the end of part one");
  }

  // Part two, maturity 1: a claim that was already confirmed loses its
  // backing when the reorg orphans the block it references.
  {
    Account alice(1), bob(2);
    ChainParams params;
    params.maturity = 1;
    params.allocations = {{alice.address(), 1000}};
    Node node(params, ShardAssignment{});
    std::uint64_t ts = 1;
    SendTx s = alice.send(bob.address(), 40);
    node.accept_pending_tx(s);
    MainBlock a1 = mine_block(node.view().tip(), 1, {record_of(alice)}, miner_a, ts++);
    node.ingest_block(a1);
    Account bob_a = bob;
    ReceiveTx claim = bob_a.claim(s, a1.hash());
    expect(node.accept_pending_tx(claim) == TxOutcome::Accepted, "claim at depth 1 accepted under maturity 1");
    MainBlock a2 = mine_block(a1.hash(), 2, {record_of(bob_a)}, miner_a, ts++);
    expect(node.ingest_block(a2).status == ChainState::Status::Connected, "claim confirmed on a-branch");
    expect(node.confirmed_state(bob.address())->balance == 40, "bob credited on a-branch");

    MainBlock b1 = mine_block(node.view().genesis_hash(), 1, {}, miner_b, 100);
    MainBlock b2 = mine_block(b1.hash(), 2, {}, miner_b, 101);
    MainBlock b3 = mine_block(b2.hash(), 3, {}, miner_b, 102);
    node.ingest_block(b1);
    node.ingest_block(b2);
    auto r = node.ingest_block(b3);
    expect(r.status == ChainState::Status::Connected && r.reorg.disconnected.size() == 2, "2-block reorg");
    expect(node.confirmed_state(bob.address())->balance == 0, "bob's credit rolled back");
    expect(node.confirmed_state(alice.address())->tip_height == 0, "alice's confirmation rolled back");
    expect(node.view().confirmation_index() == scan_index(node.view()), "index after part two reorg");

    auto ctx = node.claim_context();
    expect(attempt([&] { replay(bob.address(), bob_a.txs, ctx); }) == ErrorCode::UnconfirmedSend,
           "orphaned claim invalid against the new canonical chain");
    // the node dropped the invalid claim from its tail; a peer still serves it
    expect(node.head_state(bob.address())->tip_height == 0, "orphaned claim dropped from the pending tail");
    node.set_remote([&](const Address&, std::uint64_t from, std::uint64_t to) { return slice(bob_a, from, to); },
                    [&](const Address& a, const Hash256& h) { return node.serve_send(a, h); });
    MainBlock lie = mine_block(b3.hash(), 4, {{bob.address(), claim.tx_hash, 1}}, miner_b, ts++);
    auto lr = node.ingest_block(lie);
    expect(lr.status == ChainState::Status::Rejected && lr.error && lr.error->code() == ErrorCode::UnconfirmedSend,
           fmt("block re-confirming the orphaned claim rejected (status %d, %s)", static_cast<int>(lr.status),
               lr.error ? lr.error->what() : "no error"));
  }

  std::string detail = fmt("%d/%d checks hold", checks - static_cast<int>(failed.size()), checks);
  for (const auto& f : failed) detail += "; FAILED " + f;
  return {failed.empty(), detail};
}

// 9 ------------------------------------------------------------------------

Outcome determinism() {
  std::vector<SimConfig> configs;
  SimConfig a;
  a.accounts = 120;
  a.width = 15;
  a.avg_txs = 2;
  a.block_size = kBlockOverhead + 10 * kRecordSize;
  a.interval_s = 15;
  a.blocks = 15;
  configs.push_back(a);
  SimConfig b = a;
  b.seed = 17;
  b.nodes = 15;
  b.neighbors = 3;
  b.latency = {5, 150};
  configs.push_back(b);
  SimConfig e;
  apply_profile(e, "ethereum-like");
  e.width = 600;
  e.blocks = 3;
  configs.push_back(e);
  SimConfig skew = a;
  skew.address_prefix = "01";
  skew.accounts = 60;
  configs.push_back(skew);

  int same = 0;
  std::set<std::string> distinct;
  for (const auto& c : configs) {
    const std::string first = to_json(run_sim(c)).dump();
    const std::string second = to_json(run_sim(c)).dump();
    if (first == second) ++same;
    distinct.insert(first);
  }
  return {same == static_cast<int>(configs.size()) && distinct.size() == configs.size(),
          fmt("%d/%zu configurations byte-identical across repeated runs", same, configs.size())};
}

struct Criterion {
  int id;
  const char* name;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "conservation suite", conservation_suite},
    {2, "oracle equivalence", oracle_equivalence},
    {3, "safety rejections", safety_rejections},
    {4, "saturation law", saturation_law},
    {5, "parallel verification", parallel_verification},
    {6, "storage sharding", storage_sharding},
    {7, "broadcast resilience", broadcast_resilience},
    {8, "reorg correctness", reorg_correctness},
    {9, "determinism", determinism},
};

}  // namespace

int main(int argc, char** argv) {
  const int only = argc > 1 ? std::atoi(argv[1]) : 0;
  bool all_pass = true, only_host_limited = true;
  for (const auto& c : kCriteria) {
    if (only && c.id != only) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw ") + e.what()};
    }
    std::cout << "criterion " << c.id << " " << (o.pass ? "PASS" : "FAIL") << " " << c.name << ": " << o.detail
              << std::endl;
    all_pass &= o.pass;
    if (!o.pass) only_host_limited &= o.host_limited;
  }
  if (all_pass) return 0;
  return only && only_host_limited ? kHostPrecondition : 1;
}
