#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <random>

#include "support/fixtures.hpp"
#include "wider/mainchain.hpp"

using namespace wider;
using namespace wider::testing;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::Io;
}

MainBlock mine(const Hash256& parent, std::uint64_t height, std::vector<ConfirmationRecord> records,
               Address miner = {}, std::uint64_t timestamp = 1) {
  MainBlock b;
  b.header.parent_block_hash = parent;
  b.header.height = height;
  b.header.timestamp = timestamp;
  b.header.miner_address = miner;
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& c) { return a.address < c.address; });
  b.confirmations = std::move(records);
  b.header.confirmations_root = confirmations_root(b.confirmations);
  return *seal(std::move(b));
}

/// A view plus every subchain in full, with confirmed states tracked the way
/// a node hosting all shards would.
struct Ledger {
  ChainView view;
  std::map<Address, std::vector<SubchainTx>> chains;
  std::map<Address, SubchainState> confirmed;

  explicit Ledger(ChainParams params) : view(std::move(params)) {}

  ViewClaimContext context() const {
    return ViewClaimContext(view, [this](const Address& sender, const Hash256& h) -> std::optional<SendTx> {
      auto it = chains.find(sender);
      if (it == chains.end()) return std::nullopt;
      for (const auto& tx : it->second) {
        if (const auto* s = std::get_if<SendTx>(&tx); s && s->tx_hash == h) return *s;
      }
      return std::nullopt;
    });
  }

  FragmentShardOracle oracle() {
    return FragmentShardOracle(
        [this](const Address& a) -> std::optional<SubchainState> {
          auto it = confirmed.find(a);
          return it != confirmed.end() ? it->second : SubchainState::genesis(a, view.genesis_allocation(a));
        },
        [this](const Address& a, std::uint64_t from, std::uint64_t to) -> std::optional<SubchainFragment> {
          auto& txs = chains[a];
          if (to > txs.size()) return std::nullopt;
          return SubchainFragment{a, from, {txs.begin() + static_cast<std::ptrdiff_t>(from),
                                            txs.begin() + static_cast<std::ptrdiff_t>(to)}};
        });
  }

  void publish(const Account& a) { chains[a.address()] = a.txs; }

  ConfirmationRecord record_for(const Account& a) const { return {a.address(), a.tip(), a.height()}; }

  /// Validates a block on the tip, then extends and commits the deltas.
  std::vector<RecordDelta> submit(const MainBlock& block) {
    auto ctx = context();
    auto o = oracle();
    auto deltas = validate_block(block, view, o, ctx);
    view.extend(block);
    for (const auto& d : deltas) {
      if (d.state) confirmed[d.address] = *d.state;
    }
    return deltas;
  }

  MainBlock next(std::vector<ConfirmationRecord> records, Address miner = {}) const {
    return mine(view.tip(), view.tip_height() + 1, std::move(records), miner);
  }
};

/// Confirmation index rebuilt by scanning the canonical chain from genesis.
std::unordered_map<Address, std::vector<ConfirmationEntry>> scan_index(const ChainView& view) {
  std::unordered_map<Address, std::vector<ConfirmationEntry>> out;
  for (const auto& h : view.canonical_chain()) {
    if (h == view.genesis_hash()) continue;
    const MainBlock* b = view.find(h);
    for (const auto& r : b->confirmations) out[r.address].push_back({b->header.height, h, r.tip_hash, r.tip_height});
  }
  return out;
}

}  // namespace

TEST_CASE("compact target expansion") {
  // 0x7fffff * 256^(0x20 - 3): top byte 0x7f, then 0xffff, then 29 zero bytes
  CHECK(target(0x207fffff) == U256("0x7fffff0000000000000000000000000000000000000000000000000000000000"));
  CHECK(target(0x1d00ffff) == U256("0x00000000ffff0000000000000000000000000000000000000000000000000000"));
  CHECK(target(0x03000001) == 1);
  CHECK(target(0x207ffffe) == 2 * target(0x203fffff));
  CHECK(target(0x20200000) * 2 == target(0x20400000));
  CHECK(block_work(0x207fffff) == 2);

  CHECK(code_of([] { target(0x20000000); }) == ErrorCode::MalformedBits);
  CHECK(code_of([] { target(0x02010000); }) == ErrorCode::MalformedBits);
  CHECK(code_of([] { target(0x21010000); }) == ErrorCode::MalformedBits);
  CHECK(code_of([] { target(0x20800001); }) == ErrorCode::MalformedBits);
}

TEST_CASE("capacity per block limit") {
  ChainParams p;
  CHECK(p.capacity() == 16664);
  p.block_size_limit = 40'000;
  CHECK(p.capacity() == 664);
  p.block_size_limit = kBlockOverhead + 3 * kRecordSize;
  CHECK(p.capacity() == 3);
  CHECK(kHeaderSize == 112);
  CHECK(kRecordSize == 60);
}

TEST_CASE("coinbase schedule") {
  ChainParams p;
  CHECK(coinbase_amount(p, 1) == 50ULL * 100'000'000ULL);
  CHECK(coinbase_amount(p, 1'000'000) == 50ULL * 100'000'000ULL);
  CHECK(coinbase_amount(p, 0) == 0);
  p.subsidy = 7;
  CHECK(coinbase_amount(p, 12) == 7);
}

TEST_CASE("genesis hash is pinned for the default configuration") {
  // hashlib double SHA-256 over the 112-byte header, nonce swept from 0
  MainBlock g = make_genesis(ChainParams{});
  CHECK(g.header.nonce == 1);
  CHECK(g.hash().hex() == "1ffb73705fe77e3f61148f1fcc2d03e210292ab14c6c907336ea0c84f608f4ba");

  ChainParams dup;
  dup.allocations = {{Address::filled(1), 5}, {Address::filled(1), 6}};
  CHECK(code_of([&] { make_genesis(dup); }) == ErrorCode::ConfigInvalid);
}

TEST_CASE("block encoding round-trips") {
  MainBlock b = mine(Hash256::filled(3), 9, {{Address::filled(1), Hash256::filled(2), 4}, {Address::filled(5), Hash256::filled(6), 7}});
  Bytes enc = encode_block(b);
  CHECK(enc.size() == b.encoded_size());
  CHECK(enc.size() == 116 + 2 * 60);
  CHECK(decode_block(enc) == b);
  CHECK(encode_header(b.header).size() == 112);
  enc.pop_back();
  CHECK(code_of([&] { decode_block(enc); }) == ErrorCode::DecodeError);
}

TEST_CASE("seal") {
  MainBlock b;
  b.header.height = 1;
  b.header.confirmations_root = confirmations_root({});

  SUBCASE("easiest target seals in a handful of attempts") {
    int total = 0;
    for (std::uint64_t ts = 0; ts < 200; ++ts) {
      b.header.timestamp = ts;
      auto sealed = seal(b);
      REQUIRE(sealed);
      CHECK(meets_target(sealed->hash(), kEasiestBits));
      total += static_cast<int>(sealed->header.nonce) + 1;
    }
    // geometric with p ~ 1/2: mean about 2 attempts
    CHECK(total < 200 * 4);
  }
  SUBCASE("already satisfying nonce is returned unchanged") {
    MainBlock once = *seal(b);
    MainBlock again = *seal(once);
    CHECK(again == once);
    CHECK(again.hash() == once.hash());
  }
  SUBCASE("cancellation yields no block") {
    b.header.difficulty_bits = 0x03000001;  // practically unreachable
    std::stop_source stop;
    stop.request_stop();
    CHECK_FALSE(seal(b, stop.get_token(), 16).has_value());
  }
}

TEST_CASE("block structure checks") {
  ChainParams p;
  p.block_size_limit = kBlockOverhead + 2 * kRecordSize;
  ConfirmationRecord r1{Address::filled(1), Hash256::filled(1), 1};
  ConfirmationRecord r2{Address::filled(2), Hash256::filled(2), 1};
  ConfirmationRecord r3{Address::filled(3), Hash256::filled(3), 1};

  CHECK_NOTHROW(check_block_structure(mine({}, 1, {r1, r2}), p));
  CHECK(code_of([&] { check_block_structure(mine({}, 1, {r1, r2, r3}), p); }) == ErrorCode::Oversize);

  MainBlock unsorted;
  unsorted.confirmations = {r2, r1};
  unsorted.header.confirmations_root = confirmations_root(unsorted.confirmations);
  unsorted = *seal(unsorted);
  CHECK(code_of([&] { check_block_structure(unsorted, p); }) == ErrorCode::UnsortedRecords);

  MainBlock dup;
  dup.confirmations = {r1, r1};
  dup.header.confirmations_root = confirmations_root(dup.confirmations);
  dup = *seal(dup);
  CHECK(code_of([&] { check_block_structure(dup, p); }) == ErrorCode::UnsortedRecords);

  MainBlock bad_root = mine({}, 1, {r1});
  bad_root.header.confirmations_root = Hash256::filled(0xaa);
  bad_root = *seal(bad_root);
  CHECK(code_of([&] { check_block_structure(bad_root, p); }) == ErrorCode::RootMismatch);

  MainBlock unsealed = mine({}, 1, {});
  while (meets_target(unsealed.hash(), kEasiestBits)) ++unsealed.header.nonce;
  CHECK(code_of([&] { check_block_structure(unsealed, p); }) == ErrorCode::BadPoW);

  MainBlock wrong_bits;
  wrong_bits.header.difficulty_bits = 0x2000ffff;
  wrong_bits.header.confirmations_root = confirmations_root({});
  wrong_bits = *seal(wrong_bits);
  CHECK(code_of([&] { check_block_structure(wrong_bits, p); }) == ErrorCode::BadPoW);
}

TEST_CASE("validate_block") {
  Account alice(1), bob(2);
  ChainParams params;
  params.maturity = 1;
  params.allocations = {{alice.address(), 100}};
  Ledger ledger(params);

  SUBCASE("heartbeat block") {
    auto deltas = ledger.submit(ledger.next({}));
    CHECK(deltas.empty());
    CHECK(ledger.view.tip_height() == 1);
  }

  SUBCASE("confirming a fragment returns its new state; re-confirming is stale") {
    alice.send(bob.address(), 30);
    alice.send(bob.address(), 20);
    ledger.publish(alice);
    auto deltas = ledger.submit(ledger.next({ledger.record_for(alice)}));
    REQUIRE(deltas.size() == 1);
    CHECK(deltas[0].previous_height == 0);
    CHECK(deltas[0].new_height == 2);
    REQUIRE(deltas[0].state);
    CHECK(deltas[0].state->balance == 50);
    CHECK(deltas[0].state->confirmed_height == 2);
    CHECK(ledger.view.latest_confirmation(alice.address())->tip_height == 2);

    auto ctx = ledger.context();
    auto o = ledger.oracle();
    MainBlock stale = ledger.next({ledger.record_for(alice)});
    try {
      validate_block(stale, ledger.view, o, ctx);
      FAIL("expected StaleConfirmation");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::StaleConfirmation);
      CHECK(e.address() == alice.address().hex());
    }
  }

  SUBCASE("overspend is tagged with the offending address") {
    alice.send(bob.address(), 60);
    alice.send(bob.address(), 60);
    ledger.publish(alice);
    auto ctx = ledger.context();
    // the replay oracle agrees on the rejection
    CHECK(code_of([&] { replay(alice.address(), alice.txs, ctx); }) == ErrorCode::InsufficientBalance);

    auto o = ledger.oracle();
    try {
      validate_block(ledger.next({ledger.record_for(alice)}), ledger.view, o, ctx);
      FAIL("expected InsufficientBalance");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InsufficientBalance);
      CHECK(e.address() == alice.address().hex());
      CHECK(e.height() == std::optional<std::uint64_t>(2));
    }
  }

  SUBCASE("record tip hash must match the served fragment") {
    alice.send(bob.address(), 1);
    ledger.publish(alice);
    auto rec = ledger.record_for(alice);
    rec.tip_hash = Hash256::filled(0x77);
    auto ctx = ledger.context();
    auto o = ledger.oracle();
    CHECK(code_of([&] { validate_block(ledger.next({rec}), ledger.view, o, ctx); }) == ErrorCode::TipMismatch);
  }

  SUBCASE("missing fragment") {
    alice.send(bob.address(), 1);
    auto ctx = ledger.context();
    auto o = ledger.oracle();
    CHECK(code_of([&] { validate_block(ledger.next({ledger.record_for(alice)}), ledger.view, o, ctx); }) ==
          ErrorCode::PartialFetch);
  }

  SUBCASE("block must extend the canonical tip") {
    MainBlock b1 = ledger.next({});
    ledger.submit(b1);
    MainBlock sibling = mine(b1.header.parent_block_hash, 1, {}, Address::filled(9));
    auto ctx = ledger.context();
    auto o = ledger.oracle();
    CHECK(code_of([&] { validate_block(sibling, ledger.view, o, ctx); }) == ErrorCode::TipMismatch);
    CHECK(code_of([&] { validate_block(mine(Hash256::filled(4), 2, {}), ledger.view, o, ctx); }) ==
          ErrorCode::UnknownParent);
  }
}

TEST_CASE("fork choice") {
  Ledger ledger(ChainParams{});
  const Hash256 g = ledger.view.genesis_hash();

  SUBCASE("child becomes the tip") {
    MainBlock b = mine(g, 1, {});
    auto reorg = ledger.view.extend(b);
    CHECK(ledger.view.tip() == b.hash());
    CHECK_FALSE(reorg.is_reorg());
    CHECK(reorg.connected == std::vector<Hash256>{b.hash()});
    CHECK(ledger.view.depth(g) == std::optional<std::uint64_t>(2));
    CHECK(ledger.view.cumulative_work(b.hash()) == 4);
  }
  SUBCASE("equal work keeps the first seen") {
    MainBlock a = mine(g, 1, {}, Address::filled(1));
    MainBlock b = mine(g, 1, {}, Address::filled(2));
    ledger.view.extend(a);
    auto reorg = ledger.view.extend(b);
    CHECK(ledger.view.tip() == a.hash());
    CHECK(reorg.connected.empty());
    CHECK(ledger.view.contains(b.hash()));
    CHECK_FALSE(ledger.view.is_canonical(b.hash()));
  }
  SUBCASE("unknown parent") {
    CHECK(code_of([&] { ledger.view.extend(mine(Hash256::filled(1), 1, {})); }) == ErrorCode::UnknownParent);
  }
  SUBCASE("invalidation falls back to the best valid branch") {
    MainBlock a1 = mine(g, 1, {}, Address::filled(1));
    MainBlock a2 = mine(a1.hash(), 2, {}, Address::filled(1));
    MainBlock b1 = mine(g, 1, {}, Address::filled(2));
    ledger.view.extend(a1);
    ledger.view.extend(b1);
    ledger.view.extend(a2);
    ledger.view.invalidate(a1.hash());
    CHECK(ledger.view.is_invalid(a2.hash()));
    CHECK(ledger.view.best_tip() == b1.hash());
    ledger.view.set_canonical(ledger.view.best_tip());
    CHECK(ledger.view.tip() == b1.hash());
  }
}

TEST_CASE("heavier late fork reorgs and orphaned confirmations stop backing claims") {
  Account alice(1), bob(2);
  ChainParams params;
  params.maturity = 1;
  params.allocations = {{alice.address(), 100}};
  Ledger ledger(params);
  const Hash256 g = ledger.view.genesis_hash();

  SendTx s = alice.send(bob.address(), 40);
  ledger.publish(alice);
  MainBlock a = ledger.next({ledger.record_for(alice)});
  ledger.submit(a);

  bob.claim(s, a.hash());
  {
    auto ctx = ledger.context();
    CHECK(replay(bob.address(), bob.txs, ctx).balance == 40);
  }

  MainBlock b1 = mine(g, 1, {}, Address::filled(8));
  MainBlock b2 = mine(b1.hash(), 2, {}, Address::filled(8));
  CHECK_FALSE(ledger.view.extend(b1).is_reorg());
  CHECK(ledger.view.tip() == a.hash());
  Reorg reorg = ledger.view.extend(b2);
  CHECK(reorg.is_reorg());
  CHECK(reorg.disconnected == std::vector<Hash256>{a.hash()});
  CHECK(reorg.connected == std::vector<Hash256>{b1.hash(), b2.hash()});
  CHECK(ledger.view.tip() == b2.hash());
  CHECK_FALSE(ledger.view.latest_confirmation(alice.address()));
  CHECK(ledger.view.confirmation_as_of(a.hash(), alice.address())->tip_height == 1);
  CHECK_FALSE(ledger.view.confirmation_as_of(b2.hash(), alice.address()));

  auto ctx = ledger.context();
  CHECK(code_of([&] { replay(bob.address(), bob.txs, ctx); }) == ErrorCode::UnconfirmedSend);
}

TEST_CASE("confirmation index equals a from-scratch scan over random block trees") {
  std::mt19937_64 rng(1234);
  for (int round = 0; round < 20; ++round) {
    ChainView view{ChainParams{}};
    std::vector<Hash256> known{view.genesis_hash()};
    std::map<Hash256, std::uint64_t> heights{{view.genesis_hash(), 0}};
    const int blocks = 1 + static_cast<int>(rng() % 50);
    for (int i = 0; i < blocks; ++i) {
      const Hash256 parent = known[rng() % known.size()];
      std::vector<ConfirmationRecord> recs;
      for (std::uint8_t a = 1; a <= 6; ++a) {
        if (rng() % 3 == 0) recs.push_back({Address::filled(a), Hash256::filled(static_cast<std::uint8_t>(rng())), rng() % 100});
      }
      MainBlock b = mine(parent, heights[parent] + 1, recs, Address::filled(static_cast<std::uint8_t>(i)), rng());
      view.extend(b);
      known.push_back(b.hash());
      heights[b.hash()] = b.header.height;
      REQUIRE(view.confirmation_index() == scan_index(view));
      REQUIRE(view.tip() == view.best_tip());
    }
    // the canonical tip carries maximal work
    for (const auto& h : known) CHECK(view.cumulative_work(h) <= view.cumulative_work(view.tip()));
  }
}

TEST_CASE("first_confirming finds the earliest block reaching a height") {
  Ledger ledger(ChainParams{});
  Address x = Address::filled(4);
  MainBlock b1 = ledger.next({{x, Hash256::filled(1), 2}});
  ledger.view.extend(b1);
  MainBlock b2 = ledger.next({{x, Hash256::filled(2), 5}});
  ledger.view.extend(b2);
  CHECK(ledger.view.first_confirming(x, 1)->block_hash == b1.hash());
  CHECK(ledger.view.first_confirming(x, 2)->block_hash == b1.hash());
  CHECK(ledger.view.first_confirming(x, 3)->block_hash == b2.hash());
  CHECK_FALSE(ledger.view.first_confirming(x, 6));
}
