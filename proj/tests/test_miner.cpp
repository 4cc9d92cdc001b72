#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <thread>

#include "support/blocks.hpp"
#include "wider/miner.hpp"

using namespace wider;
using namespace wider::testing;

namespace {

constexpr std::uint64_t kFunds = 1'000'000;

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::Io;
}

struct PoolFixture {
  FakeChain chain;
  TxPool pool;

  explicit PoolFixture(std::size_t capacity = 100) : pool(capacity) {}

  SubchainState base(const Account& a) { return SubchainState::genesis(a.address(), kFunds); }
  void fund(const Account& a) { chain.allocations[a.address()] = kFunds; }
  bool insert(const Account& a, const SubchainTx& tx) { return pool.insert(tx, base(a), chain); }
  std::size_t insert_all(const Account& a) { return pool.insert_fragment({a.address(), 0, a.txs}, base(a), chain); }
};

}  // namespace

TEST_CASE("pool insert") {
  PoolFixture f;
  Account alice(1);
  f.fund(alice);

  SendTx s1 = alice.send(Address::filled(2), 10);
  CHECK(f.insert(alice, s1));
  REQUIRE(f.pool.find(alice.address()));
  CHECK(f.pool.find(alice.address())->txs.size() == 1);
  CHECK(f.pool.find(alice.address())->head.balance == kFunds - 10);
  CHECK_FALSE(f.insert(alice, s1));

  SendTx forged = s1;
  forged.timestamp += 1;
  CHECK(code_of([&] { f.insert(alice, forged); }) == ErrorCode::DuplicateHashConflict);

  SendTx over = alice.send(Address::filled(2), kFunds);
  CHECK(code_of([&] { f.insert(alice, over); }) == ErrorCode::InsufficientBalance);
  CHECK(f.pool.find(alice.address())->txs.size() == 1);
}

TEST_CASE("owner fork with a higher tip replaces the tail") {
  PoolFixture f;
  Account alice(1);
  f.fund(alice);
  alice.send(Address::filled(2), 1);
  alice.send(Address::filled(2), 1);
  CHECK(f.insert_all(alice) == 2);

  Account fork(1);
  fork.clock += 100;
  fork.send(Address::filled(3), 2);
  fork.send(Address::filled(3), 2);
  CHECK(code_of([&] { f.insert_all(fork); }) == ErrorCode::TailConflict);
  fork.send(Address::filled(3), 2);
  CHECK(f.insert_all(fork) == 3);
  CHECK(f.pool.find(alice.address())->head.tip_hash == fork.tip());
  CHECK(f.pool.tx_count() == 3);

  Account gap(1);
  gap.txs = fork.txs;
  gap.send(Address::filled(3), 1);
  gap.send(Address::filled(3), 1);
  CHECK(code_of([&] { f.pool.insert(gap.txs.back(), f.base(alice), f.chain); }) == ErrorCode::BadLink);
}

TEST_CASE("capacity, eviction and confirmation") {
  PoolFixture f(2);
  std::vector<Account> accounts;
  for (int i = 1; i <= 3; ++i) {
    accounts.emplace_back(i);
    f.fund(accounts.back());
  }
  for (auto& a : accounts) {
    a.send(Address::filled(9), 1);
    f.insert(a, a.txs.back());
  }
  CHECK(f.pool.size() == 2);
  CHECK(f.pool.evictions() == 1);
  CHECK(f.pool.find(accounts[0].address()) == nullptr);

  PoolFixture none(0);
  Account z(4);
  none.fund(z);
  CHECK(code_of([&] { none.insert(z, z.send(Address::filled(1), 1)); }) == ErrorCode::PoolFull);

  // confirming part of a tail keeps the rest on top of the new state
  PoolFixture g;
  Account alice(1);
  g.fund(alice);
  for (int i = 0; i < 5; ++i) alice.send(Address::filled(2), 1);
  g.insert_all(alice);
  SubchainState confirmed = mark_confirmed(replay(alice.address(), std::span(alice.txs).first(3), g.chain), 3);
  g.pool.confirm(alice.address(), confirmed, g.chain);
  CHECK(g.pool.find(alice.address())->txs.size() == 2);
  CHECK(g.pool.find(alice.address())->head.balance == kFunds - 5);
  g.pool.confirm(alice.address(), mark_confirmed(replay(alice.address(), alice.txs, g.chain), 5), g.chain);
  CHECK(g.pool.find(alice.address()) == nullptr);
  CHECK(g.pool.tx_count() == 0);
}

TEST_CASE("templates") {
  ChainParams params;
  params.block_size_limit = kBlockOverhead + 4 * kRecordSize;
  ChainView view(params);
  PoolFixture f;

  CHECK(build_template(f.pool, view, {}, params.block_size_limit).records.empty());

  std::vector<Account> accounts;
  for (int i = 1; i <= 10; ++i) {
    accounts.emplace_back(i);
    f.fund(accounts.back());
    for (int k = 0; k < 5; ++k) accounts.back().send(Address::filled(1), 1);
    f.insert_all(accounts.back());
  }
  // one longer tail goes first regardless of arrival
  accounts[9].send(Address::filled(1), 1);
  f.insert(accounts[9], accounts[9].txs.back());

  BlockTemplate t = build_template(f.pool, view, Address::filled(7), params.block_size_limit);
  CHECK(t.records.size() == 4);
  CHECK(t.txs_covered == 21);
  CHECK(t.encoded_size() == kBlockOverhead + 4 * kRecordSize);
  CHECK(encode_block(t.unsealed()).size() == t.encoded_size());
  CHECK(std::is_sorted(t.records.begin(), t.records.end(),
                       [](const auto& a, const auto& b) { return a.address < b.address; }));
  std::set<Address> chosen;
  for (const auto& r : t.records) chosen.insert(r.address);
  CHECK(chosen.contains(accounts[9].address()));
  CHECK(chosen.contains(accounts[0].address()));
  CHECK(chosen.contains(accounts[1].address()));
  CHECK(chosen.contains(accounts[2].address()));

  PoolFixture one;
  Account big(42);
  one.fund(big);
  for (int k = 0; k < 1000; ++k) big.send(Address::filled(1), 1);
  one.insert_all(big);
  BlockTemplate single = build_template(one.pool, view, {}, params.block_size_limit);
  CHECK(single.records.size() == 1);
  CHECK(single.txs_covered == 1000);
  CHECK(single.encoded_size() == kBlockOverhead + kRecordSize);
}

TEST_CASE("batch verification") {
  std::vector<SubchainTx> txs;
  Account a(1);
  for (int i = 0; i < 101; ++i) txs.push_back(a.send(Address::filled(2), 1));
  auto one = verify_batch(txs, 1);
  CHECK(std::all_of(one.begin(), one.end(), [](const auto& v) { return v.valid; }));
  CHECK(verify_batch(txs, 4) == one);
  CHECK(verify_batch(txs, 7) == one);

  std::get<SendTx>(txs[57]).signature[5] ^= 0x40;
  auto bad = verify_batch(txs, 4);
  for (std::size_t i = 0; i < bad.size(); ++i) CHECK(bad[i].valid == (i != 57));
  CHECK(bad[57].error == ErrorCode::InvalidSignature);
  CHECK(verify_batch(txs, 1) == bad);

  std::get<SendTx>(txs[3]).amount += 1;
  CHECK(verify_batch(txs, 2)[3].error == ErrorCode::DecodeError);
  CHECK(verify_batch({}, 4).empty());
}

TEST_CASE("miner produces blocks from its pool") {
  Account alice(1), bob(2), carol(3);
  ChainParams params;
  params.block_size_limit = kBlockOverhead + 2 * kRecordSize;
  for (const auto* a : {&alice, &bob, &carol}) params.allocations.emplace_back(a->address(), kFunds);
  Miner miner(params, MinerConfig{Address::filled(0xaa)});

  auto heartbeat = miner.mine_once(1);
  REQUIRE(heartbeat);
  CHECK(heartbeat->confirmations.empty());
  CHECK(miner.node().view().tip() == heartbeat->hash());

  for (auto* a : {&alice, &bob, &carol}) {
    a->send(Address::filled(5), 3);
    CHECK(miner.submit({a->address(), 0, a->txs}) == 1);
  }
  auto b2 = miner.mine_once(2);
  REQUIRE(b2);
  CHECK(b2->confirmations.size() == 2);
  CHECK(miner.pool().size() == 1);
  auto b3 = miner.mine_once(3);
  REQUIRE(b3);
  CHECK(b3->confirmations.size() == 1);
  CHECK(miner.pool().size() == 0);
  CHECK(miner.blocks_mined() == 3);
  for (auto* a : {&alice, &bob, &carol}) CHECK(miner.node().confirmed_state(a->address())->balance == kFunds - 3);

  std::stop_source stop;
  stop.request_stop();
  Miner slow(params, MinerConfig{Address::filled(0xbb), 0x1d00ffff});
  CHECK_FALSE(slow.mine_once(1, stop.get_token()).has_value());
}

TEST_CASE("a competing block cancels the seal in progress") {
  ChainParams params;
  // the miner aims at a target it will not hit; the network block uses the chain's
  Miner miner(params, MinerConfig{Address::filled(0xaa), 0x1d00ffff});
  std::optional<MainBlock> result = MainBlock{};
  std::jthread worker([&] { result = miner.mine_once(1); });
  std::this_thread::sleep_for(std::chrono::milliseconds(50));
  MainBlock rival = mine_block(miner.node().view().tip(), 1, {}, Address::filled(0xcc), 9);
  CHECK(miner.ingest(rival).status == ChainState::Status::Connected);
  worker.join();
  CHECK_FALSE(result.has_value());
  CHECK(miner.node().view().tip() == rival.hash());
}
