#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <memory>

#include "support/blocks.hpp"
#include "wider/node.hpp"

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

/// A few nodes wired to each other directly, no transport in between.
struct Cluster {
  ChainParams params;
  std::vector<std::unique_ptr<Node>> nodes;
  std::uint64_t clock = 10;

  explicit Cluster(const std::vector<const Account*>& funded) {
    for (const auto* a : funded) params.allocations.emplace_back(a->address(), kFunds);
  }

  Node& add(std::string_view prefix, bool wire = true) {
    nodes.push_back(std::make_unique<Node>(params, ShardAssignment::from_string(prefix)));
    Node& n = *nodes.back();
    if (wire) connect(n);
    return n;
  }

  void connect(Node& n) {
    n.set_remote(
        [this, &n](const Address& a, std::uint64_t from, std::uint64_t to) {
          for (auto& other : nodes) {
            if (other.get() == &n || !other->hosts(a)) continue;
            try {
              return other->serve_fragment(a, from, to);
            } catch (const Error&) {
            }
          }
          throw Error(ErrorCode::NoHost);
        },
        [this, &n](const Address& a, const Hash256& h) -> std::optional<SendTx> {
          for (auto& other : nodes) {
            if (other.get() == &n) continue;
            if (auto s = other->serve_send(a, h)) return s;
          }
          return std::nullopt;
        });
  }

  void offer(const SubchainTx& tx) {
    for (auto& n : nodes) n->accept_pending_tx(tx);
  }
  void offer_all(const Account& a) {
    for (const auto& tx : a.txs) offer(tx);
  }

  const ChainView& view() const { return nodes.front()->view(); }

  MainBlock block(std::vector<ConfirmationRecord> records, Address miner = {}) {
    MainBlock b = mine_block(view().tip(), view().tip_height() + 1, std::move(records), miner, clock++);
    for (auto& n : nodes) n->ingest_block(b);
    return b;
  }
  void bury(int count = 5) {
    for (int i = 0; i < count; ++i) block({});
  }
};

}  // namespace

TEST_CASE("records for other shards only get record checks") {
  Account outside(account_with_bit(true));
  Cluster c({&outside});
  Node& half = c.add("0");
  outside.send(Address::filled(9), 10);

  auto r = half.ingest_block(mine_block(half.view().tip(), 1, {record_of(outside)}));
  CHECK(r.status == ChainState::Status::Connected);
  CHECK(half.counters().records_skipped == 1);
  CHECK(half.counters().records_verified == 0);
  CHECK_FALSE(half.confirmed_state(outside.address()).has_value());
  CHECK(half.stored_txs(outside.address()).empty());
  CHECK(half.view().latest_confirmation(outside.address())->tip_height == 1);
}

TEST_CASE("hosted records are verified against the stored fragment") {
  Account alice(1);
  Cluster c({&alice});
  Node& full = c.add("");
  for (int i = 0; i < 10; ++i) alice.send(Address::filled(static_cast<std::uint8_t>(i + 1)), 100 + i);
  c.offer_all(alice);
  CHECK(full.head_state(alice.address())->tip_height == 10);
  CHECK(full.confirmed_state(alice.address())->tip_height == 0);

  MainBlock b = c.block({record_of(alice)});
  CHECK(full.view().tip() == b.hash());
  CHECK(full.counters().records_verified == 1);
  CHECK(full.counters().fragments_fetched == 0);

  FakeChain oracle;
  oracle.allocations[alice.address()] = kFunds;
  SubchainState expected = mark_confirmed(replay(alice.address(), alice.txs, oracle), 10);
  CHECK(*full.confirmed_state(alice.address()) == expected);
  CHECK(full.confirmed_state(alice.address())->balance == kFunds - (100 * 10 + 45));

  SUBCASE("ingesting the same block again changes nothing") {
    const StorageReport before = full.storage_report();
    auto again = full.ingest_block(b);
    CHECK(again.status == ChainState::Status::Duplicate);
    CHECK(*full.confirmed_state(alice.address()) == expected);
    CHECK(full.storage_report() == before);
  }
}

TEST_CASE("a block that lies about a hosted subchain is rejected") {
  Account alice(1);
  Cluster c({&alice});
  Node& full = c.add("", false);
  alice.send(Address::filled(1), kFunds + 1);  // overspend
  // refused: the node runs the transform first
  CHECK(code_of([&] { full.accept_pending_tx(alice.txs[0]); }) == ErrorCode::InsufficientBalance);
  CHECK(full.head_state(alice.address())->tip_height == 0);

  MainBlock b = mine_block(full.view().tip(), 1, {record_of(alice)});
  auto r = full.ingest_block(b);
  CHECK(r.status == ChainState::Status::Deferred);
  REQUIRE(r.error);
  CHECK(r.error->code() == ErrorCode::PartialFetch);

  full.set_remote([&alice](const Address& a, std::uint64_t from, std::uint64_t to) {
    return SubchainFragment{a, from, {alice.txs.begin() + static_cast<std::ptrdiff_t>(from),
                                      alice.txs.begin() + static_cast<std::ptrdiff_t>(to)}};
  }, {});
  CHECK(full.retry_deferred() == 0);
  CHECK(full.view().is_invalid(b.hash()));
  CHECK(full.view().tip_height() == 0);

  Account fresh(1);
  fresh.send(Address::filled(1), 5);
  CHECK(full.accept_pending_tx(fresh.txs[0]) == TxOutcome::Accepted);
  auto r2 = full.ingest_block(mine_block(full.view().tip(), 1, {record_of(fresh)}, {}, 2));
  CHECK(r2.status == ChainState::Status::Connected);
}

TEST_CASE("serving fragments") {
  Account alice(account_with_bit(false));
  Account other(account_with_bit(true));
  Cluster c({&alice, &other});
  Node& half = c.add("0");
  for (int i = 0; i < 7; ++i) alice.send(Address::filled(2), 1);
  c.offer_all(alice);

  SubchainFragment f = half.serve_fragment(alice.address(), 0, 7);
  CHECK(f.txs.size() == 7);
  CHECK(f.from_height == 0);
  CHECK(f.to_height() == 7);
  CHECK_NOTHROW(check_fragment_links(f));
  CHECK(half.serve_fragment(alice.address(), 3, 5).txs.size() == 2);
  CHECK(half.serve_fragment(alice.address(), 7, 7).txs.empty());

  CHECK(code_of([&] { half.serve_fragment(other.address(), 0, 1); }) == ErrorCode::NotHosted);
  CHECK(code_of([&] { half.serve_fragment(alice.address(), 0, 8); }) == ErrorCode::RangeUnavailable);
  CHECK(code_of([&] { half.serve_fragment(alice.address(), 5, 4); }) == ErrorCode::RangeUnavailable);
}

TEST_CASE("pending tx admission") {
  Account alice(account_with_bit(false));
  Account outside(account_with_bit(true));
  Cluster c({&alice, &outside});
  Node& half = c.add("0");

  SendTx s1 = alice.send(Address::filled(2), 5);
  CHECK(half.accept_pending_tx(s1) == TxOutcome::Accepted);
  CHECK(half.accept_pending_tx(s1) == TxOutcome::Duplicate);

  SendTx forged = s1;
  forged.amount = 6;  // same tx hash field, different bytes
  CHECK(code_of([&] { half.accept_pending_tx(forged); }) == ErrorCode::DuplicateHashConflict);

  SendTx bad = alice.send(Address::filled(2), 5);
  bad.signature[10] ^= 1;
  CHECK(code_of([&] { half.accept_pending_tx(bad); }) == ErrorCode::InvalidSignature);
  alice.txs.pop_back();

  SendTx foreign = outside.send(Address::filled(2), 5);
  CHECK(half.accept_pending_tx(foreign) == TxOutcome::Relayed);
  CHECK(half.stored_txs(outside.address()).empty());

  // a second tx at an occupied height, and one past a gap
  Account twin(account_with_bit(false));
  twin.key = alice.key;
  twin.clock += 1000;
  SendTx rival = twin.send(Address::filled(3), 1);
  CHECK(code_of([&] { half.accept_pending_tx(rival); }) == ErrorCode::TailConflict);
  alice.send(Address::filled(2), 1);
  SendTx gap = alice.send(Address::filled(2), 1);
  CHECK(code_of([&] { half.accept_pending_tx(gap); }) == ErrorCode::BadLink);
}

TEST_CASE("fragment batches and tail replacement") {
  Account alice(1);
  Cluster c({&alice});
  Node& full = c.add("");

  alice.send(Address::filled(2), 1);
  alice.send(Address::filled(2), 1);
  CHECK(full.accept_fragment({alice.address(), 0, alice.txs}) == 2);
  CHECK(full.accept_fragment({alice.address(), 0, alice.txs}) == 0);
  alice.send(Address::filled(2), 1);
  CHECK(full.accept_fragment({alice.address(), 0, alice.txs}) == 1);
  CHECK(full.head_state(alice.address())->tip_height == 3);

  // the owner rewrites heights 2..3 and extends to 4
  Account fork(1);
  fork.txs = {alice.txs[0]};
  fork.clock += 500;
  fork.send(Address::filled(4), 2);
  fork.send(Address::filled(4), 2);
  SubchainFragment shorter{alice.address(), 1, {fork.txs[1], fork.txs[2]}};
  CHECK(code_of([&] { full.accept_fragment(shorter); }) == ErrorCode::TailConflict);
  fork.send(Address::filled(4), 2);
  CHECK(full.accept_fragment({alice.address(), 1, {fork.txs.begin() + 1, fork.txs.end()}}) == 3);
  CHECK(full.head_state(alice.address())->tip_hash == fork.tip());
  CHECK(full.head_state(alice.address())->balance == kFunds - 7);
  CHECK(full.serve_send(alice.address(), std::get<SendTx>(alice.txs[1]).tx_hash) == std::nullopt);

  // once confirmed, the prefix is frozen
  c.block({{alice.address(), tx_hash_of(fork.txs[1]), 2}});
  Account late(1);
  late.txs = {fork.txs[0]};
  late.clock += 900;
  for (int i = 0; i < 5; ++i) late.send(Address::filled(5), 1);
  CHECK(code_of([&] { full.accept_fragment({alice.address(), 1, {late.txs.begin() + 1, late.txs.end()}}); }) ==
        ErrorCode::ConfirmedFrozen);
}

TEST_CASE("claims across shards and remote fetches") {
  Account alice(account_with_bit(false));
  Account bob(account_with_bit(true));
  Cluster c({&alice, &bob});
  Node& full = c.add("");
  Node& left = c.add("0");
  Node& right = c.add("1");

  SendTx s = alice.send(bob.address(), 300);
  c.offer(s);
  MainBlock confirming = c.block({record_of(alice)});
  c.bury(5);

  ReceiveTx rx = bob.claim(s, confirming.hash());
  c.offer(rx);  // the right half finds the send on the left half
  CHECK(right.head_state(bob.address())->balance == kFunds + 300);
  c.block({record_of(bob)});

  CHECK(full.confirmed_state(bob.address())->balance == kFunds + 300);
  CHECK(right.confirmed_state(bob.address()) == full.confirmed_state(bob.address()));
  CHECK(left.confirmed_state(alice.address()) == full.confirmed_state(alice.address()));
  Bytes claim_key(bob.address().bytes.begin(), bob.address().bytes.end());
  claim_key.insert(claim_key.end(), s.tx_hash.bytes.begin(), s.tx_hash.bytes.end());
  CHECK(full.store().contains(Keyspace::ClaimedSends, claim_key));
  CHECK(right.store().contains(Keyspace::ClaimedSends, claim_key));
  CHECK_FALSE(left.store().contains(Keyspace::ClaimedSends, claim_key));

  SUBCASE("storage splits by prefix") {
    const auto f = full.storage_report();
    const auto l = left.storage_report();
    const auto r = right.storage_report();
    CHECK(f.main_chain_bytes == l.main_chain_bytes);
    CHECK(f.main_chain_bytes == r.main_chain_bytes);
    CHECK(f.blocks == 7);
    CHECK(f.subchain_bytes == l.subchain_bytes + r.subchain_bytes);
    CHECK(f.subchain_txs == 2);
    CHECK(l.subchains == 1);
    CHECK(r.subchains == 1);
  }

  SUBCASE("a node without the txs fetches them while validating") {
    Node& fresh = c.add("1", false);
    for (const auto& h : c.view().canonical_chain()) {
      if (h == c.view().genesis_hash()) continue;
      auto res = fresh.ingest_block(*c.view().find(h));
      if (c.view().find(h)->header.height == 7) CHECK(res.status == ChainState::Status::Deferred);
    }
    CHECK(fresh.view().tip_height() == 6);
    c.connect(fresh);
    CHECK(fresh.retry_deferred() == 1);
    CHECK(fresh.view().tip() == full.view().tip());
    CHECK(fresh.counters().fragments_fetched == 1);
    CHECK(fresh.stored_txs(bob.address()) == bob.txs);
    CHECK(fresh.confirmed_state(bob.address()) == right.confirmed_state(bob.address()));
  }
}

TEST_CASE("empty node reports zero storage") {
  Cluster c({});
  Node& n = c.add("");
  StorageReport r = n.storage_report();
  CHECK(r.main_chain_bytes == 0);
  CHECK(r.subchain_bytes == 0);
  CHECK(r.subchains == 0);
}

TEST_CASE("reorg rolls confirmed states back") {
  Account alice(1);
  Cluster c({&alice});
  Node& full = c.add("");
  alice.send(Address::filled(2), 10);
  alice.send(Address::filled(2), 10);
  c.offer_all(alice);

  const Hash256 genesis = full.view().genesis_hash();
  MainBlock a1 = mine_block(genesis, 1, {record_of(alice)}, {}, 100);
  REQUIRE(full.ingest_block(a1).status == ChainState::Status::Connected);
  CHECK(full.confirmed_state(alice.address())->tip_height == 2);
  CHECK(full.store().contains(Keyspace::States, alice.address().bytes));

  MainBlock b1 = mine_block(genesis, 1, {}, {}, 200);
  MainBlock b2 = mine_block(b1.hash(), 2, {}, {}, 201);
  CHECK(full.ingest_block(b1).status == ChainState::Status::SideBranch);
  auto r = full.ingest_block(b2);
  CHECK(r.status == ChainState::Status::Connected);
  CHECK(r.reorg.disconnected == std::vector<Hash256>{a1.hash()});
  CHECK(full.confirmed_state(alice.address())->tip_height == 0);
  CHECK(full.confirmed_state(alice.address())->balance == kFunds);
  CHECK_FALSE(full.store().contains(Keyspace::States, alice.address().bytes));
  // pending txs survive the rollback
  CHECK(full.head_state(alice.address())->tip_height == 2);

  MainBlock b3 = mine_block(b2.hash(), 3, {record_of(alice)}, {}, 202);
  CHECK(full.ingest_block(b3).status == ChainState::Status::Connected);
  CHECK(full.confirmed_state(alice.address())->confirmed_height == 2);
}

TEST_CASE("persistent store survives restart, torn tails and compaction") {
  const auto dir = std::filesystem::temp_directory_path() / "wider_node_store_test";
  std::filesystem::remove_all(dir);

  Account alice(account_with_bit(false));
  Account bob(account_with_bit(true));
  ChainParams params;
  params.allocations = {{alice.address(), kFunds}, {bob.address(), kFunds}};

  StorageReport before;
  Hash256 tip;
  SubchainState alice_state, bob_state;
  {
    Node n = Node::open(params, ShardAssignment{}, dir);
    alice.send(bob.address(), 40);
    bob.send(alice.address(), 1);
    for (const auto& tx : alice.txs) n.accept_pending_tx(tx);
    for (const auto& tx : bob.txs) n.accept_pending_tx(tx);
    n.ingest_block(mine_block(n.view().tip(), 1, {record_of(alice)}));
    bob.send(alice.address(), 2);  // pending only
    n.accept_pending_tx(bob.txs.back());
    before = n.storage_report();
    tip = n.view().tip();
    alice_state = *n.confirmed_state(alice.address());
    bob_state = *n.head_state(bob.address());
  }
  {
    Node n = Node::open(params, ShardAssignment{}, dir);
    CHECK(n.view().tip() == tip);
    CHECK(n.storage_report() == before);
    CHECK(*n.confirmed_state(alice.address()) == alice_state);
    CHECK(*n.head_state(bob.address()) == bob_state);
    CHECK(n.accept_pending_tx(bob.txs.back()) == TxOutcome::Duplicate);
  }
  const auto clean_size = std::filesystem::file_size(dir / "store.log");
  {
    std::ofstream tail(dir / "store.log", std::ios::binary | std::ios::app);
    const char junk[] = {0, 0, 1, 0, 'p', 'a', 'r', 't', 'i', 'a', 'l'};
    tail.write(junk, sizeof junk);
  }
  {
    Node n = Node::open(params, ShardAssignment{}, dir);
    CHECK(n.view().tip() == tip);
    CHECK(n.storage_report() == before);
    CHECK(std::filesystem::file_size(dir / "store.log") == clean_size);

    n.narrow(ShardAssignment::from_string("0"));
    CHECK(code_of([&] { n.narrow(ShardAssignment::from_string("1")); }) == ErrorCode::ConfigInvalid);
    CHECK(n.compact() == 1);
    CHECK(n.stored_txs(bob.address()).empty());
    CHECK(n.storage_report().subchain_txs == 1);
    CHECK(n.storage_report().main_chain_bytes == before.main_chain_bytes);
  }
  {
    Node n = Node::open(params, ShardAssignment::from_string("0"), dir);
    CHECK(n.view().tip() == tip);
    CHECK(n.storage_report().subchain_txs == 1);
    CHECK(*n.confirmed_state(alice.address()) == alice_state);
  }
  std::filesystem::remove_all(dir);
}
