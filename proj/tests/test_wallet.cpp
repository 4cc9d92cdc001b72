#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/stat.h>

#include <filesystem>
#include <random>

#include "support/blocks.hpp"
#include "wider/node.hpp"
#include "wider/wallet.hpp"

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

AccountView fresh_view(const KeyPair& key, std::uint64_t balance) {
  AccountView v;
  v.address = key.address;
  v.head = SubchainState::genesis(key.address, balance);
  v.confirmed_balance = balance;
  return v;
}

/// One full node plus the inflow bookkeeping a wallet would get from it.
struct Desk {
  ChainParams params;
  std::unique_ptr<Node> node;
  std::map<Address, std::vector<Inflow>> inflows;
  std::map<Address, std::uint64_t> confirmed_to;
  std::uint64_t clock = 1;

  explicit Desk(const std::vector<const KeyPair*>& funded, std::uint64_t funds) {
    for (const auto* k : funded) params.allocations.emplace_back(k->address, funds);
    node = std::make_unique<Node>(params, ShardAssignment{});
  }

  AccountView view_of(const KeyPair& k) {
    return make_account_view(*node->confirmed_state(k.address), *node->head_state(k.address), {}, inflows[k.address],
                             node->view());
  }

  /// Confirms every pending tail of `who` and records the sends as inflows.
  void confirm(const std::vector<const KeyPair*>& who) {
    std::vector<ConfirmationRecord> records;
    for (const auto* k : who) {
      auto head = *node->head_state(k->address);
      if (head.tip_height > node->confirmed_state(k->address)->tip_height) {
        records.push_back({k->address, head.tip_hash, head.tip_height});
      }
    }
    MainBlock b = mine_block(node->view().tip(), node->view().tip_height() + 1, records, {}, clock++);
    REQUIRE(node->ingest_block(b).status == ChainState::Status::Connected);
    for (const auto& r : b.confirmations) {
      for (const auto& tx : node->serve_fragment(r.address, confirmed_to[r.address], r.tip_height).txs) {
        if (const auto* s = std::get_if<SendTx>(&tx)) {
          inflows[s->recipient_address].push_back({s->current_address, s->tx_hash, s->amount, b.hash(), 0});
        }
      }
      confirmed_to[r.address] = r.tip_height;
    }
  }
  void bury(int n) {
    for (int i = 0; i < n; ++i) confirm({});
  }
};

}  // namespace

TEST_CASE("build_send") {
  KeyPair k = keygen(seed_for(1));
  AccountView v = fresh_view(k, 100);

  CHECK(code_of([&] { build_send(v, Address::filled(2), 101, k, 1); }) == ErrorCode::InsufficientBalance);
  SendTx a = build_send(v, Address::filled(2), 60, k, 1);
  SendTx b = build_send(v, Address::filled(2), 40, k, 2);
  CHECK(a.height == 1);
  CHECK(b.height == 2);
  CHECK(a.parent_hash.is_zero());
  CHECK(b.parent_hash == a.tx_hash);
  CHECK(v.spendable() == 0);
  CHECK(v.head.tip_hash == b.tx_hash);
  CHECK(v.pending.size() == 2);
  CHECK(verify_tx(a));
  CHECK(verify_tx(b));

  KeyPair other = keygen(seed_for(2));
  CHECK(code_of([&] { build_send(v, Address::filled(2), 0, other, 3); }) == ErrorCode::KeyMismatch);
}

TEST_CASE("build_claim") {
  KeyPair k = keygen(seed_for(1));
  AccountView v = fresh_view(k, 0);
  Inflow in{Address::filled(3), Hash256::filled(4), 40, Hash256::filled(5), 6};
  ReceiveTx r = build_claim(v, in, k, 1);
  CHECK(r.amount == 40);
  CHECK(r.sender_tx_hash == in.send_hash);
  CHECK(r.main_block_hash == in.block);
  CHECK(v.spendable() == 40);
  CHECK(code_of([&] { build_claim(v, in, k, 2); }) == ErrorCode::AlreadyClaimed);

  Inflow young = in;
  young.send_hash = Hash256::filled(6);
  young.depth = 3;
  CHECK(code_of([&] { build_claim(v, young, k, 3); }) == ErrorCode::Immature);
}

TEST_CASE("claims are filtered once confirmed") {
  KeyPair alice = keygen(seed_for(1)), bob = keygen(seed_for(2));
  Desk d({&alice, &bob}, 1000);

  AccountView av = d.view_of(alice);
  REQUIRE(d.node->accept_pending_tx(build_send(av, bob.address, 40, alice, 1)) == TxOutcome::Accepted);
  d.confirm({&alice});
  d.bury(4);

  AccountView bv = d.view_of(bob);
  REQUIRE(bv.inflows.size() == 1);
  CHECK(bv.inflows[0].depth == 5);
  CHECK(code_of([&] { build_claim(bv, bv.inflows[0], bob, 2); }) == ErrorCode::Immature);
  d.bury(1);
  bv = d.view_of(bob);
  const Inflow inflow = bv.inflows.at(0);
  CHECK(inflow.depth == 6);
  ReceiveTx claim = build_claim(bv, inflow, bob, 3);
  CHECK(claim.amount == 40);
  CHECK(d.node->accept_pending_tx(claim) == TxOutcome::Accepted);
  d.confirm({&bob});

  bv = d.view_of(bob);
  CHECK(bv.inflows.empty());
  CHECK(bv.confirmed_balance == 1040);
  CHECK(code_of([&] { build_claim(bv, inflow, bob, 4); }) == ErrorCode::AlreadyClaimed);
}

TEST_CASE("batch_settle claims oldest first, then sends") {
  KeyPair k = keygen(seed_for(1));
  AccountView v = fresh_view(k, 0);
  FakeChain chain;
  for (int i = 0; i < 3; ++i) {
    Account payer(10 + i);
    chain.allocations[payer.address()] = 10;
    SendTx s = payer.send(k.address, 10);
    chain.publish(s);
    Hash256 block = chain.add_block(static_cast<std::uint64_t>(i + 1), {{payer.address(), 1}});
    v.inflows.push_back({payer.address(), s.tx_hash, 10, block, 6});
  }
  chain.tip_height = 10;
  v.inflows.push_back({Address::filled(9), Hash256::filled(9), 500, Hash256::filled(9), 2});  // not yet mature

  CHECK(code_of([&] { batch_settle(v, {{Address::filled(2), 31}}, k, 1); }) == ErrorCode::InsufficientBalance);
  CHECK(v.pending.empty());
  CHECK(v.inflows.size() == 4);

  auto txs = batch_settle(v, {{Address::filled(2), 25}}, k, 1);
  REQUIRE(txs.size() == 4);
  for (int i = 0; i < 3; ++i) {
    REQUIRE(std::holds_alternative<ReceiveTx>(txs[i]));
  }
  CHECK(std::get<ReceiveTx>(txs[0]).main_block_hash.bytes[7] == 1);
  CHECK(std::get<ReceiveTx>(txs[2]).main_block_hash.bytes[7] == 3);
  CHECK(is_send(txs[3]));
  CHECK(v.spendable() == 5);
  CHECK(v.inflows.size() == 1);

  SubchainState replayed = replay(k.address, txs, chain);
  CHECK(replayed.balance == 5);
  CHECK(replayed.tip_hash == v.head.tip_hash);
  CHECK(replayed.claimed_sends == v.head.claimed_sends);

  AccountView rich = fresh_view(k, 100);
  auto only_sends = batch_settle(rich, {{Address::filled(2), 30}, {Address::filled(3), 30}}, k, 1);
  CHECK(only_sends.size() == 2);
  CHECK(rich.spendable() == 40);
}

TEST_CASE("wallet tails always pass the node") {
  std::mt19937_64 rng(7);
  std::vector<KeyPair> keys;
  for (int i = 1; i <= 5; ++i) keys.push_back(keygen(seed_for(static_cast<std::uint64_t>(i))));
  std::vector<const KeyPair*> all;
  for (const auto& k : keys) all.push_back(&k);
  Desk d(all, 500);

  std::uint64_t refused = 0;
  for (int round = 0; round < 25; ++round) {
    for (const auto& k : keys) {
      if (rng() % 2) continue;
      AccountView v = d.view_of(k);
      std::vector<std::pair<Address, std::uint64_t>> sends;
      std::uint64_t budget = v.spendable() + v.mature_claimable();
      const int n = static_cast<int>(rng() % 3);
      for (int i = 0; i < n && budget > 0; ++i) {
        const std::uint64_t amount = 1 + rng() % budget;
        budget -= amount;
        sends.emplace_back(keys[rng() % keys.size()].address, amount);
      }
      for (const auto& tx : batch_settle(v, sends, k, d.clock)) {
        try {
          d.node->accept_pending_tx(tx);
        } catch (const Error&) {
          ++refused;
        }
      }
    }
    d.confirm(all);
  }
  CHECK(refused == 0);
  std::uint64_t total = 0;
  for (const auto& k : keys) total += d.node->confirmed_state(k.address)->balance;
  for (const auto& [addr, list] : d.inflows) {
    for (const auto& in : list) {
      if (!d.node->confirmed_state(addr)->claimed_sends.contains(in.send_hash)) total += in.amount;
    }
  }
  CHECK(total == 5 * 500);
}

TEST_CASE("key files") {
  const auto path = std::filesystem::temp_directory_path() / "wider_wallet_key_test";
  KeyPair k = keygen(seed_for(77));
  write_key_file(path, k.secret);
  struct stat st {};
  REQUIRE(::stat(path.c_str(), &st) == 0);
  CHECK((st.st_mode & 0777) == 0600);
  CHECK(read_key_file(path).address == k.address);
  std::filesystem::remove(path);
  CHECK(code_of([&] { read_key_file(path); }) == ErrorCode::Io);
}
