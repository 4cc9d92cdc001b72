#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support/fixtures.hpp"

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

SubchainFragment fragment_of(const Account& a, std::uint64_t from, std::uint64_t to) {
  return {a.address(), from, {a.txs.begin() + static_cast<std::ptrdiff_t>(from), a.txs.begin() + static_cast<std::ptrdiff_t>(to)}};
}

}  // namespace

TEST_CASE("cannot pay from an empty chain") {
  FakeChain chain;
  Account alice(1);
  alice.send(Address::filled(7), 1);
  auto state = SubchainState::genesis(alice.address());
  CHECK(code_of([&] { apply_tx(state, alice.txs[0], chain); }) == ErrorCode::InsufficientBalance);
}

TEST_CASE("send debits the balance and advances the tip") {
  FakeChain chain;
  Account alice(1);
  chain.allocations[alice.address()] = 100;
  alice.send(Address::filled(7), 40);
  auto state = apply_tx(SubchainState::genesis(alice.address(), 100), alice.txs[0], chain);
  CHECK(state.balance == 60);
  CHECK(state.tip_height == 1);
  CHECK(state.tip_hash == tx_hash_of(alice.txs[0]));
}

TEST_CASE("two-account transfer: claim credits once, a second claim is a double claim") {
  FakeChain chain;
  Account alice(1), bob(2);
  chain.allocations[alice.address()] = 100;
  SendTx s = alice.send(bob.address(), 40);
  chain.publish(s);
  Hash256 block = chain.add_block(1, {{alice.address(), 1}});
  chain.tip_height = 6;

  bob.claim(s, block);
  auto bob_state = replay(bob.address(), bob.txs, chain);
  CHECK(bob_state.balance == 40);
  CHECK(bob_state.claimed_sends.contains(s.tx_hash));
  auto alice_state = replay(alice.address(), alice.txs, chain);
  CHECK(alice_state.balance == 60);
  // conservation across both shards
  CHECK(alice_state.balance + bob_state.balance == 100);

  bob.claim(s, block);
  CHECK(code_of([&] { apply_tx(bob_state, bob.txs[1], chain); }) == ErrorCode::DoubleClaim);
  // the oracle reports the same rejection with the offending height
  try {
    replay(bob.address(), bob.txs, chain);
    FAIL("expected DoubleClaim");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DoubleClaim);
    CHECK(e.height() == std::optional<std::uint64_t>(2));
  }
}

TEST_CASE("claim validation failures") {
  FakeChain chain;
  Account alice(1), bob(2), carol(3);
  chain.allocations[alice.address()] = 1000;
  SendTx s = alice.send(bob.address(), 40);
  chain.publish(s);
  Hash256 block = chain.add_block(1, {{alice.address(), 1}});
  Hash256 empty_block = chain.add_block(2);
  chain.tip_height = 7;
  const auto bob0 = SubchainState::genesis(bob.address());

  SUBCASE("unknown block") {
    bob.claim(s, Hash256::filled(0xee));
    CHECK(code_of([&] { apply_tx(bob0, bob.txs[0], chain); }) == ErrorCode::UnconfirmedSend);
  }
  SUBCASE("immature block") {
    chain.tip_height = 5;  // depth 5 < 6
    bob.claim(s, block);
    CHECK(code_of([&] { apply_tx(bob0, bob.txs[0], chain); }) == ErrorCode::UnconfirmedSend);
  }
  SUBCASE("exactly mature block") {
    chain.tip_height = 6;  // depth 6
    bob.claim(s, block);
    CHECK(apply_tx(bob0, bob.txs[0], chain).balance == 40);
  }
  SUBCASE("block that does not confirm the sender") {
    bob.claim(s, empty_block);
    CHECK(code_of([&] { apply_tx(bob0, bob.txs[0], chain); }) == ErrorCode::UnconfirmedSend);
  }
  SUBCASE("block confirms the sender below the send height") {
    SendTx s2 = alice.send(bob.address(), 5);
    chain.publish(s2);
    bob.claim(s2, block);  // block confirms alice only up to height 1
    CHECK(code_of([&] { apply_tx(bob0, bob.txs[0], chain); }) == ErrorCode::UnconfirmedSend);
  }
  SUBCASE("unknown send") {
    bob.claim_raw(alice.address(), Hash256::filled(0x42), block, 40);
    CHECK(code_of([&] { apply_tx(bob0, bob.txs[0], chain); }) == ErrorCode::UnconfirmedSend);
  }
  SUBCASE("amount mismatch") {
    bob.claim_raw(alice.address(), s.tx_hash, block, 41);
    CHECK(code_of([&] { apply_tx(bob0, bob.txs[0], chain); }) == ErrorCode::AmountMismatch);
  }
  SUBCASE("wrong recipient") {
    carol.claim(s, block);
    CHECK(code_of([&] { apply_tx(SubchainState::genesis(carol.address()), carol.txs[0], chain); }) ==
          ErrorCode::WrongRecipient);
  }
  SUBCASE("foreign transaction") {
    bob.claim(s, block);
    CHECK(code_of([&] { apply_tx(SubchainState::genesis(carol.address()), bob.txs[0], chain); }) ==
          ErrorCode::AddressMismatch);
  }
  SUBCASE("forged signature") {
    bob.claim(s, block);
    auto forged = std::get<ReceiveTx>(bob.txs[0]);
    forged.signature = carol.claim(s, block).signature;
    CHECK(code_of([&] { apply_tx(bob0, forged, chain); }) == ErrorCode::InvalidSignature);
  }
}

TEST_CASE("coinbase claims") {
  FakeChain chain;
  Account miner(1), other(2);
  Hash256 b1 = chain.add_block(1, {}, miner.address());
  chain.tip_height = 10;

  SUBCASE("replay of a single coinbase claim yields the subsidy") {
    miner.claim_coinbase(b1, chain.subsidy);
    CHECK(replay(miner.address(), miner.txs, chain).balance == 50ULL * 100'000'000ULL);
  }
  SUBCASE("a coinbase can be claimed once") {
    miner.claim_coinbase(b1, chain.subsidy);
    miner.claim_coinbase(b1, chain.subsidy);
    CHECK(code_of([&] { replay(miner.address(), miner.txs, chain); }) == ErrorCode::DoubleClaim);
  }
  SUBCASE("only the block's miner may claim") {
    other.claim_coinbase(b1, chain.subsidy);
    CHECK(code_of([&] { replay(other.address(), other.txs, chain); }) == ErrorCode::WrongRecipient);
  }
  SUBCASE("amount must equal the subsidy") {
    miner.claim_coinbase(b1, chain.subsidy + 1);
    CHECK(code_of([&] { replay(miner.address(), miner.txs, chain); }) == ErrorCode::AmountMismatch);
  }
  SUBCASE("immature coinbase") {
    chain.tip_height = 3;
    miner.claim_coinbase(b1, chain.subsidy);
    CHECK(code_of([&] { replay(miner.address(), miner.txs, chain); }) == ErrorCode::UnconfirmedSend);
  }
}

TEST_CASE("replay basics") {
  FakeChain chain;
  Account alice(1);
  auto empty = replay(alice.address(), {}, chain);
  CHECK(empty.tip_height == 0);
  CHECK(empty.balance == 0);
  CHECK(empty.tip_hash.is_zero());

  chain.allocations[alice.address()] = 100;
  for (int i = 0; i < 4; ++i) alice.send(Address::filled(3), 1);
  std::vector<SubchainTx> gap{alice.txs[0], alice.txs[1], alice.txs[3]};
  try {
    replay(alice.address(), gap, chain);
    FAIL("expected BadLink");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BadLink);
    CHECK(e.height() == std::optional<std::uint64_t>(4));
  }
}

TEST_CASE("balance guard fires before an unsigned wrap") {
  FakeChain chain;
  Account alice(1);
  chain.allocations[alice.address()] = 10;
  alice.send(Address::filled(3), 10);
  alice.send(Address::filled(3), 1);
  auto s1 = apply_tx(SubchainState::genesis(alice.address(), 10), alice.txs[0], chain);
  CHECK(s1.balance == 0);
  CHECK(code_of([&] { apply_tx(s1, alice.txs[1], chain); }) == ErrorCode::InsufficientBalance);
}

TEST_CASE("verify_fragment equals replay at any split point") {
  FakeChain chain;
  std::mt19937_64 rng(5);
  std::vector<Account> helpers;
  for (int i = 0; i < 4; ++i) helpers.emplace_back(100 + i);
  Account owner(1);
  chain.allocations[owner.address()] = 10'000;
  grow_random_chain(owner, 20, chain, rng, helpers);

  const SubchainState whole = replay(owner.address(), owner.txs, chain);
  auto prefix = replay(owner.address(), std::span(owner.txs).first(7), chain);
  CHECK(verify_fragment(prefix, fragment_of(owner, 7, 20), chain) == whole);

  for (std::uint64_t split = 0; split <= 20; ++split) {
    auto p = replay(owner.address(), std::span(owner.txs).first(split), chain);
    REQUIRE(verify_fragment(p, fragment_of(owner, split, 20), chain) == whole);
  }
}

TEST_CASE("fragment edge cases") {
  FakeChain chain;
  Account alice(1);
  chain.allocations[alice.address()] = 100;
  for (int i = 0; i < 5; ++i) alice.send(Address::filled(3), 1);
  auto s2 = replay(alice.address(), std::span(alice.txs).first(2), chain);

  CHECK(verify_fragment(s2, SubchainFragment{alice.address(), 2, {}}, chain) == s2);

  auto misaligned = fragment_of(alice, 2, 5);
  std::get<SendTx>(misaligned.txs[0]).parent_hash = Hash256::filled(0x99);
  CHECK(code_of([&] { verify_fragment(s2, misaligned, chain); }) == ErrorCode::FragmentMisaligned);
  CHECK(code_of([&] { verify_fragment(s2, fragment_of(alice, 3, 5), chain); }) == ErrorCode::FragmentMisaligned);

  auto frag = fragment_of(alice, 0, 5);
  CHECK(decode_fragment(encode_fragment(frag)) == frag);
  CHECK_NOTHROW(check_fragment_links(frag));
  std::swap(frag.txs[1], frag.txs[2]);
  CHECK(code_of([&] { check_fragment_links(frag); }) == ErrorCode::BadLink);
}

TEST_CASE("tail replacement respects the confirmation freeze") {
  FakeChain chain;
  Account alice(1);
  chain.allocations[alice.address()] = 1'000;
  for (int i = 0; i < 8; ++i) alice.send(Address::filled(3), 1);
  auto confirmed = mark_confirmed(replay(alice.address(), std::span(alice.txs).first(5), chain), 5);
  std::span<const SubchainTx> tail = std::span(alice.txs).subspan(5);

  auto fork_at = [&](std::uint64_t height) {
    Account fork(1);
    fork.txs.assign(alice.txs.begin(), alice.txs.begin() + static_cast<std::ptrdiff_t>(height));
    fork.send(Address::filled(4), 2);
    fork.send(Address::filled(4), 2);
    return fork;
  };

  SUBCASE("fork above the confirmed height") {
    Account fork = fork_at(7);
    auto state = try_replace_tail(confirmed, tail, 7, fragment_of(fork, 7, 9), chain);
    CHECK(state == mark_confirmed(replay(alice.address(), fork.txs, chain), 5));
    CHECK(state.tip_height == 9);
    CHECK(state.tip_hash == fork.tip());
    CHECK(state.confirmed_height == 5);
    CHECK(state.balance == 1'000 - 7 - 4);
  }
  SUBCASE("fork exactly at the confirmed height") {
    Account fork = fork_at(5);
    auto state = try_replace_tail(confirmed, tail, 5, fragment_of(fork, 5, 7), chain);
    CHECK(state.tip_height == 7);
    CHECK(state.balance == 1'000 - 5 - 4);
  }
  SUBCASE("fork below the confirmed height") {
    Account fork = fork_at(3);
    auto base = mark_confirmed(replay(alice.address(), std::span(alice.txs).first(3), chain), 3);
    base.confirmed_height = 5;
    CHECK(code_of([&] { try_replace_tail(base, std::span(alice.txs).subspan(3), 3, fragment_of(fork, 3, 5), chain); }) ==
          ErrorCode::ConfirmedFrozen);
  }
}

TEST_CASE("mark_confirmed is monotone and bounded by the tip") {
  auto empty = SubchainState::genesis(Address::filled(1));
  CHECK(mark_confirmed(empty, 0) == empty);

  SubchainState s = empty;
  s.tip_height = 7;
  CHECK(mark_confirmed(mark_confirmed(s, 3), 5).confirmed_height == 5);
  CHECK(mark_confirmed(mark_confirmed(s, 5), 3).confirmed_height == 5);
  CHECK(code_of([&] { mark_confirmed(s, 9); }) == ErrorCode::ConfirmAheadOfTip);
}

TEST_CASE("cross-shard timestamps do not affect verification") {
  FakeChain chain;
  Account alice(1), bob(2);
  chain.allocations[alice.address()] = 100;
  alice.clock = 5'000'000'000;  // far in the future relative to bob
  SendTx s = alice.send(bob.address(), 30);
  chain.publish(s);
  Hash256 block = chain.add_block(1, {{alice.address(), 1}});
  chain.tip_height = 6;
  bob.clock = 1;  // claim timestamped long before the send
  bob.claim(s, block);
  CHECK(replay(bob.address(), bob.txs, chain).balance == 30);
}

TEST_CASE("random chains never reuse a claim") {
  FakeChain chain;
  std::mt19937_64 rng(9);
  std::vector<Account> helpers;
  for (int i = 0; i < 3; ++i) helpers.emplace_back(200 + i);
  Account owner(1);
  grow_random_chain(owner, 60, chain, rng, helpers);
  auto state = replay(owner.address(), owner.txs, chain);
  std::set<Hash256> seen;
  std::size_t claims = 0;
  for (const auto& tx : owner.txs) {
    if (const auto* rx = std::get_if<ReceiveTx>(&tx)) {
      ++claims;
      CHECK(seen.insert(rx->is_coinbase_claim() ? rx->main_block_hash : rx->sender_tx_hash).second);
    }
  }
  CHECK(state.claimed_sends.size() + state.claimed_coinbases.size() == claims);
}
