#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "support/fixtures.hpp"
#include "wider/overlay.hpp"

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

TreeTopology random_tree(std::size_t nodes, std::mt19937_64& rng, std::size_t n = 2) {
  TreeTopology t(n);
  while (t.size() < nodes) {
    NodeId p = rng() % t.size();
    if (t.children(p).size() < 2) t.join(p);
  }
  return t;
}

/// Broadcasts from every alive origin with each single node down; returns
/// the number of (failure, origin) pairs that missed an alive node.
int single_failure_misses(const TreeTopology& t) {
  int misses = 0;
  for (NodeId dead = 0; dead < t.size(); ++dead) {
    SimTransport transport(dead);
    Overlay overlay(t, transport);
    overlay.set_alive(dead, false);
    for (NodeId origin = 0; origin < t.size(); ++origin) {
      if (origin == dead) continue;
      auto rep = overlay.broadcast(origin, Envelope::make(MessageKind::Hello, {static_cast<std::uint8_t>(origin)}));
      if (rep.hops.size() != t.size() - 1) ++misses;
    }
  }
  return misses;
}

}  // namespace

TEST_CASE("joining the tree") {
  TreeTopology t;
  auto left = t.join(0);
  CHECK(left.id == 1);
  CHECK(left.assignment.to_string() == "0");
  auto right = t.join(0);
  CHECK(right.assignment.to_string() == "1");
  CHECK(code_of([&] { t.join(0); }) == ErrorCode::ParentFull);
  CHECK(code_of([&] { t.join(17); }) == ErrorCode::UnknownParent);
  CHECK(t.join(1).assignment.to_string() == "00");
  CHECK(t.parent(3) == std::optional<NodeId>(1));
  CHECK_FALSE(t.parent(0));
}

TEST_CASE("breadth-first joins build a complete tree") {
  auto t = TreeTopology::complete(7);
  CHECK(t.size() == 7);
  std::vector<std::string> prefixes;
  for (NodeId v = 0; v < t.size(); ++v) prefixes.push_back(t.assignment(v).to_string());
  CHECK(prefixes == std::vector<std::string>{"", "0", "1", "00", "01", "10", "11"});
  CHECK(t.diameter() == 4);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    Address a;
    for (auto& b : a.bytes) b = static_cast<std::uint8_t>(rng());
    auto path = t.nodes_path(a);
    REQUIRE(path.size() == t.depth(path.back()) + 1);
    REQUIRE(path.size() == 3);
  }
}

TEST_CASE("neighbour sets are symmetric and skip tree-adjacent nodes") {
  std::mt19937_64 rng(2);
  for (int round = 0; round < 30; ++round) {
    auto t = random_tree(2 + rng() % 40, rng, 1 + rng() % 3);
    for (NodeId u = 0; u < t.size(); ++u) {
      for (NodeId v : t.neighbors(u)) {
        const auto& back = t.neighbors(v);
        REQUIRE(std::find(back.begin(), back.end(), u) != back.end());
        REQUIRE(t.distance(u, v) >= 2);
      }
      std::size_t far = 0;
      for (NodeId v = 0; v < t.size(); ++v) far += t.distance(u, v) >= 2 ? 1 : 0;
      REQUIRE(t.neighbors(u).size() >= std::min(far, t.neighbor_count()));
    }
  }
  // in a complete tree a grandchild links back to its grandparent
  auto t = TreeTopology::complete(15);
  const auto& n3 = t.neighbors(3);
  CHECK(std::find(n3.begin(), n3.end(), NodeId{0}) != n3.end());
}

TEST_CASE("envelopes and framing") {
  Envelope e = Envelope::make(MessageKind::NewBlock, {1, 2, 3});
  Bytes pre{2, 1, 2, 3};
  CHECK(e.msg_id == sha256(pre));
  Bytes wire = frame(e);
  CHECK(wire.size() == 4 + 1 + 32 + 3);
  CHECK(wire[3] == 36);
  CHECK(wire[4] == 2);
  Envelope back = unframe(wire);
  CHECK(back.msg_id == e.msg_id);
  CHECK(back.payload == e.payload);
  CHECK(back.kind == MessageKind::NewBlock);

  Bytes bad = wire;
  bad.back() ^= 1;
  CHECK(code_of([&] { unframe(bad); }) == ErrorCode::DecodeError);
  Bytes bad_kind = wire;
  bad_kind[4] = 9;
  CHECK(code_of([&] { unframe(bad_kind); }) == ErrorCode::DecodeError);

  FrameDecoder dec;
  Envelope e2 = Envelope::make(MessageKind::NewTx, Bytes(100, 7));
  Bytes stream = wire;
  Bytes w2 = frame(e2);
  stream.insert(stream.end(), w2.begin(), w2.end());
  dec.feed(ByteView(stream).first(10));
  CHECK_FALSE(dec.next());
  dec.feed(ByteView(stream).subspan(10));
  CHECK(dec.next()->msg_id == e.msg_id);
  CHECK(dec.next()->msg_id == e2.msg_id);
  CHECK_FALSE(dec.next());
}

TEST_CASE("broadcast with every node alive") {
  std::mt19937_64 rng(3);
  for (int round = 0; round < 20; ++round) {
    auto t = random_tree(1 + rng() % 31, rng);
    SimTransport transport(round);
    Overlay overlay(t, transport);
    std::map<NodeId, int> handled;
    for (NodeId v = 0; v < t.size(); ++v) overlay.on_message(v, [&handled, v](const Envelope&) { ++handled[v]; });
    const NodeId origin = rng() % t.size();
    auto rep = overlay.broadcast(origin, Envelope::make(MessageKind::NewTx, {42}));
    REQUIRE(rep.hops.size() == t.size());
    REQUIRE(rep.max_hops() <= t.diameter() + 1);
    // every node except the origin processes the message exactly once
    for (NodeId v = 0; v < t.size(); ++v) REQUIRE(handled[v] == (v == origin ? 0 : 1));
  }
}

TEST_CASE("single failures do not partition the broadcast") {
  CHECK(single_failure_misses(TreeTopology::complete(7)) == 0);
  CHECK(single_failure_misses(TreeTopology::complete(15)) == 0);
  std::mt19937_64 rng(4);
  for (int i = 0; i < 10; ++i) REQUIRE(single_failure_misses(random_tree(15, rng)) == 0);
}

TEST_CASE("without neighbour links a dead inner node cuts the tree") {
  CHECK(single_failure_misses(TreeTopology::complete(7, 0)) > 0);
}

TEST_CASE("dead origin reaches nobody") {
  auto t = TreeTopology::complete(7);
  SimTransport transport(1);
  Overlay overlay(t, transport);
  overlay.set_alive(2, false);
  auto rep = overlay.broadcast(2, Envelope::make(MessageKind::NewTx, {1}));
  CHECK(rep.hops.empty());
}

TEST_CASE("clients receive broadcasts through their host") {
  auto t = TreeTopology::complete(7);
  SimTransport transport(1);
  Overlay overlay(t, transport);
  NodeId miner = overlay.attach_client(5);
  int got = 0;
  overlay.on_message(miner, [&](const Envelope&) { ++got; });
  auto rep = overlay.broadcast(3, Envelope::make(MessageKind::NewTx, {9}));
  CHECK(got == 1);
  CHECK(rep.reached(miner));
  auto rep2 = overlay.broadcast(miner, Envelope::make(MessageKind::NewBlock, {9}));
  CHECK(rep2.hops.size() == 8);
  CHECK(rep2.hops.at(5) == 1);
}

TEST_CASE("delivery order is a function of the seed") {
  auto run = [](std::uint64_t seed) {
    auto t = TreeTopology::complete(15);
    SimTransport transport(seed, {10, 200});
    Overlay overlay(t, transport);
    for (int i = 0; i < 5; ++i) overlay.publish(static_cast<NodeId>(i * 3), MessageKind::NewTx, {static_cast<std::uint8_t>(i)});
    transport.run();
    return transport.trace();
  };
  CHECK(run(7) == run(7));
  CHECK(run(7) != run(8));
}

TEST_CASE("latency changes timing only") {
  auto run = [](LatencyConfig lat) {
    auto t = TreeTopology::complete(15);
    SimTransport transport(1, lat);
    Overlay overlay(t, transport);
    std::vector<std::pair<NodeId, Hash256>> seen;
    for (NodeId v = 0; v < t.size(); ++v) {
      overlay.on_message(v, [&seen, v](const Envelope& e) { seen.emplace_back(v, e.msg_id); });
    }
    overlay.broadcast(4, Envelope::make(MessageKind::NewBlock, {1}));
    std::sort(seen.begin(), seen.end());
    return std::pair{seen, transport.now()};
  };
  auto fast = run({1, 2});
  auto slow = run({300, 900});
  CHECK(fast.first == slow.first);
  CHECK(fast.second < slow.second);
}

TEST_CASE("fragment requests") {
  auto t = TreeTopology::complete(7);
  SimTransport transport(1, {10, 50});
  Overlay overlay(t, transport);

  FakeChain chain;
  Account alice(1);
  chain.allocations[alice.address()] = 100;
  for (int i = 0; i < 5; ++i) alice.send(Address::filled(2), 3);

  // every node hosting alice serves her chain
  auto path = t.nodes_path(alice.address());
  REQUIRE(path.size() == 3);
  int served = 0;
  for (NodeId v : path) {
    overlay.serve(
        v,
        [&](const Address& a, std::uint64_t from, std::uint64_t to) {
          ++served;
          if (a != alice.address()) throw Error(ErrorCode::NotHosted);
          if (to > alice.height()) throw Error(ErrorCode::RangeUnavailable);
          return SubchainFragment{a, from, {alice.txs.begin() + static_cast<std::ptrdiff_t>(from),
                                            alice.txs.begin() + static_cast<std::ptrdiff_t>(to)}};
        },
        {});
  }

  SUBCASE("served locally by a hosting requester") {
    auto r = overlay.request_fragment(path.back(), alice.address(), 0, 5);
    CHECK(r.hops == 0);
    CHECK(r.host == path.back());
    CHECK(overlay.rpc_stats().local == 1);
  }
  SUBCASE("remote request for the whole chain") {
    NodeId requester = 0;
    for (NodeId v = 0; v < t.size(); ++v) {
      if (!t.assignment(v).hosts(alice.address())) requester = v;
    }
    auto r = overlay.request_fragment(requester, alice.address(), 0, 5);
    CHECK(r.hops > 0);
    CHECK(r.fragment.txs.size() == 5);
    CHECK_NOTHROW(check_fragment_links(r.fragment));
    CHECK(verify_fragment(SubchainState::genesis(alice.address(), 100), r.fragment, chain).balance == 85);
  }
  SUBCASE("unavailable range") {
    CHECK(code_of([&] { overlay.request_fragment(0, alice.address(), 3, 9); }) == ErrorCode::RangeUnavailable);
  }
  SUBCASE("no alive host") {
    for (NodeId v : path) overlay.set_alive(v, false);
    CHECK(code_of([&] { overlay.request_fragment(6, alice.address(), 0, 5); }) == ErrorCode::NoHost);
  }
  SUBCASE("deadline shorter than the round trip") {
    overlay.set_timeout(1);
    NodeId far = 0;
    for (NodeId v = 0; v < t.size(); ++v) {
      if (!t.assignment(v).hosts(alice.address())) far = v;
    }
    CHECK(code_of([&] { overlay.request_fragment(far, alice.address(), 0, 5); }) == ErrorCode::Timeout);
  }
}
