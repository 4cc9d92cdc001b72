#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "wider/topology.hpp"

using namespace wider;

namespace {

Address random_address(std::mt19937_64& rng) {
  Address a;
  for (auto& b : a.bytes) b = static_cast<std::uint8_t>(rng());
  return a;
}

TreeTopology random_tree(std::size_t nodes, std::mt19937_64& rng) {
  TreeTopology t;
  while (t.size() < nodes) {
    NodeId p = rng() % t.size();
    if (t.children(p).size() < 2) t.join(p);
  }
  return t;
}

}  // namespace

TEST_CASE("the root prefix hosts every address") {
  std::mt19937_64 rng(1);
  ShardAssignment root;
  CHECK(root.depth() == 0);
  for (int i = 0; i < 100; ++i) CHECK(hosts(root, random_address(rng)));
}

TEST_CASE("prefix matching") {
  CHECK_FALSE(ShardAssignment::from_string("1").hosts(Address{}));
  CHECK(ShardAssignment::from_string("0").hosts(Address{}));

  // only one of the four two-bit prefixes matches "10"
  auto ten = ShardAssignment::from_string("10");
  int matches = 0;
  for (std::uint8_t top = 0; top < 4; ++top) {
    Address a;
    a[0] = static_cast<std::uint8_t>(top << 6);
    matches += ten.hosts(a) ? 1 : 0;
  }
  CHECK(matches == 1);

  Address a = Address::from_hex("a5a5a5a5a5a5a5a5a5a5a5a5a5a5a5a5a5a5a5a5");
  CHECK(ShardAssignment::of_address(a, 160).hosts(a));
  CHECK(ShardAssignment::of_address(a, 13).hosts(a));
  CHECK(ShardAssignment::of_address(a, 13).to_string() == "1010010110100");
  Address b = a;
  b[1] ^= 0x08;  // bit 12
  CHECK_FALSE(ShardAssignment::of_address(a, 13).hosts(b));
  CHECK(ShardAssignment::of_address(a, 12).hosts(b));
}

TEST_CASE("split partitions the parent's host set") {
  auto [left, right] = split(ShardAssignment{});
  CHECK(left.to_string() == "0");
  CHECK(right.to_string() == "1");

  std::mt19937_64 rng(2);
  int in_left = 0;
  const int n = 10'000;
  for (int i = 0; i < n; ++i) {
    Address a = random_address(rng);
    const bool l = left.hosts(a), r = right.hosts(a);
    REQUIRE(l != r);
    in_left += l ? 1 : 0;
  }
  // 50% +- 5%
  CHECK(in_left > n * 45 / 100);
  CHECK(in_left < n * 55 / 100);

  auto deep = ShardAssignment::from_string("0110");
  auto [c0, c1] = deep.split();
  for (int i = 0; i < 2000; ++i) {
    Address a = random_address(rng);
    REQUIRE(deep.hosts(a) == (c0.hosts(a) || c1.hosts(a)));
    REQUIRE_FALSE((c0.hosts(a) && c1.hosts(a)));
  }
  CHECK(deep.is_prefix_of(c1));
  CHECK_FALSE(c1.is_prefix_of(deep));
}

TEST_CASE("splitting a full-length prefix fails") {
  auto full = ShardAssignment::of_address(Address::filled(0xff), 160);
  CHECK(full.depth() == 160);
  try {
    full.split();
    FAIL("expected MaxDepth");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MaxDepth);
  }
}

TEST_CASE("prefix serialization") {
  std::mt19937_64 rng(3);
  for (std::size_t d : {0u, 1u, 7u, 8u, 9u, 100u, 160u}) {
    auto p = ShardAssignment::of_address(random_address(rng), d);
    ByteWriter w;
    p.encode(w);
    CHECK(w.size() == 1 + (d + 7) / 8);
    ByteReader r(w.bytes());
    CHECK(ShardAssignment::decode(r) == p);
    CHECK(r.done());
  }
  Bytes padded{3, 0xff};
  ByteReader r(padded);
  CHECK_THROWS_AS(ShardAssignment::decode(r), Error);
  Bytes too_long{161};
  ByteReader r2(too_long);
  CHECK_THROWS_AS(ShardAssignment::decode(r2), Error);
}

TEST_CASE("nodes-path") {
  std::mt19937_64 rng(4);
  SUBCASE("single node") {
    TreeTopology t;
    CHECK(t.nodes_path(random_address(rng)) == std::vector<NodeId>{0});
  }
  SUBCASE("complete depth-2 tree gives paths of length 3") {
    auto t = TreeTopology::complete(7);
    for (int i = 0; i < 200; ++i) REQUIRE(nodes_path(t, random_address(rng)).size() == 3);
  }
  SUBCASE("random trees: exactly the path nodes host the address") {
    for (int round = 0; round < 50; ++round) {
      auto t = random_tree(15, rng);
      for (int i = 0; i < 50; ++i) {
        Address a = random_address(rng);
        auto path = t.nodes_path(a);
        REQUIRE(path.front() == TreeTopology::root());
        for (std::size_t k = 1; k < path.size(); ++k) {
          REQUIRE(t.assignment(path[k]).depth() == t.assignment(path[k - 1]).depth() + 1);
          REQUIRE(t.assignment(path[k - 1]).is_prefix_of(t.assignment(path[k])));
        }
        for (NodeId v = 0; v < t.size(); ++v) {
          const bool on_path = std::find(path.begin(), path.end(), v) != path.end();
          REQUIRE(t.assignment(v).hosts(a) == on_path);
        }
      }
    }
  }
}

TEST_CASE("every level of a complete tree partitions the address space") {
  std::mt19937_64 rng(5);
  auto t = TreeTopology::complete(15);
  for (int i = 0; i < 500; ++i) {
    Address a = random_address(rng);
    for (std::size_t level = 0; level <= 3; ++level) {
      int hosting = 0;
      for (NodeId v = 0; v < t.size(); ++v) hosting += (t.depth(v) == level && t.assignment(v).hosts(a)) ? 1 : 0;
      REQUIRE(hosting == 1);
    }
  }
}
