#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "wider/sim.hpp"

using namespace wider;

namespace {

SimConfig small() {
  SimConfig c;
  c.accounts = 60;
  c.width = 10;
  c.avg_txs = 2;
  c.block_size = kBlockOverhead + 20 * kRecordSize;
  c.interval_s = 15;
  c.blocks = 12;
  c.nodes = 7;
  return c;
}

}  // namespace

TEST_CASE("heartbeat only when nobody settles") {
  SimConfig c = small();
  c.width = 0;
  SimReport r = run_sim(c);
  CHECK(r.blocks.size() == 12);
  CHECK(r.total_txs == 0);
  CHECK(r.tps == 0);
  CHECK(r.conservation.holds());
  CHECK(r.conservation.unclaimed_coinbase == r.conservation.subsidies);
  for (const auto& n : r.nodes) CHECK(n.storage.subchain_bytes == 0);
}

TEST_CASE("under capacity every settle is confirmed in the next block") {
  SimConfig c = small();
  SimReport r = run_sim(c);
  CHECK(r.capacity == 20);
  for (const auto& b : r.blocks) {
    CHECK(b.records == c.width);
    CHECK(b.sends == c.width * c.avg_txs);
    CHECK(b.bytes == kBlockOverhead + kRecordSize * b.records);
  }
  CHECK(r.tps == doctest::Approx(double(c.width * c.avg_txs) / c.interval_s).epsilon(1e-12));
  CHECK(r.conservation.holds());
  CHECK(r.active_accounts == r.subchains);
  // claims of matured inflows appear once blocks are six deep
  CHECK(r.total_txs > r.total_sends);
}

TEST_CASE("over capacity the records per block saturate") {
  SimConfig c = small();
  c.width = 35;
  SimReport r = run_sim(c);
  for (const auto& b : r.blocks) {
    CHECK(b.records == r.capacity);
    CHECK(b.sends == r.capacity * c.avg_txs);
  }
  CHECK(r.conservation.holds());
}

TEST_CASE("same seed, same bytes") {
  SimConfig c = small();
  c.blocks = 8;
  const std::string a = to_json(run_sim(c)).dump();
  const std::string b = to_json(run_sim(c)).dump();
  CHECK(a == b);
  c.seed = 2;
  CHECK(to_json(run_sim(c)).dump() != a);
}

TEST_CASE("csv output") {
  SimConfig c = small();
  c.blocks = 3;
  std::ostringstream out;
  write_csv(run_sim(c), out);
  CHECK(out.str().rfind("height,records,txs,sends,bytes\n1,", 0) == 0);
}

TEST_CASE("config validation") {
  SimConfig c = small();
  c.width = c.accounts + 1;
  CHECK_THROWS_AS(run_sim(c), Error);
  c = small();
  c.interval_s = 1;
  CHECK_THROWS_AS(run_sim(c), Error);
  c = small();
  CHECK_THROWS_AS(apply_profile(c, "dogecoin-like"), Error);
  apply_profile(c, "ethereum-like");
  CHECK(c.block_size == 40'000);
  CHECK(c.interval_s == 15);
}

TEST_CASE("storage shrinks with shard depth") {
  SimConfig c = small();
  c.accounts = 200;
  c.width = 20;
  c.blocks = 6;
  auto rows = bench_storage(c);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].main_bytes == rows[1].main_bytes);
  CHECK(rows[1].main_bytes == rows[2].main_bytes);
  CHECK(rows[1].subchain_bytes < rows[0].subchain_bytes);
  CHECK(rows[2].subchain_bytes < rows[1].subchain_bytes);

  c.address_prefix = "0";
  auto skewed = bench_storage(c);
  CHECK(skewed[1].prefix == "0");
  CHECK(skewed[1].subchain_bytes == skewed[0].subchain_bytes);
}

TEST_CASE("verify bench agrees across worker counts") {
  auto bench = bench_verify(200, {1, 2, 4});
  CHECK(bench.identical_verdicts);
  REQUIRE(bench.rows.size() == 3);
  for (const auto& r : bench.rows) CHECK(r.valid == 200);
  CHECK(bench_verify(1, {1}).rows.front().valid == 1);
}
