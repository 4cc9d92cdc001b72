#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <httplib.h>

#include <filesystem>
#include <thread>

#include "service.hpp"
#include "support/blocks.hpp"

using namespace wider;
using namespace wider::testing;
using namespace std::chrono_literals;

namespace {

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name) : path(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove_all(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

std::string url(int port) { return "http://127.0.0.1:" + std::to_string(port); }

std::string body(const Bytes& b) { return {b.begin(), b.end()}; }

bool eventually(auto&& pred) {
  for (int i = 0; i < 300; ++i) {
    if (pred()) return true;
    std::this_thread::sleep_for(20ms);
  }
  return false;
}

}  // namespace

TEST_CASE("params survive the json round trip") {
  ChainParams p;
  p.block_size_limit = 4096;
  p.maturity = 3;
  p.allocations = {{Address::filled(1), 10}, {Address::filled(2), 20}};
  const ChainParams q = service::params_from_json(nlohmann::json::parse(service::params_to_json(p).dump()));
  CHECK(q.block_size_limit == 4096);
  CHECK(q.maturity == 3);
  CHECK(q.allocations == p.allocations);
  CHECK(q.difficulty_bits == p.difficulty_bits);
}

TEST_CASE("a child relays txs, a miner confirms them, the child follows") {
  Account alice(account_with_bit(false));
  ChainParams params;
  params.allocations.emplace_back(alice.address(), 1000);

  TempDir root_dir("wider_service_root"), child_dir("wider_service_child");
  service::NodeServiceConfig rc{root_dir.path, "127.0.0.1", 0, std::nullopt, {}, params};
  service::NodeService root(rc);
  const int root_port = root.start();

  service::NodeServiceConfig cc{child_dir.path, "127.0.0.1", 0, url(root_port), ShardAssignment::from_string("0"),
                                params, 50ms};
  service::NodeService child(cc);
  const int child_port = child.start();
  httplib::Client to_child(url(child_port));

  auto status = to_child.Get("/status");
  REQUIRE(status);
  CHECK(nlohmann::json::parse(status->body)["prefix"] == "0");

  alice.send(Address::filled(9), 100);
  alice.send(Address::filled(9), 50);
  auto posted = to_child.Post("/tx", body(encode_fragment({alice.address(), 0, alice.txs})), "application/octet-stream");
  REQUIRE(posted);
  CHECK(posted->status == 200);
  CHECK(nlohmann::json::parse(posted->body)["accepted"] == 2);

  auto garbage = to_child.Post("/tx", "nope", "application/octet-stream");
  REQUIRE(garbage);
  CHECK(garbage->status == 400);
  CHECK(nlohmann::json::parse(garbage->body)["error"] == "DecodeError");

  std::atomic<bool> stop{false};
  service::MinerServiceConfig mc{url(root_port), MinerConfig{Address::filled(0xaa)}, 200ms};
  CHECK(service::run_miner(mc, stop, 2) == 2);

  CHECK(root.node().view().tip_height() >= 2);
  CHECK(eventually([&] { return child.node().view().tip_height() == root.node().view().tip_height(); }));

  auto account = to_child.Get("/account?address=" + alice.address().hex());
  REQUIRE(account);
  auto j = nlohmann::json::parse(account->body);
  CHECK(j["confirmed"]["balance"] == 850);
  CHECK(j["confirmed"]["tip_height"] == 2);

  auto frag = to_child.Get("/fragment?address=" + alice.address().hex() + "&from=0&to=2");
  REQUIRE(frag);
  CHECK(decode_fragment(Bytes(frag->body.begin(), frag->body.end())).txs == alice.txs);

  auto elsewhere = to_child.Get("/account?address=" + Account(account_with_bit(true)).address().hex());
  REQUIRE(elsewhere);
  CHECK(elsewhere->status == 404);

  auto missing = to_child.Get("/block?height=999");
  REQUIRE(missing);
  CHECK(missing->status == 404);
}
