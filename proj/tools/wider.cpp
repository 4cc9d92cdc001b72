#include <CLI11.hpp>
#include <httplib.h>

#include <csignal>
#include <fstream>
#include <iostream>
#include <thread>

#include "service.hpp"
#include "wider/sim.hpp"
#include "wider/wallet.hpp"

using namespace wider;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

void wait_for_signal() {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
}

std::uint32_t parse_bits(const std::string& s) {
  try {
    return static_cast<std::uint32_t>(std::stoul(s, nullptr, 0));
  } catch (const std::exception&) {
    throw Error(ErrorCode::ConfigInvalid, "bad difficulty bits " + s);
  }
}

LatencyConfig parse_latency(const std::string& s) {
  LatencyConfig l;
  try {
    const auto dash = s.find('-');
    l.min_ms = std::stoull(s.substr(0, dash));
    l.max_ms = dash == std::string::npos ? l.min_ms : std::stoull(s.substr(dash + 1));
  } catch (const std::exception&) {
    throw Error(ErrorCode::ConfigInvalid, "latency must be MS or MIN-MAX, got " + s);
  }
  if (l.min_ms > l.max_ms) throw Error(ErrorCode::ConfigInvalid, "latency min above max");
  return l;
}

std::pair<Address, std::uint64_t> parse_alloc(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw Error(ErrorCode::ConfigInvalid, "allocation must be ADDRESS:AMOUNT");
  try {
    return {Address::from_hex(s.substr(0, colon)), std::stoull(s.substr(colon + 1))};
  } catch (const std::invalid_argument&) {
    throw Error(ErrorCode::ConfigInvalid, "bad allocation amount in " + s);
  }
}

std::filesystem::path data_dir_or_env(const std::string& flag) {
  if (const char* env = std::getenv("WIDER_DATA_DIR"); env && *env) return env;
  if (flag.empty()) throw Error(ErrorCode::ConfigInvalid, "--data-dir or WIDER_DATA_DIR is required");
  return flag;
}

/// Chain parameters live next to the data so later runs replay the same rules.
ChainParams load_or_store_params(const std::filesystem::path& dir, const ChainParams& fresh) {
  const auto path = dir / "params.json";
  if (std::filesystem::exists(path)) {
    std::ifstream in(path);
    return service::params_from_json(nlohmann::json::parse(in));
  }
  std::filesystem::create_directories(dir);
  std::ofstream(path) << service::params_to_json(fresh).dump(2) << '\n';
  return fresh;
}

ChainParams load_params(const std::filesystem::path& dir) {
  std::ifstream in(dir / "params.json");
  if (!in) throw Error(ErrorCode::Io, "no params.json in " + dir.string());
  return service::params_from_json(nlohmann::json::parse(in));
}

std::pair<std::string, int> split_listen(const std::string& s) {
  const auto colon = s.rfind(':');
  if (colon == std::string::npos) return {s, 8545};
  try {
    return {s.substr(0, colon), std::stoi(s.substr(colon + 1))};
  } catch (const std::exception&) {
    throw Error(ErrorCode::ConfigInvalid, "bad listen address " + s);
  }
}

nlohmann::json http_json(httplib::Result res, const std::string& what) {
  if (!res) throw Error(ErrorCode::Io, "no response for " + what);
  auto j = nlohmann::json::parse(res->body, nullptr, false);
  if (res->status != 200) {
    throw Error(ErrorCode::Io, what + ": " + (j.is_object() ? j.value("error", "") + " " + j.value("detail", "") : res->body));
  }
  return j;
}

struct SimFlags {
  SimConfig cfg;
  std::string latency;
  std::string bits;
  std::string profile;
  std::string out = "json";
  bool no_oracle = false;

  void add(CLI::App* app, bool with_out) {
    app->add_option("--seed", cfg.seed);
    app->add_option("--accounts", cfg.accounts);
    app->add_option("--width", cfg.width, "accounts settling per interval");
    app->add_option("--avg-txs", cfg.avg_txs, "sends per settling account");
    app->add_option("--block-size", cfg.block_size, "block size limit in bytes");
    app->add_option("--interval", cfg.interval_s, "block interval in seconds");
    app->add_option("--blocks", cfg.blocks);
    app->add_option("--nodes", cfg.nodes, "nodes in the complete tree");
    app->add_option("--neighbors", cfg.neighbors);
    app->add_option("--latency", latency, "link latency MS or MIN-MAX");
    app->add_option("--bits", bits, "compact difficulty target");
    app->add_option("--maturity", cfg.maturity);
    app->add_option("--workers", cfg.workers);
    app->add_option("--funds", cfg.funds, "genesis allocation per account");
    app->add_option("--prefix", cfg.address_prefix, "only use accounts under this bit prefix");
    app->add_option("--profile", profile, "bitcoin-like or ethereum-like")
        ->check(CLI::IsMember({"bitcoin-like", "ethereum-like"}));
    app->add_flag("--no-oracle", no_oracle, "skip the end-of-run replay check");
    if (with_out) app->add_option("--out", out)->check(CLI::IsMember({"csv", "json"}));
  }

  SimConfig resolve() const {
    SimConfig c = cfg;
    if (!profile.empty()) {
      // explicit flags still win over the preset
      SimConfig preset = c;
      apply_profile(preset, profile);
      const SimConfig defaults;
      if (c.block_size == defaults.block_size) c.block_size = preset.block_size;
      if (c.interval_s == defaults.interval_s) c.interval_s = preset.interval_s;
    }
    if (!latency.empty()) c.latency = parse_latency(latency);
    if (!bits.empty()) c.difficulty_bits = parse_bits(bits);
    c.oracle_check = !no_oracle;
    return c;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wider: sharded subchain ledger"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML or INI file with option defaults");

  auto* keygen_cmd = app.add_subcommand("keygen", "create a key file");
  std::string key_out;
  keygen_cmd->add_option("--out", key_out, "key file to write (prints only when omitted)");

  auto* sim_cmd = app.add_subcommand("sim", "run a deterministic simulation");
  SimFlags sim;
  sim.add(sim_cmd, true);

  auto* bv_cmd = app.add_subcommand("bench-verify", "time batch signature verification");
  std::size_t bv_txs = 10'000;
  std::vector<std::size_t> bv_workers{1, 2, 4, 8};
  std::uint64_t bv_seed = 1;
  bv_cmd->add_option("--txs", bv_txs)->check(CLI::PositiveNumber);
  bv_cmd->add_option("--workers", bv_workers)->delimiter(',');
  bv_cmd->add_option("--seed", bv_seed);

  auto* bs_cmd = app.add_subcommand("bench-storage", "storage of full, half and quarter nodes");
  SimFlags storage;
  storage.add(bs_cmd, false);

  auto* node_cmd = app.add_subcommand("node", "run a persistent node over HTTP");
  std::string node_dir, listen = "127.0.0.1:8545", node_prefix, node_bits;
  std::optional<std::string> parent;
  std::vector<std::string> allocs;
  ChainParams fresh;
  node_cmd->add_option("--data-dir", node_dir, "overridden by WIDER_DATA_DIR");
  node_cmd->add_option("--listen", listen, "HOST:PORT");
  node_cmd->add_option("--parent", parent, "http://HOST:PORT of the parent node");
  node_cmd->add_option("--prefix", node_prefix, "hosted address prefix, e.g. 01");
  node_cmd->add_option("--alloc", allocs, "genesis ADDRESS:AMOUNT (first start only)");
  node_cmd->add_option("--bits", node_bits, "difficulty (first start only)");
  node_cmd->add_option("--block-size", fresh.block_size_limit, "(first start only)");
  node_cmd->add_option("--maturity", fresh.maturity, "(first start only)");

  auto* miner_cmd = app.add_subcommand("miner", "mine on top of a node");
  std::string miner_node = "http://127.0.0.1:8545", miner_addr, miner_bits;
  std::size_t miner_workers = 1;
  std::optional<std::uint64_t> miner_blocks;
  miner_cmd->add_option("--node", miner_node);
  miner_cmd->add_option("--address", miner_addr, "coinbase address")->required();
  miner_cmd->add_option("--bits", miner_bits, "defaults to the node's");
  miner_cmd->add_option("--workers", miner_workers);
  miner_cmd->add_option("--max-blocks", miner_blocks);

  auto* compact_cmd = app.add_subcommand("compact", "drop data outside the hosted prefix");
  std::string compact_dir, compact_prefix;
  compact_cmd->add_option("--data-dir", compact_dir, "overridden by WIDER_DATA_DIR");
  compact_cmd->add_option("--prefix", compact_prefix, "narrow to this prefix first");

  auto* wallet_cmd = app.add_subcommand("wallet", "query or spend through a node");
  wallet_cmd->require_subcommand(1);
  std::string wallet_node = "http://127.0.0.1:8545", wallet_key, to;
  std::uint64_t amount = 0;
  auto* balance_cmd = wallet_cmd->add_subcommand("balance");
  balance_cmd->add_option("--node", wallet_node);
  balance_cmd->add_option("--key", wallet_key)->required();
  auto* send_cmd = wallet_cmd->add_subcommand("send");
  send_cmd->add_option("--node", wallet_node);
  send_cmd->add_option("--key", wallet_key)->required();
  send_cmd->add_option("--to", to)->required();
  send_cmd->add_option("--amount", amount)->required()->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  const bool json_errors = sim_cmd->parsed() && sim.out == "json";
  try {
    if (keygen_cmd->parsed()) {
      const KeyPair k = keygen();
      if (!key_out.empty()) write_key_file(key_out, k.secret);
      std::cout << k.address.hex() << '\n';
    } else if (sim_cmd->parsed()) {
      const SimReport r = run_sim(sim.resolve());
      if (sim.out == "csv") {
        write_csv(r, std::cout);
      } else {
        std::cout << to_json(r).dump(2) << '\n';
      }
    } else if (bv_cmd->parsed()) {
      const VerifyBench b = bench_verify(bv_txs, bv_workers, bv_seed);
      write_csv(b, std::cout);
      if (!b.identical_verdicts) throw Error(ErrorCode::InvariantViolation, "verdicts differ across worker counts");
    } else if (bs_cmd->parsed()) {
      write_csv(bench_storage(storage.resolve()), std::cout);
    } else if (node_cmd->parsed()) {
      const auto dir = data_dir_or_env(node_dir);
      for (const auto& a : allocs) fresh.allocations.push_back(parse_alloc(a));
      if (!node_bits.empty()) fresh.difficulty_bits = parse_bits(node_bits);
      service::NodeServiceConfig cfg;
      cfg.data_dir = dir;
      std::tie(cfg.host, cfg.port) = split_listen(listen);
      cfg.parent = parent;
      cfg.prefix = ShardAssignment::from_string(node_prefix);
      cfg.params = load_or_store_params(dir, fresh);
      service::NodeService svc(cfg);
      const int port = svc.start();
      std::cerr << "listening on " << cfg.host << ':' << port << " prefix '" << node_prefix << "'\n";
      wait_for_signal();
      svc.stop();
    } else if (miner_cmd->parsed()) {
      service::MinerServiceConfig cfg;
      cfg.node_url = miner_node;
      cfg.miner.address = Address::from_hex(miner_addr);
      cfg.miner.workers = miner_workers;
      if (miner_bits.empty()) {
        httplib::Client c(miner_node);
        cfg.miner.difficulty_bits = http_json(c.Get("/params"), "/params").at("difficulty_bits").get<std::uint32_t>();
      } else {
        cfg.miner.difficulty_bits = parse_bits(miner_bits);
      }
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "mined " << service::run_miner(cfg, g_stop, miner_blocks) << " blocks\n";
    } else if (compact_cmd->parsed()) {
      const auto dir = data_dir_or_env(compact_dir);
      Node node = Node::open(load_params(dir), ShardAssignment::from_string(compact_prefix), dir);
      node.compact();
      const StorageReport s = node.storage_report();
      std::cout << "subchains " << s.subchains << " subchain_bytes " << s.subchain_bytes << " main_chain_bytes "
                << s.main_chain_bytes << '\n';
    } else if (wallet_cmd->parsed()) {
      const KeyPair key = read_key_file(wallet_key);
      httplib::Client c(wallet_node);
      const std::string account = "/account?address=" + key.address.hex();
      const auto j = http_json(c.Get(account), "/account");
      if (balance_cmd->parsed()) {
        std::cout << j.dump(2) << '\n';
      } else {
        AccountView v;
        v.address = key.address;
        v.head = SubchainState::genesis(key.address, j["head"]["balance"].get<std::uint64_t>());
        v.head.tip_hash = Hash256::from_hex(j["head"]["tip_hash"].get<std::string>());
        v.head.tip_height = j["head"]["tip_height"].get<std::uint64_t>();
        const auto now = std::chrono::duration_cast<std::chrono::seconds>(
            std::chrono::system_clock::now().time_since_epoch());
        const SendTx tx = build_send(v, Address::from_hex(to), amount, key, static_cast<std::uint64_t>(now.count()));
        const Bytes enc = encode_fragment({key.address, v.head.tip_height - 1, {tx}});
        http_json(c.Post("/tx", std::string(enc.begin(), enc.end()), "application/octet-stream"), "/tx");
        std::cout << tx.tx_hash.hex() << '\n';
      }
    }
  } catch (const Error& e) {
    if (json_errors) {
      std::cout << nlohmann::json{{"error", to_string(e.code())}, {"detail", e.detail()}}.dump() << '\n';
    } else {
      std::cerr << "error: " << e.what() << '\n';
    }
    return 1;
  } catch (const std::exception& e) {
    if (json_errors) {
      std::cout << nlohmann::json{{"error", "Internal"}, {"detail", e.what()}}.dump() << '\n';
    } else {
      std::cerr << "error: " << e.what() << '\n';
    }
    return 1;
  }
  return 0;
}
