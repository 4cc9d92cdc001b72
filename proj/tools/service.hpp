#pragma once

// HTTP front end for a persistent node, and a miner that drives one.
//
// Node endpoints (binary bodies are the canonical encodings):
//   GET  /params                    chain parameters as JSON
//   GET  /status                    tip, prefix and storage report as JSON
//   GET  /block?height=N            canonical block at N
//   GET  /txs?since=N               accepted fragments from log index N,
//                                   each u32-length prefixed; X-Next holds
//                                   the next index
//   GET  /fragment?address=&from=&to=
//   GET  /account?address=          confirmed and head state as JSON
//   POST /tx                        one encoded fragment
//   POST /block                     one encoded block
// Accepted txs and blocks are relayed to the parent URL when one is set,
// and new parent blocks are pulled every sync interval.

#include <atomic>
#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "wider/miner.hpp"

namespace wider::service {

nlohmann::ordered_json params_to_json(const ChainParams& p);
ChainParams params_from_json(const nlohmann::json& j);

struct NodeServiceConfig {
  std::filesystem::path data_dir;
  std::string host = "127.0.0.1";
  int port = 8545;  // 0 picks a free port
  std::optional<std::string> parent;  // http://host:port
  ShardAssignment prefix;
  ChainParams params;
  std::chrono::milliseconds sync_interval = std::chrono::milliseconds(500);
};

class NodeService {
 public:
  explicit NodeService(NodeServiceConfig config);
  ~NodeService();

  /// Binds and serves on a background thread; returns the bound port.
  int start();
  void stop();
  Node& node();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct MinerServiceConfig {
  std::string node_url;
  MinerConfig miner;
  /// Seal attempts are abandoned after this long to pick up new data.
  std::chrono::milliseconds round = std::chrono::milliseconds(2000);
};

/// Pulls blocks and txs from the node, mines on top and posts each block
/// back. Runs until `stop` is set or `max_blocks` blocks were posted.
std::uint64_t run_miner(const MinerServiceConfig& config, const std::atomic<bool>& stop,
                        std::optional<std::uint64_t> max_blocks = std::nullopt);

}  // namespace wider::service
