#pragma once

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "wider/miner.hpp"
#include "wider/transport.hpp"

namespace wider {

struct SimConfig {
  std::uint64_t seed = 1;
  std::size_t accounts = 1000;
  std::size_t width = 100;     // accounts settling per interval
  std::size_t avg_txs = 1;     // sends per settling account per interval
  std::size_t block_size = 1'000'000;
  std::uint64_t interval_s = 600;
  std::size_t blocks = 10;
  std::size_t nodes = 7;       // complete binary tree
  std::size_t neighbors = 2;
  LatencyConfig latency;
  std::uint32_t difficulty_bits = kEasiestBits;
  std::uint64_t maturity = 6;
  std::size_t workers = 1;
  std::uint64_t funds = 1'000'000'000'000;  // genesis allocation per account
  /// Only accounts whose address starts with these bits (skewed placement).
  std::string address_prefix;
  /// Replays every confirmed subchain from scratch at the end.
  bool oracle_check = true;

  /// Throws ConfigInvalid.
  void validate() const;
};

/// Applies a named preset: bitcoin-like (1 MB, 600 s) or ethereum-like
/// (40 KB, 15 s). Throws ConfigInvalid for other names.
void apply_profile(SimConfig& cfg, std::string_view profile);

struct BlockRow {
  std::uint64_t height = 0;
  std::uint64_t records = 0;
  std::uint64_t txs = 0;    // every tx the records cover
  std::uint64_t sends = 0;  // sends among them
  std::uint64_t bytes = 0;
};

struct NodeRow {
  NodeId id = 0;
  std::string prefix;
  StorageReport storage;
};

struct Conservation {
  std::uint64_t genesis = 0;
  std::uint64_t subsidies = 0;
  std::uint64_t balances = 0;
  std::uint64_t in_flight = 0;
  std::uint64_t unclaimed_coinbase = 0;

  bool holds() const noexcept { return balances + in_flight + unclaimed_coinbase == genesis + subsidies; }
};

struct SimReport {
  SimConfig config;
  std::uint64_t capacity = 0;
  std::vector<BlockRow> blocks;
  std::uint64_t total_records = 0;
  std::uint64_t total_txs = 0;
  std::uint64_t total_sends = 0;
  /// Confirmed sends per second of simulated time.
  double tps = 0;
  std::uint64_t active_accounts = 0;
  std::uint64_t subchains = 0;
  std::vector<NodeRow> nodes;
  Conservation conservation;
  std::uint64_t messages_delivered = 0;
  std::uint64_t fragment_requests = 0;
  std::uint64_t pool_evictions = 0;
  std::string trace_digest;
};

/// Deterministic per config. Throws InvariantViolation when nodes
/// disagree, conservation fails or the replay oracle disagrees.
SimReport run_sim(const SimConfig& cfg);

nlohmann::ordered_json to_json(const SimReport& report);
/// One row per block: height,records,txs,sends,bytes.
void write_csv(const SimReport& report, std::ostream& out);

struct VerifyTiming {
  std::size_t workers = 0;
  double seconds = 0;
  std::size_t valid = 0;
};

struct VerifyBench {
  std::vector<VerifyTiming> rows;
  bool identical_verdicts = true;
};

/// Signs `n_txs` sends up front, then times verify_batch per worker count.
VerifyBench bench_verify(std::size_t n_txs, const std::vector<std::size_t>& worker_counts, std::uint64_t seed = 1);
void write_csv(const VerifyBench& bench, std::ostream& out);

struct StorageRow {
  std::size_t depth = 0;
  std::string prefix;
  std::uint64_t main_bytes = 0;
  std::uint64_t subchain_bytes = 0;
};

/// One simulation; the first node at depths 0, 1 and 2 of the tree.
std::vector<StorageRow> bench_storage(const SimConfig& cfg);
void write_csv(const std::vector<StorageRow>& rows, std::ostream& out);

}  // namespace wider
