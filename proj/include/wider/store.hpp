#pragma once

#include <array>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>

#include "wider/bytes.hpp"

namespace wider {

enum class Keyspace : std::uint8_t {
  Blocks = 1,           // block hash -> encoded block
  Canonical = 2,        // u64 height -> block hash
  Txs = 3,              // address | u64 height -> encoded tx
  States = 4,           // address -> confirmed state (without claim sets)
  ClaimedSends = 5,     // address | send hash -> empty
  ClaimedCoinbases = 6, // address | block hash -> empty
  Seen = 7,             // tx hash -> SHA-256 of the full encoding
  Meta = 8,
};
inline constexpr std::size_t kKeyspaceCount = 8;

class WriteBatch {
 public:
  struct Op {
    bool erase = false;
    Keyspace space = Keyspace::Meta;
    Bytes key;
    Bytes value;
  };

  void put(Keyspace space, Bytes key, Bytes value) { ops_.push_back({false, space, std::move(key), std::move(value)}); }
  void erase(Keyspace space, Bytes key) { ops_.push_back({true, space, std::move(key), {}}); }

  bool empty() const noexcept { return ops_.empty(); }
  std::size_t size() const noexcept { return ops_.size(); }
  const std::vector<Op>& ops() const noexcept { return ops_; }

 private:
  std::vector<Op> ops_;
};

/// Ordered key-value store split into keyspaces. Always held in memory;
/// when opened on a directory every batch is also appended to a log as one
/// checksummed record, so a crash mid-write loses at most that whole batch.
class NodeStore {
 public:
  NodeStore() = default;
  /// Opens (or creates) `dir/store.log`, replays it and drops a torn tail.
  static NodeStore open(const std::filesystem::path& dir);

  NodeStore(NodeStore&& other) noexcept;
  NodeStore& operator=(NodeStore&& other) noexcept;
  NodeStore(const NodeStore&) = delete;
  NodeStore& operator=(const NodeStore&) = delete;
  ~NodeStore();

  void apply(const WriteBatch& batch);

  std::optional<Bytes> get(Keyspace space, ByteView key) const;
  bool contains(Keyspace space, ByteView key) const;
  /// Visits entries in key order; a non-empty prefix restricts the scan.
  void scan(Keyspace space, ByteView prefix, const std::function<void(ByteView key, ByteView value)>& fn) const;

  /// Sum of value sizes, the serialized payload held in a keyspace.
  std::uint64_t value_bytes(Keyspace space) const noexcept { return bytes_[index(space)]; }
  std::size_t count(Keyspace space) const noexcept { return maps_[index(space)].size(); }

  bool persistent() const noexcept { return file_ != nullptr; }
  const std::optional<std::filesystem::path>& directory() const noexcept { return dir_; }
  /// Rewrites the log with only the live entries.
  void compact();

 private:
  static std::size_t index(Keyspace space) noexcept { return static_cast<std::size_t>(space) - 1; }
  void apply_in_memory(const WriteBatch& batch);
  static Bytes encode_batch(const WriteBatch& batch);
  void close() noexcept;

  std::array<std::map<Bytes, Bytes>, kKeyspaceCount> maps_;
  std::array<std::uint64_t, kKeyspaceCount> bytes_{};
  std::optional<std::filesystem::path> dir_;
  std::FILE* file_ = nullptr;
};

}  // namespace wider
