#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <map>
#include <random>
#include <unordered_map>
#include <vector>

#include "wider/crypto.hpp"
#include "wider/topology.hpp"

namespace wider {

enum class MessageKind : std::uint8_t {
  NewTx = 1,
  NewBlock = 2,
  FragmentRequest = 3,
  FragmentResponse = 4,
  Hello = 5,
};

const char* to_string(MessageKind kind) noexcept;

struct Envelope {
  Hash256 msg_id;
  MessageKind kind = MessageKind::Hello;
  Bytes payload;
  /// Transport metadata; not covered by msg_id and not framed.
  std::uint16_t hop_count = 0;

  /// msg_id = SHA-256(kind || payload).
  static Envelope make(MessageKind kind, Bytes payload);
  static Hash256 id_of(MessageKind kind, ByteView payload);
  bool id_valid() const { return msg_id == id_of(kind, payload); }
};

/// u32 length of what follows | kind | msg_id | payload.
Bytes frame(const Envelope& env);
/// Parses exactly one frame; throws DecodeError on bad length, unknown kind
/// or a msg_id that does not match the payload.
Envelope unframe(ByteView bytes);

/// Incremental frame splitter for stream transports.
class FrameDecoder {
 public:
  static constexpr std::size_t kMaxFrame = 64u << 20;

  void feed(ByteView data) { buf_.insert(buf_.end(), data.begin(), data.end()); }
  std::optional<Envelope> next();

 private:
  Bytes buf_;
};

/// Point-to-point message delivery between overlay endpoints.
class Transport {
 public:
  using Handler = std::function<void(NodeId from, const Envelope&)>;

  virtual ~Transport() = default;
  virtual void set_handler(NodeId endpoint, Handler handler) = 0;
  virtual void send(NodeId from, NodeId to, Envelope env) = 0;
};

using Micros = std::uint64_t;

struct LatencyConfig {
  std::uint64_t min_ms = 20;
  std::uint64_t max_ms = 100;
};

/// Discrete-event transport. Every send draws a link latency uniformly from
/// [min, max] ms using the seeded generator; events fire in (time, sequence)
/// order, so identical inputs give identical delivery orders. Messages to a
/// dead endpoint are dropped at delivery time.
class SimTransport : public Transport {
 public:
  explicit SimTransport(std::uint64_t seed, LatencyConfig latency = {});

  void set_handler(NodeId endpoint, Handler handler) override;
  void send(NodeId from, NodeId to, Envelope env) override;

  /// Runs `fn` at simulated time `at` (clamped to now).
  void schedule(Micros at, std::function<void()> fn);

  Micros now() const noexcept { return now_; }
  Micros max_latency() const noexcept { return latency_.max_ms * 1000; }
  void set_alive(NodeId endpoint, bool alive);
  bool alive(NodeId endpoint) const;

  /// Fires the next event; false when the queue is empty.
  bool step();
  void run();
  /// Fires every event due at or before `until`, then sets the clock to it.
  void run_until(Micros until);
  std::size_t pending() const noexcept { return queue_.size(); }

  std::uint64_t delivered() const noexcept { return delivered_; }
  std::uint64_t dropped() const noexcept { return dropped_; }
  /// Append-only log of deliveries and drops: time, from, to, kind, msg_id, hops.
  const Bytes& trace() const noexcept { return trace_; }
  void set_tracing(bool on) noexcept { tracing_ = on; }

 private:
  struct Event {
    NodeId from = 0;
    NodeId to = 0;
    std::optional<Envelope> env;
    std::function<void()> timer;
  };

  void fire(Event& e);

  std::mt19937_64 rng_;
  LatencyConfig latency_;
  Micros now_ = 0;
  std::uint64_t seq_ = 0;
  std::map<std::pair<Micros, std::uint64_t>, Event> queue_;
  std::unordered_map<NodeId, Handler> handlers_;
  std::unordered_map<NodeId, bool> alive_;
  std::uint64_t delivered_ = 0;
  std::uint64_t dropped_ = 0;
  bool tracing_ = true;
  Bytes trace_;
};

}  // namespace wider
