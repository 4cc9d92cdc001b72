#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "wider/subchain.hpp"
#include "wider/topology.hpp"
#include "wider/transport.hpp"

namespace wider {

/// Who received one broadcast, after how many hops and when.
struct DeliveryReport {
  Hash256 msg_id;
  NodeId origin = 0;
  std::map<NodeId, std::uint16_t> hops;
  std::map<NodeId, Micros> arrival;
  std::uint64_t transmissions = 0;
  std::uint64_t duplicates = 0;

  bool reached(NodeId id) const { return hops.contains(id); }
  std::uint16_t max_hops() const;
};

/// Payload of a FragmentRequest: address | from | to.
struct FragmentQuery {
  Address address;
  std::uint64_t from_height = 0;
  std::uint64_t to_height = 0;

  Bytes encode() const;
  static FragmentQuery decode(ByteView bytes);
};

struct FetchResult {
  SubchainFragment fragment;
  NodeId host = 0;
  std::size_t hops = 0;
};

struct RpcStats {
  std::uint64_t requests = 0;
  std::uint64_t local = 0;
  std::uint64_t bytes = 0;
};

/// Tree overlay over a simulated transport.
///
/// Broadcast: on first receipt of a msg_id a node hands the message to its
/// application handler and forwards it to its parent, children, neighbours
/// and attached clients, except the link it came from. Clients (miners,
/// wallets) hang off one host node and never forward.
///
/// Fragment requests are a synchronous call to the nearest alive node on
/// the address's nodes-path; the simulated clock is not advanced.
class Overlay {
 public:
  using Deliver = std::function<void(const Envelope&)>;
  using FragmentServer = std::function<SubchainFragment(const Address&, std::uint64_t from, std::uint64_t to)>;
  using SendServer = std::function<std::optional<SendTx>(const Address& sender, const Hash256& tx_hash)>;

  static constexpr NodeId kClientBase = NodeId{1} << 62;

  Overlay(const TreeTopology& topology, SimTransport& transport);

  const TreeTopology& topology() const noexcept { return topology_; }
  SimTransport& transport() noexcept { return transport_; }
  /// Registers transport handlers for nodes that joined after construction.
  void sync_topology();

  void on_message(NodeId endpoint, Deliver deliver) { apps_[endpoint] = std::move(deliver); }
  NodeId attach_client(NodeId host);
  std::optional<NodeId> host_of(NodeId client) const;
  bool is_client(NodeId id) const noexcept { return id >= kClientBase; }
  void set_alive(NodeId id, bool alive) { transport_.set_alive(id, alive); }
  bool alive(NodeId id) const { return transport_.alive(id); }

  /// Starts a broadcast; the origin does not deliver to itself. Returns msg_id.
  Hash256 publish(NodeId origin, MessageKind kind, Bytes payload);
  /// publish, then run the transport until quiet.
  DeliveryReport broadcast(NodeId origin, const Envelope& env);
  const DeliveryReport* report(const Hash256& msg_id) const;
  /// Drops per-message bookkeeping (dedup sets stay).
  void forget_reports() { reports_.clear(); }

  void serve(NodeId node, FragmentServer fragments, SendServer sends);

  /// Throws NoHost when no alive host is reachable, Timeout when the round
  /// trip to the nearest one exceeds the deadline; host-side errors
  /// (RangeUnavailable, NotHosted) make it try the next host and are
  /// rethrown if every host fails.
  FetchResult request_fragment(NodeId requester, const Address& address, std::uint64_t from_height,
                               std::uint64_t to_height, std::optional<NodeId> skip = std::nullopt);
  std::optional<SendTx> request_send(NodeId requester, const Address& sender, const Hash256& tx_hash);

  void set_timeout(Micros timeout) noexcept { timeout_ = timeout; }
  const RpcStats& rpc_stats() const noexcept { return rpc_; }

  /// Hop count over alive links, nullopt if unreachable.
  std::optional<std::size_t> hop_distance(NodeId from, NodeId to) const;

 private:
  struct Server {
    FragmentServer fragments;
    SendServer sends;
  };

  void receive(NodeId self, NodeId from, const Envelope& env);
  void forward(NodeId self, NodeId except, const Envelope& env);
  std::vector<NodeId> alive_links(NodeId id) const;
  /// Hosts of `address` ordered by distance from the requester.
  std::vector<std::pair<std::size_t, NodeId>> ranked_hosts(NodeId requester, const Address& address,
                                                           std::optional<NodeId> skip) const;

  const TreeTopology& topology_;
  SimTransport& transport_;
  std::unordered_set<NodeId> registered_;
  std::unordered_map<NodeId, Deliver> apps_;
  std::unordered_map<NodeId, NodeId> client_host_;
  std::unordered_map<NodeId, std::vector<NodeId>> clients_;
  std::unordered_map<NodeId, std::unordered_set<Hash256>> seen_;
  std::unordered_map<Hash256, DeliveryReport> reports_;
  std::unordered_map<NodeId, Server> servers_;
  NodeId next_client_ = kClientBase;
  Micros timeout_ = 5'000'000;
  RpcStats rpc_;
};

}  // namespace wider
