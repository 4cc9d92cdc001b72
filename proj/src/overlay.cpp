#include "wider/overlay.hpp"

#include <algorithm>
#include <deque>

namespace wider {

std::uint16_t DeliveryReport::max_hops() const {
  std::uint16_t m = 0;
  for (const auto& [id, h] : hops) m = std::max(m, h);
  return m;
}

Bytes FragmentQuery::encode() const {
  ByteWriter w(36);
  w.fixed(address);
  w.u64(from_height);
  w.u64(to_height);
  return std::move(w).take();
}

FragmentQuery FragmentQuery::decode(ByteView bytes) {
  ByteReader r(bytes);
  FragmentQuery q;
  q.address = r.fixed<Address>();
  q.from_height = r.u64();
  q.to_height = r.u64();
  r.expect_done();
  return q;
}

Overlay::Overlay(const TreeTopology& topology, SimTransport& transport)
    : topology_(topology), transport_(transport) {
  sync_topology();
}

void Overlay::sync_topology() {
  for (NodeId id = 0; id < topology_.size(); ++id) {
    if (registered_.insert(id).second) {
      transport_.set_handler(id, [this, id](NodeId from, const Envelope& env) { receive(id, from, env); });
    }
  }
}

NodeId Overlay::attach_client(NodeId host) {
  if (!topology_.contains(host)) throw Error(ErrorCode::UnknownParent, "no node " + std::to_string(host));
  const NodeId id = next_client_++;
  client_host_[id] = host;
  clients_[host].push_back(id);
  transport_.set_handler(id, [this, id](NodeId from, const Envelope& env) { receive(id, from, env); });
  return id;
}

std::optional<NodeId> Overlay::host_of(NodeId client) const {
  auto it = client_host_.find(client);
  if (it == client_host_.end()) return std::nullopt;
  return it->second;
}

Hash256 Overlay::publish(NodeId origin, MessageKind kind, Bytes payload) {
  Envelope env = Envelope::make(kind, std::move(payload));
  const Hash256 id = env.msg_id;
  DeliveryReport& rep = reports_[id];
  rep.msg_id = id;
  rep.origin = origin;
  if (!alive(origin)) return id;
  if (!seen_[origin].insert(id).second) return id;
  rep.hops[origin] = 0;
  rep.arrival[origin] = transport_.now();
  forward(origin, origin, env);
  return id;
}

DeliveryReport Overlay::broadcast(NodeId origin, const Envelope& env) {
  if (!env.id_valid()) throw Error(ErrorCode::DecodeError, "msg_id does not match payload");
  Hash256 id = publish(origin, env.kind, env.payload);
  transport_.run();
  return reports_.at(id);
}

const DeliveryReport* Overlay::report(const Hash256& msg_id) const {
  auto it = reports_.find(msg_id);
  return it == reports_.end() ? nullptr : &it->second;
}

void Overlay::forward(NodeId self, NodeId except, const Envelope& env) {
  std::vector<NodeId> targets;
  if (is_client(self)) {
    targets.push_back(client_host_.at(self));
  } else {
    targets = topology_.links(self);
    if (auto c = clients_.find(self); c != clients_.end()) targets.insert(targets.end(), c->second.begin(), c->second.end());
  }
  DeliveryReport* rep = nullptr;
  if (auto it = reports_.find(env.msg_id); it != reports_.end()) rep = &it->second;
  for (NodeId to : targets) {
    if (to == except) continue;
    Envelope copy = env;
    copy.hop_count = static_cast<std::uint16_t>(env.hop_count + 1);
    transport_.send(self, to, std::move(copy));
    if (rep) ++rep->transmissions;
  }
}

void Overlay::receive(NodeId self, NodeId from, const Envelope& env) {
  DeliveryReport* rep = nullptr;
  if (auto it = reports_.find(env.msg_id); it != reports_.end()) rep = &it->second;
  if (!seen_[self].insert(env.msg_id).second) {
    if (rep) ++rep->duplicates;
    return;
  }
  if (rep) {
    rep->hops[self] = env.hop_count;
    rep->arrival[self] = transport_.now();
  }
  if (!is_client(self)) forward(self, from, env);
  if (auto app = apps_.find(self); app != apps_.end()) {
    Deliver deliver = app->second;
    deliver(env);
  }
}

void Overlay::serve(NodeId node, FragmentServer fragments, SendServer sends) {
  servers_[node] = Server{std::move(fragments), std::move(sends)};
}

std::vector<NodeId> Overlay::alive_links(NodeId id) const {
  std::vector<NodeId> out;
  if (is_client(id)) {
    auto it = client_host_.find(id);
    if (it != client_host_.end() && alive(it->second)) out.push_back(it->second);
    return out;
  }
  for (NodeId l : topology_.links(id)) {
    if (alive(l)) out.push_back(l);
  }
  return out;
}

std::optional<std::size_t> Overlay::hop_distance(NodeId from, NodeId to) const {
  if (!alive(from) || !alive(to)) return std::nullopt;
  if (from == to) return 0;
  std::unordered_map<NodeId, std::size_t> dist{{from, 0}};
  std::deque<NodeId> q{from};
  // a client endpoint is reached through its host
  const std::optional<NodeId> to_host = host_of(to);
  while (!q.empty()) {
    NodeId u = q.front();
    q.pop_front();
    for (NodeId v : alive_links(u)) {
      if (dist.contains(v)) continue;
      dist[v] = dist[u] + 1;
      if (v == to) return dist[v];
      if (to_host && v == *to_host) return dist[v] + 1;
      q.push_back(v);
    }
  }
  return std::nullopt;
}

std::vector<std::pair<std::size_t, NodeId>> Overlay::ranked_hosts(NodeId requester, const Address& address,
                                                                  std::optional<NodeId> skip) const {
  std::vector<std::pair<std::size_t, NodeId>> out;
  for (NodeId h : topology_.nodes_path(address)) {
    if (skip && h == *skip) continue;
    if (!servers_.contains(h)) continue;
    if (auto d = hop_distance(requester, h)) out.emplace_back(*d, h);
  }
  std::sort(out.begin(), out.end());
  return out;
}

FetchResult Overlay::request_fragment(NodeId requester, const Address& address, std::uint64_t from_height,
                                      std::uint64_t to_height, std::optional<NodeId> skip) {
  ++rpc_.requests;
  auto hosts = ranked_hosts(requester, address, skip);
  if (hosts.empty()) throw Error(ErrorCode::NoHost, "no alive host for " + address.hex());
  std::optional<Error> last;
  for (const auto& [hops, host] : hosts) {
    if (2 * hops * transport_.max_latency() > timeout_) {
      if (!last) last = Error(ErrorCode::Timeout, "nearest host is " + std::to_string(hops) + " hops away");
      break;
    }
    try {
      const Bytes request = FragmentQuery{address, from_height, to_height}.encode();
      const FragmentQuery q = FragmentQuery::decode(request);
      SubchainFragment frag = servers_.at(host).fragments(q.address, q.from_height, q.to_height);
      // the response crosses the wire in canonical framing
      Bytes wire = encode_fragment(frag);
      rpc_.bytes += request.size() + wire.size();
      if (hops == 0) ++rpc_.local;
      SubchainFragment back = decode_fragment(wire);
      if (back.address != address || back.from_height != from_height || back.to_height() != to_height) {
        throw Error(ErrorCode::PartialFetch, "host returned a different range");
      }
      check_fragment_links(back);
      return {std::move(back), host, hops};
    } catch (const Error& e) {
      last = e;
    }
  }
  throw *last;
}

std::optional<SendTx> Overlay::request_send(NodeId requester, const Address& sender, const Hash256& tx_hash) {
  ++rpc_.requests;
  for (const auto& [hops, host] : ranked_hosts(requester, sender, std::nullopt)) {
    if (2 * hops * transport_.max_latency() > timeout_) break;
    const Server& s = servers_.at(host);
    if (!s.sends) continue;
    if (auto found = s.sends(sender, tx_hash)) {
      rpc_.bytes += 52 + kSendEncodedSize;
      if (hops == 0) ++rpc_.local;
      return found;
    }
  }
  return std::nullopt;
}

}  // namespace wider
