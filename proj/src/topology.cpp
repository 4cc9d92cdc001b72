#include "wider/topology.hpp"

#include <algorithm>
#include <deque>
#include <set>

namespace wider {

TreeTopology::TreeTopology(std::size_t neighbor_count) : neighbor_count_(neighbor_count) {
  nodes_.push_back(Node{});
}

TreeTopology TreeTopology::complete(std::size_t node_count, std::size_t neighbor_count) {
  TreeTopology t(neighbor_count);
  for (NodeId next_parent = 0; t.size() < node_count; ++next_parent) {
    t.join(next_parent);
    if (t.size() < node_count) t.join(next_parent);
  }
  return t;
}

const TreeTopology::Node& TreeTopology::at(NodeId id) const {
  if (!contains(id)) throw Error(ErrorCode::UnknownParent, "no node " + std::to_string(id));
  return nodes_[id];
}

JoinResult TreeTopology::join(NodeId parent) {
  const Node& p = at(parent);
  const int slot = !p.child[0] ? 0 : !p.child[1] ? 1 : -1;
  if (slot < 0) throw Error(ErrorCode::ParentFull, "node " + std::to_string(parent) + " has two children");
  Node n;
  n.parent = parent;
  n.assignment = p.assignment.child(slot == 1);
  const NodeId id = nodes_.size();
  nodes_[parent].child[slot] = id;
  nodes_.push_back(std::move(n));
  recompute_neighbors();
  return {id, nodes_[id].assignment};
}

std::vector<NodeId> TreeTopology::children(NodeId id) const {
  std::vector<NodeId> out;
  for (const auto& c : at(id).child) {
    if (c) out.push_back(*c);
  }
  return out;
}

std::vector<NodeId> TreeTopology::links(NodeId id) const {
  const Node& n = at(id);
  std::vector<NodeId> out;
  if (n.parent) out.push_back(*n.parent);
  for (const auto& c : n.child) {
    if (c) out.push_back(*c);
  }
  out.insert(out.end(), n.neighbors.begin(), n.neighbors.end());
  return out;
}

std::size_t TreeTopology::distance(NodeId a, NodeId b) const {
  std::size_t da = depth(a), db = depth(b), d = 0;
  while (da > db) a = *nodes_[a].parent, --da, ++d;
  while (db > da) b = *nodes_[b].parent, --db, ++d;
  while (a != b) a = *nodes_[a].parent, b = *nodes_[b].parent, d += 2;
  return d;
}

std::size_t TreeTopology::diameter() const {
  // deepest node from the root, then the farthest node from that one
  auto farthest = [this](NodeId from) {
    std::pair<std::size_t, NodeId> best{0, from};
    for (NodeId v = 0; v < size(); ++v) best = std::max(best, {distance(from, v), v});
    return best;
  };
  return farthest(farthest(root()).second).first;
}

std::vector<NodeId> TreeTopology::nodes_path(const Address& address) const {
  std::vector<NodeId> path{root()};
  for (;;) {
    const Node& n = nodes_[path.back()];
    const auto& next = n.child[address_bit(address, n.assignment.depth())];
    if (!next) return path;
    path.push_back(*next);
  }
}

void TreeTopology::recompute_neighbors() {
  std::vector<std::set<NodeId>> chosen(size());
  for (NodeId u = 0; u < size(); ++u) {
    // level-order walk over tree edges; candidates start at distance 2
    std::vector<std::pair<std::size_t, NodeId>> candidates;
    std::vector<NodeId> frontier{u};
    std::set<NodeId> visited{u};
    for (std::size_t dist = 1; !frontier.empty(); ++dist) {
      std::vector<NodeId> next;
      for (NodeId v : frontier) {
        const Node& n = nodes_[v];
        auto visit = [&](NodeId w) {
          if (visited.insert(w).second) next.push_back(w);
        };
        if (n.parent) visit(*n.parent);
        for (const auto& c : n.child) {
          if (c) visit(*c);
        }
      }
      if (dist >= 2) {
        for (NodeId w : next) candidates.emplace_back(dist, w);
      }
      if (candidates.size() >= neighbor_count_) break;
      frontier = std::move(next);
    }
    std::sort(candidates.begin(), candidates.end());
    for (std::size_t i = 0; i < std::min(neighbor_count_, candidates.size()); ++i) {
      chosen[u].insert(candidates[i].second);
      chosen[candidates[i].second].insert(u);
    }
  }
  for (NodeId u = 0; u < size(); ++u) nodes_[u].neighbors.assign(chosen[u].begin(), chosen[u].end());
}

}  // namespace wider
