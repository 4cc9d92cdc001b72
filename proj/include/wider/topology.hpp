#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "wider/sharding.hpp"

namespace wider {

using NodeId = std::uint64_t;

struct JoinResult {
  NodeId id = 0;
  ShardAssignment assignment;
};

/// Binary tree overlay. Node ids are dense and assigned in join order; the
/// root is 0. A node's shard prefix is fixed by its position: the first child
/// extends the parent's prefix with 0, the second with 1.
///
/// Every node also links to its n nearest nodes at tree distance >= 2 (ties
/// by id), and the relation is made symmetric.
class TreeTopology {
 public:
  explicit TreeTopology(std::size_t neighbor_count = 2);

  /// Breadth-first sequence of joins.
  static TreeTopology complete(std::size_t node_count, std::size_t neighbor_count = 2);

  static constexpr NodeId root() noexcept { return 0; }
  std::size_t size() const noexcept { return nodes_.size(); }
  bool contains(NodeId id) const noexcept { return id < nodes_.size(); }
  std::size_t neighbor_count() const noexcept { return neighbor_count_; }

  /// Throws UnknownParent or ParentFull.
  JoinResult join(NodeId parent);

  std::optional<NodeId> parent(NodeId id) const { return at(id).parent; }
  std::vector<NodeId> children(NodeId id) const;
  std::optional<NodeId> child(NodeId id, bool bit) const { return at(id).child[bit]; }
  const ShardAssignment& assignment(NodeId id) const { return at(id).assignment; }
  std::size_t depth(NodeId id) const { return at(id).assignment.depth(); }
  const std::vector<NodeId>& neighbors(NodeId id) const { return at(id).neighbors; }
  /// Parent, children, then neighbours.
  std::vector<NodeId> links(NodeId id) const;

  std::size_t distance(NodeId a, NodeId b) const;
  std::size_t diameter() const;

  /// Root-to-deepest chain of nodes whose prefix matches the address.
  std::vector<NodeId> nodes_path(const Address& address) const;

 private:
  struct Node {
    std::optional<NodeId> parent;
    std::array<std::optional<NodeId>, 2> child;
    ShardAssignment assignment;
    std::vector<NodeId> neighbors;
  };

  const Node& at(NodeId id) const;
  void recompute_neighbors();

  std::size_t neighbor_count_;
  std::vector<Node> nodes_;
};

inline std::vector<NodeId> nodes_path(const TreeTopology& tree, const Address& address) {
  return tree.nodes_path(address);
}

}  // namespace wider
