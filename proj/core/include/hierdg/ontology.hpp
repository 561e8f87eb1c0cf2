#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hierdg {

/// Dense index of a node inside one Hierarchy. Ids are assigned in canonical
/// breadth-first order (level-major, siblings in file order), so the root is
/// always 0 and all leaves occupy the trailing id range.
using NodeId = std::uint32_t;

constexpr NodeId kInvalidNode = static_cast<NodeId>(-1);

struct HierarchyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct HierarchyNode {
  NodeId id = kInvalidNode;
  int level = 0;  // root is level 1
  NodeId parent = kInvalidNode;
  std::string name;
  std::vector<NodeId> children;
};

struct LoadOptions {
  /// Insert pass-through single-child nodes under leaves that sit above the
  /// deepest level, instead of rejecting the file.
  bool pad_ragged = false;
};

/// Rooted multilevel concept tree with a code-to-leaf mapping.
///
/// Invariants after construction: a unique root at level 1, level(child) =
/// level(parent) + 1, every leaf at level H, acyclic and connected. Immutable
/// once built; safe to share read-only across threads.
class Hierarchy {
 public:
  int height() const { return height_; }
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t leaf_count() const { return leaves_.size(); }
  NodeId root() const { return 0; }

  const HierarchyNode& node(NodeId id) const {
    if (id >= nodes_.size()) throw HierarchyError("unknown NodeId " + std::to_string(id));
    return nodes_[id];
  }

  bool is_leaf(NodeId id) const { return node(id).children.empty(); }

  /// All leaves in ascending id order.
  const std::vector<NodeId>& leaves() const { return leaves_; }

  const std::map<std::string, NodeId>& leaf_map() const { return leaf_map_; }

  NodeId leaf_for_code(const std::string& code) const;

  /// Nodes strictly below n; empty for a leaf. Sorted ascending.
  std::vector<NodeId> descendants(NodeId n) const;

  /// Leaves below n; a leaf covers itself, so leaf_descendants(leaf) = {leaf}.
  std::vector<NodeId> leaf_descendants(NodeId n) const;

  NodeId lca(NodeId a, NodeId b) const;

  /// Position of a leaf id within leaves() (leaves are a contiguous id range).
  std::size_t leaf_index(NodeId leaf) const;

  void save(std::ostream& os) const;
  void save(const std::filesystem::path& path) const;

  /// Builds a validated tree. `edges` are (parent name, child name) pairs in
  /// file order; `codes` maps code strings onto leaf names.
  static Hierarchy build(const std::vector<std::pair<std::string, std::string>>& edges,
                         const std::vector<std::pair<std::string, std::string>>& codes,
                         const LoadOptions& opts = {});

 private:
  std::vector<HierarchyNode> nodes_;
  std::vector<NodeId> leaves_;
  std::map<std::string, NodeId> leaf_map_;
  int height_ = 0;
};

Hierarchy load_hierarchy(const std::filesystem::path& path, const LoadOptions& opts = {});
Hierarchy load_hierarchy(std::istream& is, const LoadOptions& opts = {});

}  // namespace hierdg
