#include "hierdg/ontology.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace hierdg {

namespace {

struct RawNode {
  std::string name;
  int first_seen = 0;          // line order, for deterministic sibling order
  std::string parent;          // empty for root candidates
  bool has_parent = false;
  std::vector<std::string> children;
};

}  // namespace

NodeId Hierarchy::leaf_for_code(const std::string& code) const {
  auto it = leaf_map_.find(code);
  if (it == leaf_map_.end()) throw HierarchyError("code not in leaf_map: " + code);
  return it->second;
}

std::vector<NodeId> Hierarchy::descendants(NodeId n) const {
  const HierarchyNode& start = node(n);
  std::vector<NodeId> out;
  std::vector<NodeId> stack(start.children.begin(), start.children.end());
  while (!stack.empty()) {
    NodeId cur = stack.back();
    stack.pop_back();
    out.push_back(cur);
    const auto& ch = nodes_[cur].children;
    stack.insert(stack.end(), ch.begin(), ch.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<NodeId> Hierarchy::leaf_descendants(NodeId n) const {
  if (is_leaf(n)) return {n};
  std::vector<NodeId> out;
  std::vector<NodeId> stack(node(n).children.begin(), node(n).children.end());
  while (!stack.empty()) {
    NodeId cur = stack.back();
    stack.pop_back();
    if (nodes_[cur].children.empty()) {
      out.push_back(cur);
    } else {
      const auto& ch = nodes_[cur].children;
      stack.insert(stack.end(), ch.begin(), ch.end());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

NodeId Hierarchy::lca(NodeId a, NodeId b) const {
  const HierarchyNode* na = &node(a);
  const HierarchyNode* nb = &node(b);
  while (na->level > nb->level) na = &nodes_[na->parent];
  while (nb->level > na->level) nb = &nodes_[nb->parent];
  while (na->id != nb->id) {
    na = &nodes_[na->parent];
    nb = &nodes_[nb->parent];
  }
  return na->id;
}

std::size_t Hierarchy::leaf_index(NodeId leaf) const {
  auto it = std::lower_bound(leaves_.begin(), leaves_.end(), leaf);
  if (it == leaves_.end() || *it != leaf)
    throw HierarchyError("node " + std::to_string(leaf) + " is not a leaf");
  return static_cast<std::size_t>(it - leaves_.begin());
}

void Hierarchy::save(std::ostream& os) const {
  for (NodeId id = 1; id < nodes_.size(); ++id)
    os << nodes_[nodes_[id].parent].name << '>' << nodes_[id].name << '\n';
  for (const auto& [code, leaf] : leaf_map_)
    os << "#code " << code << ' ' << nodes_[leaf].name << '\n';
}

void Hierarchy::save(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw HierarchyError("cannot open for write: " + path.string());
  save(os);
}

Hierarchy Hierarchy::build(const std::vector<std::pair<std::string, std::string>>& edges,
                           const std::vector<std::pair<std::string, std::string>>& codes,
                           const LoadOptions& opts) {
  std::unordered_map<std::string, RawNode> raw;
  int order = 0;
  auto touch = [&](const std::string& name) -> RawNode& {
    auto [it, inserted] = raw.try_emplace(name);
    if (inserted) {
      it->second.name = name;
      it->second.first_seen = order++;
    }
    return it->second;
  };

  for (const auto& [parent, child] : edges) {
    RawNode& p = touch(parent);
    RawNode& c = touch(child);
    if (c.has_parent) {
      if (c.parent != parent)
        throw HierarchyError("node has two parents: " + child);
      throw HierarchyError("duplicate edge: " + parent + ">" + child);
    }
    c.parent = parent;
    c.has_parent = true;
    p.children.push_back(child);
  }
  if (raw.empty()) throw HierarchyError("empty hierarchy");

  std::vector<const RawNode*> roots;
  for (const auto& [name, rn] : raw)
    if (!rn.has_parent) roots.push_back(&rn);
  if (roots.empty()) throw HierarchyError("no root: every node has a parent (cycle)");
  if (roots.size() > 1) {
    std::sort(roots.begin(), roots.end(),
              [](const RawNode* a, const RawNode* b) { return a->first_seen < b->first_seen; });
    throw HierarchyError("multiple roots: " + roots[0]->name + ", " + roots[1]->name);
  }

  // BFS from the root; unreachable nodes can only sit on a parent cycle.
  std::vector<const RawNode*> bfs;
  std::unordered_map<std::string, int> level_of;
  std::deque<const RawNode*> queue{roots[0]};
  level_of[roots[0]->name] = 1;
  while (!queue.empty()) {
    const RawNode* cur = queue.front();
    queue.pop_front();
    bfs.push_back(cur);
    std::vector<const RawNode*> kids;
    kids.reserve(cur->children.size());
    for (const auto& cn : cur->children) kids.push_back(&raw.at(cn));
    std::sort(kids.begin(), kids.end(),
              [](const RawNode* a, const RawNode* b) { return a->first_seen < b->first_seen; });
    for (const RawNode* k : kids) {
      level_of[k->name] = level_of[cur->name] + 1;
      queue.push_back(k);
    }
  }
  if (bfs.size() != raw.size()) {
    for (const auto& [name, rn] : raw)
      if (!level_of.count(name))
        throw HierarchyError("cycle detected involving node: " + name);
  }

  int height = 0;
  for (const auto* rn : bfs) height = std::max(height, level_of[rn->name]);
  if (height < 2) throw HierarchyError("hierarchy must have at least 2 levels");

  // Ragged leaves either fail validation or get a pass-through chain.
  std::vector<std::pair<std::string, std::string>> padded_edges = edges;
  std::unordered_map<std::string, std::string> leaf_alias;  // original leaf -> deepest pad
  bool padded = false;
  for (const auto* rn : bfs) {
    if (!rn->children.empty()) continue;
    const int lvl = level_of[rn->name];
    if (lvl == height) continue;
    if (!opts.pad_ragged)
      throw HierarchyError("leaf '" + rn->name + "' at level " + std::to_string(lvl) +
                           " but deepest level is " + std::to_string(height));
    std::string prev = rn->name;
    for (int l = lvl + 1; l <= height; ++l) {
      std::string pad = rn->name + ".pad" + std::to_string(l - lvl);
      if (raw.count(pad))
        throw HierarchyError("pad name collides with existing node: " + pad);
      padded_edges.emplace_back(prev, pad);
      prev = pad;
    }
    leaf_alias[rn->name] = prev;
    padded = true;
  }
  if (padded) {
    std::vector<std::pair<std::string, std::string>> new_codes;
    new_codes.reserve(codes.size());
    for (const auto& [code, leaf] : codes) {
      auto it = leaf_alias.find(leaf);
      new_codes.emplace_back(code, it == leaf_alias.end() ? leaf : it->second);
    }
    return build(padded_edges, new_codes, LoadOptions{false});
  }

  // Canonical ids: level-major BFS order (bfs is already level-major because
  // children are enqueued level by level).
  Hierarchy h;
  h.height_ = height;
  std::unordered_map<std::string, NodeId> id_of;
  h.nodes_.resize(bfs.size());
  for (NodeId id = 0; id < bfs.size(); ++id) id_of[bfs[id]->name] = id;
  for (NodeId id = 0; id < bfs.size(); ++id) {
    const RawNode* rn = bfs[id];
    HierarchyNode& n = h.nodes_[id];
    n.id = id;
    n.name = rn->name;
    n.level = level_of[rn->name];
    n.parent = rn->has_parent ? id_of.at(rn->parent) : kInvalidNode;
    std::vector<NodeId> kids;
    kids.reserve(rn->children.size());
    for (const auto& cn : rn->children) kids.push_back(id_of.at(cn));
    std::sort(kids.begin(), kids.end());
    n.children = std::move(kids);
  }
  for (NodeId id = 0; id < h.nodes_.size(); ++id)
    if (h.nodes_[id].children.empty()) h.leaves_.push_back(id);

  for (const auto& [code, leaf_name] : codes) {
    auto it = id_of.find(leaf_name);
    if (it == id_of.end())
      throw HierarchyError("#code refers to unknown node: " + leaf_name);
    if (!h.nodes_[it->second].children.empty())
      throw HierarchyError("#code refers to non-leaf node: " + leaf_name);
    auto [pos, inserted] = h.leaf_map_.emplace(code, it->second);
    if (!inserted) throw HierarchyError("duplicate code: " + code);
  }
  return h;
}

Hierarchy load_hierarchy(std::istream& is, const LoadOptions& opts) {
  std::vector<std::pair<std::string, std::string>> edges;
  std::vector<std::pair<std::string, std::string>> codes;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.rfind("#code ", 0) == 0) {
        std::istringstream ss(line.substr(6));
        std::string code, leaf;
        if (!(ss >> code >> leaf))
          throw HierarchyError("line " + std::to_string(lineno) + ": malformed #code line");
        codes.emplace_back(code, leaf);
      }
      continue;  // plain comment
    }
    auto gt = line.find('>');
    if (gt == std::string::npos || gt == 0 || gt + 1 >= line.size())
      throw HierarchyError("line " + std::to_string(lineno) +
                           ": expected 'parent>child', got '" + line + "'");
    edges.emplace_back(line.substr(0, gt), line.substr(gt + 1));
  }
  return Hierarchy::build(edges, codes, opts);
}

Hierarchy load_hierarchy(const std::filesystem::path& path, const LoadOptions& opts) {
  std::ifstream is(path);
  if (!is) throw HierarchyError("cannot open hierarchy file: " + path.string());
  return load_hierarchy(is, opts);
}

}  // namespace hierdg
