#include "hierdg/embedding_flow.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>

#include "hierdg/rng.hpp"

namespace hierdg {

namespace {
std::atomic<uint64_t> g_zero_cosine{0};
}

double cosine_sim(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size())
    throw EmbeddingError("cosine_sim dimension mismatch: " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) {
    g_zero_cosine.fetch_add(1, std::memory_order_relaxed);
    return 0.0;
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

uint64_t zero_cosine_events() { return g_zero_cosine.load(std::memory_order_relaxed); }
void reset_zero_cosine_events() { g_zero_cosine.store(0, std::memory_order_relaxed); }

EmbeddingTable init_leaf_embeddings(const Hierarchy& h,
                                    const std::map<std::string, std::vector<double>>& backbone,
                                    std::size_t dim) {
  for (const auto& [code, vec] : backbone)
    if (vec.size() != dim)
      throw EmbeddingError("backbone vector for '" + code + "' has length " +
                           std::to_string(vec.size()) + ", expected " + std::to_string(dim));

  EmbeddingTable table;
  table.dim = dim;
  table.vectors.resize(h.node_count());
  table.from_backbone.assign(h.node_count(), 0);

  // leaf -> first code claiming it, in code order
  std::vector<const std::string*> code_of(h.node_count(), nullptr);
  for (const auto& [code, leaf] : h.leaf_map())
    if (!code_of[leaf]) code_of[leaf] = &code;

  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  for (NodeId leaf : h.leaves()) {
    auto it = code_of[leaf] ? backbone.find(*code_of[leaf]) : backbone.end();
    if (it != backbone.end()) {
      table.vectors[leaf] = it->second;
      table.from_backbone[leaf] = 1;
    } else {
      CounterRng rng(hash_name(h.node(leaf).name), {hash_name("leaf_embed")});
      auto& v = table.vectors[leaf];
      v.resize(dim);
      for (auto& x : v) x = rng.uniform(-bound, bound);
    }
  }
  return table;
}

EmbeddingTable upward_average(const Hierarchy& h, EmbeddingTable table, UpwardMode mode) {
  for (NodeId leaf : h.leaves())
    if (!table.has(leaf))
      throw EmbeddingError("leaf " + std::to_string(leaf) + " has no vector");

  // Ids are level-major, so walking ids backwards visits deeper nodes first.
  for (NodeId id = h.node_count(); id-- > 0;) {
    const HierarchyNode& n = h.node(id);
    if (n.children.empty()) continue;
    std::vector<NodeId> sources =
        mode == UpwardMode::direct_children ? n.children : h.leaf_descendants(id);
    std::vector<double> mean(table.dim, 0.0);
    for (NodeId c : sources) {
      if (!table.has(c))
        throw EmbeddingError("node " + std::to_string(c) + " has no vector");
      for (std::size_t k = 0; k < table.dim; ++k) mean[k] += table.vectors[c][k];
    }
    for (auto& x : mean) x /= static_cast<double>(sources.size());
    table.vectors[id] = std::move(mean);
  }
  return table;
}

EmbeddingTable lca_rectify(const Hierarchy& h, EmbeddingTable table, double threshold) {
  for (NodeId id = 0; id < h.node_count(); ++id)
    if (!table.has(id))
      throw EmbeddingError("lca_rectify needs a complete table; node " + std::to_string(id) +
                           " is empty");

  // Active clusters keyed by representative node; merged members drop out.
  std::map<NodeId, std::vector<double>> active;
  for (NodeId leaf : h.leaves()) active.emplace(leaf, table.vectors[leaf]);

  while (active.size() > 1) {
    double best = -2.0;
    NodeId bi = kInvalidNode, bj = kInvalidNode;
    for (auto it = active.begin(); it != active.end(); ++it) {
      auto jt = it;
      for (++jt; jt != active.end(); ++jt) {
        const double sim = cosine_sim(it->second, jt->second);
        if (sim > best) {
          best = sim;
          bi = it->first;
          bj = jt->first;
        }
      }
    }
    if (best < threshold) break;

    const NodeId anc = h.lca(bi, bj);
    std::vector<double> merged(table.dim);
    for (std::size_t k = 0; k < table.dim; ++k)
      merged[k] = (table.vectors[anc][k] + active[bi][k] + active[bj][k]) / 3.0;
    table.vectors[anc] = merged;
    active.erase(bi);
    active.erase(bj);
    active[anc] = std::move(merged);
  }
  return table;
}

void dump_embedding_table(const std::filesystem::path& path, const EmbeddingTable& table) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw EmbeddingError("cannot open for write: " + path.string());
  const uint32_t n = static_cast<uint32_t>(table.vectors.size());
  const uint32_t d = static_cast<uint32_t>(table.dim);
  os.write(reinterpret_cast<const char*>(&n), sizeof n);
  os.write(reinterpret_cast<const char*>(&d), sizeof d);
  std::vector<float> row(table.dim);
  for (const auto& v : table.vectors) {
    if (v.size() != table.dim)
      throw EmbeddingError("cannot dump a partial embedding table");
    for (std::size_t k = 0; k < table.dim; ++k) row[k] = static_cast<float>(v[k]);
    os.write(reinterpret_cast<const char*>(row.data()),
             static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!os) throw EmbeddingError("write failed: " + path.string());
}

EmbeddingTable load_embedding_table(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw EmbeddingError("cannot open embedding file: " + path.string());
  uint32_t n = 0, d = 0;
  is.read(reinterpret_cast<char*>(&n), sizeof n);
  is.read(reinterpret_cast<char*>(&d), sizeof d);
  if (!is) throw EmbeddingError("truncated embedding header: " + path.string());
  EmbeddingTable table;
  table.dim = d;
  table.vectors.resize(n);
  table.from_backbone.assign(n, 0);
  std::vector<float> row(d);
  for (uint32_t i = 0; i < n; ++i) {
    is.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(float)));
    if (!is) throw EmbeddingError("truncated embedding data: " + path.string());
    table.vectors[i].assign(row.begin(), row.end());
  }
  return table;
}

}  // namespace hierdg
