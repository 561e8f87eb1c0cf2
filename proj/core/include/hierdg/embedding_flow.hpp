#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "hierdg/ontology.hpp"

namespace hierdg {

struct EmbeddingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Node vectors indexed by NodeId. A table fresh from init_leaf_embeddings has
// only leaf rows filled; upward_average completes it.
struct EmbeddingTable {
  std::size_t dim = 0;
  std::vector<std::vector<double>> vectors;
  std::vector<uint8_t> from_backbone;  // 1 where a leaf copied a backbone vector

  bool has(NodeId n) const { return n < vectors.size() && !vectors[n].empty(); }
};

// 0 for zero-length inputs; the event is counted rather than thrown so bulk
// similarity sweeps keep going.
double cosine_sim(const std::vector<double>& a, const std::vector<double>& b);
uint64_t zero_cosine_events();
void reset_zero_cosine_events();

// Leaves present in `backbone` copy its vector; the rest draw a hashed-name
// fallback, i.i.d. uniform(-1/sqrt(dim), 1/sqrt(dim)) seeded by the node name.
EmbeddingTable init_leaf_embeddings(const Hierarchy& h,
                                    const std::map<std::string, std::vector<double>>& backbone,
                                    std::size_t dim);

enum class UpwardMode { direct_children, leaf_mean };

// Fills internal nodes bottom-up, each as the mean of its direct children
// (or of all leaf descendants under leaf_mean).
EmbeddingTable upward_average(const Hierarchy& h, EmbeddingTable table,
                              UpwardMode mode = UpwardMode::direct_children);

// Greedy agglomeration over leaf clusters: repeatedly take the most similar
// active pair, fold both representatives into their LCA's vector, and let the
// LCA represent the merged cluster. Stops below `threshold` or at one cluster.
EmbeddingTable lca_rectify(const Hierarchy& h, EmbeddingTable table, double threshold = 0.9);

// Binary layout: uint32 node count, uint32 dim, then row-major float32
// little-endian vectors in NodeId order.
void dump_embedding_table(const std::filesystem::path& path, const EmbeddingTable& table);
EmbeddingTable load_embedding_table(const std::filesystem::path& path);

}  // namespace hierdg
