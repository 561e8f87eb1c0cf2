#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hierdg/embedding_flow.hpp"
#include "hierdg/ontology.hpp"
#include "hierdg/records.hpp"

namespace hierdg {

struct PruningError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ScoreParams {
  double alpha = 0.5;
  bool purity_leaves_only = false;  // restrict the cohesion mean to leaf descendants
};

// Covering antichain over the hierarchy: every leaf has exactly one
// ancestor-or-self in `nodes`, and no listed node covers another.
struct PrunedVocabulary {
  std::vector<NodeId> nodes;  // ascending

  void validate(const Hierarchy& h) const;
  // leaf index -> position in `nodes` of its covering node
  std::vector<std::size_t> covering_column(const Hierarchy& h) const;
};

struct DomainLookupTable {
  PrunedVocabulary vocab;
  std::vector<std::string> row_ids;
  std::vector<std::vector<uint8_t>> rows;  // one multi-hot row per patient
};

struct FlaggedPair {
  NodeId parent = kInvalidNode;
  std::vector<NodeId> children;
};

// alpha * exp(cohesion) + (1 - alpha) * coverage * depth, where cohesion is
// the mean cosine between the node and its descendants (1 for a leaf),
// coverage the covered-leaf fraction, and depth level/H.
double node_score(const Hierarchy& h, const EmbeddingTable& table, NodeId n,
                  const ScoreParams& params = {});

struct ScoreBreakdown {
  double cohesion = 0.0;
  double coverage = 0.0;
  double depth = 0.0;
  double score = 0.0;
};
ScoreBreakdown node_score_parts(const Hierarchy& h, const EmbeddingTable& table, NodeId n,
                                const ScoreParams& params = {});

struct CandidateInit {
  std::vector<NodeId> candidates;     // ascending
  std::vector<FlaggedPair> flagged;   // deepest level first, then by parent id
};

// Bottom-up sweep: a parent beating everything that currently survives under
// it replaces that frontier; a parent scoring below all of it is dropped;
// anything in between keeps the survivors and, when they are exactly the
// direct children, flags the pair for beam_refine.
CandidateInit candidate_init(const Hierarchy& h, const std::vector<double>& scores);

// Mean over leaves of (b - a) / max(a, b) with Euclidean distances; singleton
// clusters and a = b = 0 contribute 0. Throws if fewer than 2 clusters.
double silhouette(const std::map<NodeId, std::vector<double>>& leaf_vectors,
                  const std::map<NodeId, NodeId>& assignment);

// Resolves each flagged pair to parent or children, beam-searched on the
// silhouette of the induced leaf clustering. Undecided pairs count as
// "children", so the search can only improve on the candidate baseline.
PrunedVocabulary beam_refine(const Hierarchy& h, const EmbeddingTable& table,
                             const std::vector<NodeId>& c0,
                             const std::vector<FlaggedPair>& flagged, int beam_width = 8);

// M[i][j] = 1 iff patient i ever carries a condition code whose leaf lies
// under vocab node j.
DomainLookupTable assign_domains(const Hierarchy& h, const PrunedVocabulary& vocab,
                                 const std::vector<PatientRecord>& patients);

// Identical rows share an id; ids follow first occurrence. All-zero rows form
// their own group.
std::vector<std::size_t> domain_ids(const DomainLookupTable& table);

}  // namespace hierdg
