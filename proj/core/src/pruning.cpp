#include "hierdg/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

namespace hierdg {

void PrunedVocabulary::validate(const Hierarchy& h) const {
  if (nodes.empty()) throw PruningError("pruned vocabulary is empty");
  if (!std::is_sorted(nodes.begin(), nodes.end()))
    throw PruningError("pruned vocabulary must be sorted by node id");
  std::vector<int> cover_count(h.leaf_count(), 0);
  for (NodeId n : nodes)
    for (NodeId leaf : h.leaf_descendants(n)) ++cover_count[h.leaf_index(leaf)];
  for (std::size_t i = 0; i < cover_count.size(); ++i) {
    if (cover_count[i] == 0)
      throw PruningError("leaf " + std::to_string(h.leaves()[i]) + " not covered");
    if (cover_count[i] > 1)
      throw PruningError("leaf " + std::to_string(h.leaves()[i]) + " covered more than once");
  }
}

std::vector<std::size_t> PrunedVocabulary::covering_column(const Hierarchy& h) const {
  std::vector<std::size_t> col(h.leaf_count(), static_cast<std::size_t>(-1));
  for (std::size_t j = 0; j < nodes.size(); ++j)
    for (NodeId leaf : h.leaf_descendants(nodes[j])) {
      std::size_t li = h.leaf_index(leaf);
      if (col[li] != static_cast<std::size_t>(-1))
        throw PruningError("leaf " + std::to_string(leaf) + " covered more than once");
      col[li] = j;
    }
  for (std::size_t li = 0; li < col.size(); ++li)
    if (col[li] == static_cast<std::size_t>(-1))
      throw PruningError("leaf " + std::to_string(h.leaves()[li]) + " not covered");
  return col;
}

ScoreBreakdown node_score_parts(const Hierarchy& h, const EmbeddingTable& table, NodeId n,
                                const ScoreParams& params) {
  const HierarchyNode& node = h.node(n);
  ScoreBreakdown out;
  std::size_t covered;
  if (node.children.empty()) {
    out.cohesion = 1.0;
    covered = 1;
  } else {
    std::vector<NodeId> members =
        params.purity_leaves_only ? h.leaf_descendants(n) : h.descendants(n);
    double acc = 0.0;
    for (NodeId m : members) acc += cosine_sim(table.vectors[n], table.vectors[m]);
    out.cohesion = acc / static_cast<double>(members.size());
    covered = h.leaf_descendants(n).size();
  }
  out.coverage = static_cast<double>(covered) / static_cast<double>(h.leaf_count());
  out.depth = static_cast<double>(node.level) / static_cast<double>(h.height());
  out.score =
      params.alpha * std::exp(out.cohesion) + (1.0 - params.alpha) * out.coverage * out.depth;
  return out;
}

double node_score(const Hierarchy& h, const EmbeddingTable& table, NodeId n,
                  const ScoreParams& params) {
  return node_score_parts(h, table, n, params).score;
}

CandidateInit candidate_init(const Hierarchy& h, const std::vector<double>& scores) {
  if (scores.size() != h.node_count())
    throw PruningError("need one score per node, got " + std::to_string(scores.size()));

  std::set<NodeId> frontier(h.leaves().begin(), h.leaves().end());
  std::vector<FlaggedPair> flagged;

  auto descends_under = [&](NodeId n, NodeId anc) {
    while (n != kInvalidNode) {
      if (n == anc) return true;
      n = h.node(n).parent;
    }
    return false;
  };

  for (int level = h.height() - 1; level >= 1; --level) {
    for (NodeId p = 0; p < h.node_count(); ++p) {
      const HierarchyNode& node = h.node(p);
      if (node.level != level || node.children.empty()) continue;
      // A parent competes against whatever currently survives beneath it,
      // which is its direct children only when none of them were displaced.
      std::vector<NodeId> below;
      for (NodeId f : frontier)
        if (f != p && descends_under(f, p)) below.push_back(f);
      if (below.empty()) continue;
      double cmin = scores[below.front()], cmax = cmin;
      for (NodeId c : below) {
        cmin = std::min(cmin, scores[c]);
        cmax = std::max(cmax, scores[c]);
      }
      if (scores[p] > cmax) {
        for (NodeId c : below) frontier.erase(c);
        frontier.insert(p);
        flagged.erase(std::remove_if(flagged.begin(), flagged.end(),
                                     [&](const FlaggedPair& f) {
                                       return descends_under(f.parent, p) && f.parent != p;
                                     }),
                      flagged.end());
      } else if (scores[p] < cmin) {
        // children stay
      } else if (std::equal(below.begin(), below.end(), node.children.begin(),
                            node.children.end())) {
        FlaggedPair f;
        f.parent = p;
        f.children = node.children;
        flagged.push_back(std::move(f));
      }
    }
  }

  CandidateInit out;
  out.candidates.assign(frontier.begin(), frontier.end());
  out.flagged = std::move(flagged);
  return out;
}

namespace {

double euclidean(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

// cluster_of[i] in [0, n_clusters); dist is a full symmetric matrix.
double silhouette_from_distances(const std::vector<std::vector<double>>& dist,
                                 const std::vector<std::size_t>& cluster_of,
                                 std::size_t n_clusters) {
  if (n_clusters < 2) throw PruningError("refinement metric undefined for fewer than 2 clusters");
  const std::size_t n = cluster_of.size();
  std::vector<std::size_t> size(n_clusters, 0);
  for (std::size_t c : cluster_of) ++size[c];
  for (std::size_t c = 0; c < n_clusters; ++c)
    if (size[c] == 0) throw PruningError("empty cluster in silhouette input");

  double total = 0.0;
  std::vector<double> sum_to(n_clusters);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(sum_to.begin(), sum_to.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) sum_to[cluster_of[j]] += dist[i][j];
    const std::size_t own = cluster_of[i];
    if (size[own] == 1) continue;  // singleton term is 0
    const double a = sum_to[own] / static_cast<double>(size[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < n_clusters; ++c)
      if (c != own) b = std::min(b, sum_to[c] / static_cast<double>(size[c]));
    const double denom = std::max(a, b);
    total += denom == 0.0 ? 0.0 : (b - a) / denom;
  }
  return total / static_cast<double>(n);
}

}  // namespace

double silhouette(const std::map<NodeId, std::vector<double>>& leaf_vectors,
                  const std::map<NodeId, NodeId>& assignment) {
  if (leaf_vectors.size() != assignment.size())
    throw PruningError("silhouette inputs must cover the same leaves");
  std::vector<const std::vector<double>*> vecs;
  std::vector<std::size_t> cluster_of;
  std::unordered_map<NodeId, std::size_t> cluster_index;
  for (const auto& [leaf, vec] : leaf_vectors) {
    auto it = assignment.find(leaf);
    if (it == assignment.end())
      throw PruningError("leaf " + std::to_string(leaf) + " has no cluster");
    auto [pos, inserted] =
        cluster_index.emplace(it->second, cluster_index.size());
    vecs.push_back(&vec);
    cluster_of.push_back(pos->second);
  }
  const std::size_t n = vecs.size();
  std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      dist[i][j] = dist[j][i] = euclidean(*vecs[i], *vecs[j]);
  return silhouette_from_distances(dist, cluster_of, cluster_index.size());
}

namespace {

struct BeamState {
  std::vector<uint8_t> parent_choice;  // per flagged pair, 1 = take the parent
  std::vector<NodeId> nodes;           // induced covering set, ascending
  double score = 0.0;
};

std::vector<NodeId> resolve_nodes(const Hierarchy& h, const std::vector<NodeId>& c0,
                                  const std::vector<FlaggedPair>& flagged,
                                  const std::vector<uint8_t>& parent_choice) {
  std::set<NodeId> nodes(c0.begin(), c0.end());
  auto descends_under = [&](NodeId n, NodeId anc) {
    while (n != kInvalidNode) {
      if (n == anc) return true;
      n = h.node(n).parent;
    }
    return false;
  };
  for (std::size_t t = 0; t < parent_choice.size(); ++t) {
    if (!parent_choice[t]) continue;
    const NodeId p = flagged[t].parent;
    for (auto it = nodes.begin(); it != nodes.end();)
      it = descends_under(*it, p) ? nodes.erase(it) : std::next(it);
    nodes.insert(p);
  }
  return {nodes.begin(), nodes.end()};
}

}  // namespace

PrunedVocabulary beam_refine(const Hierarchy& h, const EmbeddingTable& table,
                             const std::vector<NodeId>& c0,
                             const std::vector<FlaggedPair>& flagged, int beam_width) {
  if (beam_width < 1) throw PruningError("beam width must be at least 1");

  const std::size_t n_leaves = h.leaf_count();
  std::vector<std::vector<double>> dist(n_leaves, std::vector<double>(n_leaves, 0.0));
  for (std::size_t i = 0; i < n_leaves; ++i)
    for (std::size_t j = i + 1; j < n_leaves; ++j)
      dist[i][j] = dist[j][i] =
          euclidean(table.vectors[h.leaves()[i]], table.vectors[h.leaves()[j]]);

  auto score_nodes = [&](const std::vector<NodeId>& nodes) {
    if (nodes.size() < 2) return -2.0;  // below any real silhouette
    std::vector<std::size_t> cluster_of(n_leaves);
    for (std::size_t j = 0; j < nodes.size(); ++j)
      for (NodeId leaf : h.leaf_descendants(nodes[j])) cluster_of[h.leaf_index(leaf)] = j;
    return silhouette_from_distances(dist, cluster_of, nodes.size());
  };

  BeamState init;
  init.parent_choice.assign(flagged.size(), 0);
  init.nodes = resolve_nodes(h, c0, flagged, init.parent_choice);
  init.score = score_nodes(init.nodes);

  std::vector<BeamState> beam{init};
  for (std::size_t t = 0; t < flagged.size(); ++t) {
    std::vector<BeamState> next;
    next.reserve(beam.size() * 2);
    for (const BeamState& s : beam) {
      next.push_back(s);  // keep "children" at t; set and score are unchanged
      BeamState alt = s;
      alt.parent_choice[t] = 1;
      alt.nodes = resolve_nodes(h, c0, flagged, alt.parent_choice);
      alt.score = score_nodes(alt.nodes);
      next.push_back(std::move(alt));
    }
    std::sort(next.begin(), next.end(), [](const BeamState& a, const BeamState& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.nodes < b.nodes;
    });
    next.erase(std::unique(next.begin(), next.end(),
                           [](const BeamState& a, const BeamState& b) {
                             return a.nodes == b.nodes;
                           }),
               next.end());
    if (next.size() > static_cast<std::size_t>(beam_width))
      next.resize(static_cast<std::size_t>(beam_width));
    beam = std::move(next);
  }

  PrunedVocabulary out;
  out.nodes = beam.front().nodes;
  out.validate(h);
  return out;
}

DomainLookupTable assign_domains(const Hierarchy& h, const PrunedVocabulary& vocab,
                                 const std::vector<PatientRecord>& patients) {
  DomainLookupTable table;
  table.vocab = vocab;
  const std::vector<std::size_t> column = vocab.covering_column(h);
  table.rows.reserve(patients.size());
  table.row_ids.reserve(patients.size());
  for (const auto& p : patients) {
    std::vector<uint8_t> row(vocab.nodes.size(), 0);
    const std::vector<uint8_t> hist = aggregate_history(p, p.visits.size(), h);
    for (std::size_t li = 0; li < hist.size(); ++li)
      if (hist[li]) row[column[li]] = 1;
    table.rows.push_back(std::move(row));
    table.row_ids.push_back(p.id);
  }
  return table;
}

std::vector<std::size_t> domain_ids(const DomainLookupTable& table) {
  std::vector<std::size_t> ids;
  ids.reserve(table.rows.size());
  std::map<std::vector<uint8_t>, std::size_t> seen;
  for (const auto& row : table.rows) {
    auto [it, inserted] = seen.emplace(row, seen.size());
    ids.push_back(it->second);
  }
  return ids;
}

}  // namespace hierdg
