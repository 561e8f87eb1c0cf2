#include <doctest.h>

#include <cmath>
#include <map>
#include <vector>

#include "hierdg/embedding_flow.hpp"
#include "hierdg/ontology.hpp"
#include "hierdg/pruning.hpp"
#include "hierdg/records.hpp"

using namespace hierdg;

namespace {

// ids: root 0, a 1, b 2, a1 3, a2 4, b1 5, b2 6
Hierarchy two_by_two() {
  return Hierarchy::build(
      {{"root", "a"}, {"root", "b"}, {"a", "a1"}, {"a", "a2"}, {"b", "b1"}, {"b", "b2"}},
      {{"C1", "a1"}, {"C2", "a2"}, {"C3", "b1"}, {"C4", "b2"}});
}

EmbeddingTable table_for(const Hierarchy& h, const std::map<NodeId, std::vector<double>>& rows) {
  EmbeddingTable t;
  t.dim = rows.begin()->second.size();
  t.vectors.resize(h.node_count());
  t.from_backbone.assign(h.node_count(), 0);
  for (const auto& [n, v] : rows) t.vectors[n] = v;
  return t;
}

PatientRecord patient(std::string id, std::vector<std::vector<std::string>> per_visit_conditions) {
  PatientRecord p;
  p.id = std::move(id);
  int64_t day = 1;
  for (auto& codes : per_visit_conditions) {
    Visit v;
    v.day = day++;
    v.codes[0] = std::move(codes);
    p.visits.push_back(std::move(v));
  }
  return p;
}

}  // namespace

TEST_CASE("a leaf scores alpha*e plus its coverage-depth share") {
  const Hierarchy h = two_by_two();
  const EmbeddingTable t = upward_average(h, init_leaf_embeddings(h, {}, 4));

  ScoreParams params;
  params.alpha = 0.5;
  const double expected = 0.5 * std::exp(1.0) + 0.5 * (1.0 / 4.0) * 1.0;
  CHECK(node_score(h, t, h.leaves()[0], params) == doctest::Approx(expected).epsilon(1e-12));

  const ScoreBreakdown parts = node_score_parts(h, t, h.leaves()[0], params);
  CHECK(parts.cohesion == doctest::Approx(1.0));
  CHECK(parts.coverage == doctest::Approx(0.25));
  CHECK(parts.depth == doctest::Approx(1.0));
}

TEST_CASE("an internal node mixes cohesion, coverage and depth") {
  const Hierarchy h = two_by_two();
  // a's children are parallel to a, so cohesion is exactly 1.
  const EmbeddingTable t = table_for(h, {{0, {1.0, 1.0}},
                                         {1, {2.0, 0.0}},
                                         {2, {0.0, 1.0}},
                                         {3, {1.0, 0.0}},
                                         {4, {3.0, 0.0}},
                                         {5, {0.0, 2.0}},
                                         {6, {0.0, 3.0}}});
  ScoreParams params;
  params.alpha = 0.5;
  const ScoreBreakdown parts = node_score_parts(h, t, 1, params);
  CHECK(parts.cohesion == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(parts.coverage == doctest::Approx(0.5));
  CHECK(parts.depth == doctest::Approx(2.0 / 3.0));
  CHECK(parts.score ==
        doctest::Approx(0.5 * std::exp(1.0) + 0.5 * 0.5 * (2.0 / 3.0)).epsilon(1e-12));

  // alpha rebalances the two terms.
  ScoreParams tilted;
  tilted.alpha = 0.1;
  CHECK(node_score(h, t, 1, tilted) ==
        doctest::Approx(0.1 * std::exp(1.0) + 0.9 * 0.5 * (2.0 / 3.0)).epsilon(1e-12));
}

TEST_CASE("leaves-only cohesion skips intermediate nodes") {
  // Three levels under the scored node so descendants and leaf descendants
  // differ: root -> m -> {x, y}, plus a sibling branch for balance.
  const Hierarchy h = Hierarchy::build({{"r", "m"},
                                        {"r", "s"},
                                        {"m", "m1"},
                                        {"m", "m2"},
                                        {"s", "s1"},
                                        {"s", "s2"},
                                        {"m1", "x1"},
                                        {"m1", "x2"},
                                        {"m2", "y1"},
                                        {"m2", "y2"},
                                        {"s1", "u1"},
                                        {"s1", "u2"},
                                        {"s2", "v1"},
                                        {"s2", "v2"}},
                                       {{"X1", "x1"},
                                        {"X2", "x2"},
                                        {"Y1", "y1"},
                                        {"Y2", "y2"},
                                        {"U1", "u1"},
                                        {"U2", "u2"},
                                        {"V1", "v1"},
                                        {"V2", "v2"}});
  EmbeddingTable t;
  t.dim = 2;
  t.vectors.assign(h.node_count(), {1.0, 0.0});
  t.from_backbone.assign(h.node_count(), 0);
  const NodeId m = h.node(0).children[0];
  // Leaves under m agree with m; the intermediate children disagree.
  for (NodeId mid : h.node(m).children) t.vectors[mid] = {0.0, 1.0};

  ScoreParams all;
  all.alpha = 1.0;
  ScoreParams leaves;
  leaves.alpha = 1.0;
  leaves.purity_leaves_only = true;
  // descendants of m: 2 orthogonal intermediates + 4 parallel leaves.
  CHECK(node_score_parts(h, t, m, all).cohesion == doctest::Approx(4.0 / 6.0));
  CHECK(node_score_parts(h, t, m, leaves).cohesion == doctest::Approx(1.0));
}

TEST_CASE("candidate sweep: a dominant parent replaces its children") {
  const Hierarchy h = two_by_two();
  // ids:              root a    b    a1   a2   b1   b2
  std::vector<double> s{0.0, 5.0, 0.0, 1.0, 2.0, 1.0, 2.0};
  const CandidateInit init = candidate_init(h, s);
  CHECK(init.candidates == std::vector<NodeId>{1, 5, 6});
  CHECK(init.flagged.empty());
}

TEST_CASE("candidate sweep: a weak parent keeps its children") {
  const Hierarchy h = two_by_two();
  std::vector<double> s{0.0, 0.0, 0.0, 1.0, 2.0, 1.0, 2.0};
  const CandidateInit init = candidate_init(h, s);
  CHECK(init.candidates == std::vector<NodeId>{3, 4, 5, 6});
  CHECK(init.flagged.empty());
}

TEST_CASE("candidate sweep: an in-between parent is flagged for refinement") {
  const Hierarchy h = two_by_two();
  std::vector<double> s{0.0, 1.5, 0.0, 1.0, 2.0, 1.0, 2.0};
  const CandidateInit init = candidate_init(h, s);
  CHECK(init.candidates == std::vector<NodeId>{3, 4, 5, 6});
  REQUIRE(init.flagged.size() == 1);
  CHECK(init.flagged[0].parent == 1);
  CHECK(init.flagged[0].children == std::vector<NodeId>{3, 4});
}

TEST_CASE("candidate sweep: an ancestor competes against the surviving frontier") {
  const Hierarchy h = two_by_two();
  // a displaces its children; the root then sits between the frontier scores
  // {5, 1, 2} but its frontier is not its direct children, so no flag.
  std::vector<double> s{3.0, 5.0, 0.0, 1.0, 2.0, 1.0, 2.0};
  const CandidateInit init = candidate_init(h, s);
  CHECK(init.candidates == std::vector<NodeId>{1, 5, 6});
  CHECK(init.flagged.empty());
}

TEST_CASE("candidate sweep: a dominant root absorbs everything") {
  const Hierarchy h = two_by_two();
  std::vector<double> s{10.0, 5.0, 0.0, 1.0, 2.0, 1.0, 2.0};
  const CandidateInit init = candidate_init(h, s);
  CHECK(init.candidates == std::vector<NodeId>{0});
  CHECK(init.flagged.empty());

  PrunedVocabulary v;
  v.nodes = init.candidates;
  CHECK_NOTHROW(v.validate(h));
}

TEST_CASE("candidate sweep rejects a wrong-sized score vector") {
  const Hierarchy h = two_by_two();
  CHECK_THROWS_AS((void)candidate_init(h, std::vector<double>(3, 0.0)), PruningError);
}

TEST_CASE("silhouette matches a hand-computed two-cluster value") {
  // 1D points: cluster A = {0, 1}, cluster B = {10, 11} -> 359/399.
  const Hierarchy h = two_by_two();
  std::map<NodeId, std::vector<double>> vecs{
      {3, {0.0}}, {4, {1.0}}, {5, {10.0}}, {6, {11.0}}};
  std::map<NodeId, NodeId> assign{{3, 1}, {4, 1}, {5, 2}, {6, 2}};
  CHECK(silhouette(vecs, assign) == doctest::Approx(359.0 / 399.0).epsilon(1e-12));
}

TEST_CASE("silhouette: singleton clusters contribute zero") {
  std::map<NodeId, std::vector<double>> vecs{{3, {0.0}}, {4, {4.0}}, {5, {6.0}}};
  std::map<NodeId, NodeId> assign{{3, 1}, {4, 2}, {5, 2}};
  // terms: 0 (singleton), (4-2)/4, (6-2)/6
  CHECK(silhouette(vecs, assign) == doctest::Approx((0.0 + 0.5 + 2.0 / 3.0) / 3.0).epsilon(1e-12));
}

TEST_CASE("silhouette: coincident points across clusters contribute zero") {
  std::map<NodeId, std::vector<double>> vecs{{3, {0.0}}, {4, {0.0}}, {5, {0.0}}};
  std::map<NodeId, NodeId> assign{{3, 1}, {4, 1}, {5, 2}};
  CHECK(silhouette(vecs, assign) == doctest::Approx(0.0));
}

TEST_CASE("silhouette refuses fewer than two clusters") {
  std::map<NodeId, std::vector<double>> vecs{{3, {0.0}}, {4, {1.0}}};
  std::map<NodeId, NodeId> assign{{3, 1}, {4, 1}};
  CHECK_THROWS_WITH_AS((void)silhouette(vecs, assign),
                       "refinement metric undefined for fewer than 2 clusters", PruningError);
}

TEST_CASE("silhouette requires an assignment for every leaf") {
  std::map<NodeId, std::vector<double>> vecs{{3, {0.0}}, {4, {1.0}}};
  std::map<NodeId, NodeId> assign{{3, 1}};
  CHECK_THROWS_AS((void)silhouette(vecs, assign), PruningError);
}

TEST_CASE("beam refinement resolves a flagged pair toward tighter clusters") {
  const Hierarchy h = two_by_two();
  const EmbeddingTable t = upward_average(h, table_for(h, {{3, {0.0}},
                                                           {4, {1.0}},
                                                           {5, {10.0}},
                                                           {6, {20.0}}}));
  // Merging a's tight children beats four singleton clusters.
  FlaggedPair pair;
  pair.parent = 1;
  pair.children = {3, 4};
  const PrunedVocabulary v = beam_refine(h, t, {3, 4, 5, 6}, {pair});
  CHECK(v.nodes == std::vector<NodeId>{1, 5, 6});
}

TEST_CASE("beam refinement can split decisions across pairs") {
  const Hierarchy h = two_by_two();
  // a's children are spread apart, b's are tight: keep a's, merge b's.
  const EmbeddingTable t = upward_average(h, table_for(h, {{3, {0.0}},
                                                           {4, {10.0}},
                                                           {5, {4.9}},
                                                           {6, {5.1}}}));
  FlaggedPair pa;
  pa.parent = 1;
  pa.children = {3, 4};
  FlaggedPair pb;
  pb.parent = 2;
  pb.children = {5, 6};
  const PrunedVocabulary v = beam_refine(h, t, {3, 4, 5, 6}, {pa, pb});
  CHECK(v.nodes == std::vector<NodeId>{2, 3, 4});
}

TEST_CASE("beam refinement with no flags returns the candidates unchanged") {
  const Hierarchy h = two_by_two();
  const EmbeddingTable t = upward_average(h, init_leaf_embeddings(h, {}, 3));
  const PrunedVocabulary v = beam_refine(h, t, {3, 4, 5, 6}, {});
  CHECK(v.nodes == std::vector<NodeId>{3, 4, 5, 6});
}

TEST_CASE("beam width must be positive") {
  const Hierarchy h = two_by_two();
  const EmbeddingTable t = upward_average(h, init_leaf_embeddings(h, {}, 3));
  CHECK_THROWS_AS((void)beam_refine(h, t, {3, 4, 5, 6}, {}, 0), PruningError);
}

TEST_CASE("a pruned vocabulary must cover every leaf exactly once") {
  const Hierarchy h = two_by_two();

  PrunedVocabulary good;
  good.nodes = {1, 5, 6};
  CHECK_NOTHROW(good.validate(h));
  CHECK(good.covering_column(h) == std::vector<std::size_t>{0, 0, 1, 2});

  PrunedVocabulary nested;
  nested.nodes = {0, 1};  // root already covers a
  CHECK_THROWS_AS(nested.validate(h), PruningError);

  PrunedVocabulary missing;
  missing.nodes = {1, 5};  // b2 uncovered
  CHECK_THROWS_AS(missing.validate(h), PruningError);

  PrunedVocabulary unsorted;
  unsorted.nodes = {5, 1, 6};
  CHECK_THROWS_AS(unsorted.validate(h), PruningError);

  PrunedVocabulary empty;
  CHECK_THROWS_AS(empty.validate(h), PruningError);
}

TEST_CASE("domain rows mark the vocabulary nodes a patient touches") {
  const Hierarchy h = two_by_two();
  PrunedVocabulary vocab;
  vocab.nodes = {1, 5, 6};

  std::vector<PatientRecord> patients;
  patients.push_back(patient("p0", {{"C1"}, {"C1"}}));
  patients.push_back(patient("p1", {{"C3"}, {"C4"}}));
  patients.push_back(patient("p2", {{"C2"}, {"C3"}}));

  const DomainLookupTable table = assign_domains(h, vocab, patients);
  CHECK(table.row_ids == std::vector<std::string>{"p0", "p1", "p2"});
  REQUIRE(table.rows.size() == 3);
  CHECK(table.rows[0] == std::vector<uint8_t>{1, 0, 0});
  CHECK(table.rows[1] == std::vector<uint8_t>{0, 1, 1});
  CHECK(table.rows[2] == std::vector<uint8_t>{1, 1, 0});
}

TEST_CASE("domain ids group identical rows by first occurrence") {
  DomainLookupTable table;
  table.rows = {{1, 0}, {0, 0}, {1, 0}, {0, 1}, {0, 0}};
  const auto ids = domain_ids(table);
  CHECK(ids == std::vector<std::size_t>{0, 1, 0, 2, 1});
}
