#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <set>
#include <vector>

#include "hierdg/synth.hpp"

using namespace hierdg;

namespace {

SynthConfig small_cfg() {
  SynthConfig cfg;
  cfg.seed = 7;
  cfg.levels = 3;
  cfg.branching = 2;
  cfg.n_patients = 60;
  cfg.n_latent_domains = 2;
  cfg.domain_level = 2;
  return cfg;
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("hierdg_synth_" + std::to_string(::getpid()) + "_" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("complete tree sizes follow the closed form") {
  SynthConfig cfg = small_cfg();
  // height 3, branching 2: 1 + 2 + 4 nodes, 4 leaves
  Hierarchy h = generate_hierarchy(cfg);
  CHECK(h.node_count() == 7);
  CHECK(h.leaf_count() == 4);
  CHECK(h.height() == 3);

  cfg.levels = 4;
  cfg.branching = 3;
  cfg.domain_level = 3;
  cfg.n_latent_domains = 9;
  h = generate_hierarchy(cfg);
  CHECK(h.node_count() == 40);
  CHECK(h.leaf_count() == 27);
  CHECK(h.height() == 4);
  for (NodeId leaf : h.leaves()) CHECK(h.node(leaf).level == 4);
}

TEST_CASE("every leaf carries a code") {
  const SynthConfig cfg = small_cfg();
  const Hierarchy h = generate_hierarchy(cfg);
  CHECK(h.leaf_map().size() == h.leaf_count());
  for (NodeId leaf : h.leaves()) {
    bool mapped = false;
    for (const auto& [code, id] : h.leaf_map())
      if (id == leaf) mapped = true;
    CHECK(mapped);
  }
}

TEST_CASE("config validation rejects out-of-range knobs") {
  SynthConfig cfg = small_cfg();
  CHECK_NOTHROW(cfg.validate());

  SynthConfig bad = cfg;
  bad.levels = 2;
  CHECK_THROWS_AS(bad.validate(), SynthError);

  bad = cfg;
  bad.branching = 1;
  CHECK_THROWS_AS(bad.validate(), SynthError);

  bad = cfg;
  bad.domain_level = 1;
  CHECK_THROWS_AS(bad.validate(), SynthError);
  bad.domain_level = cfg.levels + 1;
  CHECK_THROWS_AS(bad.validate(), SynthError);

  bad = cfg;
  bad.shift_strength = 1.5;
  CHECK_THROWS_AS(bad.validate(), SynthError);

  bad = cfg;
  bad.n_latent_domains = 3;  // only 2 subtrees at level 2 of a binary tree
  CHECK_THROWS_AS(bad.validate(), SynthError);

  bad = cfg;
  bad.visits_range = {1, 4};
  CHECK_THROWS_AS(bad.validate(), SynthError);

  bad = cfg;
  bad.positive_rate = 0.0;
  CHECK_THROWS_AS(bad.validate(), SynthError);

  bad = cfg;
  bad.domain_decay = 0.0;
  CHECK_THROWS_AS(bad.validate(), SynthError);
}

TEST_CASE("cohort generation is bit-reproducible") {
  const SynthConfig cfg = small_cfg();
  const Hierarchy h = generate_hierarchy(cfg);
  const Cohort a = generate_cohorts(cfg, h);
  const Cohort b = generate_cohorts(cfg, h);

  REQUIRE(a.records.size() == cfg.n_patients);
  REQUIRE(a.records.size() == b.records.size());
  CHECK(a.domains == b.domains);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].id == b.records[i].id);
    CHECK(a.records[i].label == b.records[i].label);
    REQUIRE(a.records[i].visits.size() == b.records[i].visits.size());
    for (std::size_t t = 0; t < a.records[i].visits.size(); ++t) {
      CHECK(a.records[i].visits[t].day == b.records[i].visits[t].day);
      CHECK(a.records[i].visits[t].codes == b.records[i].visits[t].codes);
    }
  }
}

TEST_CASE("different seeds give different cohorts") {
  SynthConfig cfg = small_cfg();
  const Hierarchy h = generate_hierarchy(cfg);
  const Cohort a = generate_cohorts(cfg, h);
  cfg.seed = 8;
  const Cohort b = generate_cohorts(cfg, h);

  bool any_diff = false;
  for (std::size_t i = 0; i < a.records.size() && !any_diff; ++i)
    if (a.records[i].visits.size() != b.records[i].visits.size() ||
        a.records[i].visits[0].codes != b.records[i].visits[0].codes)
      any_diff = true;
  CHECK(any_diff);
}

TEST_CASE("records satisfy the shape contract") {
  SynthConfig cfg = small_cfg();
  cfg.n_patients = 100;
  const Hierarchy h = generate_hierarchy(cfg);
  const Cohort c = generate_cohorts(cfg, h);

  REQUIRE(c.domains.size() == c.records.size());
  for (std::size_t i = 0; i < c.records.size(); ++i) {
    const auto& p = c.records[i];
    CHECK(p.visits.size() >= 2);
    CHECK(p.visits.size() >= static_cast<std::size_t>(cfg.visits_range.first));
    CHECK(p.visits.size() <= static_cast<std::size_t>(cfg.visits_range.second));
    CHECK(c.domains[i] < cfg.n_latent_domains);
    int64_t prev = std::numeric_limits<int64_t>::min();
    for (const auto& v : p.visits) {
      CHECK(v.day >= prev);
      prev = v.day;
      CHECK(!v.codes[0].empty());
      CHECK(v.codes[0].size() <= static_cast<std::size_t>(cfg.codes_per_visit.second));
      for (const auto& code : v.codes[0]) CHECK_NOTHROW((void)h.leaf_for_code(code));
    }
  }
}

TEST_CASE("positive rate lands near the requested level") {
  SynthConfig cfg = small_cfg();
  cfg.n_patients = 1000;
  cfg.positive_rate = 0.3;
  const Hierarchy h = generate_hierarchy(cfg);
  const Cohort c = generate_cohorts(cfg, h);

  std::size_t positives = 0;
  for (const auto& p : c.records) positives += p.label.empty() ? 0 : 1;
  const double rate = static_cast<double>(positives) / static_cast<double>(c.records.size());
  CHECK(rate > 0.2);
  CHECK(rate < 0.4);
}

TEST_CASE("noise-free patients draw condition codes inside their domain subtree") {
  SynthConfig cfg;
  cfg.seed = 3;
  cfg.levels = 4;
  cfg.branching = 3;
  cfg.n_patients = 200;
  cfg.n_latent_domains = 9;
  cfg.domain_level = 3;
  cfg.noise_rate = 0.0;
  cfg.domain_decay = 1.0;
  const Hierarchy h = generate_hierarchy(cfg);
  const Cohort c = generate_cohorts(cfg, h);

  // With zero noise each patient's condition leaves stay under one level-3
  // node, so the pairwise lca of their leaves never climbs above it.
  for (std::size_t i = 0; i < c.records.size(); ++i) {
    std::set<NodeId> leaves;
    for (const auto& v : c.records[i].visits)
      for (const auto& code : v.codes[0]) leaves.insert(h.leaf_for_code(code));
    REQUIRE(!leaves.empty());
    NodeId acc = *leaves.begin();
    for (NodeId l : leaves) acc = h.lca(acc, l);
    CHECK(h.node(acc).level >= cfg.domain_level);
  }
}

TEST_CASE("shift strength moves late-period domain draws") {
  SynthConfig cfg = small_cfg();
  cfg.n_patients = 2000;
  cfg.late_fraction = 0.5;
  cfg.shift_strength = 1.0;
  cfg.domain_decay = 0.5;
  const Hierarchy h = generate_hierarchy(cfg);
  const Cohort c = generate_cohorts(cfg, h);

  std::map<std::size_t, std::size_t> early_counts, late_counts;
  for (std::size_t i = 0; i < c.records.size(); ++i) {
    const bool late = c.records[i].visits.back().day > cfg.cutoff_day;
    (late ? late_counts : early_counts)[c.domains[i]]++;
  }
  // decay 0.5 over 2 domains: early prior ~ (2/3, 1/3); full reversal flips it.
  const double early_share0 =
      static_cast<double>(early_counts[0]) / (early_counts[0] + early_counts[1]);
  const double late_share0 =
      static_cast<double>(late_counts[0]) / (late_counts[0] + late_counts[1]);
  CHECK(early_share0 > 0.55);
  CHECK(late_share0 < 0.45);
}

TEST_CASE("stationary generator passes a frequency fit over domains") {
  // chi-square of late-period domain counts against the early-period
  // distribution; shift 0 should stay under the df=8 95% critical value in
  // at least 95 of 100 seeds.
  SynthConfig cfg;
  cfg.levels = 4;
  cfg.branching = 3;
  cfg.n_patients = 400;
  cfg.n_latent_domains = 9;
  cfg.domain_level = 3;
  cfg.shift_strength = 0.0;
  cfg.late_fraction = 0.5;
  cfg.domain_decay = 0.9;
  const Hierarchy h = generate_hierarchy(cfg);

  int below = 0;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    cfg.seed = seed;
    const Cohort c = generate_cohorts(cfg, h);
    std::vector<double> early(cfg.n_latent_domains, 0.0);
    std::vector<double> late(cfg.n_latent_domains, 0.0);
    double n_early = 0.0, n_late = 0.0;
    for (std::size_t i = 0; i < c.records.size(); ++i) {
      if (c.records[i].visits.back().day > cfg.cutoff_day) {
        late[c.domains[i]] += 1.0;
        n_late += 1.0;
      } else {
        early[c.domains[i]] += 1.0;
        n_early += 1.0;
      }
    }
    REQUIRE(n_early > 0);
    REQUIRE(n_late > 0);
    double stat = 0.0;
    for (std::size_t d = 0; d < cfg.n_latent_domains; ++d) {
      const double expected = std::max(1e-9, early[d] / n_early * n_late);
      const double diff = late[d] - expected;
      stat += diff * diff / expected;
    }
    if (stat < 20.09) ++below;  // chi-square 0.95 quantile at 8 degrees of freedom
  }
  CHECK(below >= 90);
}

TEST_CASE("sidecar roundtrip maps ids to hidden domains") {
  const SynthConfig cfg = small_cfg();
  const Hierarchy h = generate_hierarchy(cfg);
  const Cohort c = generate_cohorts(cfg, h);

  TempDir tmp;
  const auto path = tmp.path / "domains.tsv";
  write_domain_sidecar(path, c);
  const auto back = read_domain_sidecar(path);
  REQUIRE(back.size() == c.records.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].first == c.records[i].id);
    CHECK(back[i].second == c.domains[i]);
  }
}

TEST_CASE("config files roundtrip through json") {
  TempDir tmp;
  SynthConfig cfg = small_cfg();
  cfg.noise_rate = 0.25;
  cfg.domain_weight_scale = 4.5;
  cfg.aux_vocab_size = {10, 12};
  const auto path = tmp.path / "synth.json";
  save_synth_config(path, cfg);
  const SynthConfig back = load_synth_config(path);
  CHECK(back.seed == cfg.seed);
  CHECK(back.levels == cfg.levels);
  CHECK(back.branching == cfg.branching);
  CHECK(back.noise_rate == cfg.noise_rate);
  CHECK(back.domain_weight_scale == cfg.domain_weight_scale);
  CHECK(back.aux_vocab_size == cfg.aux_vocab_size);
  CHECK(back.label_task.kind == cfg.label_task.kind);
}
