#include "hierdg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hierdg/rng.hpp"

namespace hierdg {

using nlohmann::json;

void SynthConfig::validate() const {
  if (levels < 3) throw SynthError("levels must be >= 3");
  if (branching < 2) throw SynthError("branching must be >= 2");
  if (n_patients == 0) throw SynthError("n_patients must be positive");
  if (visits_range.first < 2 || visits_range.second < visits_range.first)
    throw SynthError("visits_range must satisfy 2 <= min <= max");
  if (domain_level < 2 || domain_level > levels)
    throw SynthError("domain_level must lie in [2, levels]");
  if (shift_strength < 0.0 || shift_strength > 1.0)
    throw SynthError("shift_strength must lie in [0, 1]");
  if (noise_rate < 0.0 || noise_rate > 1.0) throw SynthError("noise_rate must lie in [0, 1]");
  if (domain_decay <= 0.0 || domain_decay > 1.0)
    throw SynthError("domain_decay must lie in (0, 1]");
  if (late_fraction < 0.0 || late_fraction > 1.0)
    throw SynthError("late_fraction must lie in [0, 1]");
  if (codes_per_visit.first < 1 || codes_per_visit.second < codes_per_visit.first)
    throw SynthError("codes_per_visit must satisfy 1 <= min <= max");
  if (aux_codes_per_visit.first < 0 || aux_codes_per_visit.second < aux_codes_per_visit.first)
    throw SynthError("aux_codes_per_visit must satisfy 0 <= min <= max");
  if (positive_rate <= 0.0 || positive_rate >= 1.0)
    throw SynthError("positive_rate must lie in (0, 1)");
  if (label_flip_rate < 0.0 || label_flip_rate > 0.5)
    throw SynthError("label_flip_rate must lie in [0, 0.5]");
  label_task.validate();
  std::size_t subtrees = 1;
  for (int l = 1; l < domain_level; ++l) subtrees *= static_cast<std::size_t>(branching);
  if (n_latent_domains == 0 || n_latent_domains > subtrees)
    throw SynthError("n_latent_domains must lie in [1, " + std::to_string(subtrees) +
                     "] for domain_level " + std::to_string(domain_level));
}

SynthConfig load_synth_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw SynthError("cannot open config: " + path.string());
  json j;
  try {
    is >> j;
  } catch (const json::parse_error& e) {
    throw SynthError("bad config syntax in " + path.string() + ": " + e.what());
  }
  if (!j.contains("schema") || j["schema"].get<std::string>() != kSynthConfigSchema)
    throw SynthError("config schema must be \"" + std::string(kSynthConfigSchema) + "\"");

  SynthConfig cfg;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j[key].get<std::decay_t<decltype(field)>>();
  };
  get("seed", cfg.seed);
  get("levels", cfg.levels);
  get("branching", cfg.branching);
  get("n_patients", cfg.n_patients);
  if (j.contains("visits_range")) {
    cfg.visits_range.first = j["visits_range"][0].get<int>();
    cfg.visits_range.second = j["visits_range"][1].get<int>();
  }
  get("n_latent_domains", cfg.n_latent_domains);
  get("domain_level", cfg.domain_level);
  get("shift_strength", cfg.shift_strength);
  if (j.contains("task")) {
    cfg.label_task.kind = parse_task_kind(j["task"]["kind"].get<std::string>());
    if (j["task"].contains("d")) cfg.label_task.d = j["task"]["d"].get<std::size_t>();
    if (j["task"].contains("readmission_window_days"))
      cfg.label_task.readmission_window_days = j["task"]["readmission_window_days"].get<int>();
  }
  get("noise_rate", cfg.noise_rate);
  get("domain_decay", cfg.domain_decay);
  get("late_fraction", cfg.late_fraction);
  get("cutoff_day", cfg.cutoff_day);
  if (j.contains("codes_per_visit")) {
    cfg.codes_per_visit.first = j["codes_per_visit"][0].get<int>();
    cfg.codes_per_visit.second = j["codes_per_visit"][1].get<int>();
  }
  if (j.contains("aux_codes_per_visit")) {
    cfg.aux_codes_per_visit.first = j["aux_codes_per_visit"][0].get<int>();
    cfg.aux_codes_per_visit.second = j["aux_codes_per_visit"][1].get<int>();
  }
  if (j.contains("aux_vocab_size"))
    for (std::size_t k = 0; k < cfg.aux_vocab_size.size(); ++k)
      cfg.aux_vocab_size[k] = j["aux_vocab_size"][k].get<std::size_t>();
  get("positive_rate", cfg.positive_rate);
  get("domain_weight_scale", cfg.domain_weight_scale);
  get("history_weight_scale", cfg.history_weight_scale);
  get("label_flip_rate", cfg.label_flip_rate);
  cfg.validate();
  return cfg;
}

void save_synth_config(const std::filesystem::path& path, const SynthConfig& cfg) {
  json j;
  j["schema"] = kSynthConfigSchema;
  j["seed"] = cfg.seed;
  j["levels"] = cfg.levels;
  j["branching"] = cfg.branching;
  j["n_patients"] = cfg.n_patients;
  j["visits_range"] = {cfg.visits_range.first, cfg.visits_range.second};
  j["n_latent_domains"] = cfg.n_latent_domains;
  j["domain_level"] = cfg.domain_level;
  j["shift_strength"] = cfg.shift_strength;
  j["task"] = {{"kind", task_kind_name(cfg.label_task.kind)},
               {"d", cfg.label_task.d},
               {"readmission_window_days", cfg.label_task.readmission_window_days}};
  j["noise_rate"] = cfg.noise_rate;
  j["domain_decay"] = cfg.domain_decay;
  j["late_fraction"] = cfg.late_fraction;
  j["cutoff_day"] = cfg.cutoff_day;
  j["codes_per_visit"] = {cfg.codes_per_visit.first, cfg.codes_per_visit.second};
  j["aux_codes_per_visit"] = {cfg.aux_codes_per_visit.first, cfg.aux_codes_per_visit.second};
  j["aux_vocab_size"] = cfg.aux_vocab_size;
  j["positive_rate"] = cfg.positive_rate;
  j["domain_weight_scale"] = cfg.domain_weight_scale;
  j["history_weight_scale"] = cfg.history_weight_scale;
  j["label_flip_rate"] = cfg.label_flip_rate;
  std::ofstream os(path);
  if (!os) throw SynthError("cannot open for write: " + path.string());
  os << j.dump(2) << '\n';
}

Hierarchy generate_hierarchy(const SynthConfig& cfg) {
  cfg.validate();
  std::vector<std::pair<std::string, std::string>> edges;
  std::vector<std::pair<std::string, std::string>> codes;
  std::vector<std::string> frontier{"R"};
  for (int level = 2; level <= cfg.levels; ++level) {
    std::vector<std::string> next;
    next.reserve(frontier.size() * static_cast<std::size_t>(cfg.branching));
    for (const auto& parent : frontier) {
      for (int b = 0; b < cfg.branching; ++b) {
        std::string child = parent + "." + std::to_string(b);
        edges.emplace_back(parent, child);
        next.push_back(std::move(child));
      }
    }
    frontier = std::move(next);
  }
  for (std::size_t i = 0; i < frontier.size(); ++i)
    codes.emplace_back("c" + std::to_string(i), frontier[i]);
  return Hierarchy::build(edges, codes);
}

namespace {

struct DomainPools {
  // Per domain: leaf codes of its subtree, plus a preferred block per aux key.
  std::vector<std::vector<std::string>> leaf_codes;
  std::vector<std::string> all_leaf_codes;
  std::array<std::vector<std::string>, kFeatureKeys - 1> aux_vocab;
  std::array<std::vector<std::pair<std::size_t, std::size_t>>, kFeatureKeys - 1> aux_block;
};

DomainPools build_pools(const SynthConfig& cfg, const Hierarchy& h) {
  std::vector<NodeId> roots;
  for (NodeId id = 0; id < h.node_count(); ++id)
    if (h.node(id).level == cfg.domain_level) roots.push_back(id);
  if (roots.size() < cfg.n_latent_domains)
    throw SynthError("hierarchy has only " + std::to_string(roots.size()) +
                     " subtrees at level " + std::to_string(cfg.domain_level));

  DomainPools pools;
  pools.leaf_codes.resize(cfg.n_latent_domains);
  std::vector<std::string> code_by_leaf_index(h.leaf_count());
  for (const auto& [code, leaf] : h.leaf_map())
    code_by_leaf_index[h.leaf_index(leaf)] = code;
  pools.all_leaf_codes = code_by_leaf_index;

  for (std::size_t d = 0; d < cfg.n_latent_domains; ++d)
    for (NodeId leaf : h.leaf_descendants(roots[d]))
      pools.leaf_codes[d].push_back(code_by_leaf_index[h.leaf_index(leaf)]);

  const char* prefix[kFeatureKeys - 1] = {"p", "g"};
  for (std::size_t k = 0; k + 1 < kFeatureKeys; ++k) {
    for (std::size_t i = 0; i < cfg.aux_vocab_size[k]; ++i)
      pools.aux_vocab[k].push_back(std::string(prefix[k]) + std::to_string(i));
    const std::size_t block = std::max<std::size_t>(1, cfg.aux_vocab_size[k] / cfg.n_latent_domains);
    for (std::size_t d = 0; d < cfg.n_latent_domains; ++d) {
      std::size_t lo = (d * block) % cfg.aux_vocab_size[k];
      pools.aux_block[k].emplace_back(lo, std::min(lo + block, cfg.aux_vocab_size[k]));
    }
  }
  return pools;
}

std::vector<double> domain_prior(const SynthConfig& cfg, bool late) {
  std::vector<double> base(cfg.n_latent_domains);
  double w = 1.0;
  for (auto& p : base) {
    p = w;
    w *= cfg.domain_decay;
  }
  double z = std::accumulate(base.begin(), base.end(), 0.0);
  for (auto& p : base) p /= z;
  if (!late || cfg.shift_strength == 0.0) return base;
  std::vector<double> shifted(base.rbegin(), base.rend());
  for (std::size_t d = 0; d < base.size(); ++d)
    shifted[d] = (1.0 - cfg.shift_strength) * base[d] + cfg.shift_strength * shifted[d];
  return shifted;
}

std::size_t sample_index(CounterRng& rng, const std::vector<double>& probs) {
  double u = rng.next_double();
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  return probs.size() - 1;
}

}  // namespace

Cohort generate_cohorts(const SynthConfig& cfg, const Hierarchy& h) {
  cfg.validate();
  DomainPools pools = build_pools(cfg, h);
  const std::vector<double> prior_early = domain_prior(cfg, false);
  const std::vector<double> prior_late = domain_prior(cfg, true);

  CounterRng root(cfg.seed, {hash_name("cohort")});
  Cohort cohort;
  cohort.records.reserve(cfg.n_patients);
  cohort.domains.reserve(cfg.n_patients);

  std::vector<std::vector<double>> logits(cfg.n_patients,
                                          std::vector<double>(cfg.label_task.d, 0.0));

  // Label rule weights, one stream independent of patient sampling.
  CounterRng wrng(cfg.seed, {hash_name("label_weights")});
  std::vector<std::vector<double>> dom_w(cfg.n_latent_domains,
                                         std::vector<double>(cfg.label_task.d));
  for (auto& row : dom_w)
    for (auto& v : row) v = cfg.domain_weight_scale * wrng.uniform(-1.0, 1.0);
  std::vector<std::vector<double>> hist_w(h.leaf_count(),
                                          std::vector<double>(cfg.label_task.d));
  for (auto& row : hist_w)
    for (auto& v : row) v = cfg.history_weight_scale * wrng.uniform(-1.0, 1.0);

  for (std::size_t i = 0; i < cfg.n_patients; ++i) {
    CounterRng rng = root.split(i);
    PatientRecord p;
    p.id = "pt" + std::to_string(i);

    const bool late = rng.next_double() < cfg.late_fraction;
    const std::size_t domain = sample_index(rng, late ? prior_late : prior_early);
    cohort.domains.push_back(domain);

    const int n_visits = rng.uniform_int(cfg.visits_range.first, cfg.visits_range.second);
    const int64_t last_day = late ? cfg.cutoff_day + rng.uniform_int(1, 365)
                                  : cfg.cutoff_day - rng.uniform_int(0, 365);
    std::vector<int64_t> days(n_visits);
    days[n_visits - 1] = last_day;
    for (int t = n_visits - 2; t >= 0; --t)
      days[t] = days[t + 1] - rng.uniform_int(30, 120);

    const auto& dom_leaves = pools.leaf_codes[domain];
    for (int t = 0; t < n_visits; ++t) {
      Visit v;
      v.day = days[t];
      const int n_cond = rng.uniform_int(cfg.codes_per_visit.first, cfg.codes_per_visit.second);
      for (int c = 0; c < n_cond; ++c) {
        const bool off_domain = rng.next_double() < cfg.noise_rate;
        const auto& pool = off_domain ? pools.all_leaf_codes : dom_leaves;
        v.codes[0].push_back(pool[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1))]);
      }
      for (std::size_t k = 1; k < kFeatureKeys; ++k) {
        const auto& vocab = pools.aux_vocab[k - 1];
        if (vocab.empty()) continue;
        const auto [lo, hi] = pools.aux_block[k - 1][domain];
        const int n_aux =
            rng.uniform_int(cfg.aux_codes_per_visit.first, cfg.aux_codes_per_visit.second);
        for (int c = 0; c < n_aux; ++c) {
          const bool off_domain = rng.next_double() < cfg.noise_rate;
          std::size_t idx = off_domain ? static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(vocab.size()) - 1))
                                       : static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi) - 1));
          v.codes[k].push_back(vocab[idx]);
        }
      }
      for (auto& key_codes : v.codes) {
        std::sort(key_codes.begin(), key_codes.end());
        key_codes.erase(std::unique(key_codes.begin(), key_codes.end()), key_codes.end());
      }
      p.visits.push_back(std::move(v));
    }

    cohort.records.push_back(std::move(p));
    std::vector<uint8_t> hist = aggregate_history(cohort.records.back(),
                                                  cohort.records.back().visits.size(), h);
    for (std::size_t j = 0; j < cfg.label_task.d; ++j) {
      double z = dom_w[domain][j];
      for (std::size_t l = 0; l < hist.size(); ++l)
        if (hist[l]) z += hist_w[l][j];
      logits[i][j] = z;
    }
  }

  // Per-dimension threshold at the (1 - positive_rate) cohort quantile.
  for (std::size_t j = 0; j < cfg.label_task.d; ++j) {
    std::vector<double> col(cfg.n_patients);
    for (std::size_t i = 0; i < cfg.n_patients; ++i) col[i] = logits[i][j];
    std::size_t k = static_cast<std::size_t>(
        std::floor((1.0 - cfg.positive_rate) * static_cast<double>(cfg.n_patients)));
    if (k >= cfg.n_patients) k = cfg.n_patients - 1;
    std::nth_element(col.begin(), col.begin() + static_cast<std::ptrdiff_t>(k), col.end());
    const double thresh = col[k];
    for (std::size_t i = 0; i < cfg.n_patients; ++i)
      if (logits[i][j] >= thresh) cohort.records[i].label.push_back(j);
  }

  if (cfg.label_flip_rate > 0.0) {
    CounterRng frng(cfg.seed, {hash_name("label_flips")});
    for (std::size_t i = 0; i < cfg.n_patients; ++i) {
      CounterRng prng = frng.split(i);
      auto& label = cohort.records[i].label;
      std::vector<std::size_t> flipped;
      std::size_t pos = 0;
      for (std::size_t j = 0; j < cfg.label_task.d; ++j) {
        bool on = pos < label.size() && label[pos] == j;
        if (on) ++pos;
        if (prng.next_double() < cfg.label_flip_rate) on = !on;
        if (on) flipped.push_back(j);
      }
      label = std::move(flipped);
    }
  }
  return cohort;
}

void write_domain_sidecar(const std::filesystem::path& path, const Cohort& cohort) {
  std::ofstream os(path);
  if (!os) throw SynthError("cannot open for write: " + path.string());
  for (std::size_t i = 0; i < cohort.records.size(); ++i)
    os << cohort.records[i].id << ' ' << cohort.domains[i] << '\n';
}

std::vector<std::pair<std::string, std::size_t>> read_domain_sidecar(
    const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw SynthError("cannot open sidecar: " + path.string());
  std::vector<std::pair<std::string, std::size_t>> out;
  std::string id;
  std::size_t domain;
  while (is >> id >> domain) out.emplace_back(id, domain);
  return out;
}

}  // namespace hierdg
