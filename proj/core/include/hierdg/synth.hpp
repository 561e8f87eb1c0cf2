#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "hierdg/ontology.hpp"
#include "hierdg/records.hpp"

namespace hierdg {

struct SynthError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Everything downstream of the seed is a pure function of this struct; two
// runs with equal configs produce bit-identical cohorts.
struct SynthConfig {
  uint64_t seed = 0;
  int levels = 4;                     // tree height H
  int branching = 3;                  // children per internal node
  std::size_t n_patients = 500;
  std::pair<int, int> visits_range{2, 6};
  std::size_t n_latent_domains = 9;
  int domain_level = 3;               // subtree roots at this level act as hidden domains
  double shift_strength = 0.0;        // 0 = stationary, 1 = fully reversed domain prior
  TaskSpec label_task{};
  double noise_rate = 0.1;            // chance a code ignores the domain subtree

  // Cohort shape knobs.
  double domain_decay = 0.6;          // base domain prior ~ decay^rank
  double late_fraction = 0.3;         // expected share of patients past the cutoff
  int64_t cutoff_day = 1000;
  std::pair<int, int> codes_per_visit{2, 5};        // condition codes per visit
  std::pair<int, int> aux_codes_per_visit{1, 3};    // per auxiliary key
  std::array<std::size_t, kFeatureKeys - 1> aux_vocab_size{24, 24};

  // Label rule knobs: logit_j = dom_w[domain][j] + hist_w[j]·X + b_j, with a
  // per-dimension threshold at the (1 - positive_rate) cohort quantile.
  double positive_rate = 0.3;
  double domain_weight_scale = 3.0;
  double history_weight_scale = 1.0;
  double label_flip_rate = 0.0;

  void validate() const;
};

inline constexpr const char* kSynthConfigSchema = "hierdg-synth-config/1";

SynthConfig load_synth_config(const std::filesystem::path& path);
void save_synth_config(const std::filesystem::path& path, const SynthConfig& cfg);

// Complete `branching`-ary tree of height `levels` with a code for every leaf.
Hierarchy generate_hierarchy(const SynthConfig& cfg);

struct Cohort {
  std::vector<PatientRecord> records;
  std::vector<std::size_t> domains;   // hidden domain per record, same order
};

// The hidden-domain vector exists only for evaluation; the training pipeline
// takes records alone.
Cohort generate_cohorts(const SynthConfig& cfg, const Hierarchy& h);

void write_domain_sidecar(const std::filesystem::path& path, const Cohort& cohort);
// id -> hidden domain
std::vector<std::pair<std::string, std::size_t>> read_domain_sidecar(
    const std::filesystem::path& path);

}  // namespace hierdg
