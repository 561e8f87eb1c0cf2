#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "hierdg/ontology.hpp"

namespace hierdg {

struct RecordError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class TaskKind { mortality, readmission, diagnosis, drug };

TaskKind parse_task_kind(const std::string& name);
std::string task_kind_name(TaskKind kind);

struct TaskSpec {
  TaskKind kind = TaskKind::mortality;
  std::size_t d = 1;
  int readmission_window_days = 30;

  void validate() const;
  bool binary() const { return kind == TaskKind::mortality || kind == TaskKind::readmission; }
};

// Codes are stored per feature key (0=conditions, 1=procedures, 2=drugs by
// convention); each key has its own vocabulary.
inline constexpr std::size_t kFeatureKeys = 3;

struct Visit {
  int64_t day = 0;
  // codes[k] = text codes for feature key k, sorted, unique
  std::vector<std::vector<std::string>> codes{std::vector<std::vector<std::string>>(kFeatureKeys)};
};

struct PatientRecord {
  std::string id;
  std::vector<Visit> visits;            // sorted by day, length >= 2
  std::vector<std::size_t> label;       // sorted positive label indices, each < task d
};

// Record-per-line JSON: {"id": ..., "visits":[{"day":..,"codes":[[..],[..],[..]]}],
// "label":[..]}. The loader validates against the task; it never derives labels.
std::vector<PatientRecord> load_dataset(const std::filesystem::path& path, const TaskSpec& task);
std::vector<PatientRecord> load_dataset(std::istream& is, const TaskSpec& task);
void save_dataset(const std::filesystem::path& path, const std::vector<PatientRecord>& data);
void save_dataset(std::ostream& os, const std::vector<PatientRecord>& data);

// OR of condition (key 0) multi-hots over visits [0, upto). upto is 1-based
// inclusive per the visit count convention: upto=1 means first visit only.
std::vector<uint8_t> aggregate_history(const PatientRecord& p, std::size_t upto,
                                       const Hierarchy& vocab);

struct SplitRatios {
  double train = 0.75;
  double val = 0.10;
  double test = 0.15;
};

struct SplitResult {
  std::vector<PatientRecord> train;
  std::vector<PatientRecord> val;
  std::vector<PatientRecord> test;
};

struct SplitOptions {
  uint64_t seed = 0;
  bool fail_on_empty = false;
};

// Patients whose last visit is after `cutoff` form the test set; the rest are
// shuffled deterministically and split train:val with the ratio rescaled to
// the source side.
SplitResult temporal_split(const std::vector<PatientRecord>& data, int64_t cutoff,
                           const SplitRatios& ratios, const SplitOptions& opts = {});

}  // namespace hierdg
