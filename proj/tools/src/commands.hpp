#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "hierdg/pruning.hpp"
#include "hierdg/records.hpp"
#include "hierdg/siamese.hpp"
#include "hierdg/synth.hpp"

namespace hierdg::cli {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitInvariant = 3;
inline constexpr int kExitNumeric = 4;

// Bad flags, unreadable files, malformed configs.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GlobalOpts {
  std::filesystem::path out = "out";
  std::optional<uint64_t> seed;  // overrides the config seed when set
  int threads = 1;
};

int cmd_synth(const std::filesystem::path& config, const GlobalOpts& g);

struct PruneArgs {
  std::filesystem::path hierarchy;
  std::filesystem::path embeddings;  // node-vector dump; exclusive with ckpt
  std::filesystem::path ckpt;        // trained model; leaf vectors from its backbone
  ScoreParams score{};
  double lca_threshold = 0.9;
  int beam_width = 8;
};
int cmd_prune(const PruneArgs& args, const GlobalOpts& g);

struct TrainArgs {
  std::filesystem::path config;
  std::filesystem::path data;       // dir holding hierarchy.txt + dataset.jsonl
  std::filesystem::path save_ckpt;  // defaults to <out>/model.ckpt
  std::filesystem::path load_ckpt;  // skip training, re-emit artifacts from this model
  bool dump_embeddings = false;
};
int cmd_train(const TrainArgs& args, const GlobalOpts& g);

struct EvalArgs {
  std::filesystem::path pred;
  std::filesystem::path gold;
  std::string task;
  bool benchmark = false;
  std::filesystem::path config;  // benchmark mode: seeds + synth/train config paths
};
int cmd_eval(const EvalArgs& args, const GlobalOpts& g);

struct ProbeArgs {
  std::filesystem::path ckpt;
  std::filesystem::path data;
  bool domain_recovery = false;  // the only switch that reads the hidden-domain sidecar
};
int cmd_probe(const ProbeArgs& args, const GlobalOpts& g);

// Config-file loaders shared with tests.
struct TrainCliConfig {
  TrainConfig train{};
  TaskSpec task{};
  SplitRatios ratios{};
  int64_t cutoff_day = 1000;
  bool fail_on_empty = true;
};
inline constexpr const char* kTrainConfigSchema = "hierdg-train-config/1";
TrainCliConfig load_train_config(const std::filesystem::path& path);

struct BenchConfig {
  std::vector<uint64_t> seeds;
  std::filesystem::path synth_config;
  std::filesystem::path train_config;
};
inline constexpr const char* kBenchConfigSchema = "hierdg-bench-config/1";
BenchConfig load_bench_config(const std::filesystem::path& path);

}  // namespace hierdg::cli
