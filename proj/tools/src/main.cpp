#include <CLI11.hpp>

#include "commands.hpp"

using namespace hierdg::cli;

int main(int argc, char** argv) {
  CLI::App app{"hierarchy-guided domain discovery and generalization pipeline"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOpts g;
  uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "override the config seed");
  app.add_option("--out", g.out, "output directory")->capture_default_str();
  app.add_option("--threads", g.threads, "worker thread cap (pipeline is single-threaded)")
      ->check(CLI::PositiveNumber);

  std::filesystem::path synth_config;
  auto* synth = app.add_subcommand("synth", "generate a synthetic cohort with a hidden domain sidecar");
  synth->add_option("--config", synth_config, "synth config (JSON)")->required();

  PruneArgs prune_args;
  auto* prune = app.add_subcommand("prune", "run hierarchy pruning standalone and report scores");
  prune->add_option("--hierarchy", prune_args.hierarchy, "hierarchy file")->required();
  prune->add_option("--embeddings", prune_args.embeddings, "node embedding dump");
  prune->add_option("--ckpt", prune_args.ckpt, "trained model checkpoint");
  prune->add_option("--alpha", prune_args.score.alpha, "cohesion weight in the node score");
  prune->add_flag("--leaves-only", prune_args.score.purity_leaves_only,
                  "cohesion over leaf descendants only");
  prune->add_option("--lca-threshold", prune_args.lca_threshold,
                    "cosine threshold for ancestor rectification");
  prune->add_option("--beam-width", prune_args.beam_width, "beam width for refinement");

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "train the dual-pathway model");
  train->add_option("--config", train_args.config, "train config (JSON)")->required();
  train->add_option("--data", train_args.data, "directory with hierarchy.txt + dataset.jsonl")
      ->required();
  train->add_option("--save-ckpt", train_args.save_ckpt,
                    "checkpoint path (default <out>/model.ckpt)");
  train->add_option("--load-ckpt", train_args.load_ckpt,
                    "skip training; re-emit artifacts from this checkpoint");
  train->add_flag("--dump-embeddings", train_args.dump_embeddings,
                  "also write the rectified node-embedding table");

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "score predictions or run the shift benchmark");
  eval->add_option("--pred", eval_args.pred, "predictions (JSONL: id, scores)");
  eval->add_option("--gold", eval_args.gold, "gold dataset (JSONL records)");
  eval->add_option("--task", eval_args.task, "mortality|readmission|diagnosis|drug");
  eval->add_flag("--benchmark", eval_args.benchmark, "run the base/udon/oracle comparison");
  eval->add_option("--config", eval_args.config, "benchmark config (JSON)");

  ProbeArgs probe_args;
  auto* probe = app.add_subcommand("probe", "linear-probe decomposition report for a checkpoint");
  probe->add_option("--ckpt", probe_args.ckpt, "trained model checkpoint")->required();
  probe->add_option("--data", probe_args.data, "directory with hierarchy.txt + dataset.jsonl")
      ->required();
  probe->add_flag("--domain-recovery-report", probe_args.domain_recovery,
                  "score discovered domains against the hidden sidecar (reads domains.tsv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitConfig;
  }
  if (seed_opt->count() > 0) g.seed = seed_value;

  if (synth->parsed()) return cmd_synth(synth_config, g);
  if (prune->parsed()) return cmd_prune(prune_args, g);
  if (train->parsed()) return cmd_train(train_args, g);
  if (eval->parsed()) return cmd_eval(eval_args, g);
  if (probe->parsed()) return cmd_probe(probe_args, g);
  return kExitConfig;
}
