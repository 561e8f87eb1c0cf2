#include "commands.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ami.hpp"
#include "hierdg/embedding_flow.hpp"
#include "hierdg/metrics.hpp"
#include "hierdg/probe.hpp"
#include "manifest.hpp"

namespace hierdg::cli {

using nlohmann::json;

namespace {

int run_guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const SynthError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const RecordError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const HierarchyError& e) {
    std::cerr << "hierarchy error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericAbort& e) {
    std::cerr << "numeric abort: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvariant;
  }
}

void require_file(const std::filesystem::path& p, const char* what) {
  if (p.empty()) throw UsageError(std::string(what) + " is required");
  if (!std::filesystem::exists(p))
    throw UsageError(std::string(what) + " not found: " + p.string());
}

json load_json_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw UsageError("cannot open " + p.string());
  json j;
  in >> j;
  return j;
}

void check_schema(const json& j, const char* expected, const std::filesystem::path& p) {
  if (!j.contains("schema") || !j["schema"].is_string())
    throw UsageError(p.string() + ": missing schema field");
  const std::string got = j["schema"].get<std::string>();
  if (got != expected)
    throw UsageError(p.string() + ": schema " + got + ", expected " + expected);
}

struct MetricRow {
  std::string name;
  double value = 0.0;
  bool degenerate = false;
};

MetricRow guarded_metric(const std::string& name, double fallback,
                         const std::function<double()>& fn) {
  MetricRow row{name, fallback, false};
  try {
    row.value = fn();
  } catch (const MetricError&) {
    row.degenerate = true;
  }
  return row;
}

std::vector<MetricRow> task_metrics(TaskKind kind, const PredictionBatch& batch) {
  std::vector<MetricRow> rows;
  switch (kind) {
    case TaskKind::mortality:
    case TaskKind::readmission:
      rows.push_back(guarded_metric("auroc", 0.5, [&] {
        return auroc(batch.flat_scores(), batch.flat_targets());
      }));
      rows.push_back(guarded_metric("auprc", 0.0, [&] {
        return auprc(batch.flat_scores(), batch.flat_targets());
      }));
      break;
    case TaskKind::diagnosis:
      rows.push_back(guarded_metric("weighted_f1", 0.0, [&] { return weighted_f1(batch); }));
      rows.push_back(guarded_metric("recall@10", 0.0, [&] { return recall_at_k(batch, 10); }));
      break;
    case TaskKind::drug:
      rows.push_back(guarded_metric("auprc", 0.0, [&] {
        return auprc(batch.flat_scores(), batch.flat_targets());
      }));
      rows.push_back(guarded_metric("f1", 0.0, [&] { return f1_binary(batch); }));
      break;
  }
  return rows;
}

void print_metric_table(const std::vector<MetricRow>& rows) {
  std::cout << std::left << std::setw(16) << "metric" << "value\n";
  for (const auto& r : rows) {
    std::cout << std::left << std::setw(16) << r.name << std::fixed << std::setprecision(4)
              << r.value;
    if (r.degenerate) std::cout << " (degenerate)";
    std::cout << "\n";
  }
  std::cout.unsetf(std::ios::fixed);
}

EmbeddingTable pipeline_embedding_table(const Hierarchy& h, const SiameseModel& model,
                                        double lca_threshold) {
  EmbeddingTable table =
      init_leaf_embeddings(h, model.backbone.condition_embedding_map(), model.backbone.dim);
  table = upward_average(h, table);
  return lca_rectify(h, table, lca_threshold);
}

void write_m_table(const std::filesystem::path& path, const Hierarchy& h,
                   const DomainLookupTable& table) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write " + path.string());
  out << "id";
  for (NodeId n : table.vocab.nodes) out << "\t" << h.node(n).name;
  out << "\n";
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    out << table.row_ids[i];
    for (uint8_t bit : table.rows[i]) out << "\t" << int(bit);
    out << "\n";
  }
}

json probe_report_json(const ProbeReport& report) {
  json j;
  j["schema"] = "hierdg-probe-report/1";
  j["rows"] = {{"labels_p_vs_h", report.labels_p_vs_h},
               {"domains_p_vs_rpar", report.domains_p_vs_rpar},
               {"labels_vs_domains_on_p", report.labels_vs_domains_on_p}};
  j["n_domains"] = report.n_domains;
  j["zero_variance_dims"] = report.zero_variance_dims;
  j["skipped_label_classes"] = report.skipped_label_classes;
  j["skipped_domain_classes"] = report.skipped_domain_classes;
  return j;
}

void print_probe_rows(const ProbeReport& report) {
  std::cout << std::left << std::setw(34) << "comparison" << "mean|cos|\n";
  const auto row = [](const char* name, double v) {
    std::cout << std::left << std::setw(34) << name << std::fixed << std::setprecision(4) << v
              << "\n";
  };
  row("labels: p vs h", report.labels_p_vs_h);
  row("domains: p vs r_par", report.domains_p_vs_rpar);
  row("labels vs domains, both on p", report.labels_vs_domains_on_p);
  std::cout.unsetf(std::ios::fixed);
}

}  // namespace

TrainCliConfig load_train_config(const std::filesystem::path& path) {
  require_file(path, "train config");
  const json j = load_json_file(path);
  check_schema(j, kTrainConfigSchema, path);

  TrainCliConfig cfg;
  cfg.train.seed = j.value("seed", cfg.train.seed);

  const json task = j.value("task", json::object());
  cfg.task.kind = parse_task_kind(task.value("kind", std::string("mortality")));
  cfg.task.d = task.value("d", cfg.task.d);
  cfg.task.readmission_window_days =
      task.value("readmission_window_days", cfg.task.readmission_window_days);
  cfg.task.validate();
  cfg.train.label_dim = cfg.task.d;

  const json split = j.value("split", json::object());
  cfg.ratios.train = split.value("train", cfg.ratios.train);
  cfg.ratios.val = split.value("val", cfg.ratios.val);
  cfg.ratios.test = split.value("test", cfg.ratios.test);
  cfg.cutoff_day = split.value("cutoff_day", cfg.cutoff_day);
  cfg.fail_on_empty = split.value("fail_on_empty", cfg.fail_on_empty);

  const json sched = j.value("schedule", json::object());
  cfg.train.iterations = sched.value("iterations", cfg.train.iterations);
  cfg.train.total_epochs = sched.value("total_epochs", cfg.train.total_epochs);
  cfg.train.backbone_warmup_epochs =
      sched.value("backbone_warmup_epochs", cfg.train.backbone_warmup_epochs);
  cfg.train.cotrain_epochs_per_iter =
      sched.value("cotrain_epochs_per_iter", cfg.train.cotrain_epochs_per_iter);
  cfg.train.pretrain_epochs = sched.value("pretrain_epochs", cfg.train.pretrain_epochs);
  cfg.train.batch_size = sched.value("batch_size", cfg.train.batch_size);

  const json optim = j.value("optim", json::object());
  cfg.train.lr_backbone = optim.value("lr_backbone", cfg.train.lr_backbone);
  cfg.train.lr_domain = optim.value("lr_domain", cfg.train.lr_domain);
  cfg.train.lambda_kl = optim.value("lambda_kl", cfg.train.lambda_kl);

  const json model = j.value("model", json::object());
  cfg.train.hidden_dim = model.value("hidden_dim", cfg.train.hidden_dim);
  cfg.train.domain_hidden = model.value("domain_hidden", cfg.train.domain_hidden);
  cfg.train.dropout = model.value("dropout", cfg.train.dropout);
  cfg.train.use_positions = model.value("use_positions", cfg.train.use_positions);
  cfg.train.joint_backprop = model.value("joint_backprop", cfg.train.joint_backprop);
  cfg.train.embed_init_scale = model.value("embed_init_scale", cfg.train.embed_init_scale);

  const json pruning = j.value("pruning", json::object());
  cfg.train.score.alpha = pruning.value("alpha", cfg.train.score.alpha);
  cfg.train.score.purity_leaves_only =
      pruning.value("purity_leaves_only", cfg.train.score.purity_leaves_only);
  cfg.train.lca_threshold = pruning.value("lca_threshold", cfg.train.lca_threshold);
  cfg.train.beam_width = pruning.value("beam_width", cfg.train.beam_width);

  cfg.train.validate();
  return cfg;
}

BenchConfig load_bench_config(const std::filesystem::path& path) {
  require_file(path, "benchmark config");
  const json j = load_json_file(path);
  check_schema(j, kBenchConfigSchema, path);
  BenchConfig cfg;
  cfg.seeds = j.at("seeds").get<std::vector<uint64_t>>();
  if (cfg.seeds.empty()) throw UsageError("benchmark needs at least one seed");
  const auto base = path.parent_path();
  cfg.synth_config = base / j.at("synth_config").get<std::string>();
  cfg.train_config = base / j.at("train_config").get<std::string>();
  require_file(cfg.synth_config, "synth config");
  require_file(cfg.train_config, "train config");
  return cfg;
}

int cmd_synth(const std::filesystem::path& config, const GlobalOpts& g) {
  return run_guarded([&] {
    require_file(config, "synth config");
    SynthConfig cfg = load_synth_config(config);
    if (g.seed) cfg.seed = *g.seed;
    cfg.validate();

    RunManifest manifest;
    manifest.command = "synth";
    manifest.config = load_json_file(config);
    if (g.seed) manifest.config["seed"] = *g.seed;
    manifest.seed = cfg.seed;
    manifest.threads = g.threads;
    manifest.inputs = {{config.string(), file_content_hash(config)}};
    manifest.outputs = {"hierarchy.txt", "dataset.jsonl", "domains.tsv"};
    write_manifest(g.out, manifest);

    const Hierarchy h = generate_hierarchy(cfg);
    const Cohort cohort = generate_cohorts(cfg, h);
    h.save(g.out / "hierarchy.txt");
    save_dataset(g.out / "dataset.jsonl", cohort.records);
    write_domain_sidecar(g.out / "domains.tsv", cohort);

    std::set<std::size_t> domains(cohort.domains.begin(), cohort.domains.end());
    std::cout << "wrote " << cohort.records.size() << " patients over " << h.leaf_count()
              << " leaf codes, " << domains.size() << " hidden domains -> " << g.out.string()
              << "\n";
    return kExitOk;
  });
}

int cmd_prune(const PruneArgs& args, const GlobalOpts& g) {
  return run_guarded([&] {
    require_file(args.hierarchy, "hierarchy");
    if (args.embeddings.empty() == args.ckpt.empty())
      throw UsageError("pass exactly one of --embeddings or --ckpt");

    const Hierarchy h = load_hierarchy(args.hierarchy);

    RunManifest manifest;
    manifest.command = "prune";
    manifest.config = {{"alpha", args.score.alpha},
                       {"purity_leaves_only", args.score.purity_leaves_only},
                       {"lca_threshold", args.lca_threshold},
                       {"beam_width", args.beam_width}};
    manifest.threads = g.threads;
    manifest.inputs = {{args.hierarchy.string(), file_content_hash(args.hierarchy)}};
    if (!args.embeddings.empty())
      manifest.inputs.push_back({args.embeddings.string(), file_content_hash(args.embeddings)});
    if (!args.ckpt.empty())
      manifest.inputs.push_back({args.ckpt.string(), file_content_hash(args.ckpt)});
    manifest.outputs = {"pruning_report.json"};
    write_manifest(g.out, manifest);

    EmbeddingTable table;
    if (!args.embeddings.empty()) {
      require_file(args.embeddings, "embeddings");
      EmbeddingTable loaded = load_embedding_table(args.embeddings);
      if (loaded.vectors.size() != h.node_count())
        throw UsageError("embedding dump holds " + std::to_string(loaded.vectors.size()) +
                         " nodes, hierarchy has " + std::to_string(h.node_count()));
      table.dim = loaded.dim;
      table.vectors.assign(h.node_count(), {});
      table.from_backbone.assign(h.node_count(), 1);
      for (NodeId leaf : h.leaves()) table.vectors[leaf] = loaded.vectors[leaf];
      table = upward_average(h, std::move(table));
    } else {
      require_file(args.ckpt, "checkpoint");
      const SiameseModel model = load_model(args.ckpt);
      table = init_leaf_embeddings(h, model.backbone.condition_embedding_map(),
                                   model.backbone.dim);
      table = upward_average(h, std::move(table));
    }
    table = lca_rectify(h, std::move(table), args.lca_threshold);

    std::vector<double> scores(h.node_count());
    std::vector<ScoreBreakdown> parts(h.node_count());
    for (NodeId n = 0; n < h.node_count(); ++n) {
      parts[n] = node_score_parts(h, table, n, args.score);
      scores[n] = parts[n].score;
    }
    const CandidateInit ci = candidate_init(h, scores);
    const PrunedVocabulary refined =
        beam_refine(h, table, ci.candidates, ci.flagged, args.beam_width);
    refined.validate(h);

    std::map<NodeId, std::vector<double>> leaf_vectors;
    for (NodeId leaf : h.leaves()) leaf_vectors[leaf] = table.vectors[leaf];
    const auto clustering_sil = [&](const std::vector<NodeId>& nodes) -> json {
      PrunedVocabulary v;
      v.nodes = nodes;
      const auto column = v.covering_column(h);
      std::map<NodeId, NodeId> assignment;
      for (std::size_t li = 0; li < column.size(); ++li)
        assignment[h.leaves()[li]] = nodes[column[li]];
      try {
        return silhouette(leaf_vectors, assignment);
      } catch (const PruningError&) {
        return nullptr;
      }
    };

    json report;
    report["schema"] = "hierdg-prune-report/1";
    report["params"] = manifest.config;
    report["nodes"] = json::array();
    const std::set<NodeId> selected(refined.nodes.begin(), refined.nodes.end());
    const std::set<NodeId> candidates(ci.candidates.begin(), ci.candidates.end());
    for (NodeId n = 0; n < h.node_count(); ++n) {
      report["nodes"].push_back({{"id", n},
                                 {"name", h.node(n).name},
                                 {"level", h.node(n).level},
                                 {"score", parts[n].score},
                                 {"cohesion", parts[n].cohesion},
                                 {"coverage", parts[n].coverage},
                                 {"depth", parts[n].depth},
                                 {"candidate", candidates.count(n) > 0},
                                 {"selected", selected.count(n) > 0}});
    }
    report["candidates"] = ci.candidates;
    report["flagged"] = json::array();
    for (const auto& f : ci.flagged)
      report["flagged"].push_back({{"parent", f.parent}, {"children", f.children}});
    report["refined"] = refined.nodes;
    report["silhouette"] = {{"candidates", clustering_sil(ci.candidates)},
                            {"refined", clustering_sil(refined.nodes)}};

    std::ofstream out(g.out / "pruning_report.json");
    out << report.dump(2) << "\n";

    std::cout << "selected " << refined.nodes.size() << " of " << h.node_count()
              << " nodes (leaves: " << h.leaf_count() << ", flagged pairs: " << ci.flagged.size()
              << ")\n";
    for (NodeId n : refined.nodes) {
      std::cout << "  " << std::left << std::setw(16) << h.node(n).name << " S=" << std::fixed
                << std::setprecision(4) << parts[n].score << "  pur=" << parts[n].cohesion
                << "  cov=" << parts[n].coverage << "  dep=" << parts[n].depth << "\n";
    }
    std::cout.unsetf(std::ios::fixed);
    return kExitOk;
  });
}

int cmd_train(const TrainArgs& args, const GlobalOpts& g) {
  return run_guarded([&] {
    TrainCliConfig cfg = load_train_config(args.config);
    if (g.seed) cfg.train.seed = *g.seed;

    const auto hierarchy_path = args.data / "hierarchy.txt";
    const auto dataset_path = args.data / "dataset.jsonl";
    require_file(hierarchy_path, "hierarchy");
    require_file(dataset_path, "dataset");

    const std::filesystem::path ckpt_path =
        args.save_ckpt.empty() ? g.out / "model.ckpt" : args.save_ckpt;
    const bool reuse = !args.load_ckpt.empty();

    RunManifest manifest;
    manifest.command = "train";
    manifest.config = load_json_file(args.config);
    if (g.seed) manifest.config["seed"] = *g.seed;
    manifest.seed = cfg.train.seed;
    manifest.threads = g.threads;
    manifest.inputs = {{args.config.string(), file_content_hash(args.config)},
                       {hierarchy_path.string(), file_content_hash(hierarchy_path)},
                       {dataset_path.string(), file_content_hash(dataset_path)}};
    if (reuse)
      manifest.inputs.push_back({args.load_ckpt.string(), file_content_hash(args.load_ckpt)});
    manifest.outputs = {"m_table.tsv", "probe_report.json", "summary.json"};
    if (!reuse) {
      manifest.outputs.push_back("ledger.jsonl");
      manifest.outputs.push_back(std::filesystem::relative(ckpt_path, g.out).string());
    }
    if (args.dump_embeddings) manifest.outputs.push_back("embeddings.bin");
    write_manifest(g.out, manifest);

    const Hierarchy h = load_hierarchy(hierarchy_path);
    const std::vector<PatientRecord> records = load_dataset(dataset_path, cfg.task);
    SplitOptions sopts;
    sopts.seed = cfg.train.seed;
    sopts.fail_on_empty = cfg.fail_on_empty;
    const SplitResult splits = temporal_split(records, cfg.cutoff_day, cfg.ratios, sopts);

    SiameseModel model;
    json summary;
    summary["schema"] = "hierdg-train-summary/1";

    if (reuse) {
      model = load_model(args.load_ckpt);
    } else {
      TrainResult result = iterative_train(splits, h, cfg.train);
      model = std::move(result.model);

      std::ofstream ledger(g.out / "ledger.jsonl");
      for (const auto& rec : result.ledger) {
        json row{{"epoch", rec.index},       {"phase", rec.phase},
                 {"iteration", rec.iteration}, {"epoch_in_phase", rec.epoch_in_phase},
                 {"split", "train"},         {"loss_p", rec.train_loss_p},
                 {"loss_h", rec.train_loss_h}};
        ledger << row.dump() << "\n";
        if (rec.has_val) {
          json vrow{{"epoch", rec.index},
                    {"phase", rec.phase},
                    {"iteration", rec.iteration},
                    {"epoch_in_phase", rec.epoch_in_phase},
                    {"split", "val"},
                    {"auprc", rec.val_auprc},
                    {"auroc", rec.val_auroc}};
          ledger << vrow.dump() << "\n";
        }
      }
      save_model(ckpt_path, model, cfg.train);
      summary["best_val_auprc"] = result.best_val_auprc;
      summary["best_epoch"] = result.best_ledger_index;
      std::cout << "best val auprc " << std::setprecision(17) << result.best_val_auprc
                << " (epoch " << result.best_ledger_index << ")\n"
                << std::setprecision(6);
    }

    const DomainLookupTable m_table = assign_domains(h, model.vocab, splits.train);
    write_m_table(g.out / "m_table.tsv", h, m_table);

    const ProbeReport report = probe_report(model, h, splits.train);
    std::ofstream probe_out(g.out / "probe_report.json");
    probe_out << probe_report_json(report).dump(2) << "\n";

    if (args.dump_embeddings)
      dump_embedding_table(g.out / "embeddings.bin",
                           pipeline_embedding_table(h, model, cfg.train.lca_threshold));

    if (!splits.test.empty()) {
      const PredictionBatch test_batch = predict(model, h, splits.test);
      const auto rows = task_metrics(cfg.task.kind, test_batch);
      summary["test"] = json::object();
      for (const auto& r : rows) summary["test"][r.name] = r.value;
      std::cout << "test split (" << splits.test.size() << " patients):\n";
      print_metric_table(rows);
    }
    std::ofstream summary_out(g.out / "summary.json");
    summary_out << summary.dump(2) << "\n";
    return kExitOk;
  });
}

namespace {

PredictionBatch load_eval_batch(const std::filesystem::path& pred,
                                const std::filesystem::path& gold, const TaskSpec& task) {
  std::ifstream in(pred);
  if (!in) throw UsageError("cannot open " + pred.string());
  std::map<std::string, std::vector<double>> by_id;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw UsageError(pred.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    const std::string id = j.at("id").get<std::string>();
    if (!by_id.emplace(id, j.at("scores").get<std::vector<double>>()).second)
      throw UsageError(pred.string() + ": duplicate prediction for " + id);
  }
  if (by_id.empty()) throw UsageError(pred.string() + ": no predictions");

  const std::vector<PatientRecord> records = load_dataset(gold, task);
  if (records.size() != by_id.size())
    throw UsageError("prediction/gold size mismatch: " + std::to_string(by_id.size()) + " vs " +
                     std::to_string(records.size()));

  PredictionBatch batch;
  for (const auto& rec : records) {
    auto it = by_id.find(rec.id);
    if (it == by_id.end()) throw UsageError("no prediction for patient " + rec.id);
    if (it->second.size() != task.d)
      throw UsageError("prediction for " + rec.id + " has " +
                       std::to_string(it->second.size()) + " scores, task d=" +
                       std::to_string(task.d));
    batch.scores.push_back(it->second);
    std::vector<uint8_t> row(task.d, 0);
    for (std::size_t idx : rec.label) row[idx] = 1;
    batch.targets.push_back(std::move(row));
  }
  batch.validate();
  return batch;
}

struct BenchSeedRow {
  uint64_t seed = 0;
  double base = 0.0, udon = 0.0, oracle = 0.0;
};

double flat_auroc(const PredictionBatch& batch) {
  return auroc(batch.flat_scores(), batch.flat_targets());
}

BenchSeedRow run_bench_seed(SynthConfig synth_cfg, TrainCliConfig cfg, uint64_t seed) {
  synth_cfg.seed = seed;
  cfg.train.seed = seed;
  const Hierarchy h = generate_hierarchy(synth_cfg);
  const Cohort cohort = generate_cohorts(synth_cfg, h);
  SplitOptions sopts;
  sopts.seed = seed;
  sopts.fail_on_empty = true;
  const SplitResult splits =
      temporal_split(cohort.records, synth_cfg.cutoff_day, cfg.ratios, sopts);

  BenchSeedRow row;
  row.seed = seed;

  TrainResult udon = iterative_train(splits, h, cfg.train);
  row.udon = flat_auroc(predict(udon.model, h, splits.test));

  TrainResult base = train_backbone_only(splits.train, splits.val, h, cfg.train);
  row.base = flat_auroc(predict(base.model, h, splits.test));

  TrainResult oracle = train_backbone_only(splits.test, splits.test, h, cfg.train);
  row.oracle = flat_auroc(predict(oracle.model, h, splits.test));
  return row;
}

}  // namespace

int cmd_eval(const EvalArgs& args, const GlobalOpts& g) {
  return run_guarded([&] {
    if (args.benchmark) {
      const BenchConfig bench = load_bench_config(args.config);
      const SynthConfig synth_cfg = load_synth_config(bench.synth_config);
      const TrainCliConfig train_cfg = load_train_config(bench.train_config);

      RunManifest manifest;
      manifest.command = "eval";
      manifest.config = load_json_file(args.config);
      manifest.threads = g.threads;
      manifest.inputs = {{args.config.string(), file_content_hash(args.config)},
                         {bench.synth_config.string(), file_content_hash(bench.synth_config)},
                         {bench.train_config.string(), file_content_hash(bench.train_config)}};
      manifest.outputs = {"benchmark_report.json"};
      write_manifest(g.out, manifest);

      std::vector<BenchSeedRow> rows;
      std::cout << std::left << std::setw(8) << "seed" << std::setw(10) << "base"
                << std::setw(10) << "udon" << std::setw(10) << "oracle" << "\n";
      for (uint64_t seed : bench.seeds) {
        rows.push_back(run_bench_seed(synth_cfg, train_cfg, seed));
        const auto& r = rows.back();
        std::cout << std::left << std::setw(8) << r.seed << std::fixed << std::setprecision(4)
                  << std::setw(10) << r.base << std::setw(10) << r.udon << std::setw(10)
                  << r.oracle << "\n";
        std::cout.unsetf(std::ios::fixed);
      }
      double mb = 0.0, mu = 0.0, mo = 0.0;
      for (const auto& r : rows) {
        mb += r.base;
        mu += r.udon;
        mo += r.oracle;
      }
      const double n = static_cast<double>(rows.size());
      mb /= n;
      mu /= n;
      mo /= n;
      std::cout << std::left << std::setw(8) << "mean" << std::fixed << std::setprecision(4)
                << std::setw(10) << mb << std::setw(10) << mu << std::setw(10) << mo << "\n";
      std::cout.unsetf(std::ios::fixed);

      json report;
      report["schema"] = "hierdg-benchmark-report/1";
      report["seeds"] = json::array();
      for (const auto& r : rows)
        report["seeds"].push_back(
            {{"seed", r.seed}, {"base", r.base}, {"udon", r.udon}, {"oracle", r.oracle}});
      report["mean"] = {{"base", mb}, {"udon", mu}, {"oracle", mo}};
      std::ofstream out(g.out / "benchmark_report.json");
      out << report.dump(2) << "\n";
      return kExitOk;
    }

    require_file(args.pred, "--pred");
    require_file(args.gold, "--gold");
    if (args.task.empty()) throw UsageError("--task is required");
    TaskSpec task;
    task.kind = parse_task_kind(args.task);
    {
      // d is read off the first prediction row so binary and multi-label
      // files both work without extra flags.
      std::ifstream peek(args.pred);
      std::string line;
      while (std::getline(peek, line) && line.empty()) {
      }
      if (line.empty()) throw UsageError(args.pred.string() + ": no predictions");
      task.d = json::parse(line).at("scores").get<std::vector<double>>().size();
    }
    task.validate();
    const PredictionBatch batch = load_eval_batch(args.pred, args.gold, task);
    print_metric_table(task_metrics(task.kind, batch));
    return kExitOk;
  });
}

int cmd_probe(const ProbeArgs& args, const GlobalOpts& g) {
  return run_guarded([&] {
    require_file(args.ckpt, "--ckpt");
    const auto hierarchy_path = args.data / "hierarchy.txt";
    const auto dataset_path = args.data / "dataset.jsonl";
    require_file(hierarchy_path, "hierarchy");
    require_file(dataset_path, "dataset");

    RunManifest manifest;
    manifest.command = "probe";
    manifest.config = {{"domain_recovery_report", args.domain_recovery}};
    manifest.threads = g.threads;
    manifest.inputs = {{args.ckpt.string(), file_content_hash(args.ckpt)},
                       {hierarchy_path.string(), file_content_hash(hierarchy_path)},
                       {dataset_path.string(), file_content_hash(dataset_path)}};
    manifest.outputs = {"probe_report.json"};
    write_manifest(g.out, manifest);

    const SiameseModel model = load_model(args.ckpt);
    const Hierarchy h = load_hierarchy(hierarchy_path);
    TaskSpec task;
    task.d = model.label_dim;
    if (task.d > 1) task.kind = TaskKind::diagnosis;
    const std::vector<PatientRecord> records = load_dataset(dataset_path, task);

    const ProbeReport report = probe_report(model, h, records);
    json out_json = probe_report_json(report);
    print_probe_rows(report);

    if (args.domain_recovery) {
      const auto sidecar_path = args.data / "domains.tsv";
      require_file(sidecar_path, "hidden-domain sidecar");
      const auto sidecar = read_domain_sidecar(sidecar_path);
      std::map<std::string, std::size_t> hidden_by_id(sidecar.begin(), sidecar.end());
      const DomainLookupTable table = assign_domains(h, model.vocab, records);
      const std::vector<std::size_t> discovered = domain_ids(table);
      std::vector<std::size_t> hidden(records.size());
      for (std::size_t i = 0; i < records.size(); ++i) {
        auto it = hidden_by_id.find(records[i].id);
        if (it == hidden_by_id.end())
          throw UsageError("sidecar has no domain for patient " + records[i].id);
        hidden[i] = it->second;
      }
      const double ami = adjusted_mutual_information(discovered, hidden);
      std::set<std::size_t> groups(discovered.begin(), discovered.end());
      out_json["domain_recovery"] = {{"ami", ami},
                                     {"n_discovered_groups", groups.size()},
                                     {"n_hidden",
                                      std::set<std::size_t>(hidden.begin(), hidden.end()).size()}};
      std::cout << "domain recovery AMI " << std::fixed << std::setprecision(4) << ami << " ("
                << groups.size() << " discovered groups)\n";
      std::cout.unsetf(std::ios::fixed);
    }

    std::ofstream out(g.out / "probe_report.json");
    out << out_json.dump(2) << "\n";
    return kExitOk;
  });
}

}  // namespace hierdg::cli
