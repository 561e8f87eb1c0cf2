#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hierdg/checkpoint.hpp"
#include "hierdg/metrics.hpp"
#include "hierdg/neural.hpp"
#include "hierdg/ontology.hpp"
#include "hierdg/pruning.hpp"
#include "hierdg/records.hpp"

namespace hierdg {

struct TrainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when a loss or parameter turns non-finite mid-training.
struct NumericAbort : TrainError {
  using TrainError::TrainError;
};

struct TrainConfig {
  int iterations = 3;
  int total_epochs = 100;
  int backbone_warmup_epochs = 40;
  int cotrain_epochs_per_iter = 20;
  int pretrain_epochs = 30;  // per iteration, outside the total_epochs budget
  double lr_backbone = 1e-4;
  double lr_domain = 5e-5;
  int batch_size = 32;
  double lambda_kl = 1.0;
  ScoreParams score{};
  uint64_t seed = 0;
  std::size_t label_dim = 1;

  std::size_t hidden_dim = 64;
  std::vector<std::size_t> domain_hidden{64, 32};
  double dropout = 0.2;
  double lca_threshold = 0.9;
  int beam_width = 8;
  bool joint_backprop = false;  // let the invariant-path loss reach the backbone
  bool use_positions = true;
  double embed_init_scale = 1.0;

  void validate() const;
};

// Two prediction pathways share the patient embedding p: the backbone one
// decodes p directly, the domain one decodes the component of p orthogonal
// to the encoded domain signal r.
struct SiameseModel {
  BackboneEncoder backbone;
  DenseLayer decoder_p;
  MLP domain_encoder;  // input width tracks the pruned vocabulary
  DenseLayer decoder_h;
  PrunedVocabulary vocab;
  std::size_t label_dim = 1;
  bool has_domain_path = false;

  std::vector<ParamBlock> backbone_path_params();
  std::vector<ParamBlock> domain_path_params();
  std::vector<ParamBlock> all_params();
};

struct Projection {
  std::vector<double> h;
  std::vector<double> r_parallel;
  bool degenerate = false;  // ||r|| below 1e-12: h = p, nothing removed
};

Projection orthogonal_project(const std::vector<double>& p, const std::vector<double>& r);

// Gradient of a loss on h with respect to r (p held constant), given
// upstream = dL/dh. Zero when the projection was degenerate.
std::vector<double> projection_backward_r(const std::vector<double>& p,
                                          const std::vector<double>& r,
                                          const std::vector<double>& upstream);
// dL/dp = (I - r r^T / ||r||^2) dL/dh, for joint backpropagation.
std::vector<double> projection_backward_p(const std::vector<double>& r,
                                          const std::vector<double>& upstream);

struct PathOutputs {
  std::vector<double> p, r, h, r_parallel;
  std::vector<double> logits_p, logits_h;
  std::vector<double> y_p, y_h;
  bool r_degenerate = false;
};

// Evaluation-mode pass through both pathways for one patient.
PathOutputs forward_paths(const SiameseModel& model, const PatientRecord& patient,
                          const std::vector<uint8_t>& m_row);

struct EpochRecord {
  int index = 0;
  std::string phase;  // warmup | pretrain | cotrain
  int iteration = 0;  // 0 during warmup
  int epoch_in_phase = 0;
  double train_loss_p = 0.0;
  double train_loss_h = 0.0;
  double val_auprc = 0.0;
  double val_auroc = 0.0;
  bool has_val = false;
};

struct TrainResult {
  SiameseModel model;  // best-validation checkpoint
  DomainLookupTable train_table;
  std::vector<EpochRecord> ledger;
  double best_val_auprc = 0.0;
  int best_ledger_index = -1;
};

// Warm up the backbone on BCE, then per iteration: rebuild the pruned
// vocabulary from current backbone embeddings, pretrain the domain encoder
// toward per-domain mean embeddings, and co-train both pathways with mutual
// KL coupling. The returned model is the best-validation snapshot scored on
// the domain-pathway predictions.
TrainResult iterative_train(const SplitResult& splits, const Hierarchy& h,
                            const TrainConfig& cfg);

// Backbone + decoder alone for the full epoch budget; selection on the
// backbone-pathway predictions. Used for the baseline and ceiling runs.
TrainResult train_backbone_only(const std::vector<PatientRecord>& train,
                                const std::vector<PatientRecord>& val, const Hierarchy& h,
                                const TrainConfig& cfg);

// Scores for the model's preferred pathway (domain pathway when present).
PredictionBatch predict(const SiameseModel& model, const Hierarchy& h,
                        const std::vector<PatientRecord>& patients);

std::vector<uint8_t> label_row(const PatientRecord& p, std::size_t d);

void save_model(const std::filesystem::path& path, const SiameseModel& model,
                const TrainConfig& cfg);
SiameseModel load_model(const std::filesystem::path& path);

}  // namespace hierdg
