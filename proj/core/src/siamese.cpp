#include "hierdg/siamese.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "hierdg/embedding_flow.hpp"

namespace hierdg {

using nlohmann::json;

void TrainConfig::validate() const {
  if (iterations < 1) throw TrainError("iterations must be >= 1");
  if (backbone_warmup_epochs < 0 || cotrain_epochs_per_iter < 0 || pretrain_epochs < 0)
    throw TrainError("epoch counts must be non-negative");
  if (backbone_warmup_epochs + iterations * cotrain_epochs_per_iter != total_epochs)
    throw TrainError("total_epochs must equal warmup + iterations * cotrain epochs");
  if (batch_size < 1) throw TrainError("batch_size must be >= 1");
  if (lr_backbone <= 0.0 || lr_domain <= 0.0) throw TrainError("learning rates must be positive");
  if (lambda_kl < 0.0) throw TrainError("lambda must be non-negative");
  if (hidden_dim < 2) throw TrainError("hidden_dim must be >= 2");
  if (dropout < 0.0 || dropout >= 1.0) throw TrainError("dropout must lie in [0, 1)");
  if (label_dim < 1) throw TrainError("label_dim must be >= 1");
  if (beam_width < 1) throw TrainError("beam_width must be >= 1");
}

std::vector<ParamBlock> SiameseModel::backbone_path_params() {
  std::vector<ParamBlock> out;
  backbone.collect_params(out, "backbone");
  decoder_p.collect_params(out, "decoder_p");
  return out;
}

std::vector<ParamBlock> SiameseModel::domain_path_params() {
  std::vector<ParamBlock> out;
  domain_encoder.collect_params(out, "domain_encoder");
  decoder_h.collect_params(out, "decoder_h");
  return out;
}

std::vector<ParamBlock> SiameseModel::all_params() {
  std::vector<ParamBlock> out = backbone_path_params();
  if (has_domain_path) {
    auto dom = domain_path_params();
    out.insert(out.end(), dom.begin(), dom.end());
  }
  return out;
}

Projection orthogonal_project(const std::vector<double>& p, const std::vector<double>& r) {
  if (p.size() != r.size()) throw TrainError("projection: dimension mismatch");
  double s = 0.0, n = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    s += p[i] * r[i];
    n += r[i] * r[i];
  }
  Projection out;
  out.h.resize(p.size());
  out.r_parallel.resize(p.size());
  if (std::sqrt(n) < 1e-12) {
    out.degenerate = true;
    out.h = p;
    std::fill(out.r_parallel.begin(), out.r_parallel.end(), 0.0);
    return out;
  }
  const double c = s / n;
  for (std::size_t i = 0; i < p.size(); ++i) {
    out.r_parallel[i] = c * r[i];
    out.h[i] = p[i] - out.r_parallel[i];
  }
  return out;
}

std::vector<double> projection_backward_r(const std::vector<double>& p,
                                          const std::vector<double>& r,
                                          const std::vector<double>& upstream) {
  double s = 0.0, n = 0.0, ur = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    s += p[i] * r[i];
    n += r[i] * r[i];
    ur += upstream[i] * r[i];
  }
  std::vector<double> dr(r.size(), 0.0);
  if (std::sqrt(n) < 1e-12) return dr;
  for (std::size_t i = 0; i < r.size(); ++i)
    dr[i] = -(upstream[i] * s / n + p[i] * ur / n - 2.0 * s * ur * r[i] / (n * n));
  return dr;
}

std::vector<double> projection_backward_p(const std::vector<double>& r,
                                          const std::vector<double>& upstream) {
  double n = 0.0, ur = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    n += r[i] * r[i];
    ur += upstream[i] * r[i];
  }
  std::vector<double> dp = upstream;
  if (std::sqrt(n) < 1e-12) return dp;
  for (std::size_t i = 0; i < r.size(); ++i) dp[i] -= ur * r[i] / n;
  return dp;
}

PathOutputs forward_paths(const SiameseModel& model, const PatientRecord& patient,
                          const std::vector<uint8_t>& m_row) {
  PathOutputs out;
  out.p = model.backbone.encode(patient, patient.visits.size());
  out.logits_p = model.decoder_p.forward(out.p);
  out.y_p = sigmoid_vec(out.logits_p);
  if (!model.has_domain_path) return out;
  if (m_row.size() != model.domain_encoder.in_dim())
    throw TrainError("domain row width " + std::to_string(m_row.size()) +
                     " does not match encoder input " +
                     std::to_string(model.domain_encoder.in_dim()));
  std::vector<double> m(m_row.begin(), m_row.end());
  out.r = model.domain_encoder.forward(m);
  Projection proj = orthogonal_project(out.p, out.r);
  out.h = std::move(proj.h);
  out.r_parallel = std::move(proj.r_parallel);
  out.r_degenerate = proj.degenerate;
  out.logits_h = model.decoder_h.forward(out.h);
  out.y_h = sigmoid_vec(out.logits_h);
  return out;
}

std::vector<uint8_t> label_row(const PatientRecord& p, std::size_t d) {
  std::vector<uint8_t> row(d, 0);
  for (std::size_t idx : p.label) {
    if (idx >= d) throw TrainError("label index out of range for patient " + p.id);
    row[idx] = 1;
  }
  return row;
}

namespace {

std::array<std::vector<std::string>, kFeatureKeys> collect_vocabs(
    const Hierarchy& h, const std::vector<const std::vector<PatientRecord>*>& sets) {
  std::array<std::vector<std::string>, kFeatureKeys> vocabs;
  for (const auto& [code, leaf] : h.leaf_map()) vocabs[0].push_back(code);
  for (std::size_t k = 1; k < kFeatureKeys; ++k) {
    std::set<std::string> uniq;
    for (const auto* set : sets)
      for (const auto& p : *set)
        for (const auto& v : p.visits)
          for (const auto& code : v.codes[k]) uniq.insert(code);
    vocabs[k].assign(uniq.begin(), uniq.end());
  }
  return vocabs;
}

struct Batcher {
  std::vector<std::size_t> order;
  std::size_t batch_size;

  Batcher(std::size_t n, std::size_t bs, CounterRng rng) : batch_size(bs) {
    order.resize(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
  }
  std::size_t batches() const { return (order.size() + batch_size - 1) / batch_size; }
  std::pair<std::size_t, std::size_t> range(std::size_t b) const {
    const std::size_t lo = b * batch_size;
    return {lo, std::min(lo + batch_size, order.size())};
  }
};

struct ValScores {
  double auprc = 0.0;
  double auroc = 0.0;
  bool ok = false;
};

ValScores scores_of(const PredictionBatch& batch, const char* context) {
  ValScores v;
  try {
    v.auprc = auprc(batch.flat_scores(), batch.flat_targets());
    v.auroc = auroc(batch.flat_scores(), batch.flat_targets());
    v.ok = true;
  } catch (const MetricError&) {
    (void)context;
    v.ok = false;
  }
  return v;
}

PredictionBatch predict_path(const SiameseModel& model, const Hierarchy& h,
                             const std::vector<PatientRecord>& patients, bool use_domain_path) {
  PredictionBatch batch;
  DomainLookupTable table;
  if (use_domain_path) table = assign_domains(h, model.vocab, patients);
  for (std::size_t i = 0; i < patients.size(); ++i) {
    const std::vector<uint8_t> m_row =
        use_domain_path ? table.rows[i] : std::vector<uint8_t>{};
    std::vector<double> p = model.backbone.encode(patients[i], patients[i].visits.size());
    std::vector<double> logits;
    if (use_domain_path) {
      std::vector<double> m(m_row.begin(), m_row.end());
      std::vector<double> r = model.domain_encoder.forward(m);
      Projection proj = orthogonal_project(p, r);
      logits = model.decoder_h.forward(proj.h);
    } else {
      logits = model.decoder_p.forward(p);
    }
    batch.scores.push_back(sigmoid_vec(logits));
    batch.targets.push_back(label_row(patients[i], model.label_dim));
  }
  return batch;
}

double run_backbone_epoch(SiameseModel& model, const std::vector<PatientRecord>& train,
                          Adam& opt, const TrainConfig& cfg, CounterRng shuffle_rng) {
  Batcher batcher(train.size(), static_cast<std::size_t>(cfg.batch_size), shuffle_rng);
  auto params = model.backbone_path_params();
  double epoch_loss = 0.0;
  for (std::size_t b = 0; b < batcher.batches(); ++b) {
    const auto [lo, hi] = batcher.range(b);
    const double inv = 1.0 / static_cast<double>(hi - lo);
    zero_grads(params);
    for (std::size_t s = lo; s < hi; ++s) {
      const PatientRecord& pat = train[batcher.order[s]];
      EncodeTrace trace;
      std::vector<double> p = model.backbone.encode(pat, pat.visits.size(), &trace);
      std::vector<double> logits = model.decoder_p.forward(p);
      LossResult bce = loss_bce(logits, label_row(pat, model.label_dim));
      epoch_loss += bce.value * inv / static_cast<double>(batcher.batches());
      for (auto& g : bce.grad) g *= inv;
      std::vector<double> dp = model.decoder_p.backward(p, bce.grad);
      model.backbone.backward(trace, dp);
    }
    opt.step(params);
  }
  return epoch_loss;
}

struct VocabUpdate {
  PrunedVocabulary vocab;
  DomainLookupTable table;
};

VocabUpdate update_vocabulary(const SiameseModel& model, const Hierarchy& h,
                              const std::vector<PatientRecord>& train, const TrainConfig& cfg) {
  EmbeddingTable table =
      init_leaf_embeddings(h, model.backbone.condition_embedding_map(), cfg.hidden_dim);
  table = upward_average(h, table);
  table = lca_rectify(h, table, cfg.lca_threshold);
  std::vector<double> scores(h.node_count());
  for (NodeId n = 0; n < h.node_count(); ++n) scores[n] = node_score(h, table, n, cfg.score);
  CandidateInit ci = candidate_init(h, scores);
  VocabUpdate out;
  out.vocab = beam_refine(h, table, ci.candidates, ci.flagged, cfg.beam_width);
  out.table = assign_domains(h, out.vocab, train);
  return out;
}

double pretrain_epoch(SiameseModel& model, const DomainLookupTable& table,
                      const std::vector<std::vector<double>>& p_cache,
                      const std::vector<std::vector<double>>& targets, Adam& opt,
                      const TrainConfig& cfg, CounterRng shuffle_rng, CounterRng dropout_rng) {
  Batcher batcher(p_cache.size(), static_cast<std::size_t>(cfg.batch_size), shuffle_rng);
  std::vector<ParamBlock> params;
  model.domain_encoder.collect_params(params, "domain_encoder");
  double epoch_loss = 0.0;
  for (std::size_t b = 0; b < batcher.batches(); ++b) {
    const auto [lo, hi] = batcher.range(b);
    const std::size_t bs = hi - lo;
    const double inv = 1.0 / static_cast<double>(bs);
    zero_grads(params);
    Matrix R(bs, model.domain_encoder.out_dim());
    Matrix P(bs, model.domain_encoder.out_dim());
    std::vector<MLPTrace> traces(bs);
    std::vector<LossResult> mses(bs);
    double batch_loss = 0.0;
    for (std::size_t s = 0; s < bs; ++s) {
      const std::size_t idx = batcher.order[lo + s];
      std::vector<double> m(table.rows[idx].begin(), table.rows[idx].end());
      std::vector<double> r =
          model.domain_encoder.forward(m, true, &dropout_rng, &traces[s]);
      for (std::size_t j = 0; j < r.size(); ++j) {
        R(s, j) = r[j];
        P(s, j) = p_cache[idx][j];
      }
      mses[s] = loss_mse(r, targets[idx]);
      batch_loss += mses[s].value * inv;
    }
    MmdResult mmd = loss_mmd(R, P);
    batch_loss += mmd.value;
    for (std::size_t s = 0; s < bs; ++s) {
      std::vector<double> dr(model.domain_encoder.out_dim());
      for (std::size_t j = 0; j < dr.size(); ++j)
        dr[j] = mses[s].grad[j] * inv + mmd.grad(s, j);
      model.domain_encoder.backward(traces[s], dr);
    }
    opt.step(params);
    epoch_loss += batch_loss / static_cast<double>(batcher.batches());
  }
  return epoch_loss;
}

struct CotrainLosses {
  double loss_p = 0.0;
  double loss_h = 0.0;
};

CotrainLosses cotrain_epoch(SiameseModel& model, const std::vector<PatientRecord>& train,
                            const DomainLookupTable& table, Adam& opt_backbone, Adam& opt_domain,
                            const TrainConfig& cfg, CounterRng shuffle_rng,
                            CounterRng dropout_rng) {
  Batcher batcher(train.size(), static_cast<std::size_t>(cfg.batch_size), shuffle_rng);
  auto backbone_params = model.backbone_path_params();
  auto domain_params = model.domain_path_params();
  CotrainLosses losses;
  const double inv_batches = 1.0 / static_cast<double>(batcher.batches());
  for (std::size_t b = 0; b < batcher.batches(); ++b) {
    const auto [lo, hi] = batcher.range(b);
    const double inv = 1.0 / static_cast<double>(hi - lo);
    zero_grads(backbone_params);
    zero_grads(domain_params);
    for (std::size_t s = lo; s < hi; ++s) {
      const std::size_t idx = batcher.order[s];
      const PatientRecord& pat = train[idx];
      const std::vector<uint8_t> y = label_row(pat, model.label_dim);

      EncodeTrace enc_trace;
      std::vector<double> p = model.backbone.encode(pat, pat.visits.size(), &enc_trace);
      std::vector<double> logits_p = model.decoder_p.forward(p);
      std::vector<double> y_p = sigmoid_vec(logits_p);

      std::vector<double> m(table.rows[idx].begin(), table.rows[idx].end());
      MLPTrace dom_trace;
      std::vector<double> r = model.domain_encoder.forward(m, true, &dropout_rng, &dom_trace);
      Projection proj = orthogonal_project(p, r);
      std::vector<double> logits_h = model.decoder_h.forward(proj.h);
      std::vector<double> y_h = sigmoid_vec(logits_h);

      std::vector<double> y_tilde(y_p.size());
      for (std::size_t j = 0; j < y_p.size(); ++j) y_tilde[j] = 0.5 * (y_p[j] + y_h[j]);

      LossResult bce_p = loss_bce(logits_p, y);
      LossResult kl_p = loss_kl(y_p, y_tilde);
      losses.loss_p += (bce_p.value + cfg.lambda_kl * kl_p.value) * inv * inv_batches;
      std::vector<double> dz_p(logits_p.size());
      for (std::size_t j = 0; j < dz_p.size(); ++j)
        dz_p[j] = (bce_p.grad[j] + cfg.lambda_kl * kl_p.grad[j]) * inv;
      std::vector<double> dp = model.decoder_p.backward(p, dz_p);

      LossResult bce_h = loss_bce(logits_h, y);
      LossResult kl_h = loss_kl(y_h, y_tilde);
      losses.loss_h += (bce_h.value + cfg.lambda_kl * kl_h.value) * inv * inv_batches;
      std::vector<double> dz_h(logits_h.size());
      for (std::size_t j = 0; j < dz_h.size(); ++j)
        dz_h[j] = (bce_h.grad[j] + cfg.lambda_kl * kl_h.grad[j]) * inv;
      std::vector<double> dh = model.decoder_h.backward(proj.h, dz_h);
      std::vector<double> dr = projection_backward_r(p, r, dh);
      model.domain_encoder.backward(dom_trace, dr);

      if (cfg.joint_backprop) {
        std::vector<double> dp_h = projection_backward_p(r, dh);
        for (std::size_t j = 0; j < dp.size(); ++j) dp[j] += dp_h[j];
      }
      model.backbone.backward(enc_trace, dp);
    }
    opt_backbone.step(backbone_params);
    opt_domain.step(domain_params);
  }
  return losses;
}

void check_finite(double v, const std::string& where) {
  if (!std::isfinite(v))
    throw NumericAbort("non-finite loss during " + where + "; aborting");
}

}  // namespace

TrainResult iterative_train(const SplitResult& splits, const Hierarchy& h,
                            const TrainConfig& cfg) {
  cfg.validate();
  if (splits.train.empty()) throw TrainError("empty training set");

  CounterRng root(cfg.seed, {hash_name("train")});
  SiameseModel model;
  model.label_dim = cfg.label_dim;
  model.backbone.use_positions = cfg.use_positions;
  model.backbone.init(collect_vocabs(h, {&splits.train, &splits.val, &splits.test}),
                      cfg.hidden_dim, root.split("backbone_init"), cfg.embed_init_scale);
  model.decoder_p.init(cfg.label_dim, model.backbone.out_dim(), root.split("decoder_p_init"));

  Adam opt_backbone(model.backbone_path_params(), AdamConfig{.lr = cfg.lr_backbone});

  TrainResult result;
  SiameseModel best;
  bool have_best = false;
  double best_auprc = -1.0;
  int ledger_index = 0;

  for (int e = 0; e < cfg.backbone_warmup_epochs; ++e) {
    const double loss =
        run_backbone_epoch(model, splits.train, opt_backbone, cfg, root.split("shuffle").split(e));
    check_finite(loss, "warmup epoch " + std::to_string(e));
    EpochRecord rec;
    rec.index = ledger_index++;
    rec.phase = "warmup";
    rec.epoch_in_phase = e;
    rec.train_loss_p = loss;
    if (!splits.val.empty()) {
      ValScores v = scores_of(predict_path(model, h, splits.val, false), "warmup val");
      rec.has_val = v.ok;
      rec.val_auprc = v.auprc;
      rec.val_auroc = v.auroc;
    }
    result.ledger.push_back(rec);
  }

  DomainLookupTable train_table;
  for (int iter = 1; iter <= cfg.iterations; ++iter) {
    VocabUpdate vu = update_vocabulary(model, h, splits.train, cfg);
    model.vocab = vu.vocab;
    train_table = std::move(vu.table);

    std::vector<std::size_t> widths{model.vocab.nodes.size()};
    widths.insert(widths.end(), cfg.domain_hidden.begin(), cfg.domain_hidden.end());
    widths.push_back(model.backbone.out_dim());
    model.domain_encoder.init(widths, cfg.dropout, root.split("domain_init").split(iter));
    if (!model.has_domain_path) {
      model.decoder_h.init(cfg.label_dim, model.backbone.out_dim(), root.split("decoder_h_init"));
      model.has_domain_path = true;
    }

    // Backbone is frozen through pretraining, so p and the per-domain means
    // are fixed for the whole phase.
    std::vector<std::vector<double>> p_cache(splits.train.size());
    for (std::size_t i = 0; i < splits.train.size(); ++i)
      p_cache[i] = model.backbone.encode(splits.train[i], splits.train[i].visits.size());
    const std::vector<std::size_t> ids = domain_ids(train_table);
    const std::size_t n_groups = ids.empty() ? 0 : *std::max_element(ids.begin(), ids.end()) + 1;
    std::vector<std::vector<double>> group_mean(
        n_groups, std::vector<double>(model.backbone.out_dim(), 0.0));
    std::vector<std::size_t> group_size(n_groups, 0);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      ++group_size[ids[i]];
      for (std::size_t j = 0; j < p_cache[i].size(); ++j) group_mean[ids[i]][j] += p_cache[i][j];
    }
    for (std::size_t g = 0; g < n_groups; ++g)
      for (auto& v : group_mean[g]) v /= static_cast<double>(group_size[g]);
    std::vector<std::vector<double>> targets(splits.train.size());
    for (std::size_t i = 0; i < ids.size(); ++i) targets[i] = group_mean[ids[i]];

    std::vector<ParamBlock> enc_params;
    model.domain_encoder.collect_params(enc_params, "domain_encoder");
    Adam opt_pretrain(enc_params, AdamConfig{.lr = cfg.lr_domain});
    for (int e = 0; e < cfg.pretrain_epochs; ++e) {
      const double loss = pretrain_epoch(model, train_table, p_cache, targets, opt_pretrain, cfg,
                                         root.split("pretrain_shuffle").split(iter).split(e),
                                         root.split("pretrain_dropout").split(iter).split(e));
      check_finite(loss, "pretrain epoch " + std::to_string(e));
      EpochRecord rec;
      rec.index = ledger_index++;
      rec.phase = "pretrain";
      rec.iteration = iter;
      rec.epoch_in_phase = e;
      rec.train_loss_h = loss;
      result.ledger.push_back(rec);
    }

    Adam opt_domain(model.domain_path_params(), AdamConfig{.lr = cfg.lr_domain});
    for (int e = 0; e < cfg.cotrain_epochs_per_iter; ++e) {
      CotrainLosses losses = cotrain_epoch(model, splits.train, train_table, opt_backbone,
                                           opt_domain, cfg,
                                           root.split("cotrain_shuffle").split(iter).split(e),
                                           root.split("cotrain_dropout").split(iter).split(e));
      check_finite(losses.loss_p, "cotrain epoch " + std::to_string(e));
      check_finite(losses.loss_h, "cotrain epoch " + std::to_string(e));
      EpochRecord rec;
      rec.index = ledger_index++;
      rec.phase = "cotrain";
      rec.iteration = iter;
      rec.epoch_in_phase = e;
      rec.train_loss_p = losses.loss_p;
      rec.train_loss_h = losses.loss_h;
      if (!splits.val.empty()) {
        ValScores v = scores_of(predict_path(model, h, splits.val, true), "cotrain val");
        rec.has_val = v.ok;
        rec.val_auprc = v.auprc;
        rec.val_auroc = v.auroc;
        if (v.ok && v.auprc > best_auprc) {
          best_auprc = v.auprc;
          best = model;
          have_best = true;
          result.best_ledger_index = rec.index;
        }
      }
      result.ledger.push_back(rec);
    }
  }

  result.model = have_best ? std::move(best) : std::move(model);
  result.best_val_auprc = have_best ? best_auprc : 0.0;
  result.train_table = assign_domains(h, result.model.vocab, splits.train);
  return result;
}

TrainResult train_backbone_only(const std::vector<PatientRecord>& train,
                                const std::vector<PatientRecord>& val, const Hierarchy& h,
                                const TrainConfig& cfg) {
  cfg.validate();
  if (train.empty()) throw TrainError("empty training set");

  CounterRng root(cfg.seed, {hash_name("train")});
  SiameseModel model;
  model.label_dim = cfg.label_dim;
  model.backbone.use_positions = cfg.use_positions;
  model.backbone.init(collect_vocabs(h, {&train, &val}), cfg.hidden_dim,
                      root.split("backbone_init"), cfg.embed_init_scale);
  model.decoder_p.init(cfg.label_dim, model.backbone.out_dim(), root.split("decoder_p_init"));

  Adam opt(model.backbone_path_params(), AdamConfig{.lr = cfg.lr_backbone});

  TrainResult result;
  SiameseModel best;
  bool have_best = false;
  double best_auprc = -1.0;

  for (int e = 0; e < cfg.total_epochs; ++e) {
    const double loss = run_backbone_epoch(model, train, opt, cfg, root.split("shuffle").split(e));
    check_finite(loss, "epoch " + std::to_string(e));
    EpochRecord rec;
    rec.index = e;
    rec.phase = "warmup";
    rec.epoch_in_phase = e;
    rec.train_loss_p = loss;
    if (!val.empty()) {
      ValScores v = scores_of(predict_path(model, h, val, false), "val");
      rec.has_val = v.ok;
      rec.val_auprc = v.auprc;
      rec.val_auroc = v.auroc;
      if (v.ok && v.auprc > best_auprc) {
        best_auprc = v.auprc;
        best = model;
        have_best = true;
        result.best_ledger_index = e;
      }
    }
    result.ledger.push_back(rec);
  }

  result.model = have_best ? std::move(best) : std::move(model);
  result.best_val_auprc = have_best ? best_auprc : 0.0;
  return result;
}

PredictionBatch predict(const SiameseModel& model, const Hierarchy& h,
                        const std::vector<PatientRecord>& patients) {
  return predict_path(model, h, patients, model.has_domain_path);
}

void save_model(const std::filesystem::path& path, const SiameseModel& model,
                const TrainConfig& cfg) {
  json meta;
  meta["schema"] = "hierdg-model/1";
  meta["dim"] = model.backbone.dim;
  meta["label_dim"] = model.label_dim;
  meta["use_positions"] = model.backbone.use_positions;
  meta["dropout"] = model.domain_encoder.layers.empty() ? cfg.dropout
                                                        : model.domain_encoder.dropout_rate;
  meta["domain_hidden"] = cfg.domain_hidden;
  meta["has_domain_path"] = model.has_domain_path;
  meta["vocab"] = model.backbone.vocab;
  meta["pruned_nodes"] = model.vocab.nodes;

  SiameseModel& mutable_model = const_cast<SiameseModel&>(model);
  Checkpoint ckpt = snapshot_params(mutable_model.all_params(), meta.dump());
  save_checkpoint(path, ckpt);
}

SiameseModel load_model(const std::filesystem::path& path) {
  Checkpoint ckpt = load_checkpoint(path);
  json meta;
  try {
    meta = json::parse(ckpt.meta);
  } catch (const json::parse_error& e) {
    throw CheckpointError("bad model metadata: " + std::string(e.what()));
  }
  if (!meta.contains("schema") || meta["schema"].get<std::string>() != "hierdg-model/1")
    throw CheckpointError("checkpoint is not a model file");

  SiameseModel model;
  model.label_dim = meta["label_dim"].get<std::size_t>();
  model.has_domain_path = meta["has_domain_path"].get<bool>();
  std::array<std::vector<std::string>, kFeatureKeys> vocabs;
  for (std::size_t k = 0; k < kFeatureKeys; ++k)
    vocabs[k] = meta["vocab"][k].get<std::vector<std::string>>();
  const std::size_t dim = meta["dim"].get<std::size_t>();
  model.backbone.use_positions = meta["use_positions"].get<bool>();
  model.backbone.init(vocabs, dim, CounterRng(0, {hash_name("load")}));
  model.decoder_p.init(model.label_dim, model.backbone.out_dim(),
                       CounterRng(0, {hash_name("load")}));
  if (model.has_domain_path) {
    model.vocab.nodes = meta["pruned_nodes"].get<std::vector<NodeId>>();
    std::vector<std::size_t> widths{model.vocab.nodes.size()};
    const auto hidden = meta["domain_hidden"].get<std::vector<std::size_t>>();
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(model.backbone.out_dim());
    model.domain_encoder.init(widths, meta["dropout"].get<double>(),
                              CounterRng(0, {hash_name("load")}));
    model.decoder_h.init(model.label_dim, model.backbone.out_dim(),
                         CounterRng(0, {hash_name("load")}));
  }
  restore_params(ckpt, model.all_params());
  return model;
}

}  // namespace hierdg
