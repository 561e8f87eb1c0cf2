#include "hierdg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hierdg {

void PredictionBatch::validate() const {
  if (scores.size() != targets.size()) throw MetricError("batch row count mismatch");
  if (scores.empty()) throw MetricError("empty prediction batch");
  const std::size_t d = scores.front().size();
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i].size() != d || targets[i].size() != d)
      throw MetricError("ragged prediction batch at row " + std::to_string(i));
    for (double s : scores[i])
      if (!std::isfinite(s)) throw MetricError("non-finite score at row " + std::to_string(i));
  }
}

std::vector<double> PredictionBatch::flat_scores() const {
  std::vector<double> out;
  for (const auto& row : scores) out.insert(out.end(), row.begin(), row.end());
  return out;
}

std::vector<uint8_t> PredictionBatch::flat_targets() const {
  std::vector<uint8_t> out;
  for (const auto& row : targets) out.insert(out.end(), row.begin(), row.end());
  return out;
}

double auroc(const std::vector<double>& scores, const std::vector<uint8_t>& targets) {
  if (scores.size() != targets.size()) throw MetricError("auroc: length mismatch");
  std::size_t n_pos = 0;
  for (uint8_t t : targets) n_pos += t;
  const std::size_t n_neg = targets.size() - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw MetricError("auroc undefined: targets contain a single class");

  // Rank-sum formulation with midranks for ties.
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t t = i; t < j; ++t)
      if (targets[order[t]]) pos_rank_sum += midrank;
    i = j;
  }
  const double u =
      pos_rank_sum - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double auprc(const std::vector<double>& scores, const std::vector<uint8_t>& targets) {
  if (scores.size() != targets.size()) throw MetricError("auprc: length mismatch");
  std::size_t n_pos = 0;
  for (uint8_t t : targets) n_pos += t;
  if (n_pos == 0) throw MetricError("auprc undefined: no positive targets");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double ap = 0.0;
  std::size_t seen_pos = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (!targets[order[rank]]) continue;
    ++seen_pos;
    ap += static_cast<double>(seen_pos) / static_cast<double>(rank + 1);
  }
  return ap / static_cast<double>(n_pos);
}

namespace {

struct Counts {
  std::size_t tp = 0, fp = 0, fn = 0;
  double f1() const {
    const std::size_t denom = 2 * tp + fp + fn;
    return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
  }
};

}  // namespace

double f1_binary(const PredictionBatch& batch, double threshold) {
  batch.validate();
  double total = 0.0;
  for (std::size_t i = 0; i < batch.scores.size(); ++i) {
    Counts c;
    for (std::size_t j = 0; j < batch.scores[i].size(); ++j) {
      const bool pred = batch.scores[i][j] >= threshold;
      const bool truth = batch.targets[i][j] != 0;
      if (pred && truth) ++c.tp;
      else if (pred) ++c.fp;
      else if (truth) ++c.fn;
    }
    total += c.f1();
  }
  return total / static_cast<double>(batch.scores.size());
}

double weighted_f1(const PredictionBatch& batch, double threshold) {
  batch.validate();
  const std::size_t d = batch.scores.front().size();
  double weighted = 0.0;
  std::size_t support_total = 0;
  for (std::size_t j = 0; j < d; ++j) {
    Counts c;
    std::size_t support = 0;
    for (std::size_t i = 0; i < batch.scores.size(); ++i) {
      const bool pred = batch.scores[i][j] >= threshold;
      const bool truth = batch.targets[i][j] != 0;
      if (truth) ++support;
      if (pred && truth) ++c.tp;
      else if (pred) ++c.fp;
      else if (truth) ++c.fn;
    }
    if (support == 0) continue;
    weighted += static_cast<double>(support) * c.f1();
    support_total += support;
  }
  if (support_total == 0) throw MetricError("weighted_f1 undefined: no positive targets");
  return weighted / static_cast<double>(support_total);
}

double recall_at_k(const PredictionBatch& batch, std::size_t k) {
  batch.validate();
  if (k == 0) throw MetricError("recall_at_k needs k >= 1");
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t i = 0; i < batch.scores.size(); ++i) {
    std::size_t n_true = 0;
    for (uint8_t t : batch.targets[i]) n_true += t;
    if (n_true == 0) continue;
    const std::size_t d = batch.scores[i].size();
    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    const std::size_t kk = std::min(k, d);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return batch.scores[i][a] > batch.scores[i][b];
    });
    std::size_t hits = 0;
    for (std::size_t r = 0; r < kk; ++r) hits += batch.targets[i][order[r]];
    total += static_cast<double>(hits) / static_cast<double>(std::min(n_true, k));
    ++counted;
  }
  if (counted == 0) throw MetricError("recall_at_k undefined: no samples with true labels");
  return total / static_cast<double>(counted);
}

}  // namespace hierdg
