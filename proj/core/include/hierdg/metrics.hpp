#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace hierdg {

struct MetricError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PredictionBatch {
  std::vector<std::vector<double>> scores;   // N x d, each in [0,1]
  std::vector<std::vector<uint8_t>> targets; // N x d

  void validate() const;
  // concatenation of all rows, for micro-averaged ranking metrics
  std::vector<double> flat_scores() const;
  std::vector<uint8_t> flat_targets() const;
};

// Mann-Whitney statistic: fraction of (positive, negative) pairs ranked
// correctly, ties counted half. Throws on single-class targets.
double auroc(const std::vector<double>& scores, const std::vector<uint8_t>& targets);

// Average precision: mean over positives of precision at their rank, scores
// descending with stable index tie-break. Throws when no positive exists.
double auprc(const std::vector<double>& scores, const std::vector<uint8_t>& targets);

// Per-sample F1 at the threshold, averaged over the batch; a sample with no
// true and no predicted positives scores 0 by the zero-denominator rule.
double f1_binary(const PredictionBatch& batch, double threshold = 0.5);

// Per-class F1 weighted by class support; zero-support classes are excluded.
double weighted_f1(const PredictionBatch& batch, double threshold = 0.5);

// Per sample |top-k predicted ∩ true| / min(|true|, k), averaged over samples
// with at least one true label.
double recall_at_k(const PredictionBatch& batch, std::size_t k = 10);

}  // namespace hierdg
