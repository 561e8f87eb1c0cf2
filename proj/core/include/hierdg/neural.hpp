#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "hierdg/records.hpp"
#include "hierdg/rng.hpp"

namespace hierdg {

struct NeuralError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Matrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;  // row-major

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

// A named view over one parameter tensor and its gradient accumulator. Blocks
// are collected in declaration order everywhere, which fixes the checkpoint
// layout and the optimizer slot order.
struct ParamBlock {
  std::string name;
  double* value = nullptr;
  double* grad = nullptr;
  std::size_t size = 0;
};

void zero_grads(const std::vector<ParamBlock>& blocks);

struct DenseLayer {
  Matrix weight;  // out x in
  std::vector<double> bias;
  Matrix grad_weight;
  std::vector<double> grad_bias;

  void init(std::size_t out, std::size_t in, CounterRng rng);
  std::size_t in_dim() const { return weight.cols; }
  std::size_t out_dim() const { return weight.rows; }

  std::vector<double> forward(const std::vector<double>& x) const;
  // Accumulates weight/bias grads for (x, dy); returns dL/dx.
  std::vector<double> backward(const std::vector<double>& x, const std::vector<double>& dy);
  void collect_params(std::vector<ParamBlock>& out, const std::string& prefix);
};

struct MLPTrace {
  std::vector<std::vector<double>> inputs;  // inputs[l] = input to layer l
  std::vector<std::vector<double>> pre;     // pre-activation outputs
  std::vector<std::vector<double>> masks;   // inverted-dropout factors per hidden layer
};

// Dense chain with rectified-linear units and inverted dropout between
// layers; the final layer is a plain affine map.
struct MLP {
  std::vector<DenseLayer> layers;
  double dropout_rate = 0.2;

  void init(const std::vector<std::size_t>& widths, double dropout, CounterRng rng);
  std::size_t in_dim() const { return layers.front().in_dim(); }
  std::size_t out_dim() const { return layers.back().out_dim(); }

  // train=true samples dropout masks from rng (required then); a non-null
  // trace records everything backward() needs. fixed_masks short-circuits the
  // sampling so gradient checks can freeze masks.
  std::vector<double> forward(const std::vector<double>& x, bool train = false,
                              CounterRng* rng = nullptr, MLPTrace* trace = nullptr,
                              const std::vector<std::vector<double>>* fixed_masks = nullptr) const;
  std::vector<double> backward(const MLPTrace& trace, const std::vector<double>& dy);
  void collect_params(std::vector<ParamBlock>& out, const std::string& prefix);
};

struct EncodeTrace {
  struct KeyTrace {
    std::vector<std::vector<std::size_t>> rows;  // embedding rows per visit
    std::vector<std::vector<double>> x;          // visit vectors incl. positions
    std::vector<std::vector<double>> k, v;       // per visit
    std::vector<double> q;
    std::vector<double> attn;                    // softmax weights
    std::vector<double> pooled;
  };
  std::vector<KeyTrace> keys;
};

// Per-key encoder: visit vector = mean code embedding + sinusoidal position,
// pooled by single-head scaled dot-product attention whose query is the last
// visit; per-key outputs are concatenated. Attention and output layers are
// shared across keys, embedding tables are not.
struct BackboneEncoder {
  std::size_t dim = 64;
  bool use_positions = true;
  std::array<std::vector<std::string>, kFeatureKeys> vocab;
  std::array<std::map<std::string, std::size_t>, kFeatureKeys> vocab_index;
  std::array<Matrix, kFeatureKeys> code_embeddings;  // |vocab_k| x dim
  std::array<Matrix, kFeatureKeys> grad_embeddings;
  DenseLayer query, key, value, output;

  void init(const std::array<std::vector<std::string>, kFeatureKeys>& vocabs, std::size_t h,
            CounterRng rng, double embed_scale = 1.0);
  std::size_t out_dim() const { return kFeatureKeys * dim; }

  std::vector<double> encode(const PatientRecord& p, std::size_t upto,
                             EncodeTrace* trace = nullptr) const;
  // Needs the trace from the matching encode call.
  void backward(const EncodeTrace& trace, const std::vector<double>& dout);
  void collect_params(std::vector<ParamBlock>& out, const std::string& prefix);

  // code -> embedding row for the condition key, in vocab order
  std::map<std::string, std::vector<double>> condition_embedding_map() const;
};

std::vector<double> sinusoidal_position(std::size_t t, std::size_t dim);

struct LossResult {
  double value = 0.0;
  std::vector<double> grad;
};

// Mean over labels of stable logistic cross-entropy; grad wrt logits.
LossResult loss_bce(const std::vector<double>& logits, const std::vector<uint8_t>& target);
// Mean squared difference; grad wrt a.
LossResult loss_mse(const std::vector<double>& a, const std::vector<double>& b);
// Mean over labels of Bernoulli KL(pred || ref), probabilities clamped to
// [1e-7, 1 - 1e-7]; ref is a constant; grad wrt the logits behind pred.
LossResult loss_kl(const std::vector<double>& pred, const std::vector<double>& ref);

struct MmdResult {
  double value = 0.0;
  Matrix grad;  // wrt r_batch
  bool denom_clamped = false;
};

// Squared distance of batch means over squared norm of p's mean; the
// denominator is clamped at 1e-12 and the event flagged.
MmdResult loss_mmd(const Matrix& r_batch, const Matrix& p_batch);

double sigmoid(double z);
std::vector<double> sigmoid_vec(const std::vector<double>& logits);

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  Adam() = default;
  Adam(const std::vector<ParamBlock>& blocks, const AdamConfig& cfg);
  // Applies one bias-corrected update from each block's accumulated grad.
  // Blocks must match the construction layout.
  void step(const std::vector<ParamBlock>& blocks);
  uint64_t steps_taken() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_{};
  uint64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

struct GradCheckReport {
  struct BlockReport {
    std::string name;
    double max_rel_err = 0.0;
  };
  std::vector<BlockReport> blocks;
  double max_rel_err = 0.0;
  bool pass(double tol) const { return max_rel_err <= tol; }
};

// Central finite differences (step 1e-5) against the grads that backward_fn
// leaves in the blocks. loss_fn must be a pure function of the parameters.
// Relative error uses denominator max(|analytic| + |numeric|, 1e-6). Blocks
// larger than max_per_block are strided deterministically.
GradCheckReport grad_check(const std::function<double()>& loss_fn,
                           const std::function<void()>& backward_fn,
                           const std::vector<ParamBlock>& blocks, double step = 1e-5,
                           std::size_t max_per_block = 0);

}  // namespace hierdg
