#include "hierdg/neural.hpp"

#include <algorithm>
#include <cmath>

namespace hierdg {

void zero_grads(const std::vector<ParamBlock>& blocks) {
  for (const auto& b : blocks) std::fill(b.grad, b.grad + b.size, 0.0);
}

void DenseLayer::init(std::size_t out, std::size_t in, CounterRng rng) {
  weight = Matrix(out, in);
  bias.assign(out, 0.0);
  grad_weight = Matrix(out, in);
  grad_bias.assign(out, 0.0);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  for (auto& w : weight.data) w = rng.uniform(-bound, bound);
}

std::vector<double> DenseLayer::forward(const std::vector<double>& x) const {
  if (x.size() != weight.cols)
    throw NeuralError("dense forward: input length " + std::to_string(x.size()) +
                      ", expected " + std::to_string(weight.cols));
  std::vector<double> y(weight.rows);
  for (std::size_t r = 0; r < weight.rows; ++r) {
    double acc = bias[r];
    const double* wrow = &weight.data[r * weight.cols];
    for (std::size_t c = 0; c < weight.cols; ++c) acc += wrow[c] * x[c];
    y[r] = acc;
  }
  return y;
}

std::vector<double> DenseLayer::backward(const std::vector<double>& x,
                                         const std::vector<double>& dy) {
  if (dy.size() != weight.rows || x.size() != weight.cols)
    throw NeuralError("dense backward: shape mismatch");
  std::vector<double> dx(weight.cols, 0.0);
  for (std::size_t r = 0; r < weight.rows; ++r) {
    const double g = dy[r];
    grad_bias[r] += g;
    double* gwrow = &grad_weight.data[r * weight.cols];
    const double* wrow = &weight.data[r * weight.cols];
    for (std::size_t c = 0; c < weight.cols; ++c) {
      gwrow[c] += g * x[c];
      dx[c] += g * wrow[c];
    }
  }
  return dx;
}

void DenseLayer::collect_params(std::vector<ParamBlock>& out, const std::string& prefix) {
  out.push_back({prefix + ".weight", weight.data.data(), grad_weight.data.data(),
                 weight.data.size()});
  out.push_back({prefix + ".bias", bias.data(), grad_bias.data(), bias.size()});
}

void MLP::init(const std::vector<std::size_t>& widths, double dropout, CounterRng rng) {
  if (widths.size() < 2) throw NeuralError("mlp needs at least input and output widths");
  dropout_rate = dropout;
  layers.clear();
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    DenseLayer layer;
    layer.init(widths[l + 1], widths[l], rng.split(l));
    layers.push_back(std::move(layer));
  }
}

std::vector<double> MLP::forward(const std::vector<double>& x, bool train, CounterRng* rng,
                                 MLPTrace* trace,
                                 const std::vector<std::vector<double>>* fixed_masks) const {
  if (train && dropout_rate > 0.0 && !rng && !fixed_masks)
    throw NeuralError("training-mode mlp forward needs an rng stream for dropout");
  if (trace) {
    trace->inputs.clear();
    trace->pre.clear();
    trace->masks.clear();
  }
  std::vector<double> cur = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (trace) trace->inputs.push_back(cur);
    std::vector<double> pre = layers[l].forward(cur);
    if (trace) trace->pre.push_back(pre);
    if (l + 1 == layers.size()) {
      cur = std::move(pre);
      break;
    }
    for (auto& v : pre) v = std::max(v, 0.0);
    std::vector<double> mask;
    if (train && dropout_rate > 0.0) {
      mask.resize(pre.size());
      if (fixed_masks) {
        mask = (*fixed_masks)[l];
      } else {
        const double keep = 1.0 - dropout_rate;
        for (auto& m : mask) m = rng->next_double() < dropout_rate ? 0.0 : 1.0 / keep;
      }
      for (std::size_t i = 0; i < pre.size(); ++i) pre[i] *= mask[i];
    }
    if (trace) trace->masks.push_back(std::move(mask));
    cur = std::move(pre);
  }
  return cur;
}

std::vector<double> MLP::backward(const MLPTrace& trace, const std::vector<double>& dy) {
  std::vector<double> cur = dy;
  for (std::size_t l = layers.size(); l-- > 0;) {
    if (l + 1 < layers.size()) {
      const auto& mask = trace.masks[l];
      if (!mask.empty())
        for (std::size_t i = 0; i < cur.size(); ++i) cur[i] *= mask[i];
      for (std::size_t i = 0; i < cur.size(); ++i)
        if (trace.pre[l][i] <= 0.0) cur[i] = 0.0;
    }
    cur = layers[l].backward(trace.inputs[l], cur);
  }
  return cur;
}

void MLP::collect_params(std::vector<ParamBlock>& out, const std::string& prefix) {
  for (std::size_t l = 0; l < layers.size(); ++l)
    layers[l].collect_params(out, prefix + ".layer" + std::to_string(l));
}

std::vector<double> sinusoidal_position(std::size_t t, std::size_t dim) {
  std::vector<double> pe(dim);
  for (std::size_t i = 0; i < dim; i += 2) {
    const double freq =
        std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(dim));
    const double angle = static_cast<double>(t) * freq;
    pe[i] = std::sin(angle);
    if (i + 1 < dim) pe[i + 1] = std::cos(angle);
  }
  return pe;
}

void BackboneEncoder::init(const std::array<std::vector<std::string>, kFeatureKeys>& vocabs,
                           std::size_t h, CounterRng rng, double embed_scale) {
  dim = h;
  vocab = vocabs;
  const double bound = embed_scale / std::sqrt(static_cast<double>(h));
  for (std::size_t k = 0; k < kFeatureKeys; ++k) {
    vocab_index[k].clear();
    for (std::size_t i = 0; i < vocab[k].size(); ++i) {
      auto [it, inserted] = vocab_index[k].emplace(vocab[k][i], i);
      if (!inserted) throw NeuralError("duplicate code in key-" + std::to_string(k) +
                                       " vocabulary: " + vocab[k][i]);
    }
    code_embeddings[k] = Matrix(vocab[k].size(), h);
    grad_embeddings[k] = Matrix(vocab[k].size(), h);
    CounterRng erng = rng.split("embed").split(k);
    for (auto& w : code_embeddings[k].data) w = erng.uniform(-bound, bound);
  }
  query.init(h, h, rng.split("query"));
  key.init(h, h, rng.split("key"));
  value.init(h, h, rng.split("value"));
  output.init(h, h, rng.split("output"));
}

std::vector<double> BackboneEncoder::encode(const PatientRecord& p, std::size_t upto,
                                            EncodeTrace* trace) const {
  if (upto < 1 || upto > p.visits.size())
    throw NeuralError("encode: visit index " + std::to_string(upto) + " out of range");
  if (trace) trace->keys.assign(kFeatureKeys, {});

  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  std::vector<double> out;
  out.reserve(kFeatureKeys * dim);

  for (std::size_t kf = 0; kf < kFeatureKeys; ++kf) {
    EncodeTrace::KeyTrace kt;
    kt.rows.resize(upto);
    kt.x.resize(upto);
    for (std::size_t t = 0; t < upto; ++t) {
      std::vector<double> xv(dim, 0.0);
      for (const auto& code : p.visits[t].codes[kf]) {
        auto it = vocab_index[kf].find(code);
        if (it == vocab_index[kf].end())
          throw NeuralError("unknown key-" + std::to_string(kf) + " code: " + code);
        kt.rows[t].push_back(it->second);
        const double* row = &code_embeddings[kf].data[it->second * dim];
        for (std::size_t i = 0; i < dim; ++i) xv[i] += row[i];
      }
      if (!kt.rows[t].empty())
        for (auto& v : xv) v /= static_cast<double>(kt.rows[t].size());
      if (use_positions) {
        const std::vector<double> pe = sinusoidal_position(t, dim);
        for (std::size_t i = 0; i < dim; ++i) xv[i] += pe[i];
      }
      kt.x[t] = std::move(xv);
    }

    kt.q = query.forward(kt.x[upto - 1]);
    kt.k.resize(upto);
    kt.v.resize(upto);
    std::vector<double> scores(upto);
    for (std::size_t t = 0; t < upto; ++t) {
      kt.k[t] = key.forward(kt.x[t]);
      kt.v[t] = value.forward(kt.x[t]);
      double dot = 0.0;
      for (std::size_t i = 0; i < dim; ++i) dot += kt.q[i] * kt.k[t][i];
      scores[t] = dot * scale;
    }
    const double smax = *std::max_element(scores.begin(), scores.end());
    double z = 0.0;
    kt.attn.resize(upto);
    for (std::size_t t = 0; t < upto; ++t) {
      kt.attn[t] = std::exp(scores[t] - smax);
      z += kt.attn[t];
    }
    for (auto& a : kt.attn) a /= z;

    kt.pooled.assign(dim, 0.0);
    for (std::size_t t = 0; t < upto; ++t)
      for (std::size_t i = 0; i < dim; ++i) kt.pooled[i] += kt.attn[t] * kt.v[t][i];

    std::vector<double> pk = output.forward(kt.pooled);
    out.insert(out.end(), pk.begin(), pk.end());
    if (trace) (*trace).keys[kf] = std::move(kt);
  }
  return out;
}

void BackboneEncoder::backward(const EncodeTrace& trace, const std::vector<double>& dout) {
  if (dout.size() != out_dim()) throw NeuralError("backbone backward: bad gradient width");
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));

  for (std::size_t kf = 0; kf < kFeatureKeys; ++kf) {
    const auto& kt = trace.keys[kf];
    const std::size_t T = kt.x.size();
    std::vector<double> dpk(dout.begin() + static_cast<std::ptrdiff_t>(kf * dim),
                            dout.begin() + static_cast<std::ptrdiff_t>((kf + 1) * dim));
    std::vector<double> dpooled = output.backward(kt.pooled, dpk);

    // attention backward
    std::vector<double> dattn(T, 0.0);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t i = 0; i < dim; ++i) dattn[t] += dpooled[i] * kt.v[t][i];
    double inner = 0.0;
    for (std::size_t t = 0; t < T; ++t) inner += kt.attn[t] * dattn[t];
    std::vector<double> dscore(T);
    for (std::size_t t = 0; t < T; ++t) dscore[t] = kt.attn[t] * (dattn[t] - inner);

    std::vector<std::vector<double>> dx(T, std::vector<double>(dim, 0.0));
    std::vector<double> dq(dim, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
      std::vector<double> dv(dim), dk(dim);
      for (std::size_t i = 0; i < dim; ++i) {
        dv[i] = kt.attn[t] * dpooled[i];
        dk[i] = dscore[t] * scale * kt.q[i];
        dq[i] += dscore[t] * scale * kt.k[t][i];
      }
      std::vector<double> dxv = value.backward(kt.x[t], dv);
      std::vector<double> dxk = key.backward(kt.x[t], dk);
      for (std::size_t i = 0; i < dim; ++i) dx[t][i] += dxv[i] + dxk[i];
    }
    std::vector<double> dxq = query.backward(kt.x[T - 1], dq);
    for (std::size_t i = 0; i < dim; ++i) dx[T - 1][i] += dxq[i];

    // visit vector -> mean of code embeddings (positions are constant)
    for (std::size_t t = 0; t < T; ++t) {
      if (kt.rows[t].empty()) continue;
      const double inv = 1.0 / static_cast<double>(kt.rows[t].size());
      for (std::size_t r : kt.rows[t]) {
        double* grow = &grad_embeddings[kf].data[r * dim];
        for (std::size_t i = 0; i < dim; ++i) grow[i] += dx[t][i] * inv;
      }
    }
  }
}

void BackboneEncoder::collect_params(std::vector<ParamBlock>& out, const std::string& prefix) {
  for (std::size_t k = 0; k < kFeatureKeys; ++k)
    out.push_back({prefix + ".embed" + std::to_string(k), code_embeddings[k].data.data(),
                   grad_embeddings[k].data.data(), code_embeddings[k].data.size()});
  query.collect_params(out, prefix + ".query");
  key.collect_params(out, prefix + ".key");
  value.collect_params(out, prefix + ".value");
  output.collect_params(out, prefix + ".output");
}

std::map<std::string, std::vector<double>> BackboneEncoder::condition_embedding_map() const {
  std::map<std::string, std::vector<double>> out;
  for (std::size_t i = 0; i < vocab[0].size(); ++i) {
    const double* row = &code_embeddings[0].data[i * dim];
    out.emplace(vocab[0][i], std::vector<double>(row, row + dim));
  }
  return out;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::vector<double> sigmoid_vec(const std::vector<double>& logits) {
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = sigmoid(logits[i]);
  return out;
}

LossResult loss_bce(const std::vector<double>& logits, const std::vector<uint8_t>& target) {
  if (logits.size() != target.size()) throw NeuralError("bce: length mismatch");
  const double inv = 1.0 / static_cast<double>(logits.size());
  LossResult r;
  r.grad.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits[i];
    const double y = static_cast<double>(target[i]);
    r.value += (std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)))) * inv;
    r.grad[i] = (sigmoid(z) - y) * inv;
  }
  return r;
}

LossResult loss_mse(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw NeuralError("mse: length mismatch");
  const double inv = 1.0 / static_cast<double>(a.size());
  LossResult r;
  r.grad.resize(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    r.value += d * d * inv;
    r.grad[i] = 2.0 * d * inv;
  }
  return r;
}

LossResult loss_kl(const std::vector<double>& pred, const std::vector<double>& ref) {
  if (pred.size() != ref.size()) throw NeuralError("kl: length mismatch");
  auto clamp = [](double p) { return std::min(1.0 - 1e-7, std::max(1e-7, p)); };
  const double inv = 1.0 / static_cast<double>(pred.size());
  LossResult r;
  r.grad.resize(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = clamp(pred[i]);
    const double q = clamp(ref[i]);
    const double log_ratio = std::log(p / q) - std::log((1.0 - p) / (1.0 - q));
    r.value += (p * std::log(p / q) + (1.0 - p) * std::log((1.0 - p) / (1.0 - q))) * inv;
    r.grad[i] = p * (1.0 - p) * log_ratio * inv;  // through the sigmoid, wrt logits
  }
  return r;
}

MmdResult loss_mmd(const Matrix& r_batch, const Matrix& p_batch) {
  if (r_batch.cols != p_batch.cols) throw NeuralError("mmd: width mismatch");
  if (r_batch.rows == 0 || p_batch.rows == 0) throw NeuralError("mmd: empty batch");
  std::vector<double> r_mu(r_batch.cols, 0.0), p_mu(p_batch.cols, 0.0);
  for (std::size_t i = 0; i < r_batch.rows; ++i)
    for (std::size_t j = 0; j < r_batch.cols; ++j) r_mu[j] += r_batch(i, j);
  for (auto& v : r_mu) v /= static_cast<double>(r_batch.rows);
  for (std::size_t i = 0; i < p_batch.rows; ++i)
    for (std::size_t j = 0; j < p_batch.cols; ++j) p_mu[j] += p_batch(i, j);
  for (auto& v : p_mu) v /= static_cast<double>(p_batch.rows);

  double num = 0.0, denom = 0.0;
  for (std::size_t j = 0; j < r_batch.cols; ++j) {
    const double d = r_mu[j] - p_mu[j];
    num += d * d;
    denom += p_mu[j] * p_mu[j];
  }
  MmdResult out;
  out.denom_clamped = denom < 1e-12;
  if (out.denom_clamped) denom = 1e-12;
  out.value = num / denom;
  out.grad = Matrix(r_batch.rows, r_batch.cols);
  const double c = 2.0 / (denom * static_cast<double>(r_batch.rows));
  for (std::size_t i = 0; i < r_batch.rows; ++i)
    for (std::size_t j = 0; j < r_batch.cols; ++j)
      out.grad(i, j) = c * (r_mu[j] - p_mu[j]);
  return out;
}

Adam::Adam(const std::vector<ParamBlock>& blocks, const AdamConfig& cfg) : cfg_(cfg) {
  m_.reserve(blocks.size());
  v_.reserve(blocks.size());
  for (const auto& b : blocks) {
    m_.emplace_back(b.size, 0.0);
    v_.emplace_back(b.size, 0.0);
  }
}

void Adam::step(const std::vector<ParamBlock>& blocks) {
  if (blocks.size() != m_.size()) throw NeuralError("adam: block count changed");
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
    const ParamBlock& b = blocks[bi];
    if (b.size != m_[bi].size()) throw NeuralError("adam: block size changed");
    for (std::size_t i = 0; i < b.size; ++i) {
      const double g = b.grad[i];
      m_[bi][i] = cfg_.beta1 * m_[bi][i] + (1.0 - cfg_.beta1) * g;
      v_[bi][i] = cfg_.beta2 * v_[bi][i] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m_[bi][i] / bc1;
      const double vhat = v_[bi][i] / bc2;
      b.value[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.epsilon);
    }
  }
}

GradCheckReport grad_check(const std::function<double()>& loss_fn,
                           const std::function<void()>& backward_fn,
                           const std::vector<ParamBlock>& blocks, double step,
                           std::size_t max_per_block) {
  backward_fn();
  std::vector<std::vector<double>> analytic;
  analytic.reserve(blocks.size());
  for (const auto& b : blocks) analytic.emplace_back(b.grad, b.grad + b.size);

  GradCheckReport report;
  for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
    const ParamBlock& b = blocks[bi];
    const std::size_t stride =
        max_per_block > 0 && b.size > max_per_block
            ? (b.size + max_per_block - 1) / max_per_block
            : 1;
    double worst = 0.0;
    for (std::size_t i = 0; i < b.size; i += stride) {
      const double saved = b.value[i];
      b.value[i] = saved + step;
      const double up = loss_fn();
      b.value[i] = saved - step;
      const double down = loss_fn();
      b.value[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[bi][i];
      const double rel = std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), 1e-6);
      worst = std::max(worst, rel);
    }
    report.blocks.push_back({b.name, worst});
    report.max_rel_err = std::max(report.max_rel_err, worst);
  }
  return report;
}

}  // namespace hierdg
