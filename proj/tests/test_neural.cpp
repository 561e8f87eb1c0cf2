#include <doctest.h>

#include <array>
#include <cmath>
#include <vector>

#include "hierdg/neural.hpp"
#include "hierdg/records.hpp"
#include "hierdg/rng.hpp"

using namespace hierdg;

namespace {

PatientRecord one_visit_patient() {
  PatientRecord p;
  p.id = "p";
  Visit v0;
  v0.day = 1;
  v0.codes[0] = {"c0"};
  v0.codes[1] = {"q0"};
  v0.codes[2] = {"d0"};
  Visit v1 = v0;
  v1.day = 2;
  p.visits = {v0, v1};
  return p;
}

std::array<std::vector<std::string>, kFeatureKeys> tiny_vocabs() {
  return {std::vector<std::string>{"c0", "c1"}, std::vector<std::string>{"q0"},
          std::vector<std::string>{"d0"}};
}

}  // namespace

TEST_CASE("dense layer computes an affine map") {
  DenseLayer layer;
  layer.init(2, 2, CounterRng(1));
  layer.weight(0, 0) = 1.0;
  layer.weight(0, 1) = 2.0;
  layer.weight(1, 0) = 3.0;
  layer.weight(1, 1) = 4.0;
  layer.bias = {0.5, -0.5};
  const auto y = layer.forward({1.0, 1.0});
  REQUIRE(y.size() == 2);
  CHECK(y[0] == doctest::Approx(3.5));
  CHECK(y[1] == doctest::Approx(6.5));

  CHECK_THROWS_AS((void)layer.forward({1.0}), NeuralError);
}

TEST_CASE("dense backward matches finite differences") {
  DenseLayer layer;
  layer.init(3, 2, CounterRng(2));
  const std::vector<double> x{0.3, -0.7};

  std::vector<ParamBlock> blocks;
  layer.collect_params(blocks, "dense");

  auto loss = [&] {
    const auto y = layer.forward(x);
    double acc = 0.0;
    for (double v : y) acc += 0.5 * v * v;
    return acc;
  };
  auto backward = [&] {
    zero_grads(blocks);
    const auto y = layer.forward(x);
    (void)layer.backward(x, y);
  };
  const GradCheckReport report = grad_check(loss, backward, blocks);
  CHECK(report.pass(1e-5));
}

TEST_CASE("binary cross entropy at zero logits is ln 2") {
  const LossResult r = loss_bce({0.0}, {1});
  CHECK(r.value == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  REQUIRE(r.grad.size() == 1);
  CHECK(r.grad[0] == doctest::Approx(-0.5));

  const LossResult r2 = loss_bce({0.0, 0.0}, {1, 0});
  CHECK(r2.value == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(r2.grad[0] == doctest::Approx(-0.25));
  CHECK(r2.grad[1] == doctest::Approx(0.25));
}

TEST_CASE("binary cross entropy stays finite at extreme logits") {
  const LossResult big = loss_bce({100.0}, {1});
  CHECK(std::isfinite(big.value));
  CHECK(big.value < 1e-6);
  const LossResult wrong = loss_bce({100.0}, {0});
  CHECK(std::isfinite(wrong.value));
  CHECK(wrong.value == doctest::Approx(100.0).epsilon(1e-6));
  const LossResult neg = loss_bce({-745.0}, {1});
  CHECK(std::isfinite(neg.value));
}

TEST_CASE("bce gradient matches finite differences") {
  std::vector<double> logits{0.7, -1.2, 2.5};
  const std::vector<uint8_t> target{1, 0, 1};
  const LossResult r = loss_bce(logits, target);
  const double eps = 1e-6;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    auto plus = logits;
    plus[i] += eps;
    auto minus = logits;
    minus[i] -= eps;
    const double num = (loss_bce(plus, target).value - loss_bce(minus, target).value) / (2 * eps);
    CHECK(r.grad[i] == doctest::Approx(num).epsilon(1e-5));
  }
}

TEST_CASE("mean squared error and its gradient") {
  const LossResult r = loss_mse({1.0, 2.0}, {0.0, 0.0});
  CHECK(r.value == doctest::Approx(2.5));
  CHECK(r.grad[0] == doctest::Approx(1.0));
  CHECK(r.grad[1] == doctest::Approx(2.0));
  CHECK(loss_mse({3.0}, {3.0}).value == doctest::Approx(0.0));
}

TEST_CASE("bernoulli kl reference value") {
  const LossResult r = loss_kl({0.9}, {0.5});
  const double expected = 0.9 * std::log(0.9 / 0.5) + 0.1 * std::log(0.1 / 0.5);
  CHECK(expected == doctest::Approx(0.368).epsilon(1e-2));
  CHECK(r.value == doctest::Approx(expected).epsilon(1e-9));

  // Matching distributions carry no divergence.
  CHECK(loss_kl({0.5}, {0.5}).value == doctest::Approx(0.0));
  CHECK(loss_kl({0.123}, {0.123}).value == doctest::Approx(0.0).epsilon(1e-9));

  // Saturated probabilities are clamped instead of producing infinities.
  CHECK(std::isfinite(loss_kl({1.0}, {0.5}).value));
  CHECK(std::isfinite(loss_kl({0.0}, {1.0}).value));
}

TEST_CASE("kl gradient is with respect to the logits behind pred") {
  // d/dz KL(sigmoid(z) || r) = p (1-p) (log(p/r) - log((1-p)/(1-r))), averaged
  // over labels.
  const double p = 0.9, ref = 0.5;
  const LossResult r = loss_kl({p}, {ref});
  const double expected_grad =
      p * (1 - p) * (std::log(p / ref) - std::log((1 - p) / (1 - ref)));
  REQUIRE(r.grad.size() == 1);
  CHECK(r.grad[0] == doctest::Approx(expected_grad).epsilon(1e-9));
}

TEST_CASE("mean-difference mmd equals one when the batch mean doubles the reference") {
  Matrix r(2, 2), p(2, 2);
  // r rows average to (4, 6); p rows to (2, 3)
  r(0, 0) = 2.0;
  r(0, 1) = 4.0;
  r(1, 0) = 6.0;
  r(1, 1) = 8.0;
  p(0, 0) = 1.0;
  p(0, 1) = 2.0;
  p(1, 0) = 3.0;
  p(1, 1) = 4.0;
  const MmdResult m = loss_mmd(r, p);
  CHECK(m.value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_FALSE(m.denom_clamped);

  // Identical means vanish.
  const MmdResult zero = loss_mmd(p, p);
  CHECK(zero.value == doctest::Approx(0.0));
}

TEST_CASE("mmd clamps a zero-norm reference mean") {
  Matrix r(1, 2), p(2, 2);
  r(0, 0) = 1.0;
  p(0, 0) = 1.0;
  p(1, 0) = -1.0;
  const MmdResult m = loss_mmd(r, p);
  CHECK(m.denom_clamped);
  CHECK(std::isfinite(m.value));
}

TEST_CASE("mmd gradient matches finite differences") {
  Matrix r(2, 3), p(2, 3);
  CounterRng rng(5);
  for (auto& v : r.data) v = rng.uniform(-1, 1);
  for (auto& v : p.data) v = rng.uniform(-1, 1);
  const MmdResult m = loss_mmd(r, p);
  const double eps = 1e-6;
  for (std::size_t i = 0; i < r.data.size(); ++i) {
    Matrix plus = r, minus = r;
    plus.data[i] += eps;
    minus.data[i] -= eps;
    const double num = (loss_mmd(plus, p).value - loss_mmd(minus, p).value) / (2 * eps);
    CHECK(m.grad.data[i] == doctest::Approx(num).epsilon(1e-4));
  }
}

TEST_CASE("sigmoid midpoint and symmetry") {
  CHECK(sigmoid(0.0) == doctest::Approx(0.5));
  CHECK(sigmoid(3.0) + sigmoid(-3.0) == doctest::Approx(1.0).epsilon(1e-12));
  const auto v = sigmoid_vec({0.0, 100.0, -100.0});
  CHECK(v[0] == doctest::Approx(0.5));
  CHECK(v[1] == doctest::Approx(1.0));
  CHECK(v[2] == doctest::Approx(0.0));
}

TEST_CASE("adam leaves parameters alone on a zero gradient") {
  DenseLayer layer;
  layer.init(2, 2, CounterRng(3));
  std::vector<ParamBlock> blocks;
  layer.collect_params(blocks, "layer");

  const auto before_w = layer.weight.data;
  const auto before_b = layer.bias;

  Adam opt(blocks, AdamConfig{});
  zero_grads(blocks);
  opt.step(blocks);
  CHECK(layer.weight.data == before_w);
  CHECK(layer.bias == before_b);
  CHECK(opt.steps_taken() == 1);
}

TEST_CASE("the first adam step moves by about the learning rate against the gradient") {
  DenseLayer layer;
  layer.init(1, 1, CounterRng(4));
  layer.weight(0, 0) = 0.0;
  layer.bias[0] = 0.0;
  std::vector<ParamBlock> blocks;
  layer.collect_params(blocks, "layer");

  AdamConfig cfg;
  cfg.lr = 0.01;
  Adam opt(blocks, cfg);
  zero_grads(blocks);
  layer.grad_weight(0, 0) = 2.0;
  opt.step(blocks);
  // Bias correction makes the first update lr * g / (|g| + eps') ~= lr.
  CHECK(layer.weight(0, 0) == doctest::Approx(-0.01).epsilon(1e-3));
  CHECK(layer.bias[0] == doctest::Approx(0.0));
}

TEST_CASE("adam rejects a changed block layout") {
  DenseLayer layer;
  layer.init(2, 2, CounterRng(6));
  std::vector<ParamBlock> blocks;
  layer.collect_params(blocks, "layer");
  Adam opt(blocks, AdamConfig{});

  DenseLayer other;
  other.init(3, 2, CounterRng(7));
  std::vector<ParamBlock> other_blocks;
  other.collect_params(other_blocks, "layer");
  CHECK_THROWS_AS(opt.step(other_blocks), NeuralError);
}

TEST_CASE("mlp gradients pass a finite-difference check") {
  MLP mlp;
  mlp.init({3, 5, 2}, 0.0, CounterRng(8));
  const std::vector<double> x{0.4, -0.2, 0.9};

  std::vector<ParamBlock> blocks;
  mlp.collect_params(blocks, "mlp");

  auto loss = [&] {
    const auto y = mlp.forward(x);
    double acc = 0.0;
    for (double v : y) acc += 0.5 * v * v;
    return acc;
  };
  auto backward = [&] {
    zero_grads(blocks);
    MLPTrace trace;
    const auto y = mlp.forward(x, true, nullptr, &trace);
    (void)mlp.backward(trace, y);
  };
  const GradCheckReport report = grad_check(loss, backward, blocks);
  CHECK(report.pass(1e-4));
}

TEST_CASE("dropout masks freeze under fixed_masks and gradcheck still passes") {
  MLP mlp;
  mlp.init({3, 4, 2}, 0.5, CounterRng(9));
  const std::vector<double> x{1.0, -1.0, 0.5};
  const std::vector<std::vector<double>> masks{{2.0, 0.0, 2.0, 0.0}};

  std::vector<ParamBlock> blocks;
  mlp.collect_params(blocks, "mlp");

  auto loss = [&] {
    const auto y = mlp.forward(x, true, nullptr, nullptr, &masks);
    double acc = 0.0;
    for (double v : y) acc += 0.5 * v * v;
    return acc;
  };
  auto backward = [&] {
    zero_grads(blocks);
    MLPTrace trace;
    const auto y = mlp.forward(x, true, nullptr, &trace, &masks);
    (void)mlp.backward(trace, y);
  };
  const GradCheckReport report = grad_check(loss, backward, blocks);
  CHECK(report.pass(1e-4));
}

TEST_CASE("training-mode dropout without an rng is an error") {
  MLP mlp;
  mlp.init({2, 3, 1}, 0.5, CounterRng(10));
  CHECK_THROWS_AS((void)mlp.forward({1.0, 2.0}, true), NeuralError);
}

TEST_CASE("evaluation-mode dropout neither drops nor rescales") {
  MLP mlp;
  mlp.init({2, 6, 2}, 0.9, CounterRng(11));
  const std::vector<double> x{0.3, 0.8};
  const auto y1 = mlp.forward(x);
  const auto y2 = mlp.forward(x);
  CHECK(y1 == y2);
}

TEST_CASE("sinusoidal positions start at the sin/cos origin") {
  const auto pe0 = sinusoidal_position(0, 6);
  REQUIRE(pe0.size() == 6);
  for (std::size_t i = 0; i < 6; i += 2) {
    CHECK(pe0[i] == doctest::Approx(0.0));
    CHECK(pe0[i + 1] == doctest::Approx(1.0));
  }
  const auto pe1 = sinusoidal_position(1, 6);
  CHECK(pe1[0] == doctest::Approx(std::sin(1.0)));
  CHECK(pe1[1] == doctest::Approx(std::cos(1.0)));
  for (double v : pe1) {
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("encoder output is the concatenation of per-key blocks") {
  BackboneEncoder enc;
  enc.init(tiny_vocabs(), 8, CounterRng(12));
  CHECK(enc.out_dim() == 24);

  const PatientRecord p = one_visit_patient();
  const auto out = enc.encode(p, 2);
  CHECK(out.size() == 24);
}

TEST_CASE("single-visit attention reduces to a straight-line computation") {
  BackboneEncoder enc;
  enc.init(tiny_vocabs(), 4, CounterRng(13));
  const PatientRecord p = one_visit_patient();

  EncodeTrace trace;
  const auto out = enc.encode(p, 1, &trace);

  for (std::size_t kf = 0; kf < kFeatureKeys; ++kf) {
    REQUIRE(trace.keys[kf].attn.size() == 1);
    CHECK(trace.keys[kf].attn[0] == doctest::Approx(1.0));

    // Rebuild the visit vector by hand: mean code embedding plus position 0.
    const auto& code = p.visits[0].codes[kf][0];
    const std::size_t row = enc.vocab_index[kf].at(code);
    std::vector<double> xv(4);
    for (std::size_t i = 0; i < 4; ++i) xv[i] = enc.code_embeddings[kf](row, i);
    const auto pe = sinusoidal_position(0, 4);
    for (std::size_t i = 0; i < 4; ++i) xv[i] += pe[i];

    const auto pooled = enc.value.forward(xv);
    const auto pk = enc.output.forward(pooled);
    for (std::size_t i = 0; i < 4; ++i)
      CHECK(out[kf * 4 + i] == doctest::Approx(pk[i]).epsilon(1e-12));
  }
}

TEST_CASE("duplicated visits with positions disabled pool to the single-visit output") {
  BackboneEncoder enc;
  enc.init(tiny_vocabs(), 8, CounterRng(14));
  enc.use_positions = false;

  const PatientRecord p = one_visit_patient();  // visit 2 repeats visit 1
  const auto once = enc.encode(p, 1);
  const auto twice = enc.encode(p, 2);
  REQUIRE(once.size() == twice.size());
  for (std::size_t i = 0; i < once.size(); ++i)
    CHECK(once[i] == doctest::Approx(twice[i]).epsilon(1e-12));
}

TEST_CASE("attention weights form a distribution over visits") {
  BackboneEncoder enc;
  enc.init(tiny_vocabs(), 8, CounterRng(15));
  PatientRecord p = one_visit_patient();
  p.visits[1].codes[0] = {"c1"};

  EncodeTrace trace;
  (void)enc.encode(p, 2, &trace);
  for (std::size_t kf = 0; kf < kFeatureKeys; ++kf) {
    double sum = 0.0;
    for (double a : trace.keys[kf].attn) {
      CHECK(a >= 0.0);
      sum += a;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("unknown codes and bad visit indices are rejected") {
  BackboneEncoder enc;
  enc.init(tiny_vocabs(), 4, CounterRng(16));
  PatientRecord p = one_visit_patient();
  CHECK_THROWS_AS((void)enc.encode(p, 0), NeuralError);
  CHECK_THROWS_AS((void)enc.encode(p, 3), NeuralError);
  p.visits[0].codes[0] = {"mystery"};
  CHECK_THROWS_AS((void)enc.encode(p, 2), NeuralError);
}

TEST_CASE("encoder gradients pass a finite-difference check") {
  BackboneEncoder enc;
  enc.init(tiny_vocabs(), 4, CounterRng(17));
  PatientRecord p = one_visit_patient();
  p.visits[1].codes[0] = {"c0", "c1"};

  std::vector<ParamBlock> blocks;
  enc.collect_params(blocks, "enc");

  auto loss = [&] {
    const auto y = enc.encode(p, 2);
    double acc = 0.0;
    for (double v : y) acc += 0.5 * v * v;
    return acc;
  };
  auto backward = [&] {
    zero_grads(blocks);
    EncodeTrace trace;
    const auto y = enc.encode(p, 2, &trace);
    enc.backward(trace, y);
  };
  const GradCheckReport report = grad_check(loss, backward, blocks, 1e-5, 40);
  CHECK(report.pass(1e-4));
}

TEST_CASE("embed scale stretches the initial code tables") {
  BackboneEncoder small;
  small.init(tiny_vocabs(), 8, CounterRng(18), 0.1);
  BackboneEncoder large;
  large.init(tiny_vocabs(), 8, CounterRng(18), 2.0);
  for (std::size_t i = 0; i < small.code_embeddings[0].data.size(); ++i)
    CHECK(large.code_embeddings[0].data[i] ==
          doctest::Approx(20.0 * small.code_embeddings[0].data[i]).epsilon(1e-9));
}
