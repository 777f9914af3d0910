#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>

#include "ltm/gradcheck.hpp"
#include "ltm/model.hpp"
#include "ltm/metrics.hpp"
#include "ltm/ops.hpp"
#include "support.hpp"

using namespace ltm;
using ltm::test::random_tensor;
using ltm::test::random_weights;
using ltm::test::values;

namespace {

// Scalar probe loss: a fixed random linear functional of the op output.
LossFn probe(std::function<Tensor(Tape&)> op, std::uint64_t seed = 99) {
  return [op, seed](Tape& tape) {
    Tensor y = op(tape);
    Rng rng(seed);
    auto w = random_weights(y.size(), rng);
    return ops::weighted_sum(tape, y, w);
  };
}

}  // namespace

TEST_CASE("tensor construction checks shape against data") {
  CHECK_THROWS_AS(Tensor({2, 3}, std::vector<double>(5)), ShapeError);
  CHECK_THROWS_AS(Tensor({2, 0}, {}), ShapeError);
  Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.size() == 6);
  CHECK(t.at({1, 2}) == 6.0);
  CHECK(t.dim(-1) == 3);
  CHECK_FALSE(t.has_grad());
}

TEST_CASE("tensor storage is 64-byte aligned") {
  for (std::size_t n : {1u, 3u, 17u, 1000u}) {
    Tensor t = Tensor::zeros({n});
    CHECK(reinterpret_cast<std::uintptr_t>(t.data().data()) % 64 == 0);
    CHECK(reinterpret_cast<std::uintptr_t>(t.mutable_grad().data()) % 64 == 0);
  }
}

TEST_CASE("linear examples") {
  Tape tape(Tape::Mode::kInference);
  auto y1 = ops::linear(tape, Tensor({2}, {1, 2}), Tensor({2, 2}, {1, 0, 0, 1}), Tensor({2}, {0, 0}));
  CHECK(values(y1) == std::vector<double>{1, 2});
  auto y2 = ops::linear(tape, Tensor({1}, {3}), Tensor({1, 1}, {2}), Tensor({1}, {1}));
  CHECK(values(y2) == std::vector<double>{7});
  auto y3 = ops::linear(tape, Tensor({2}, {1, 1}), Tensor({2, 2}, {1, 2, 3, 4}), Tensor({2}, {0.5, -0.5}));
  CHECK(values(y3) == std::vector<double>{4.5, 5.5});
}

TEST_CASE("linear broadcasts over leading axes") {
  Tape tape(Tape::Mode::kInference);
  Tensor x({2, 2, 2}, {1, 0, 0, 1, 1, 1, 2, 3});
  auto y = ops::linear(tape, x, Tensor({2, 1}, {10, 1}), Tensor({1}, {0.5}));
  CHECK(y.shape() == Shape{2, 2, 1});
  CHECK(values(y) == std::vector<double>{10.5, 1.5, 11.5, 23.5});
}

TEST_CASE("linear shape mismatch names both shapes") {
  Tape tape;
  try {
    ops::linear(tape, Tensor({2, 3}, std::vector<double>(6)), Tensor({4, 2}, std::vector<double>(8)),
                Tensor({2}, {0, 0}));
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    std::string msg = e.what();
    CHECK(msg.find("[2, 3]") != std::string::npos);
    CHECK(msg.find("[4, 2]") != std::string::npos);
  }
}

TEST_CASE("relu examples") {
  Tape tape;
  Tensor x({3}, {-1, 0, 2}, true);
  auto y = ops::relu(tape, x);
  CHECK(values(y) == std::vector<double>{0, 0, 2});

  Tape t2;
  Tensor neg({4}, {-1, -2, -0.5, -3}, true);
  auto loss = ops::sum(t2, ops::relu(t2, neg));
  CHECK(loss.item() == 0.0);
  backward(loss, t2);
  for (double g : neg.grad()) CHECK(g == 0.0);

  Tape t3;
  Tensor half({1}, {0.5}, true);
  auto l3 = ops::weighted_sum(t3, ops::relu(t3, half), std::vector<double>{3.0});
  backward(l3, t3);
  CHECK(half.grad()[0] == 3.0);
}

TEST_CASE("softmax examples and invariants") {
  Tape tape(Tape::Mode::kInference);
  auto u = ops::softmax(tape, Tensor({3}, {0, 0, 0}), 0);
  for (double p : u.data()) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  auto q = ops::softmax(tape, Tensor({2}, {0, std::log(3.0)}), 0);
  CHECK(std::abs(q.data()[0] - 0.25) < 1e-15);
  CHECK(std::abs(q.data()[1] - 0.75) < 1e-15);

  Rng rng(5);
  Tensor x = random_tensor({4, 7}, rng, 30.0, false);
  auto sx = ops::softmax(tape, x, -1);
  for (std::size_t r = 0; r < 4; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < 7; ++c) total += sx.at({r, c});
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
  for (double c : {-1000.0, 3.5, 700.0}) {
    auto shifted = ops::softmax(tape, ops::add_scalar(tape, x, c), -1);
    CHECK(ltm::test::max_abs_diff(values(shifted), values(sx)) < 1e-12);
  }

  // Softmax over a non-last axis.
  auto col = ops::softmax(tape, Tensor({2, 2}, {0, 5, std::log(3.0), 5}), 0);
  CHECK(std::abs(col.at({0, 0}) - 0.25) < 1e-15);
  CHECK(std::abs(col.at({1, 1}) - 0.5) < 1e-15);
}

TEST_CASE("layer_norm examples") {
  Tape tape(Tape::Mode::kInference);
  Tensor one({3}, {1, 1, 1});
  Tensor zero3({3}, {0, 0, 0});
  auto c = ops::layer_norm(tape, Tensor({3}, {4, 4, 4}), one, zero3);
  for (double v : c.data()) CHECK(v == 0.0);

  auto pm = ops::layer_norm(tape, Tensor({2}, {1, -1}), Tensor({2}, {1, 1}), Tensor({2}, {0, 0}));
  const double expect = 1.0 / std::sqrt(1.0 + ops::kLayerNormEps);
  CHECK(pm.data()[0] == doctest::Approx(expect).epsilon(1e-14));
  CHECK(pm.data()[1] == doctest::Approx(-expect).epsilon(1e-14));
  CHECK(std::abs(pm.data()[0] - 1.0) < 1e-5);

  Rng rng(1);
  Tensor x = random_tensor({5, 3}, rng, 4.0, false);
  auto g0 = ops::layer_norm(tape, x, Tensor({3}, {0, 0, 0}), Tensor({3}, {0.5, -1, 2}));
  for (std::size_t r = 0; r < 5; ++r) {
    CHECK(g0.at({r, 0}) == 0.5);
    CHECK(g0.at({r, 1}) == -1.0);
    CHECK(g0.at({r, 2}) == 2.0);
  }
}

TEST_CASE("backward contracts") {
  SUBCASE("sum of any shape gives all-ones") {
    Tape tape;
    Rng rng(2);
    Tensor x = random_tensor({2, 3, 4}, rng);
    backward(ops::sum(tape, x), tape);
    for (double g : x.grad()) CHECK(g == 1.0);
  }
  SUBCASE("non-scalar loss is rejected") {
    Tape tape;
    Tensor x({2}, {1, 2}, true);
    auto y = ops::relu(tape, x);
    CHECK_THROWS_AS(backward(y, tape), ContractError);
  }
  SUBCASE("loss from another tape is rejected") {
    Tape a;
    Tape b;
    Tensor x({2}, {1, 2}, true);
    auto loss = ops::sum(a, x);
    CHECK_THROWS_AS(backward(loss, b), ContractError);
  }
  SUBCASE("inference tape records nothing") {
    Tape tape(Tape::Mode::kInference);
    Tensor x({2}, {1, 2}, true);
    auto loss = ops::sum(tape, ops::relu(tape, x));
    CHECK(tape.size() == 0);
    CHECK_FALSE(loss.requires_grad());
  }
  SUBCASE("gradients accumulate across uses") {
    Tape tape;
    Tensor x({2}, {1, 2}, true);
    auto loss = ops::sum(tape, ops::add(tape, x, x));
    backward(loss, tape);
    for (double g : x.grad()) CHECK(g == 2.0);
  }
}

TEST_CASE("finite_diff_check on simple functions") {
  Tensor x({1}, {1.0}, true);
  // f(x) = x^2 through linear(x, x) with a zero bias.
  auto square = [&](Tape& tape) {
    Tensor w = ops::reshape(tape, x, {1, 1});
    return ops::sum(tape, ops::linear(tape, x, w, Tensor({1}, {0.0})));
  };
  auto r = finite_diff_check(square, {x}, 1e-5);
  CHECK(r.max_rel_error < 1e-8);
  CHECK(x.data()[0] == 1.0);

  Rng rng(3);
  Tensor in = random_tensor({3, 4}, rng, 1.0, false);
  Tensor w = random_tensor({4, 2}, rng);
  Tensor b = random_tensor({2}, rng);
  auto lin = probe([&](Tape& tape) { return ops::linear(tape, in, w, b); });
  CHECK(finite_diff_check(lin, {w, b}, 1e-5).max_rel_error < 1e-6);
}

TEST_CASE("every primitive op passes the finite-difference check") {
  Rng rng(11);
  const double h = 1e-5;
  const double tol = 1e-4;

  Tensor x = random_tensor({2, 3, 4}, rng, 2.0);
  // Keep relu inputs away from the kink so central differences are valid.
  Tensor xr = random_tensor({2, 3, 4}, rng, 2.0);
  for (double& v : xr.mutable_data()) v += v >= 0 ? 0.1 : -0.1;
  Tensor w = random_tensor({4, 5}, rng);
  Tensor b = random_tensor({5}, rng);
  Tensor suffix = random_tensor({3, 4}, rng);
  Tensor gain = random_tensor({4}, rng);
  Tensor bias = random_tensor({4}, rng);

  SUBCASE("linear") {
    CHECK(finite_diff_check(probe([&](Tape& t) { return ops::linear(t, x, w, b); }), {x, w, b}, h).max_rel_error <
          tol);
  }
  SUBCASE("relu") {
    CHECK(finite_diff_check(probe([&](Tape& t) { return ops::relu(t, xr); }), {xr}, h).max_rel_error < tol);
  }
  SUBCASE("softplus") {
    CHECK(finite_diff_check(probe([&](Tape& t) { return ops::softplus(t, x); }), {x}, h).max_rel_error < tol);
  }
  SUBCASE("add_scalar and broadcast add") {
    CHECK(finite_diff_check(probe([&](Tape& t) { return ops::add(t, ops::add_scalar(t, x, 0.3), suffix); }),
                            {x, suffix}, h)
              .max_rel_error < tol);
  }
  SUBCASE("softmax on each axis") {
    for (int axis : {0, 1, 2}) {
      CHECK(finite_diff_check(probe([&](Tape& t) { return ops::softmax(t, x, axis); }), {x}, h).max_rel_error <
            tol);
    }
  }
  SUBCASE("layer_norm") {
    CHECK(finite_diff_check(probe([&](Tape& t) { return ops::layer_norm(t, x, gain, bias); }), {x, gain, bias}, h)
              .max_rel_error < tol);
  }
  SUBCASE("attention") {
    Tensor q = random_tensor({2, 5, 4}, rng);
    Tensor k = random_tensor({2, 5, 4}, rng);
    Tensor v = random_tensor({2, 5, 4}, rng);
    for (bool causal : {true, false}) {
      for (std::size_t heads : {1u, 2u}) {
        auto f = probe([&](Tape& t) { return ops::multi_head_attention(t, q, k, v, heads, causal); });
        CHECK(finite_diff_check(f, {q, k, v}, h).max_rel_error < tol);
      }
    }
  }
  SUBCASE("reshape, mean and sum") {
    auto f = [&](Tape& t) {
      Tensor r = ops::reshape(t, x, {6, 4});
      return ops::add(t, ops::mean(t, ops::softplus(t, r)), ops::sum(t, ops::add_scalar(t, r, 1.0)));
    };
    CHECK(finite_diff_check(f, {x}, h).max_rel_error < tol);
  }
}

TEST_CASE("full model NLL gradients match central differences") {
  ModelConfig cfg;
  cfg.d_model = 4;
  cfg.n_heads = 2;
  cfg.n_layers = 2;
  cfg.seq_len = 6;
  Model model(cfg, 17);
  Rng rng(4);
  ltm::test::jitter_biases(model, rng);
  Tensor window = random_tensor({2, 6}, rng, 1.0, false);
  Tensor targets = random_tensor({2, 6}, rng, 1.0, false);
  Tensor mask = Tensor::full({2, 6}, 1.0);
  auto loss = [&](Tape& tape) { return nll_loss(tape, model.forward(tape, window), targets, mask); };
  std::vector<Tensor> params;
  for (auto& p : model.parameters()) params.push_back(p.value);
  auto report = finite_diff_check_multiscale(loss, params, ltm::test::kModelCheckSteps);
  CHECK(report.checked == model.parameter_count());
  CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("identical inputs give bit-identical outputs and gradients") {
  auto run = [](std::vector<double>& out, std::vector<double>& grad) {
    ModelConfig cfg;
    cfg.d_model = 8;
    cfg.n_heads = 2;
    cfg.n_layers = 1;
    cfg.seq_len = 16;
    Model model(cfg, 3);
    Rng rng(8);
    Tensor window = random_tensor({3, 16}, rng, 1.0, false);
    Tensor mask = Tensor::full({3, 16}, 1.0);
    Tape tape;
    auto params = model.forward(tape, window);
    auto loss = nll_loss(tape, params, window, mask);
    backward(loss, tape);
    out = values(params.mu);
    grad.assign(model.param("blocks.0.attn.query.weight").grad().begin(),
                model.param("blocks.0.attn.query.weight").grad().end());
  };
  std::vector<double> o1, g1, o2, g2;
  run(o1, g1);
  // Perturb the heap so the second run lands at different addresses.
  std::vector<std::vector<double>> noise(37, std::vector<double>(1013));
  run(o2, g2);
  CHECK(o1 == o2);
  CHECK(g1 == g2);
}
