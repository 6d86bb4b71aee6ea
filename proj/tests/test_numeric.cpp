#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "test_util.hpp"
#include "vidembed/numeric/adam.hpp"
#include "vidembed/numeric/grad_check.hpp"
#include "vidembed/numeric/ops.hpp"

using namespace vidembed;
using vidembed::testing::expect_errc;
using vidembed::testing::random_tensor;

TEST(Tensor, RejectsInconsistentShape) {
  expect_errc(Errc::ShapeMismatch, [] { Tensor<float>({2, 3}, std::vector<float>(5)); });
  expect_errc(Errc::ShapeMismatch, [] { Tensor<float>({2, 0}, {}); });
  expect_errc(Errc::ShapeMismatch, [] { Tensor<float>({1, 1, 1, 1}, {1.0f}); });
}

TEST(Tensor, CopiesShareImmutableStorage) {
  auto a = Tensor<double>::matrix(2, 2, {1, 2, 3, 4});
  auto b = a;
  EXPECT_EQ(a.data().data(), b.data().data());
  EXPECT_EQ(a.at(1, 0), 3.0);
}

TEST(Matmul, IdentityAndHandExamples) {
  Tape<double> tape;
  auto m = tape.constant(Tensor<double>::matrix(2, 2, {1, 2, 3, 4}));
  auto id = tape.constant(Tensor<double>::identity(2));
  EXPECT_EQ(ops::matmul(id, m).value(), m.value());

  auto col = tape.constant(Tensor<double>::matrix(2, 1, {5, 6}));
  EXPECT_EQ(ops::matmul(m, col).value().to_vector(), (std::vector<double>{17, 39}));

  auto zero = tape.constant(Tensor<double>::zeros({3, 2}));
  auto any = tape.constant(random_tensor<double>({2, 4}, 1));
  EXPECT_EQ(ops::matmul(zero, any).value(), Tensor<double>::zeros({3, 4}));
}

TEST(Matmul, InnerExtentMismatch) {
  Tape<float> tape;
  auto a = tape.constant(Tensor<float>::zeros({2, 3}));
  auto b = tape.constant(Tensor<float>::zeros({2, 3}));
  expect_errc(Errc::ShapeMismatch, [&] { ops::matmul(a, b); });
}

TEST(Matmul, AssociativeOnRandomMatrices) {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    vidembed::CounterRng shape_rng(seed, 99);
    const std::size_t m = 1 + shape_rng.below(5), k = 1 + shape_rng.below(5), n = 1 + shape_rng.below(5),
                      p = 1 + shape_rng.below(5);
    Tape<double> tape;
    auto A = tape.constant(random_tensor<double>({m, k}, seed * 3));
    auto B = tape.constant(random_tensor<double>({k, n}, seed * 3 + 1));
    auto C = tape.constant(random_tensor<double>({n, p}, seed * 3 + 2));
    auto left = ops::matmul(ops::matmul(A, B), C).value();
    auto right = ops::matmul(A, ops::matmul(B, C)).value();
    for (std::size_t i = 0; i < left.size(); ++i)
      EXPECT_LE(std::abs(left[i] - right[i]), 1e-5 * std::max(1.0, std::abs(left[i])));
  }
}

TEST(CrossEntropy, UniformLogitsGiveLogC) {
  Tape<double> tape;
  auto z = tape.constant(Tensor<double>::filled({1, 4}, 0.7));
  for (std::size_t t = 0; t < 4; ++t)
    EXPECT_NEAR(ops::softmax_cross_entropy(z, t).value()[0], 1.3862943611198906, 1e-12);
}

TEST(CrossEntropy, ConfidentLogit) {
  Tape<double> tape;
  auto z = tape.constant(Tensor<double>::vector({10, 0, 0, 0}));
  // log1p(3·e^-10)
  EXPECT_NEAR(ops::softmax_cross_entropy(z, 0).value()[0], 1.3619051493825364e-4, 1e-15);
}

TEST(CrossEntropy, GradientIsSoftmaxMinusOneHot) {
  Tape<double> tape;
  auto z = tape.leaf(Tensor<double>({1, 2}, {0.0, 0.0}, true));
  tape.backward(ops::softmax_cross_entropy(z, 0));
  auto g = tape.grad(z);
  EXPECT_DOUBLE_EQ(g[0], -0.5);
  EXPECT_DOUBLE_EQ(g[1], 0.5);
}

TEST(CrossEntropy, BadTarget) {
  Tape<float> tape;
  auto z = tape.constant(Tensor<float>::zeros({1, 3}));
  expect_errc(Errc::IndexOutOfRange, [&] { ops::softmax_cross_entropy(z, 3); });
}

TEST(CrossEntropy, NonNegativeAndLogCOnlyWhenUniform) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    vidembed::CounterRng rng(seed, 5);
    const std::size_t c = 2 + rng.below(30);
    Tape<double> tape;
    auto z = tape.constant(random_tensor<double>({1, c}, seed, 20.0));
    const double loss = ops::softmax_cross_entropy(z, rng.below(c)).value()[0];
    EXPECT_GE(loss, 0.0);
    EXPECT_TRUE(std::isfinite(loss));
  }
  // Every non-uniform logit vector has at least one target below ln C.
  Tape<double> tape;
  auto z = tape.constant(Tensor<double>::vector({0.1, 0.0, 0.0}));
  EXPECT_LT(ops::softmax_cross_entropy(z, 0).value()[0], std::log(3.0));
}

TEST(Backward, SquareSumGivesTwoA) {
  Tape<double> tape;
  auto A = tape.leaf(random_tensor<double>({3, 2}, 4).with_requires_grad(true));
  tape.backward(ops::sum(ops::mul(A, A)));
  auto g = tape.grad(A);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_DOUBLE_EQ(g[i], 2.0 * A.value()[i]);
}

TEST(Backward, SumOfProductGivesOnesTimesBTransposed) {
  Tape<double> tape;
  auto A = tape.leaf(random_tensor<double>({2, 3}, 5).with_requires_grad(true));
  auto B = tape.constant(random_tensor<double>({3, 4}, 6));
  tape.backward(ops::sum(ops::matmul(A, B)));
  // (ones·Bᵀ)[i][p] = Σ_j B[p][j]
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t p = 0; p < 3; ++p) {
      double row_sum = 0.0;
      for (std::size_t j = 0; j < 4; ++j) row_sum += B.value().at(p, j);
      EXPECT_NEAR(tape.grad(A)[i * 3 + p], row_sum, 1e-12);
    }
}

TEST(Backward, SigmoidSlopeAtZero) {
  Tape<double> tape;
  auto x = tape.leaf(Tensor<double>({1}, {0.0}, true));
  tape.backward(ops::sum(ops::sigmoid(x)));
  EXPECT_DOUBLE_EQ(tape.grad(x)[0], 0.25);
}

TEST(Backward, FanOutAccumulates) {
  Tape<double> tape;
  auto x = tape.leaf(Tensor<double>({1}, {3.0}, true));
  auto y = ops::add(ops::scale(x, 2.0), ops::mul(x, x));  // 2x + x²
  tape.backward(ops::sum(y));
  EXPECT_DOUBLE_EQ(tape.grad(x)[0], 8.0);
}

TEST(Tape, DoubleBackwardNeedsReset) {
  Tape<double> tape;
  auto x = tape.leaf(Tensor<double>({1}, {1.0}, true));
  auto loss = ops::sum(ops::mul(x, x));
  tape.backward(loss);
  expect_errc(Errc::TapeConsumed, [&] { tape.backward(loss); });
  expect_errc(Errc::TapeConsumed, [&] { tape.leaf(Tensor<double>({1}, {1.0})); });
  tape.reset();
  auto x2 = tape.leaf(Tensor<double>({1}, {2.0}, true));
  tape.backward(ops::sum(ops::mul(x2, x2)));
  EXPECT_DOUBLE_EQ(tape.grad(x2)[0], 4.0);
}

TEST(Tape, NonScalarLossRejected) {
  Tape<double> tape;
  auto x = tape.leaf(Tensor<double>({2}, {1.0, 2.0}, true));
  expect_errc(Errc::NonScalarLoss, [&] { tape.backward(ops::scale(x, 2.0)); });
}

TEST(Tape, AdjointsReplayInReverseRecordingOrder) {
  Tape<double> tape;
  auto x = tape.leaf(random_tensor<double>({2, 2}, 8).with_requires_grad(true));
  auto a = ops::tanh(x);
  auto b = ops::mul(a, x);
  auto c = ops::sigmoid(b);
  auto loss = ops::sum(ops::add(c, a));
  tape.backward(loss);
  const auto& order = tape.visit_order();
  ASSERT_FALSE(order.empty());
  EXPECT_EQ(order.front(), loss.id);
  for (std::size_t i = 1; i < order.size(); ++i) EXPECT_LT(order[i], order[i - 1]);
}

TEST(Tape, ConstantsReceiveNoGradient) {
  Tape<double> tape;
  auto w = tape.leaf(Tensor<double>({1}, {2.0}, true));
  auto c = tape.constant(Tensor<double>({1}, {5.0}));
  tape.backward(ops::sum(ops::mul(w, c)));
  EXPECT_TRUE(tape.grad(c).empty());
  EXPECT_DOUBLE_EQ(tape.grad(w)[0], 5.0);
}

// Every differentiable primitive against central differences on random shapes.
TEST(GradCheck, EveryPrimitiveMatchesFiniteDifferences) {
  using Build = std::function<Var<double>(Tape<double>&, const std::vector<Var<double>>&)>;
  struct Case {
    const char* name;
    std::vector<Shape> shapes;
    Build op;
  };
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    vidembed::CounterRng rng(seed, 17);
    const std::size_t m = 1 + rng.below(4), n = 1 + rng.below(4), k = 1 + rng.below(4);
    std::vector<Case> cases = {
        {"matmul", {{m, k}, {k, n}}, [](auto&, const auto& v) { return ops::matmul(v[0], v[1]); }},
        {"add", {{m, n}, {m, n}}, [](auto&, const auto& v) { return ops::add(v[0], v[1]); }},
        {"add_row", {{m, n}, {n}}, [](auto&, const auto& v) { return ops::add_row(v[0], v[1]); }},
        {"mul", {{m, n}, {m, n}}, [](auto&, const auto& v) { return ops::mul(v[0], v[1]); }},
        {"scale", {{m, n}}, [](auto&, const auto& v) { return ops::scale(v[0], -1.7); }},
        {"sigmoid", {{m, n}}, [](auto&, const auto& v) { return ops::sigmoid(v[0]); }},
        {"tanh", {{m, n}}, [](auto&, const auto& v) { return ops::tanh(v[0]); }},
        {"relu", {{m, n}}, [](auto&, const auto& v) { return ops::relu(v[0]); }},
        {"transpose", {{m, n}}, [](auto&, const auto& v) { return ops::transpose(v[0]); }},
        {"softmax_rows", {{m, n}}, [](auto&, const auto& v) { return ops::softmax_rows(v[0]); }},
        {"layer_norm", {{m, n + 1}, {n + 1}, {n + 1}},
         [](auto&, const auto& v) { return ops::layer_norm_rows(v[0], v[1], v[2]); }},
        {"mean_rows", {{m, n}}, [](auto&, const auto& v) { return ops::mean_rows(v[0]); }},
        {"l2_normalize", {{1, n + 1}}, [](auto&, const auto& v) { return ops::l2_normalize(v[0]); }},
        {"slice_rows", {{m + 1, n}}, [m](auto&, const auto& v) { return ops::slice_rows(v[0], 1, m); }},
        {"slice_cols", {{m, n + 1}}, [n](auto&, const auto& v) { return ops::slice_cols(v[0], 1, n); }},
        {"concat_rows", {{m, n}, {k, n}}, [](auto&, const auto& v) { return ops::concat_rows<double>({v[0], v[1]}); }},
        {"concat_cols", {{m, n}, {m, k}}, [](auto&, const auto& v) { return ops::concat_cols<double>({v[0], v[1]}); }},
        {"reshape", {{m, n}}, [m, n](auto&, const auto& v) { return ops::reshape(v[0], {n * m}); }},
        {"cross_entropy", {{1, n + 1}}, [](auto&, const auto& v) { return ops::softmax_cross_entropy(v[0], 0); }},
    };
    for (const auto& c : cases) {
      std::vector<NamedTensor> params;
      for (std::size_t i = 0; i < c.shapes.size(); ++i)
        params.emplace_back(std::string(c.name) + "/" + std::to_string(i),
                            random_tensor<double>(c.shapes[i], seed * 100 + i, 1.5));
      // Weight the output by a fixed random tensor so every element matters.
      LossBuilder loss = [&](Tape<double>& tape, const std::vector<Var<double>>& v) {
        auto out = c.op(tape, v);
        auto w = tape.constant(random_tensor<double>(out.value().shape(), seed + 7));
        return ops::sum(ops::mul(out, w));
      };
      const auto report = grad_check(loss, params);
      EXPECT_TRUE(report.all_passed()) << c.name << " worst " << report.worst() << " seed " << seed;
    }
  }
}

TEST(GradCheck, ScalarSquare) {
  LossBuilder loss = [](Tape<double>&, const std::vector<Var<double>>& v) { return ops::sum(ops::mul(v[0], v[0])); };
  const auto report = grad_check(loss, {{"theta", Tensor<double>({1}, {3.0})}});
  ASSERT_EQ(report.entries.size(), 1u);
  EXPECT_TRUE(report.entries[0].passed);
  EXPECT_LT(report.entries[0].max_rel_error, 1e-9);
}

TEST(GradCheck, NonScalarFunctionRejected) {
  LossBuilder loss = [](Tape<double>&, const std::vector<Var<double>>& v) { return ops::scale(v[0], 2.0); };
  expect_errc(Errc::NonScalarLoss, [&] { grad_check(loss, {{"x", Tensor<double>({2}, {1.0, 2.0})}}); });
}

TEST(GradCheck, DetectsAWrongGradient) {
  // An op whose adjoint is deliberately off by a factor of two.
  LossBuilder loss = [](Tape<double>& tape, const std::vector<Var<double>>& v) {
    const double x = v[0].value()[0];
    return tape.record(Tensor<double>({1}, {x * x}), {v[0]}, [](Tape<double>& t, std::size_t self) {
      const double g = t.grad_buffer(self)[0];
      t.grad_buffer(t.inputs(self)[0])[0] += g * 4.0 * t.value(t.inputs(self)[0])[0];
    });
  };
  EXPECT_FALSE(grad_check(loss, {{"x", Tensor<double>({1}, {1.5})}}).all_passed());
}

TEST(Adam, ZeroGradientIsIdentity) {
  auto p = random_tensor<float>({3, 2}, 3);
  AdamState<float> s(p.shape());
  auto q = adam_step(p, Tensor<float>::zeros(p.shape()), s);
  EXPECT_EQ(q, p);
  EXPECT_EQ(s.t, 1u);
}

TEST(Adam, FirstStepOnScalar) {
  AdamState<double> s({1});
  auto q = adam_step(Tensor<double>({1}, {0.0}), Tensor<double>({1}, {1.0}), s);
  EXPECT_NEAR(q[0], -9.999999900000003e-4, 1e-15);
  // Bias correction at t = 1 recovers m̂ = g.
  EXPECT_DOUBLE_EQ(s.m[0] / (1.0 - 0.9), 1.0);
}

TEST(Adam, StepCounterAndShapes) {
  auto p = random_tensor<double>({2, 2}, 9);
  AdamState<double> s(p.shape());
  for (int i = 0; i < 5; ++i) p = adam_step(p, random_tensor<double>({2, 2}, 10 + i), s);
  EXPECT_EQ(s.t, 5u);
  expect_errc(Errc::ShapeMismatch, [&] { adam_step(p, Tensor<double>::zeros({4}), s); });
}

TEST(Fuzz, FiniteInputsGiveFiniteOutputs) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Tape<float> tape;
    auto x = tape.leaf(random_tensor<float>({4, 5}, seed, 80.0f).with_requires_grad(true));
    auto w = tape.leaf(random_tensor<float>({5, 5}, seed + 1000, 3.0f).with_requires_grad(true));
    auto g = tape.constant(Tensor<float>::filled({5}, 1.0f));
    auto b = tape.constant(Tensor<float>::zeros({5}));
    auto h = ops::layer_norm_rows(ops::matmul(x, w), g, b);
    auto a = ops::softmax_rows(ops::scale(ops::matmul(h, ops::transpose(h)), 10.0f));
    auto y = ops::add(ops::sigmoid(h), ops::tanh(ops::matmul(a, h)));
    auto loss = ops::softmax_cross_entropy(ops::scale(ops::l2_normalize(ops::mean_rows(y)), 50.0f), seed % 5);
    tape.backward(loss);
    for (auto v : {x, w, h, a, y, loss}) EXPECT_TRUE(v.value().all_finite()) << "seed " << seed;
    for (auto v : tape.grad(x)) EXPECT_TRUE(std::isfinite(v));
    for (auto v : tape.grad(w)) EXPECT_TRUE(std::isfinite(v));
  }
}
