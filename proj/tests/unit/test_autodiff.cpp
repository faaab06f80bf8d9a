// Copyright 2026 The GLAB Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <cmath>
#include <functional>
#include <vector>

#include "doctest.h"
#include "glab/errors.hpp"
#include "glab/model.hpp"
#include "glab/ops.hpp"
#include "glab/optim.hpp"
#include "test_util.hpp"

using namespace glab;
using glab::testing::MaxRelError;
using glab::testing::NumericGradient;
using glab::testing::RandomLeaf;
using glab::testing::RandomValues;
using glab::testing::ToVector;

namespace {

using UnaryOp = std::function<Tensor(const Tensor&)>;

// Max relative error of d<op(x), r>/dx against central differences.
double FirstOrderError(const UnaryOp& op, const Shape& shape, std::uint64_t seed,
                       double lo = -1.0, double hi = 1.0) {
  Tensor x = RandomLeaf(shape, seed, lo, hi);
  Tensor y = op(x);
  Tensor r = Tensor::Constant(y.shape(), RandomValues(y.numel(), seed + 1));
  Tensor root = ops::Sum(ops::Mul(y, r));
  std::vector<double> analytic = ToVector(Grad(root, {x})[0]);
  auto f = [&](const std::vector<double>& v) {
    NoGrad no_grad;
    return ops::Sum(ops::Mul(op(Tensor::Constant(shape, v)), r)).item();
  };
  return MaxRelError(analytic, NumericGradient(f, ToVector(x)));
}

}  // namespace

TEST_SUITE("autodiff") {

TEST_CASE("evaluate returns the primal value of scalar roots") {
  CHECK(Evaluate(ops::Sum(Tensor::Full({2, 3}, 1.0))) == doctest::Approx(6.0));
  Tensor x = RandomLeaf({3, 4}, 1);
  CHECK(Evaluate(ops::Mse(x, x)) == 0.0);
  const std::vector<int> labels{2};
  CHECK(Evaluate(ops::SoftmaxCrossEntropy(Tensor::Zeros({1, 4}), labels)) ==
        doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK_THROWS_AS(Evaluate(Tensor::Zeros({2})), ShapeError);
}

TEST_CASE("backward of a dot product") {
  Tensor x = Tensor::Constant({2}, {1, 2});
  Tensor w = Tensor::Leaf({2}, {3, 4});
  auto g = Grad(ops::Dot(x, w), {w});
  CHECK(g[0].values()[0] == 1.0);
  CHECK(g[0].values()[1] == 2.0);
}

TEST_CASE("unreachable leaf gets a zero gradient") {
  Tensor a = Tensor::Leaf({2}, {1, 2});
  Tensor b = Tensor::Leaf({3}, {1, 2, 3});
  auto g = Grad(ops::Sum(ops::Square(a)), {a, b});
  for (double v : g[1].values()) CHECK(v == 0.0);
  CHECK_THROWS_AS(Grad(ops::Square(a), {a}), ShapeError);
}

TEST_CASE("second derivative through a recorded backward pass") {
  // d/dw ||d(w^2)/dw||^2 = d/dw 4w^2 = 8w = 24 at w = 3.
  Tensor w = Tensor::Leaf({1}, {3.0});
  auto g1 = Grad(ops::Sum(ops::Square(w)), {w}, true);
  CHECK(g1[0].values()[0] == doctest::Approx(6.0));
  auto g2 = Grad(ops::Sum(ops::Square(g1[0])), {w});
  CHECK(g2[0].values()[0] == doctest::Approx(24.0));
}

TEST_CASE("first-order gradients of every primitive match finite differences") {
  const double tol = 1e-4;
  const std::vector<int> labels{0, 2, 1};
  Tensor w_const = Tensor::Constant({4, 5}, RandomValues(20, 7));
  Tensor conv_w = Tensor::Constant({2, 3, 3, 3}, RandomValues(54, 8));
  Tensor other = Tensor::Constant({3, 4}, RandomValues(12, 9));
  struct Case {
    const char* name;
    UnaryOp op;
    Shape shape;
    double lo = -1.0, hi = 1.0;
  };
  const std::vector<Case> cases{
      {"matmul", [&](const Tensor& x) { return ops::MatMul(x, w_const); }, {3, 4}},
      {"matmul rhs", [&](const Tensor& x) { return ops::MatMul(other, x); }, {4, 2}},
      {"conv2d", [&](const Tensor& x) { return ops::Conv2d(x, conv_w, {1, 1}); }, {2, 3, 5, 5}},
      {"conv2d stride2",
       [&](const Tensor& x) { return ops::Conv2d(x, conv_w, {2, 0}); }, {1, 3, 7, 7}},
      {"conv2d weight",
       [&](const Tensor& x) {
         return ops::Conv2d(Tensor::Constant({1, 3, 5, 5}, RandomValues(75, 10)), x, {1, 1});
       },
       {2, 3, 3, 3}},
      {"relu", [](const Tensor& x) { return ops::Relu(x); }, {3, 4}},
      {"sigmoid", [](const Tensor& x) { return ops::Sigmoid(x); }, {3, 4}},
      {"exp", [](const Tensor& x) { return ops::Exp(x); }, {6}},
      {"log", [](const Tensor& x) { return ops::Log(x); }, {6}, 0.5, 2.0},
      {"sqrt", [](const Tensor& x) { return ops::Sqrt(x); }, {6}, 0.5, 2.0},
      {"softmax-ce",
       [&](const Tensor& x) { return ops::SoftmaxCrossEntropy(x, labels); }, {3, 4}},
      {"softmax", [](const Tensor& x) { return ops::Softmax(x); }, {3, 4}},
      {"mse", [&](const Tensor& x) { return ops::Mse(x, other); }, {3, 4}},
      {"cosine",
       [&](const Tensor& x) { return ops::CosineDistance({x}, {other}); }, {3, 4}},
      {"squared distance",
       [&](const Tensor& x) { return ops::SquaredDistance({x}, {other}); }, {3, 4}},
      {"total variation",
       [](const Tensor& x) { return ops::TotalVariation(x); }, {1, 2, 4, 4}},
      {"narrow", [](const Tensor& x) { return ops::Narrow(x, 1, 1, 2); }, {3, 4}},
      {"sum", [](const Tensor& x) { return ops::Sum(x); }, {3, 4}},
      {"mean", [](const Tensor& x) { return ops::Mean(x); }, {3, 4}},
  };
  for (const auto& c : cases) {
    CAPTURE(c.name);
    CHECK(FirstOrderError(c.op, c.shape, 100, c.lo, c.hi) < tol);
  }
}

TEST_CASE("grad through grad: closed form for L = (w x)^2") {
  // S = (dL/dw)^2 = (2 w x^2)^2, dS/dx = 16 w^2 x^3 = 128 at w = 1, x = 2.
  Model model({1}, {Layer{LayerKind::kDense, Activation::kNone, 1, 0,
                          Tensor::Leaf({1, 1}, {1.0}), Tensor::Leaf({1}, {0.0})}});
  Tensor x = Tensor::Leaf({1, 1}, {2.0});
  auto loss_fn = [](const Tensor& out) { return ops::Sum(ops::Square(out)); };
  auto scalar_fn = [](const std::vector<Tensor>& g) { return ops::Sum(ops::Square(g[0])); };
  SecondOrderResult r = GradThroughGrad(model, loss_fn, x, scalar_fn);
  CHECK(r.value == doctest::Approx(64.0));
  CHECK(r.grads[0].values()[0] == doctest::Approx(128.0));
}

TEST_CASE("grad through grad: zero when the target equals the current gradient") {
  Model model = BuildMlp({4, 5, 3}, 3, Activation::kSigmoid);
  Tensor x = RandomLeaf({2, 4}, 11, 0.0, 1.0);
  const std::vector<int> labels{1, 2};
  auto target = ParameterGradients(model, x.Detach(), labels, false);
  auto loss_fn = [&](const Tensor& logits) { return ops::SoftmaxCrossEntropy(logits, labels); };
  auto scalar_fn = [&](const std::vector<Tensor>& g) { return ops::SquaredDistance(g, target); };
  SecondOrderResult r = GradThroughGrad(model, loss_fn, x, scalar_fn);
  CHECK(r.value == doctest::Approx(0.0).epsilon(1e-15));
  for (double v : r.grads[0].values()) CHECK(v == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("grad through grad matches finite differences on random networks") {
  const std::vector<int> labels{0, 2};
  for (Activation act : {Activation::kSigmoid, Activation::kRelu}) {
    Model model = BuildMlp({5, 6, 3}, 21, act);
    auto target = ToParameterTensors(
        model, ComputeGradients(model, Tensor::Constant({2, 5}, RandomValues(10, 22, 0, 1)),
                                labels));
    auto loss_fn = [&](const Tensor& logits) { return ops::SoftmaxCrossEntropy(logits, labels); };
    auto scalar_fn = [&](const std::vector<Tensor>& g) { return ops::SquaredDistance(g, target); };
    Tensor x = RandomLeaf({2, 5}, 23, 0.0, 1.0);
    SecondOrderResult r = GradThroughGrad(model, loss_fn, x, scalar_fn);
    auto f = [&](const std::vector<double>& v) {
      GradMode on(true);
      Tensor xv = Tensor::Leaf({2, 5}, v);
      return GradThroughGrad(model, loss_fn, xv, scalar_fn).value;
    };
    CHECK(MaxRelError(ToVector(r.grads[0]), NumericGradient(f, ToVector(x))) < 1e-3);
  }
  // Convolutional model, cosine matching.
  SmallCnnOptions o;
  o.input_shape = {1, 12, 12};
  o.activation = Activation::kSigmoid;
  o.seed = 5;
  Model cnn = BuildSmallCnn(3, 1, o);
  const std::vector<int> one{1};
  auto target = ToParameterTensors(
      cnn, ComputeGradients(cnn, Tensor::Constant({1, 1, 12, 12}, RandomValues(144, 24, 0, 1)),
                            one));
  auto loss_fn = [&](const Tensor& logits) { return ops::SoftmaxCrossEntropy(logits, one); };
  auto scalar_fn = [&](const std::vector<Tensor>& g) { return ops::CosineDistance(g, target); };
  Tensor x = RandomLeaf({1, 1, 12, 12}, 25, 0.0, 1.0);
  SecondOrderResult r = GradThroughGrad(cnn, loss_fn, x, scalar_fn);
  auto f = [&](const std::vector<double>& v) {
    Tensor xv = Tensor::Leaf({1, 1, 12, 12}, v);
    return GradThroughGrad(cnn, loss_fn, xv, scalar_fn).value;
  };
  CHECK(MaxRelError(ToVector(r.grads[0]), NumericGradient(f, ToVector(x))) < 1e-3);
}

TEST_CASE("backward is linear") {
  Tensor x = RandomLeaf({3, 3}, 31);
  auto f = [&] { return ops::Sum(ops::Sigmoid(x)); };
  auto g = [&] { return ops::Sum(ops::Square(ops::Exp(x))); };
  const double a = 0.7, b = -1.3;
  auto combined = ToVector(Grad(ops::Add(ops::Scale(f(), a), ops::Scale(g(), b)), {x})[0]);
  auto gf = ToVector(Grad(f(), {x})[0]);
  auto gg = ToVector(Grad(g(), {x})[0]);
  for (std::size_t i = 0; i < combined.size(); ++i) {
    CHECK(combined[i] == doctest::Approx(a * gf[i] + b * gg[i]).epsilon(1e-10));
  }
}

TEST_CASE("relu subgradient at zero is zero") {
  Tensor x = Tensor::Leaf({3}, {-1.0, 0.0, 2.0});
  auto g = Grad(ops::Sum(ops::Relu(x)), {x});
  CHECK(g[0].values()[0] == 0.0);
  CHECK(g[0].values()[1] == 0.0);
  CHECK(g[0].values()[2] == 1.0);
}

TEST_CASE("results are bit-identical across repeated runs") {
  auto run = [] {
    Tensor x = RandomLeaf({2, 3, 6, 6}, 41);
    Tensor w = Tensor::Constant({4, 3, 3, 3}, RandomValues(108, 42));
    return ToVector(Grad(ops::Sum(ops::Sigmoid(ops::Conv2d(x, w, {1, 1}))), {x})[0]);
  };
  CHECK(run() == run());
}

TEST_CASE("no trace is recorded when no input requires a gradient") {
  Tensor a = Tensor::Constant({2}, {1, 2});
  Tensor b = ops::Mul(a, a);
  CHECK_FALSE(b.requires_grad());
  CHECK(b.is_leaf());
  Tensor c = Tensor::Leaf({2}, {1, 2});
  {
    NoGrad no_grad;
    CHECK_FALSE(ops::Mul(c, c).requires_grad());
  }
  CHECK(ops::Mul(c, c).requires_grad());
}

}  // TEST_SUITE

TEST_SUITE("optim") {

TEST_CASE("plain gradient descent step") {
  OptimizerState opt(OptimizerKind::kPlainGd, 1.0);
  std::vector<double> p{5.0};
  const std::vector<double> g{2.0};
  opt.Step(p, g);
  CHECK(p[0] == 3.0);
}

TEST_CASE("adam first step moves every element by the learning rate") {
  OptimizerState opt(OptimizerKind::kAdam, 0.01);
  std::vector<double> p(5, 0.0);
  const std::vector<double> g(5, 1.0);
  opt.Step(p, g);
  for (double v : p) CHECK(v == doctest::Approx(-0.01).epsilon(1e-6));
  CHECK(opt.adam_t() == 1);
  opt.Step(p, g);
  CHECK(opt.adam_t() == 2);
}

TEST_CASE("non-finite gradients are rejected without touching the state") {
  OptimizerState opt(OptimizerKind::kAdam, 0.01);
  std::vector<double> p{1.0, 2.0};
  const std::vector<double> bad{1.0, std::nan("")};
  CHECK_THROWS_AS(opt.Step(p, bad), NumericError);
  CHECK(p == std::vector<double>{1.0, 2.0});
  CHECK(opt.adam_t() == 0);
}

TEST_CASE("lbfgs solves a quadratic within 20 iterations") {
  const std::vector<double> c{1.0, -2.0, 3.0, 0.5};
  Objective f = [&](std::span<const double> p, std::vector<double>& g) {
    g.assign(p.size(), 0.0);
    double v = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double d = p[i] - c[i];
      v += (i + 1.0) * d * d;
      g[i] = 2.0 * (i + 1.0) * d;
    }
    return v;
  };
  OptimizerState opt(OptimizerKind::kLbfgs, 1.0);
  std::vector<double> p(4, 0.0), g;
  double value = f(p, g);
  for (int it = 0; it < 20 && value > 0.0; ++it) {
    StepReport r = opt.Step(p, g, value, f);
    value = r.value;
    g = r.gradient;
    CHECK(opt.history_size() <= opt.memory());
  }
  double dist = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) dist += (p[i] - c[i]) * (p[i] - c[i]);
  CHECK(std::sqrt(dist) < 1e-6);
}

TEST_CASE("lbfgs history stays within its memory bound") {
  Objective f = [](std::span<const double> p, std::vector<double>& g) {
    g.assign(p.size(), 0.0);
    double v = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      v += std::cosh(p[i]) + 0.1 * p[i] * p[i] * (i + 1);
      g[i] = std::sinh(p[i]) + 0.2 * p[i] * (i + 1);
    }
    return v;
  };
  OptimizerState opt(OptimizerKind::kLbfgs, 1.0, {}, LbfgsHyper{3, 1e-4, 20});
  std::vector<double> p(6, 2.0), g;
  double value = f(p, g);
  for (int it = 0; it < 15; ++it) {
    StepReport r = opt.Step(p, g, value, f);
    CHECK(r.value <= value);
    value = r.value;
    g = r.gradient;
    CHECK(opt.history_size() <= 3);
  }
}

}  // TEST_SUITE
