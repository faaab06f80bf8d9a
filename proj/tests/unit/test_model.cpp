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
#include <cstdio>
#include <filesystem>
#include <vector>

#include "doctest.h"
#include "glab/errors.hpp"
#include "glab/model.hpp"
#include "glab/ops.hpp"
#include "test_util.hpp"

using namespace glab;
using glab::testing::MaxRelError;
using glab::testing::NumericGradient;
using glab::testing::RandomValues;
using glab::testing::ToVector;

namespace {

double Act(double v, Activation a) {
  if (a == Activation::kRelu) return v > 0 ? v : 0.0;
  if (a == Activation::kSigmoid) return 1.0 / (1.0 + std::exp(-v));
  return v;
}

// Straight-line forward pass written against the raw parameter arrays.
std::vector<double> ReferenceForward(const Model& m, const std::vector<double>& image) {
  std::vector<double> cur = image;
  std::int64_t c = m.input_shape()[0], h = m.input_shape()[1], w = m.input_shape()[2];
  for (const Layer& l : m.layers()) {
    auto wv = l.weight.values();
    auto bv = l.bias.values();
    if (l.kind == LayerKind::kConv2d) {
      const auto co = l.weight.dim(0), k = l.weight.dim(2);
      const auto s = l.stride, p = l.padding;
      const auto oh = (h + 2 * p - k) / s + 1, ow = (w + 2 * p - k) / s + 1;
      std::vector<double> out(co * oh * ow);
      for (std::int64_t o = 0; o < co; ++o)
        for (std::int64_t y = 0; y < oh; ++y)
          for (std::int64_t x = 0; x < ow; ++x) {
            double acc = bv[o];
            for (std::int64_t i = 0; i < c; ++i)
              for (std::int64_t ky = 0; ky < k; ++ky)
                for (std::int64_t kx = 0; kx < k; ++kx) {
                  const auto iy = y * s - p + ky, ix = x * s - p + kx;
                  if (iy < 0 || ix < 0 || iy >= h || ix >= w) continue;
                  acc += wv[((o * c + i) * k + ky) * k + kx] * cur[(i * h + iy) * w + ix];
                }
            out[(o * oh + y) * ow + x] = Act(acc, l.activation);
          }
      cur = std::move(out);
      c = co, h = oh, w = ow;
    } else {
      const auto out_n = l.weight.dim(0), in_n = l.weight.dim(1);
      std::vector<double> out(out_n);
      for (std::int64_t o = 0; o < out_n; ++o) {
        double acc = bv[o];
        for (std::int64_t i = 0; i < in_n; ++i) acc += wv[o * in_n + i] * cur[i];
        out[o] = Act(acc, l.activation);
      }
      cur = std::move(out);
    }
  }
  return cur;
}

Layer Dense(std::vector<double> w, std::vector<double> b, std::int64_t out, std::int64_t in,
            Activation act = Activation::kNone) {
  return Layer{LayerKind::kDense, act, 1, 0, Tensor::Leaf({out, in}, std::move(w)),
               Tensor::Leaf({out}, std::move(b))};
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("zero parameters give zero logits") {
  Model m({3}, {Dense(std::vector<double>(6, 0.0), {0, 0}, 2, 3)});
  Tensor out = Forward(m, Tensor::Constant({2, 3}, RandomValues(6, 1)));
  for (double v : out.values()) CHECK(v == 0.0);
}

TEST_CASE("1x1 dense layer computes w x + b") {
  Model m({1}, {Dense({2.0}, {1.0}, 1, 1)});
  CHECK(Forward(m, Tensor::Constant({1, 1}, {3.0})).values()[0] == 7.0);
}

TEST_CASE("small cnn forward matches a straight-line reimplementation") {
  for (Activation act : {Activation::kRelu, Activation::kSigmoid}) {
    SmallCnnOptions o;
    o.activation = act;
    o.seed = 9;
    o.hidden_width = act == Activation::kRelu ? 0 : 7;
    Model m = BuildSmallCnn(10, 1, o);
    auto img = RandomValues(3 * 16 * 16, 2, 0.0, 1.0);
    auto got = ToVector(Forward(m, Tensor::Constant({1, 3, 16, 16}, img)));
    auto want = ReferenceForward(m, img);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
  }
}

TEST_CASE("shape mismatch names the layer") {
  Model m = BuildSmallCnn(10, 1);
  try {
    Forward(m, Tensor::Zeros({1, 3, 12, 16}));
    FAIL("expected a shape error");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("layer") != std::string::npos);
  }
}

TEST_CASE("loss values") {
  Model m({2}, {Dense(std::vector<double>(20, 0.0), std::vector<double>(10, 0.0), 10, 2)});
  const std::vector<int> y{3};
  CHECK(Loss(m, Tensor::Constant({1, 2}, {0.3, 0.4}), y).item() ==
        doctest::Approx(std::log(10.0)).epsilon(1e-12));
  std::vector<double> confident(10, 0.0);
  confident[3] = 1e3;
  Model c({2}, {Dense(std::vector<double>(20, 0.0), confident, 10, 2)});
  CHECK(Loss(c, Tensor::Constant({1, 2}, {0.3, 0.4}), y).item() < 1e-12);
  const std::vector<int> bad{10};
  CHECK_THROWS(Loss(m, Tensor::Constant({1, 2}, {0.3, 0.4}), bad));
}

TEST_CASE("last bias gradient is softmax minus one-hot with one negative entry") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SmallCnnOptions o;
    o.seed = seed;
    o.activation = Activation::kSigmoid;
    Model m = BuildSmallCnn(10, 1, o);
    Tensor x = Tensor::Constant({1, 3, 16, 16}, RandomValues(768, seed + 50, 0, 1));
    const std::vector<int> y{static_cast<int>(seed % 10)};
    GradientVector g = ComputeGradients(m, x, y);
    auto logits = ToVector(Forward(m, x));
    double mx = logits[0], z = 0.0;
    for (double v : logits) mx = std::max(mx, v);
    for (double v : logits) z += std::exp(v - mx);
    const auto& last = g.layers.back();
    int negatives = 0;
    for (int k = 0; k < 10; ++k) {
      const double bias_grad = last[last.size() - 10 + k];
      const double want = std::exp(logits[k] - mx) / z - (k == y[0] ? 1.0 : 0.0);
      CHECK(bias_grad == doctest::Approx(want).epsilon(1e-12));
      if (bias_grad < 0) {
        ++negatives;
        CHECK(k == y[0]);
      }
    }
    CHECK(negatives == 1);
  }
}

TEST_CASE("parameter counts and determinism") {
  CHECK(BuildMlp({4, 3, 2}).num_layers() == 2);
  CHECK(BuildMlp({4, 3, 2}).num_parameters() == 23);
  CHECK(BuildSmallCnn(10, 1).Checksum() == BuildSmallCnn(10, 1).Checksum());
  SmallCnnOptions other;
  other.seed = 1;
  CHECK(BuildSmallCnn(10, 1).Checksum() != BuildSmallCnn(10, 1, other).Checksum());
  CHECK_THROWS_AS(BuildSmallCnn(10, 0), ConfigError);
}

TEST_CASE("small cnn checksum for seed 0 is pinned") {
  // Recorded from a fixed-seed run; changes only if initialization changes.
  Model m = BuildSmallCnn(10, 1);
  CHECK(m.num_parameters() == 456 + 1812 + 1930);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(m.Checksum()));
  CHECK(std::string(buf) == "6997c00d9837aec4");
}

TEST_CASE("parameter gradients match finite differences per architecture") {
  SmallCnnOptions o;
  o.input_shape = {2, 10, 10};
  o.seed = 3;
  o.hidden_width = 5;
  std::vector<Model> models{BuildMlp({6, 5, 4}, 1, Activation::kSigmoid),
                            BuildMlp({6, 5, 4}, 1, Activation::kRelu), BuildSmallCnn(4, 1, o)};
  o.activation = Activation::kSigmoid;
  models.push_back(BuildSmallCnn(4, 1, o));
  for (const Model& m : models) {
    Shape xs{2};
    xs.insert(xs.end(), m.input_shape().begin(), m.input_shape().end());
    Tensor x = Tensor::Constant(xs, RandomValues(NumElements(xs), 8, 0, 1));
    const std::vector<int> y{1, 3};
    auto analytic = ComputeGradients(m, x, y).Flatten();
    GradientVector layout = m.ParameterValues();
    auto f = [&](const std::vector<double>& flat) {
      Model copy = m;
      GradientVector v = layout;
      v.AssignFlat(flat);
      copy.SetParameterValues(v);
      NoGrad no_grad;
      return Loss(copy, x, y).item();
    };
    CHECK(MaxRelError(analytic, NumericGradient(f, layout.Flatten())) < 1e-4);
  }
}

TEST_CASE("save and load round trip is bit-identical") {
  SmallCnnOptions o;
  o.hidden_width = 8;
  o.activation = Activation::kSigmoid;
  Model m = BuildSmallCnn(10, 2, o);
  const auto path = (std::filesystem::temp_directory_path() / "glab_model_rt.ckpt").string();
  m.Save(path);
  Model back = Model::Load(path);
  std::filesystem::remove(path);
  Tensor x = Tensor::Constant({2, 3, 16, 16}, RandomValues(1536, 4, 0, 1));
  CHECK(ToVector(Forward(m, x)) == ToVector(Forward(back, x)));
  CHECK(back.Checksum() == m.Checksum());
}

}  // TEST_SUITE
