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

#include "glab/evalnet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "glab/errors.hpp"
#include "glab/optim.hpp"
#include "glab/random.hpp"

namespace glab {

std::vector<double> DefaultRatioGrid() {
  std::vector<double> grid;
  for (int i = 0; i <= 10; ++i) grid.push_back(i / 10.0);
  return grid;
}

std::vector<MixPair> GenMixPairs(const Tensor& images,
                                 std::span<const double> r_grid,
                                 std::uint64_t seed) {
  RequireUnitRange(images.values(), "gen_mix_pairs");
  for (double r : r_grid) {
    if (!(r >= 0.0 && r <= 1.0)) {
      throw ConfigError("mixing ratio " + std::to_string(r) +
                        " outside [0,1]");
    }
  }
  const std::int64_t n = images.dim(0);
  const std::int64_t size = images.numel() / n;
  auto v = images.values();
  Rng rng(DeriveSeed(seed, {0x1c5}));
  std::vector<MixPair> pairs;
  pairs.reserve(n * r_grid.size());
  for (std::int64_t i = 0; i < n; ++i) {
    for (double r : r_grid) {
      MixPair p;
      p.target = r;
      p.image.resize(size);
      for (std::int64_t j = 0; j < size; ++j) {
        const double noise = rng.Uniform();
        p.image[j] = std::clamp((1.0 - r) * v[i * size + j] + r * noise, 0.0, 1.0);
      }
      pairs.push_back(std::move(p));
    }
  }
  return pairs;
}

EvalNet::EvalNet(Model model) : model_(std::move(model)) {
  const Layer& last = model_.layer(model_.num_layers() - 1);
  if (model_.num_outputs() != 1 || last.activation != Activation::kSigmoid) {
    throw ShapeError("evaluation network must end in a single sigmoid unit");
  }
}

Tensor EvalNet::Batched(const Tensor& x) const {
  if (x.shape() == model_.input_shape()) {
    Shape s{1};
    s.insert(s.end(), x.shape().begin(), x.shape().end());
    return ops::Reshape(x, s);
  }
  return x;
}

std::vector<double> EvalNet::Scores(const Tensor& x) const {
  NoGrad no_grad;
  Tensor out = Forward(model_, Batched(x));
  std::vector<double> scores(out.values().begin(), out.values().end());
  for (double s : scores) {
    if (!(s >= 0.0 && s <= 1.0)) {
      throw NumericError("evaluation network output " + std::to_string(s) +
                         " outside [0,1]");
    }
  }
  return scores;
}

Tensor EvalNet::MeanScore(const Tensor& x) const {
  return ops::Mean(Forward(model_, Batched(x)));
}

EvalNet EvalNet::Load(const std::string& path) {
  return EvalNet(Model::Load(path));
}

EvalNet BuildEvalNet(const Shape& image_shape,
                     const std::vector<std::int64_t>& channels,
                     std::uint64_t seed) {
  if (image_shape.size() != 3 || channels.empty()) {
    throw ConfigError("evaluation network needs (c,h,w) input and channels");
  }
  std::vector<Layer> layers;
  std::int64_t in = image_shape[0], h = image_shape[1], w = image_shape[2];
  const ops::Conv2dParams p{2, 1};
  for (std::size_t i = 0; i < channels.size(); ++i) {
    layers.push_back(MakeConvLayer(in, channels[i], 3, 2, 1, Activation::kRelu,
                                   DeriveSeed(seed, {0xe0, i})));
    in = channels[i];
    h = ops::ConvOutputSize(h, 3, p);
    w = ops::ConvOutputSize(w, 3, p);
  }
  layers.push_back(MakeDenseLayer(in * h * w, 1, Activation::kSigmoid,
                                  DeriveSeed(seed, {0xe1})));
  return EvalNet(Model(image_shape, std::move(layers)));
}

EvalNet TrainEvalNet(const Dataset& natural, const EvalNetConfig& cfg,
                     EvalNetTrainingLog* log) {
  if (natural.size() == 0) throw ConfigError("evaluation network needs data");
  if (cfg.batch_size < 1 || cfg.epochs < 1) {
    throw ConfigError("evaluation network batch size and epochs must be >= 1");
  }
  EvalNet net = BuildEvalNet(natural.image_shape, cfg.channels, cfg.seed);
  Model& model = net.mutable_model();
  OptimizerState adam(OptimizerKind::kAdam, cfg.learning_rate);

  const std::int64_t image_size = natural.image_size();
  const std::size_t per_image = cfg.continuous_ratio ? 1 : cfg.r_grid.size();
  const std::size_t total = static_cast<std::size_t>(natural.size()) * per_image;
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(DeriveSeed(cfg.seed, {0xe9, static_cast<std::uint64_t>(epoch)}));
    rng.Shuffle(order);
    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < total; start += cfg.batch_size) {
      const std::size_t count = std::min<std::size_t>(cfg.batch_size, total - start);
      std::vector<double> pixels(count * image_size);
      std::vector<double> targets(count);
      for (std::size_t b = 0; b < count; ++b) {
        const std::size_t id = order[start + b];
        const std::int64_t img = static_cast<std::int64_t>(id / per_image);
        const double r = cfg.continuous_ratio ? rng.Uniform()
                                              : cfg.r_grid[id % per_image];
        targets[b] = r;
        auto src = natural.image(img);
        for (std::int64_t j = 0; j < image_size; ++j) {
          pixels[b * image_size + j] = (1.0 - r) * src[j] + r * rng.Uniform();
        }
      }
      Shape shape{static_cast<std::int64_t>(count)};
      shape.insert(shape.end(), natural.image_shape.begin(),
                   natural.image_shape.end());
      Tensor x = Tensor::Constant(shape, std::move(pixels));
      Tensor y = Tensor::Constant({static_cast<std::int64_t>(count), 1},
                                  std::move(targets));
      Tensor loss = ops::Mse(Forward(model, x), y);
      const double value = loss.item();
      if (!std::isfinite(value)) {
        throw NumericError("evaluation network training diverged at epoch " +
                           std::to_string(epoch) + " (seed " +
                           std::to_string(cfg.seed) + ")");
      }
      GradientVector g = ToGradientVector(model, Grad(loss, model.parameters()));
      std::vector<double> flat = model.ParameterValues().Flatten();
      adam.Step(flat, g.Flatten());
      GradientVector updated = g;
      updated.AssignFlat(flat);
      model.SetParameterValues(updated);
      epoch_loss += value * static_cast<double>(count);
      seen += count;
    }
    if (log) log->epoch_loss.push_back(epoch_loss / static_cast<double>(seen));
  }
  return net;
}

double PmScore(const EvalNet& net, const Tensor& x) {
  RequireUnitRange(x.values(), "pm_score");
  auto scores = net.Scores(x);
  double s = 0.0;
  for (double v : scores) s += v;
  return s / static_cast<double>(scores.size());
}

EvalNetQuality EvaluateEvalNet(const EvalNet& net, const Dataset& held_out,
                               std::uint64_t seed) {
  if (held_out.size() == 0) throw ConfigError("evaluation set is empty");
  EvalNetQuality q;
  for (int i = 1; i <= 9; ++i) q.ratios.push_back(i / 10.0);
  q.mean_score.assign(q.ratios.size(), 0.0);
  std::vector<double> grid = q.ratios;
  grid.push_back(0.0);
  grid.push_back(1.0);
  const std::int64_t n = held_out.size();
  std::int64_t monotone = 0, noise_high = 0, natural_low = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    Shape shape{1};
    shape.insert(shape.end(), held_out.image_shape.begin(),
                 held_out.image_shape.end());
    auto src = held_out.image(i);
    Tensor image = Tensor::Constant(shape, {src.begin(), src.end()});
    std::vector<MixPair> pairs =
        GenMixPairs(image, grid, DeriveSeed(seed, {static_cast<std::uint64_t>(i)}));
    Shape batch_shape{static_cast<std::int64_t>(pairs.size())};
    batch_shape.insert(batch_shape.end(), held_out.image_shape.begin(),
                       held_out.image_shape.end());
    std::vector<double> pixels;
    for (const auto& p : pairs) pixels.insert(pixels.end(), p.image.begin(), p.image.end());
    std::vector<double> scores =
        net.Scores(Tensor::Constant(batch_shape, std::move(pixels)));
    bool ok = true;
    for (std::size_t r = 0; r < q.ratios.size(); ++r) {
      q.mean_score[r] += scores[r];
      q.mean_abs_error += std::abs(scores[r] - q.ratios[r]);
      if (r > 0 && scores[r] < scores[r - 1]) ok = false;
    }
    monotone += ok;
    natural_low += scores[q.ratios.size()] < 0.2;
    noise_high += scores[q.ratios.size() + 1] > 0.8;
  }
  for (double& m : q.mean_score) m /= static_cast<double>(n);
  q.mean_abs_error /= static_cast<double>(n * q.ratios.size());
  q.monotone_fraction = static_cast<double>(monotone) / static_cast<double>(n);
  q.noise_high_fraction = static_cast<double>(noise_high) / static_cast<double>(n);
  q.natural_low_fraction = static_cast<double>(natural_low) / static_cast<double>(n);
  return q;
}

}  // namespace glab
