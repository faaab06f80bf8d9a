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

#ifndef GLAB_EVALNET_HPP_
#define GLAB_EVALNET_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "glab/data.hpp"
#include "glab/model.hpp"

namespace glab {

// Mixed image (1-r) * natural + r * uniform noise, labelled with r.
struct MixPair {
  std::vector<double> image;
  double target = 0.0;
};

std::vector<double> DefaultRatioGrid();  // {0, 0.1, ..., 1}

// One pair per (image, r); every pair draws fresh noise.
std::vector<MixPair> GenMixPairs(const Tensor& images,
                                 std::span<const double> r_grid,
                                 std::uint64_t seed);

struct EvalNetConfig {
  std::vector<std::int64_t> channels{16, 32, 64};
  double learning_rate = 1e-3;
  int batch_size = 128;
  int epochs = 20;
  std::vector<double> r_grid = DefaultRatioGrid();
  // Draw r ~ U(0,1) per pair instead of using the grid.
  bool continuous_ratio = false;
  std::uint64_t seed = 0;
};

// Scores how much of an image is uniform noise; output in [0,1].
class EvalNet {
 public:
  explicit EvalNet(Model model);

  const Model& model() const { return model_; }
  Model& mutable_model() { return model_; }

  // Per-image scores for (n,c,h,w) input, or a single (c,h,w) image.
  std::vector<double> Scores(const Tensor& x) const;
  // Mean score; differentiable with respect to x when x requires grad.
  Tensor MeanScore(const Tensor& x) const;

  void Save(const std::string& path) const { model_.Save(path); }
  static EvalNet Load(const std::string& path);

 private:
  Tensor Batched(const Tensor& x) const;
  Model model_;
};

// Three 3x3 stride-2 conv layers with ReLU, then a dense sigmoid output.
EvalNet BuildEvalNet(const Shape& image_shape,
                     const std::vector<std::int64_t>& channels,
                     std::uint64_t seed);

struct EvalNetTrainingLog {
  std::vector<double> epoch_loss;  // mean squared error per epoch
};

// Regresses D(mixed) onto r with mean squared error and Adam.
EvalNet TrainEvalNet(const Dataset& natural, const EvalNetConfig& cfg,
                     EvalNetTrainingLog* log = nullptr);

// Mean D(x) over the batch.
double PmScore(const EvalNet& net, const Tensor& x);

struct EvalNetQuality {
  std::vector<double> ratios;      // 0.1, ..., 0.9
  std::vector<double> mean_score;  // mean D per ratio
  double mean_abs_error = 0.0;     // over images and ratios
  double monotone_fraction = 0.0;  // images whose scores never decrease
  double noise_high_fraction = 0.0;    // D(pure noise) > 0.8
  double natural_low_fraction = 0.0;   // D(natural image) < 0.2
};

// Held-out check of D against the mixing ratio, with fresh noise per image.
EvalNetQuality EvaluateEvalNet(const EvalNet& net, const Dataset& held_out,
                               std::uint64_t seed);

}  // namespace glab

#endif  // GLAB_EVALNET_HPP_
