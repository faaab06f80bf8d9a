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

#ifndef GLAB_ATTACKS_HPP_
#define GLAB_ATTACKS_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "glab/gradient.hpp"
#include "glab/model.hpp"
#include "glab/optim.hpp"

namespace glab {

enum class MatchLoss { kEuclidean, kCosine };

MatchLoss ParseMatchLoss(const std::string& name);
std::string MatchLossName(MatchLoss loss);

struct AttackConfig {
  std::string name = "igla";
  MatchLoss loss = MatchLoss::kEuclidean;
  double tv_weight = 0.0;
  double l2_weight = 0.0;
  // Batch-norm statistics prior; desk models have no BN layers, so it has
  // no effect.
  double bn_weight = 0.0;
  OptimizerKind optimizer = OptimizerKind::kLbfgs;
  double learning_rate = 1.0;
  int iterations = 300;
  int restarts = 1;
  bool infer_labels = true;
  std::uint64_t seed = 0;

  void Validate() const;
  // "igla", "invertinggrad" or "gradinversion".
  static AttackConfig Preset(const std::string& name);
};

struct LabelInference {
  std::vector<int> labels;
  // No negative bias-gradient entry was found; labels must be optimized.
  bool fallback = false;
};

// Reads the sign pattern of the final dense layer's bias gradient.
LabelInference InferLabels(const Model& model, const GradientVector& uploaded,
                           std::int64_t batch_size);

// Anisotropic total variation with smooth absolute value.
Tensor TvPenalty(const Tensor& x);

struct ReconstructionResult {
  Tensor x_hat;  // (n, c, h, w) in [0,1]
  std::vector<int> labels;
  bool labels_inferred = false;
  bool label_fallback = false;
  double final_loss = 0.0;
  std::vector<double> restart_losses;  // NaN for discarded restarts
  std::size_t best_restart = 0;
  std::vector<double> loss_trace;  // objective per iteration, best restart
};

// Optimizes dummy inputs until their gradients match `uploaded`. Only the
// model snapshot and the uploaded gradients are visible to the attacker.
// `init` replaces the uniform random start when given. `labels` is used
// when cfg.infer_labels is false.
ReconstructionResult GradientMatchAttack(
    const Model& model, const GradientVector& uploaded,
    const AttackConfig& cfg, std::int64_t batch_size,
    const std::optional<Tensor>& init = std::nullopt,
    const std::vector<int>& labels = {});

}  // namespace glab

#endif  // GLAB_ATTACKS_HPP_
