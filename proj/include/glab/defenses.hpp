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

#ifndef GLAB_DEFENSES_HPP_
#define GLAB_DEFENSES_HPP_

#include <cstdint>
#include <optional>
#include <string>

#include "glab/evalnet.hpp"
#include "glab/gradient.hpp"
#include "glab/model.hpp"
#include "glab/refiner.hpp"

namespace glab {

enum class DefenseKind {
  kNone,
  kRefiner,
  kDpGaussian,
  kDpLaplace,
  kGq,
  kPrune,
  kSoteria,
};

DefenseKind ParseDefenseKind(const std::string& name);
std::string DefenseKindName(DefenseKind kind);

enum class PruneStrategy { kGrad, kWeight, kWeightGradProduct };

PruneStrategy ParsePruneStrategy(const std::string& name);
std::string PruneStrategyName(PruneStrategy strategy);

struct DefenseConfig {
  DefenseKind kind = DefenseKind::kNone;
  // Noise magnitude, bit count, prune ratio or refiner epsilon.
  double strength = 0.0;
  double clip_norm = 1.0;  // dp only
  PruneStrategy prune_strategy = PruneStrategy::kGrad;
  RefinerConfig refiner;  // epsilon is taken from `strength`
  std::uint64_t seed = 0;

  void Validate() const;
};

enum class NoiseKind { kGaussian, kLaplace };

// Global L2 clip to clip_norm, then i.i.d. noise of the given scale.
GradientVector DpPerturb(const GradientVector& g, NoiseKind kind,
                         double magnitude, double clip_norm,
                         std::uint64_t seed);

// Per-layer symmetric uniform quantization on [-M, M] with 2^bits levels.
GradientVector GqQuantize(const GradientVector& g, int bits);

// Zeroes the floor(ratio * N) entries with the smallest score.
GradientVector PruneGradients(const GradientVector& g, const Model& params,
                              double ratio, PruneStrategy strategy);

// Scores each input feature of the final dense layer by how strongly the
// representation reacts to the input, and zeroes the matching weight-gradient
// columns for the top `ratio` fraction.
GradientVector SoteriaDefense(const Model& model, const Batch& batch,
                              double ratio);

struct DefenseOutcome {
  GradientVector uploaded;
  std::optional<RefineResult> refine;  // refiner only
};

// Computes the client's gradients on `batch` and applies the defense.
DefenseOutcome ApplyDefense(const Model& model, const Batch& batch,
                            const DefenseConfig& cfg,
                            const EvalNet* evalnet = nullptr);

}  // namespace glab

#endif  // GLAB_DEFENSES_HPP_
