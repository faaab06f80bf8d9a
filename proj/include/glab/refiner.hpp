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

#ifndef GLAB_REFINER_HPP_
#define GLAB_REFINER_HPP_

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "glab/evalnet.hpp"
#include "glab/gradient.hpp"
#include "glab/model.hpp"

namespace glab {

struct RefinerConfig {
  double alpha = 0.5;  // noise blend factor
  double beta = 1.0;   // weight of the privacy term
  double tau = 0.95;   // layer decay
  int iterations = 10;
  double epsilon = 0.01;  // may be +inf
  double step_size = 1.0;
  std::uint64_t seed = 0;

  void Validate() const;
};

// Nonnegative per-element weights aligned with a GradientVector.
using WeightVector = GradientVector;

// |grad * value| elementwise.
WeightVector ElementWeight(const GradientVector& grads, const Model& params);

// tau^i for the 1-based layer index i.
double LayerWeight(double tau, std::size_t i);

// |grad * value| * tau^i.
WeightVector UltimateWeight(const GradientVector& grads, const Model& params,
                            double tau);

// sum_i || w[i] * (dL(F(x_star), y)/d theta[i] - g[i]) ||^2, differentiable
// with respect to x_star.
Tensor UtilityMetric(const Model& model, const Tensor& x_star,
                     std::span<const int> labels,
                     const GradientVector& target_grads,
                     const WeightVector& weights);

// (1 - alpha) x + alpha v with v uniform on [0,1].
Tensor NoiseBlendInit(const Tensor& x, double alpha, std::uint64_t seed);

// Closest point to g_star inside the Euclidean ball of radius epsilon
// around g.
GradientVector ProjectGradients(const GradientVector& g_star,
                                const GradientVector& g, double epsilon);

struct RefineResult {
  Tensor x_star;
  GradientVector raw_grads;  // gradients of x_star
  GradientVector uploaded;   // raw_grads after projection
  GradientVector true_grads;
  // Entry 0 is the initialization; entry k is after step k.
  std::vector<double> objective_trace;
  std::vector<double> um_trace;
  std::vector<double> pm_trace;
  int halvings = 0;
  // Set when the objective was non-finite and the initialization was used.
  bool fallback = false;
  std::string warning;
};

// Gradient descent on UM - beta * mean D(x_star) from a noise-blended start,
// clipping to [0,1] after every step. `evalnet` may be null when beta is 0.
RefineResult Refine(const Model& model, const EvalNet* evalnet,
                    const Batch& batch, const RefinerConfig& cfg);

// d/du L(F_{u theta}(x), y) at u = 1, which equals grad . theta.
double QFunctionDerivative(const Model& model, const Batch& batch);

}  // namespace glab

#endif  // GLAB_REFINER_HPP_
