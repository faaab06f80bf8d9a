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

#include "glab/refiner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "glab/data.hpp"
#include "glab/errors.hpp"

namespace glab {
namespace {

constexpr int kMaxHalvings = 5;

struct Objective {
  double j = 0.0;
  double um = 0.0;
  double pm = 0.0;
  std::vector<double> grad;  // dJ/dx, empty unless requested
};

Objective EvaluateObjective(const Model& model, const EvalNet* evalnet,
                            const Tensor& x_values, std::span<const int> labels,
                            const GradientVector& g, const WeightVector& w,
                            double beta, bool with_grad) {
  GradMode mode(true);
  Objective out;
  out.j = std::numeric_limits<double>::quiet_NaN();
  try {
  Tensor x = Tensor::Leaf(x_values.shape(),
                          std::vector<double>(x_values.values().begin(),
                                              x_values.values().end()));
  Tensor um = UtilityMetric(model, x, labels, g, w);
  Tensor j = um;
  out.um = um.item();
  if (beta != 0.0) {
    Tensor pm = evalnet->MeanScore(x);
    out.pm = pm.item();
    j = ops::Sub(um, ops::Scale(pm, beta));
  } else if (evalnet != nullptr) {
    NoGrad no_grad;
    out.pm = evalnet->MeanScore(x).item();
  }
  out.j = j.item();
  if (with_grad && std::isfinite(out.j)) {
    Tensor gx = Grad(j, {x})[0];
    out.grad.assign(gx.values().begin(), gx.values().end());
  }
  } catch (const NumericError&) {
    out.j = std::numeric_limits<double>::quiet_NaN();
    out.grad.clear();
  }
  return out;
}

}  // namespace

void RefinerConfig::Validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ConfigError("refiner alpha must be in [0,1], got " +
                      std::to_string(alpha));
  }
  if (!(tau > 0.0 && tau <= 1.0)) {
    throw ConfigError("refiner tau must be in (0,1], got " +
                      std::to_string(tau));
  }
  if (!(epsilon > 0.0)) {
    throw ConfigError("refiner epsilon must be > 0, got " +
                      std::to_string(epsilon));
  }
  if (iterations < 1) throw ConfigError("refiner iterations must be >= 1");
  if (!(step_size > 0.0) || !std::isfinite(beta) || beta < 0.0) {
    throw ConfigError("refiner step size must be > 0 and beta >= 0");
  }
}

WeightVector ElementWeight(const GradientVector& grads, const Model& params) {
  GradientVector values = params.ParameterValues();
  if (!values.SameLayout(grads)) {
    throw ShapeError("element_weight: gradient layout does not match model");
  }
  for (std::size_t l = 0; l < values.layers.size(); ++l) {
    auto& v = values.layers[l];
    for (std::size_t k = 0; k < v.size(); ++k) {
      v[k] = std::abs(grads.layers[l][k] * v[k]);
    }
  }
  return values;
}

double LayerWeight(double tau, std::size_t i) {
  return std::pow(tau, static_cast<double>(i));
}

WeightVector UltimateWeight(const GradientVector& grads, const Model& params,
                            double tau) {
  WeightVector w = ElementWeight(grads, params);
  for (std::size_t l = 0; l < w.layers.size(); ++l) {
    const double lw = LayerWeight(tau, l + 1);
    for (double& v : w.layers[l]) v *= lw;
  }
  return w;
}

Tensor UtilityMetric(const Model& model, const Tensor& x_star,
                     std::span<const int> labels,
                     const GradientVector& target_grads,
                     const WeightVector& weights) {
  std::vector<Tensor> grads =
      ParameterGradients(model, x_star, labels, /*create_graph=*/true);
  std::vector<Tensor> g = ToParameterTensors(model, target_grads);
  std::vector<Tensor> w = ToParameterTensors(model, weights);
  Tensor total;
  for (std::size_t p = 0; p < grads.size(); ++p) {
    Tensor term = ops::Sum(ops::Square(ops::Mul(ops::Sub(grads[p], g[p]), w[p])));
    total = p == 0 ? term : ops::Add(total, term);
  }
  if (!std::isfinite(total.item())) {
    throw NumericError("utility metric is not finite");
  }
  return total;
}

Tensor NoiseBlendInit(const Tensor& x, double alpha, std::uint64_t seed) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ConfigError("noise blend alpha must be in [0,1]");
  }
  RequireUnitRange(x.values(), "noise_blend_init");
  std::vector<double> noise = SampleUniformNoise(x.numel(), seed);
  auto v = x.values();
  for (std::size_t i = 0; i < noise.size(); ++i) {
    noise[i] = std::clamp((1.0 - alpha) * v[i] + alpha * noise[i], 0.0, 1.0);
  }
  return Tensor::Constant(x.shape(), std::move(noise));
}

GradientVector ProjectGradients(const GradientVector& g_star,
                                const GradientVector& g, double epsilon) {
  if (!(epsilon > 0.0)) throw ConfigError("projection epsilon must be > 0");
  if (!g_star.SameLayout(g)) {
    throw ShapeError("project_gradients: layouts differ");
  }
  const double dist = Distance(g_star, g);
  if (dist <= epsilon) return g_star;
  GradientVector out = g_star - g;
  out *= epsilon / dist;
  out += g;
  return out;
}

RefineResult Refine(const Model& model, const EvalNet* evalnet,
                    const Batch& batch, const RefinerConfig& cfg) {
  cfg.Validate();
  if (cfg.beta != 0.0 && evalnet == nullptr) {
    throw ConfigError("refiner with beta > 0 needs an evaluation network");
  }
  RefineResult result;
  result.true_grads = ComputeGradients(model, batch);
  const GradientVector& g = result.true_grads;
  const WeightVector w = UltimateWeight(g, model, cfg.tau);

  Tensor x = NoiseBlendInit(batch.inputs, cfg.alpha, cfg.seed);
  Objective cur = EvaluateObjective(model, evalnet, x, batch.labels, g, w,
                                    cfg.beta, true);
  if (!std::isfinite(cur.j)) {
    result.fallback = true;
    result.warning = "non-finite refiner objective at initialization";
  } else {
    result.objective_trace.push_back(cur.j);
    result.um_trace.push_back(cur.um);
    result.pm_trace.push_back(cur.pm);
    std::vector<double> trial(x.numel());
    for (int it = 0; it < cfg.iterations; ++it) {
      double step = cfg.step_size;
      Objective next;
      Tensor candidate;
      for (int h = 0; h <= kMaxHalvings; ++h) {
        auto xv = x.values();
        for (std::size_t k = 0; k < trial.size(); ++k) {
          trial[k] = std::clamp(xv[k] - step * cur.grad[k], 0.0, 1.0);
        }
        candidate = Tensor::Constant(x.shape(), trial);
        next = EvaluateObjective(model, evalnet, candidate, batch.labels, g, w,
                                 cfg.beta, false);
        if (std::isfinite(next.j) && next.j <= cur.j) break;
        if (h < kMaxHalvings) {
          step *= 0.5;
          ++result.halvings;
        }
      }
      if (!std::isfinite(next.j)) {
        result.warning = "non-finite refiner objective; kept previous iterate";
        break;
      }
      x = candidate;
      cur = it + 1 < cfg.iterations
                ? EvaluateObjective(model, evalnet, x, batch.labels, g, w,
                                    cfg.beta, true)
                : next;
      result.objective_trace.push_back(cur.j);
      result.um_trace.push_back(cur.um);
      result.pm_trace.push_back(cur.pm);
    }
  }
  result.x_star = x;
  result.raw_grads = ComputeGradients(model, x, batch.labels);
  result.uploaded = std::isinf(cfg.epsilon)
                        ? result.raw_grads
                        : ProjectGradients(result.raw_grads, g, cfg.epsilon);
  return result;
}

double QFunctionDerivative(const Model& model, const Batch& batch) {
  return ComputeGradients(model, batch).Dot(model.ParameterValues());
}

}  // namespace glab
