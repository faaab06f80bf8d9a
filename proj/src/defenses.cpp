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

#include "glab/defenses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "glab/errors.hpp"
#include "glab/random.hpp"

namespace glab {

DefenseKind ParseDefenseKind(const std::string& name) {
  if (name == "none") return DefenseKind::kNone;
  if (name == "refiner") return DefenseKind::kRefiner;
  if (name == "dp_gaussian" || name == "dp") return DefenseKind::kDpGaussian;
  if (name == "dp_laplace") return DefenseKind::kDpLaplace;
  if (name == "gq") return DefenseKind::kGq;
  if (name == "prune") return DefenseKind::kPrune;
  if (name == "soteria") return DefenseKind::kSoteria;
  throw ConfigError("unknown defense '" + name + "'");
}

std::string DefenseKindName(DefenseKind kind) {
  switch (kind) {
    case DefenseKind::kNone: return "none";
    case DefenseKind::kRefiner: return "refiner";
    case DefenseKind::kDpGaussian: return "dp_gaussian";
    case DefenseKind::kDpLaplace: return "dp_laplace";
    case DefenseKind::kGq: return "gq";
    case DefenseKind::kPrune: return "prune";
    case DefenseKind::kSoteria: return "soteria";
  }
  return "unknown";
}

PruneStrategy ParsePruneStrategy(const std::string& name) {
  if (name == "grad") return PruneStrategy::kGrad;
  if (name == "weight") return PruneStrategy::kWeight;
  if (name == "weight_grad_product" || name == "product") {
    return PruneStrategy::kWeightGradProduct;
  }
  throw ConfigError("unknown prune strategy '" + name + "'");
}

std::string PruneStrategyName(PruneStrategy strategy) {
  switch (strategy) {
    case PruneStrategy::kGrad: return "grad";
    case PruneStrategy::kWeight: return "weight";
    case PruneStrategy::kWeightGradProduct: return "weight_grad_product";
  }
  return "unknown";
}

void DefenseConfig::Validate() const {
  const std::string name = DefenseKindName(kind);
  switch (kind) {
    case DefenseKind::kNone:
      return;
    case DefenseKind::kRefiner: {
      RefinerConfig r = refiner;
      r.epsilon = strength;
      r.Validate();
      return;
    }
    case DefenseKind::kDpGaussian:
    case DefenseKind::kDpLaplace:
      if (!(strength > 0.0) || !(clip_norm > 0.0)) {
        throw ConfigError(name + ": magnitude and clip norm must be > 0");
      }
      return;
    case DefenseKind::kGq:
      if (strength != std::floor(strength) || strength < 1 || strength > 28) {
        throw ConfigError("gq: bits must be an integer in 1..28, got " +
                          std::to_string(strength));
      }
      return;
    case DefenseKind::kPrune:
    case DefenseKind::kSoteria:
      if (!(strength > 0.0 && strength < 1.0)) {
        throw ConfigError(name + ": ratio must be in (0,1), got " +
                          std::to_string(strength));
      }
      return;
  }
}

GradientVector DpPerturb(const GradientVector& g, NoiseKind kind,
                         double magnitude, double clip_norm,
                         std::uint64_t seed) {
  if (!(magnitude > 0.0) || !(clip_norm > 0.0)) {
    throw ConfigError("dp: magnitude and clip norm must be > 0");
  }
  GradientVector out = g;
  const double norm = g.Norm();
  if (norm > clip_norm) out *= clip_norm / norm;
  Rng rng(seed);
  for (auto& layer : out.layers) {
    for (double& v : layer) {
      v += kind == NoiseKind::kGaussian ? magnitude * rng.Normal()
                                        : rng.Laplace(magnitude);
    }
  }
  return out;
}

GradientVector GqQuantize(const GradientVector& g, int bits) {
  if (bits < 1 || bits > 28) {
    throw ConfigError("gq: bits must be in 1..28, got " + std::to_string(bits));
  }
  const double steps = std::ldexp(1.0, bits) - 1.0;
  GradientVector out = g;
  for (auto& layer : out.layers) {
    double m = 0.0;
    for (double v : layer) m = std::max(m, std::abs(v));
    if (m == 0.0) continue;
    const double delta = 2.0 * m / steps;
    for (double& v : layer) {
      const double level = std::round((v + m) / delta);
      v = std::clamp(-m + level * delta, -m, m);
    }
  }
  return out;
}

GradientVector PruneGradients(const GradientVector& g, const Model& params,
                              double ratio, PruneStrategy strategy) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw ConfigError("prune: ratio must be in (0,1)");
  }
  std::vector<double> grads = g.Flatten();
  std::vector<double> scores(grads.size());
  if (strategy == PruneStrategy::kGrad) {
    for (std::size_t i = 0; i < grads.size(); ++i) scores[i] = std::abs(grads[i]);
  } else {
    GradientVector values = params.ParameterValues();
    if (!values.SameLayout(g)) {
      throw ShapeError("prune: gradient layout does not match model");
    }
    std::vector<double> theta = values.Flatten();
    for (std::size_t i = 0; i < grads.size(); ++i) {
      scores[i] = strategy == PruneStrategy::kWeight
                      ? std::abs(theta[i])
                      : std::abs(theta[i] * grads[i]);
    }
  }
  const std::size_t k = static_cast<std::size_t>(
      std::floor(ratio * static_cast<double>(grads.size())));
  std::vector<std::size_t> order(grads.size());
  std::iota(order.begin(), order.end(), 0);
  // Flat order is (layer, element), so a stable sort breaks ties correctly.
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });
  for (std::size_t i = 0; i < k; ++i) grads[order[i]] = 0.0;
  GradientVector out = g;
  out.AssignFlat(grads);
  return out;
}

GradientVector SoteriaDefense(const Model& model, const Batch& batch,
                              double ratio) {
  if (model.num_layers() == 0 ||
      model.layer(model.num_layers() - 1).kind != LayerKind::kDense) {
    throw UnsupportedError("soteria: final layer must be dense");
  }
  if (!(ratio >= 0.0 && ratio < 1.0)) {
    throw ConfigError("soteria: ratio must be in [0,1)");
  }
  GradientVector g = ComputeGradients(model, batch);
  const std::int64_t features =
      model.layer(model.num_layers() - 1).weight.dim(1);
  const std::size_t prune = static_cast<std::size_t>(
      std::floor(ratio * static_cast<double>(features)));
  if (prune == 0) return g;

  GradMode mode(true);
  Tensor x = Tensor::Leaf(batch.inputs.shape(),
                          std::vector<double>(batch.inputs.values().begin(),
                                              batch.inputs.values().end()));
  Tensor r = ForwardFeatures(model, x);  // (n, features)
  const std::int64_t n = r.dim(0);
  std::vector<double> scores(features);
  for (std::int64_t j = 0; j < features; ++j) {
    Tensor column = ops::Sum(ops::Narrow(r, 1, j, 1));
    Tensor dx = Grad(column, {x})[0];
    double norm = 0.0;
    for (double v : dx.values()) norm += v * v;
    double mag = 0.0;
    for (std::int64_t s = 0; s < n; ++s) mag += std::abs(r.values()[s * features + j]);
    scores[j] = std::sqrt(norm) / (mag + 1e-12);
  }
  std::vector<std::size_t> order(features);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  auto& last = g.layers.back();
  const std::int64_t outputs = model.num_outputs();
  for (std::size_t i = 0; i < prune; ++i) {
    for (std::int64_t o = 0; o < outputs; ++o) {
      last[o * features + static_cast<std::int64_t>(order[i])] = 0.0;
    }
  }
  return g;
}

DefenseOutcome ApplyDefense(const Model& model, const Batch& batch,
                            const DefenseConfig& cfg, const EvalNet* evalnet) {
  cfg.Validate();
  DefenseOutcome out;
  switch (cfg.kind) {
    case DefenseKind::kNone:
      out.uploaded = ComputeGradients(model, batch);
      break;
    case DefenseKind::kRefiner: {
      RefinerConfig r = cfg.refiner;
      r.epsilon = cfg.strength;
      r.seed = DeriveSeed(cfg.seed, {r.seed});
      out.refine = Refine(model, evalnet, batch, r);
      out.uploaded = out.refine->uploaded;
      break;
    }
    case DefenseKind::kDpGaussian:
    case DefenseKind::kDpLaplace:
      out.uploaded = DpPerturb(ComputeGradients(model, batch),
                               cfg.kind == DefenseKind::kDpGaussian
                                   ? NoiseKind::kGaussian
                                   : NoiseKind::kLaplace,
                               cfg.strength, cfg.clip_norm, cfg.seed);
      break;
    case DefenseKind::kGq:
      out.uploaded = GqQuantize(ComputeGradients(model, batch),
                                static_cast<int>(cfg.strength));
      break;
    case DefenseKind::kPrune:
      out.uploaded = PruneGradients(ComputeGradients(model, batch), model,
                                    cfg.strength, cfg.prune_strategy);
      break;
    case DefenseKind::kSoteria:
      out.uploaded = SoteriaDefense(model, batch, cfg.strength);
      break;
  }
  return out;
}

}  // namespace glab
