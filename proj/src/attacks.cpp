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

#include "glab/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "glab/data.hpp"
#include "glab/errors.hpp"
#include "glab/random.hpp"

namespace glab {
namespace {

struct Problem {
  const Model* model;
  std::vector<Tensor> target;
  const AttackConfig* cfg;
  Shape x_shape;
  std::int64_t x_size = 0;
  std::int64_t classes = 0;
  bool joint_labels = false;
  std::vector<int> labels;

  double Evaluate(std::span<const double> p, std::vector<double>& grad) const {
    GradMode mode(true);
    Tensor x = Tensor::Leaf(
        x_shape, std::vector<double>(p.begin(), p.begin() + x_size));
    Tensor z;
    Tensor logits = Forward(*model, x);
    Tensor loss;
    if (joint_labels) {
      z = Tensor::Leaf({x_shape[0], classes},
                       std::vector<double>(p.begin() + x_size, p.end()));
      loss = ops::SoftCrossEntropy(logits, ops::Softmax(z));
    } else {
      loss = ops::SoftmaxCrossEntropy(logits, labels);
    }
    if (!std::isfinite(loss.item())) {
      return std::numeric_limits<double>::quiet_NaN();
    }
    std::vector<Tensor> grads = Grad(loss, model->parameters(), true);
    Tensor total = cfg->loss == MatchLoss::kEuclidean
                       ? ops::SquaredDistance(grads, target)
                       : ops::CosineDistance(grads, target);
    if (cfg->tv_weight > 0.0) {
      total = ops::Add(total, ops::Scale(TvPenalty(x), cfg->tv_weight));
    }
    if (cfg->l2_weight > 0.0) {
      total = ops::Add(total,
                       ops::Scale(ops::Sum(ops::Square(x)), cfg->l2_weight));
    }
    const double value = total.item();
    if (!std::isfinite(value)) return value;
    std::vector<Tensor> wrt{x};
    if (joint_labels) wrt.push_back(z);
    std::vector<Tensor> g = Grad(total, wrt);
    grad.assign(g[0].values().begin(), g[0].values().end());
    if (joint_labels) {
      grad.insert(grad.end(), g[1].values().begin(), g[1].values().end());
    }
    return value;
  }

  void Clip(std::span<double> p) const {
    for (std::int64_t i = 0; i < x_size; ++i) p[i] = std::clamp(p[i], 0.0, 1.0);
  }
};

struct RestartOutcome {
  std::vector<double> params;
  double loss = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> trace;
};

RestartOutcome RunRestart(const Problem& problem, std::vector<double> params) {
  const AttackConfig& cfg = *problem.cfg;
  RestartOutcome out;
  OptimizerState opt(cfg.optimizer, cfg.learning_rate);
  problem.Clip(params);
  std::vector<double> grad;
  double value = problem.Evaluate(params, grad);
  if (!std::isfinite(value)) return out;
  out.trace.push_back(value);
  Objective objective = [&](std::span<const double> p, std::vector<double>& g) {
    return problem.Evaluate(p, g);
  };
  Projection clip = [&](std::span<double> p) { problem.Clip(p); };
  int stalled = 0;
  for (int it = 0; it < cfg.iterations; ++it) {
    if (value == 0.0 ||
        std::all_of(grad.begin(), grad.end(), [](double v) { return v == 0.0; })) {
      break;
    }
    if (cfg.optimizer == OptimizerKind::kLbfgs) {
      StepReport report = opt.Step(params, grad, value, objective, clip);
      value = report.value;
      grad = std::move(report.gradient);
      stalled = report.sufficient_decrease ? 0 : stalled + 1;
    } else {
      opt.Step(params, grad);
      problem.Clip(params);
      value = problem.Evaluate(params, grad);
    }
    if (!std::isfinite(value)) return out;
    out.trace.push_back(value);
    if (stalled >= 2) break;
  }
  out.params = std::move(params);
  out.loss = value;
  return out;
}

}  // namespace

MatchLoss ParseMatchLoss(const std::string& name) {
  if (name == "euclidean") return MatchLoss::kEuclidean;
  if (name == "cosine") return MatchLoss::kCosine;
  throw ConfigError("unknown matching loss '" + name + "'");
}

std::string MatchLossName(MatchLoss loss) {
  return loss == MatchLoss::kEuclidean ? "euclidean" : "cosine";
}

void AttackConfig::Validate() const {
  if (iterations < 1) throw ConfigError("attack iterations must be >= 1");
  if (restarts < 1) throw ConfigError("attack restarts must be >= 1");
  for (double w : {tv_weight, l2_weight, bn_weight}) {
    if (!std::isfinite(w) || w < 0.0) {
      throw ConfigError("attack regularizer weights must be finite and >= 0");
    }
  }
  if (!(learning_rate > 0.0)) throw ConfigError("attack lr must be > 0");
}

AttackConfig AttackConfig::Preset(const std::string& name) {
  AttackConfig c;
  c.name = name;
  if (name == "igla") {
    c.loss = MatchLoss::kEuclidean;
    c.optimizer = OptimizerKind::kLbfgs;
    c.learning_rate = 1.0;
    c.iterations = 300;
  } else if (name == "invertinggrad") {
    c.loss = MatchLoss::kCosine;
    c.optimizer = OptimizerKind::kAdam;
    c.learning_rate = 0.01;
    c.iterations = 4000;
    c.tv_weight = 1e-4;
  } else if (name == "gradinversion") {
    c.loss = MatchLoss::kEuclidean;
    c.optimizer = OptimizerKind::kAdam;
    c.learning_rate = 0.01;
    c.iterations = 4000;
    c.tv_weight = 1e-4;
    c.l2_weight = 1e-6;
  } else {
    throw ConfigError("unknown attack preset '" + name + "'");
  }
  return c;
}

LabelInference InferLabels(const Model& model, const GradientVector& uploaded,
                           std::int64_t batch_size) {
  if (model.num_layers() == 0 ||
      model.layer(model.num_layers() - 1).kind != LayerKind::kDense) {
    throw UnsupportedError("label inference needs a dense final layer");
  }
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  const std::int64_t classes = model.num_outputs();
  const auto& last = uploaded.layers.back();
  if (static_cast<std::int64_t>(last.size()) < classes) {
    throw ShapeError("label inference: gradient layout does not match model");
  }
  std::vector<double> bias(last.end() - classes, last.end());
  LabelInference out;
  std::vector<int> order(classes);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return bias[a] < bias[b]; });
  if (!(bias[order[0]] < 0.0)) {
    out.fallback = true;
    return out;
  }
  for (std::int64_t i = 0; i < batch_size; ++i) {
    out.labels.push_back(order[i % classes]);
  }
  return out;
}

Tensor TvPenalty(const Tensor& x) { return ops::TotalVariation(x, 1e-8); }

ReconstructionResult GradientMatchAttack(const Model& model,
                                         const GradientVector& uploaded,
                                         const AttackConfig& cfg,
                                         std::int64_t batch_size,
                                         const std::optional<Tensor>& init,
                                         const std::vector<int>& labels) {
  cfg.Validate();
  Problem problem;
  problem.model = &model;
  problem.cfg = &cfg;
  problem.target = ToParameterTensors(model, uploaded);
  problem.x_shape = {batch_size};
  problem.x_shape.insert(problem.x_shape.end(), model.input_shape().begin(),
                         model.input_shape().end());
  problem.x_size = NumElements(problem.x_shape);
  problem.classes = model.num_outputs();

  ReconstructionResult result;
  if (cfg.infer_labels) {
    LabelInference inferred = InferLabels(model, uploaded, batch_size);
    result.labels_inferred = true;
    result.label_fallback = inferred.fallback;
    problem.joint_labels = inferred.fallback;
    problem.labels = inferred.labels;
  } else {
    if (static_cast<std::int64_t>(labels.size()) != batch_size) {
      throw ConfigError("attack needs one label per sample when inference is off");
    }
    problem.labels = labels;
  }
  if (init && init->shape() != problem.x_shape) {
    throw ShapeError("attack init has shape " + ShapeToString(init->shape()) +
                     ", expected " + ShapeToString(problem.x_shape));
  }

  std::vector<RestartOutcome> outcomes;
  for (int r = 0; r < cfg.restarts; ++r) {
    const std::uint64_t seed =
        DeriveSeed(cfg.seed, {0xa7, static_cast<std::uint64_t>(r)});
    std::vector<double> params;
    if (init) {
      params.assign(init->values().begin(), init->values().end());
    } else {
      params = SampleUniformNoise(problem.x_size, seed);
    }
    if (problem.joint_labels) {
      Rng rng(DeriveSeed(seed, {1}));
      for (std::int64_t k = 0; k < batch_size * problem.classes; ++k) {
        params.push_back(0.01 * rng.Normal());
      }
    }
    outcomes.push_back(RunRestart(problem, std::move(params)));
    result.restart_losses.push_back(outcomes.back().loss);
  }

  std::optional<std::size_t> best;
  for (std::size_t r = 0; r < outcomes.size(); ++r) {
    if (!std::isfinite(outcomes[r].loss)) continue;
    if (!best || outcomes[r].loss < outcomes[*best].loss) best = r;
  }
  if (!best) {
    throw NumericError("attack '" + cfg.name + "': all " +
                       std::to_string(cfg.restarts) +
                       " restarts produced non-finite losses (seed " +
                       std::to_string(cfg.seed) + ")");
  }
  const RestartOutcome& win = outcomes[*best];
  result.best_restart = *best;
  result.final_loss = win.loss;
  result.loss_trace = win.trace;
  result.x_hat = Tensor::Constant(
      problem.x_shape,
      std::vector<double>(win.params.begin(), win.params.begin() + problem.x_size));
  if (problem.joint_labels) {
    result.labels.clear();
    for (std::int64_t s = 0; s < batch_size; ++s) {
      auto row = win.params.begin() + problem.x_size + s * problem.classes;
      result.labels.push_back(static_cast<int>(
          std::max_element(row, row + problem.classes) - row));
    }
  } else {
    result.labels = problem.labels;
  }
  return result;
}

}  // namespace glab
