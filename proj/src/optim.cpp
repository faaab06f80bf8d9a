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

#include "glab/optim.hpp"

#include <algorithm>
#include <cmath>

#include "glab/errors.hpp"

namespace glab {
namespace {

void RequireFinite(std::span<const double> grads) {
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw NumericError("optimizer step rejected: non-finite gradient at "
                         "element " + std::to_string(i));
    }
  }
}

double Dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

OptimizerKind ParseOptimizerKind(const std::string& name) {
  if (name == "adam") return OptimizerKind::kAdam;
  if (name == "lbfgs" || name == "l-bfgs") return OptimizerKind::kLbfgs;
  if (name == "gd" || name == "plain-gd" || name == "sgd") {
    return OptimizerKind::kPlainGd;
  }
  throw ConfigError("unknown optimizer '" + name + "'");
}

std::string OptimizerKindName(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::kAdam:
      return "adam";
    case OptimizerKind::kLbfgs:
      return "lbfgs";
    case OptimizerKind::kPlainGd:
      return "gd";
  }
  return "?";
}

OptimizerState::OptimizerState(OptimizerKind kind, double step_size,
                               AdamHyper adam, LbfgsHyper lbfgs)
    : kind_(kind), step_size_(step_size), adam_(adam), lbfgs_(lbfgs) {
  if (!(step_size > 0.0)) throw ConfigError("optimizer step size must be > 0");
  if (lbfgs_.memory == 0) throw ConfigError("lbfgs memory must be >= 1");
}

void OptimizerState::Step(std::span<double> params,
                          std::span<const double> grads) {
  if (params.size() != grads.size()) {
    throw ShapeError("optimizer: params/grads length mismatch");
  }
  RequireFinite(grads);
  switch (kind_) {
    case OptimizerKind::kPlainGd:
      for (std::size_t i = 0; i < params.size(); ++i) {
        params[i] -= step_size_ * grads[i];
      }
      return;
    case OptimizerKind::kAdam: {
      if (m_.empty()) {
        m_.assign(params.size(), 0.0);
        v_.assign(params.size(), 0.0);
      } else if (m_.size() != params.size()) {
        throw ShapeError("adam: parameter count changed between steps");
      }
      ++t_;
      const double c1 = 1.0 - std::pow(adam_.beta1, static_cast<double>(t_));
      const double c2 = 1.0 - std::pow(adam_.beta2, static_cast<double>(t_));
      for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = adam_.beta1 * m_[i] + (1.0 - adam_.beta1) * grads[i];
        v_[i] = adam_.beta2 * v_[i] + (1.0 - adam_.beta2) * grads[i] * grads[i];
        const double m_hat = m_[i] / c1;
        const double v_hat = v_[i] / c2;
        params[i] -= step_size_ * m_hat / (std::sqrt(v_hat) + adam_.eps);
      }
      return;
    }
    case OptimizerKind::kLbfgs:
      throw ConfigError("lbfgs steps need an objective for the line search");
  }
}

std::vector<double> OptimizerState::LbfgsDirection(
    std::span<const double> grads) const {
  std::vector<double> q(grads.begin(), grads.end());
  const std::size_t k = s_history_.size();
  std::vector<double> alpha(k), rho(k);
  for (std::size_t j = k; j-- > 0;) {
    rho[j] = 1.0 / Dot(y_history_[j], s_history_[j]);
    alpha[j] = rho[j] * Dot(s_history_[j], q);
    for (std::size_t i = 0; i < q.size(); ++i) q[i] -= alpha[j] * y_history_[j][i];
  }
  if (k > 0) {
    const double gamma = Dot(s_history_[k - 1], y_history_[k - 1]) /
                         Dot(y_history_[k - 1], y_history_[k - 1]);
    for (double& v : q) v *= gamma;
  }
  for (std::size_t j = 0; j < k; ++j) {
    const double beta = rho[j] * Dot(y_history_[j], q);
    for (std::size_t i = 0; i < q.size(); ++i) {
      q[i] += s_history_[j][i] * (alpha[j] - beta);
    }
  }
  for (double& v : q) v = -v;
  return q;
}

StepReport OptimizerState::Step(std::span<double> params,
                                std::span<const double> grads, double value,
                                const Objective& objective,
                                const Projection& projection) {
  if (kind_ != OptimizerKind::kLbfgs) {
    Step(params, grads);
    return {};
  }
  if (params.size() != grads.size()) {
    throw ShapeError("optimizer: params/grads length mismatch");
  }
  RequireFinite(grads);
  if (!std::isfinite(value)) throw NumericError("lbfgs: non-finite objective");

  std::vector<double> direction = LbfgsDirection(grads);
  if (Dot(direction, grads) >= 0.0) {
    // Not a descent direction; restart from steepest descent.
    s_history_.clear();
    y_history_.clear();
    direction.assign(grads.begin(), grads.end());
    for (double& v : direction) v = -v;
  }

  const std::vector<double> start(params.begin(), params.end());
  std::vector<double> trial(params.size()), trial_grad;
  StepReport report;
  double t = step_size_;
  // First iteration without curvature information: scale to a unit step.
  if (s_history_.empty()) {
    const double norm = std::sqrt(Dot(direction, direction));
    if (norm > 0.0) t = std::min(step_size_, step_size_ / norm);
  }
  double trial_value = value;
  bool accepted = false;
  for (int trial_index = 0; trial_index < lbfgs_.max_trials; ++trial_index) {
    for (std::size_t i = 0; i < trial.size(); ++i) {
      trial[i] = start[i] + t * direction[i];
    }
    if (projection) projection(trial);
    double predicted = 0.0;
    for (std::size_t i = 0; i < trial.size(); ++i) {
      predicted += grads[i] * (trial[i] - start[i]);
    }
    trial_value = objective(trial, trial_grad);
    report.line_search_trials = trial_index + 1;
    if (std::isfinite(trial_value) &&
        trial_value <= value + lbfgs_.armijo * predicted) {
      accepted = true;
      break;
    }
    t *= 0.5;
  }
  report.step_length = t;
  report.sufficient_decrease = accepted;
  if (!accepted || !std::isfinite(trial_value)) {
    // Keep the current point; drop stale curvature pairs.
    s_history_.clear();
    y_history_.clear();
    report.value = value;
    report.gradient.assign(grads.begin(), grads.end());
    return report;
  }

  std::vector<double> s(params.size()), y(params.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = trial[i] - start[i];
    y[i] = trial_grad[i] - grads[i];
  }
  if (Dot(s, y) > 1e-12 * std::max(1.0, Dot(y, y))) {
    s_history_.push_back(std::move(s));
    y_history_.push_back(std::move(y));
    while (s_history_.size() > lbfgs_.memory) {
      s_history_.pop_front();
      y_history_.pop_front();
    }
  }
  std::copy(trial.begin(), trial.end(), params.begin());
  report.value = trial_value;
  report.gradient = std::move(trial_grad);
  return report;
}

}  // namespace glab
