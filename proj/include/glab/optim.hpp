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

#ifndef GLAB_OPTIM_HPP_
#define GLAB_OPTIM_HPP_

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace glab {

enum class OptimizerKind { kPlainGd, kAdam, kLbfgs };

OptimizerKind ParseOptimizerKind(const std::string& name);
std::string OptimizerKindName(OptimizerKind kind);

// Objective evaluated at a point: returns f and writes the gradient.
using Objective =
    std::function<double(std::span<const double> x, std::vector<double>& grad)>;
// Maps a point onto the feasible set in place (e.g. box clipping).
using Projection = std::function<void(std::span<double> x)>;

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct LbfgsHyper {
  std::size_t memory = 10;
  double armijo = 1e-4;
  int max_trials = 20;
};

struct StepReport {
  double value = 0.0;           // objective at the accepted point (lbfgs)
  std::vector<double> gradient;  // gradient at the accepted point (lbfgs)
  double step_length = 0.0;
  int line_search_trials = 0;
  bool sufficient_decrease = true;
};

// Holds per-run optimizer state. Steps with non-finite gradients are rejected
// with a NumericError and leave both the parameters and the state untouched.
class OptimizerState {
 public:
  OptimizerState(OptimizerKind kind, double step_size, AdamHyper adam = {},
                 LbfgsHyper lbfgs = {});

  OptimizerKind kind() const { return kind_; }
  double step_size() const { return step_size_; }
  void set_step_size(double lr) { step_size_ = lr; }

  // Gradient-only update for plain-gd and adam.
  void Step(std::span<double> params, std::span<const double> grads);

  // L-BFGS update: two-loop recursion direction followed by backtracking
  // line search on `objective`. `value` and `grads` describe the current
  // point. `projection`, when set, is applied to every trial point.
  StepReport Step(std::span<double> params, std::span<const double> grads,
                  double value, const Objective& objective,
                  const Projection& projection = nullptr);

  std::int64_t adam_t() const { return t_; }
  std::span<const double> adam_m() const { return m_; }
  std::span<const double> adam_v() const { return v_; }
  std::size_t history_size() const { return s_history_.size(); }
  std::size_t memory() const { return lbfgs_.memory; }

 private:
  std::vector<double> LbfgsDirection(std::span<const double> grads) const;

  OptimizerKind kind_;
  double step_size_;
  AdamHyper adam_;
  LbfgsHyper lbfgs_;
  std::int64_t t_ = 0;
  std::vector<double> m_, v_;
  std::deque<std::vector<double>> s_history_, y_history_;
};

}  // namespace glab

#endif  // GLAB_OPTIM_HPP_
