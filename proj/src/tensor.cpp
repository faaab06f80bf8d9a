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

#include "glab/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "glab/ops.hpp"

namespace glab {
namespace {

thread_local bool grad_mode_enabled = true;

void CheckValues(const Shape& shape, const std::vector<double>& values) {
  for (auto d : shape) {
    if (d < 0) throw ShapeError("negative dimension in " + ShapeToString(shape));
  }
  if (static_cast<std::int64_t>(values.size()) != NumElements(shape)) {
    throw ShapeError("value count " + std::to_string(values.size()) +
                     " does not match shape " + ShapeToString(shape));
  }
}

}  // namespace

std::int64_t NumElements(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string ShapeToString(const Shape& shape) {
  std::ostringstream out;
  out << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ')';
  return out.str();
}

Tensor::Tensor() : node_(std::make_shared<Node>()) {
  node_->shape = {1};
  node_->values = {0.0};
}

Tensor Tensor::Leaf(Shape shape, std::vector<double> values,
                    bool requires_grad) {
  CheckValues(shape, values);
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::Constant(Shape shape, std::vector<double> values) {
  return Leaf(std::move(shape), std::move(values), false);
}

Tensor Tensor::Zeros(const Shape& shape) {
  return Constant(shape, std::vector<double>(NumElements(shape), 0.0));
}

Tensor Tensor::Full(const Shape& shape, double value) {
  return Constant(shape, std::vector<double>(NumElements(shape), value));
}

Tensor Tensor::Scalar(double value) { return Constant({1}, {value}); }

std::span<double> Tensor::mutable_values() {
  if (!is_leaf()) throw Error("in-place edit of a non-leaf tensor");
  return node_->values;
}

double Tensor::item() const {
  if (numel() != 1) {
    throw ShapeError("item() on non-scalar tensor of shape " +
                     ShapeToString(shape()));
  }
  return node_->values[0];
}

Tensor Tensor::Detach(bool requires_grad) const {
  return Leaf(node_->shape, node_->values, requires_grad);
}

Tensor Tensor::FromOp(const char* op, Shape shape, std::vector<double> values,
                      std::vector<Tensor> inputs, BackwardFn backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->op = op;
  if (grad_mode_enabled) {
    const bool any = std::any_of(inputs.begin(), inputs.end(),
                                 [](const Tensor& t) { return t.requires_grad(); });
    if (any) {
      node->requires_grad = true;
      node->parents.reserve(inputs.size());
      for (auto& t : inputs) node->parents.push_back(t.node_);
      node->backward = std::move(backward);
    }
  }
  return Tensor(std::move(node));
}

bool GradModeEnabled() { return grad_mode_enabled; }

GradMode::GradMode(bool enabled) : previous_(grad_mode_enabled) {
  grad_mode_enabled = enabled;
}

GradMode::~GradMode() { grad_mode_enabled = previous_; }

std::vector<Tensor> Grad(const Tensor& root, const std::vector<Tensor>& inputs,
                         bool create_graph) {
  if (root.numel() != 1) {
    throw ShapeError("backward from non-scalar root of shape " +
                     ShapeToString(root.shape()));
  }
  for (const auto& in : inputs) {
    if (!in.requires_grad()) {
      throw Error("gradient requested for a tensor without requires_grad");
    }
  }

  // Iterative post-order DFS over nodes that require grad; parents are
  // visited in recorded order so the accumulation order is fixed.
  std::vector<std::shared_ptr<Node>> order;
  if (root.requires_grad()) {
    std::unordered_set<Node*> visited;
    std::vector<std::pair<std::shared_ptr<Node>, std::size_t>> stack;
    stack.emplace_back(root.node_, 0);
    visited.insert(root.node_.get());
    while (!stack.empty()) {
      auto& top = stack.back();
      if (top.second < top.first->parents.size()) {
        std::shared_ptr<Node> parent = top.first->parents[top.second++];
        if (parent->requires_grad && visited.insert(parent.get()).second) {
          stack.emplace_back(std::move(parent), 0);
        }
      } else {
        order.push_back(std::move(top.first));
        stack.pop_back();
      }
    }
  }

  // A node is relevant when some requested input is reachable from it;
  // gradients are only propagated along relevant edges.
  std::unordered_set<Node*> relevant;
  for (const auto& in : inputs) relevant.insert(in.node_.get());
  for (const auto& node : order) {
    for (const auto& parent : node->parents) {
      if (relevant.count(parent.get())) {
        relevant.insert(node.get());
        break;
      }
    }
  }

  GradMode mode(create_graph);
  std::unordered_map<Node*, Tensor> grads;
  if (root.requires_grad()) {
    grads.emplace(root.node_.get(), Tensor::Full(root.shape(), 1.0));
  }

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const std::shared_ptr<Node>& node = *it;
    if (node->parents.empty() || !node->backward) continue;
    auto found = grads.find(node.get());
    if (found == grads.end()) continue;
    if (!relevant.count(node.get())) continue;
    const Tensor grad = found->second;
    const Tensor self(node);
    Needs needs(node->parents.size());
    for (std::size_t i = 0; i < needs.size(); ++i) {
      Node* parent = node->parents[i].get();
      needs[i] = parent->requires_grad && relevant.count(parent) > 0;
    }
    std::vector<Tensor> parent_grads = node->backward(grad, self, needs);
    for (std::size_t i = 0; i < node->parents.size(); ++i) {
      if (!needs[i]) continue;
      Node* parent = node->parents[i].get();
      const Tensor& pg = parent_grads.at(i);
      if (pg.shape() != parent->shape) {
        throw ShapeError(std::string("backward of '") + node->op +
                         "' produced gradient of shape " +
                         ShapeToString(pg.shape()) + " for parent of shape " +
                         ShapeToString(parent->shape));
      }
      auto existing = grads.find(parent);
      if (existing == grads.end()) {
        grads.emplace(parent, pg);
      } else {
        existing->second = ops::Add(existing->second, pg);
      }
    }
  }

  std::vector<Tensor> result;
  result.reserve(inputs.size());
  for (const auto& in : inputs) {
    auto found = grads.find(in.node_.get());
    result.push_back(found == grads.end() ? Tensor::Zeros(in.shape())
                                          : found->second);
  }
  return result;
}

double Evaluate(const Tensor& root) {
  if (root.numel() != 1) {
    throw ShapeError("evaluate on non-scalar root of shape " +
                     ShapeToString(root.shape()));
  }
  return root.values()[0];
}

}  // namespace glab
