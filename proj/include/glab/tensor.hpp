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

#ifndef GLAB_TENSOR_HPP_
#define GLAB_TENSOR_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "glab/errors.hpp"

namespace glab {

using Shape = std::vector<std::int64_t>;

std::int64_t NumElements(const Shape& shape);
std::string ShapeToString(const Shape& shape);

class Tensor;
struct Node;

// Which parents of a node need a gradient during one backward pass.
using Needs = std::vector<bool>;

// Gradient of a node's output with respect to each of its parents, given the
// upstream gradient. `self` is the node's own output, so closures never need
// to hold a reference to it. Entries whose `needs` flag is false may be left
// default-constructed.
using BackwardFn = std::function<std::vector<Tensor>(
    const Tensor& grad, const Tensor& self, const Needs& needs)>;

struct Node {
  Shape shape;
  std::vector<double> values;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn backward;
  const char* op = "leaf";
};

// Handle to a node in a recorded computation. Copies share the node; use
// Clone() for an independent value copy.
class Tensor {
 public:
  Tensor();

  static Tensor Leaf(Shape shape, std::vector<double> values,
                     bool requires_grad = true);
  static Tensor Constant(Shape shape, std::vector<double> values);
  static Tensor Zeros(const Shape& shape);
  static Tensor Full(const Shape& shape, double value);
  static Tensor Scalar(double value);

  const Shape& shape() const { return node_->shape; }
  std::int64_t numel() const { return NumElements(node_->shape); }
  std::int64_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t ndim() const { return node_->shape.size(); }

  std::span<const double> values() const { return node_->values; }
  // In-place edits are only legal on leaves.
  std::span<double> mutable_values();
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return node_->parents.empty(); }
  const char* op() const { return node_->op; }

  // Fresh leaf with copied values and no history.
  Tensor Detach(bool requires_grad = false) const;
  Tensor Clone() const { return Detach(requires_grad()); }

  const std::shared_ptr<Node>& node() const { return node_; }
  bool same_node(const Tensor& other) const { return node_ == other.node_; }

  // Builds an op result. The trace is recorded only when grad mode is on and
  // at least one input requires a gradient.
  static Tensor FromOp(const char* op, Shape shape, std::vector<double> values,
                       std::vector<Tensor> inputs, BackwardFn backward);

 private:
  friend std::vector<Tensor> Grad(const Tensor&, const std::vector<Tensor>&,
                                  bool);
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  std::shared_ptr<Node> node_;
};

// Grad mode is thread-local: independent workers build independent graphs.
bool GradModeEnabled();

class GradMode {
 public:
  explicit GradMode(bool enabled);
  ~GradMode();
  GradMode(const GradMode&) = delete;
  GradMode& operator=(const GradMode&) = delete;

 private:
  bool previous_;
};

class NoGrad : public GradMode {
 public:
  NoGrad() : GradMode(false) {}
};

// Returns d root / d input for every entry in `inputs` by reverse
// accumulation. With `create_graph` the backward pass is itself recorded, so
// the returned tensors can be differentiated again. Inputs not reachable from
// the root receive zeros.
std::vector<Tensor> Grad(const Tensor& root, const std::vector<Tensor>& inputs,
                         bool create_graph = false);

// Primal value of a scalar root.
double Evaluate(const Tensor& root);

}  // namespace glab

#endif  // GLAB_TENSOR_HPP_
