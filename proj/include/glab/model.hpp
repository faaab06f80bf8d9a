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

#ifndef GLAB_MODEL_HPP_
#define GLAB_MODEL_HPP_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "glab/gradient.hpp"
#include "glab/ops.hpp"
#include "glab/tensor.hpp"

namespace glab {

enum class LayerKind : std::uint8_t { kConv2d = 0, kDense = 1 };
enum class Activation : std::uint8_t { kNone = 0, kRelu = 1, kSigmoid = 2 };

Activation ParseActivation(const std::string& name);

struct Layer {
  LayerKind kind = LayerKind::kDense;
  Activation activation = Activation::kNone;
  std::int64_t stride = 1;   // conv only
  std::int64_t padding = 0;  // conv only
  Tensor weight;  // conv: (co,ci,kh,kw); dense: (out,in)
  Tensor bias;    // (co) / (out)
};

// Layered model with a fixed forward order; layer index i = 1..K maps to
// layers()[i-1]. Copies are deep: parameters are never shared between
// Model values.
class Model {
 public:
  // `input_shape` is the per-sample shape, e.g. (c,h,w) or (d).
  Model(Shape input_shape, std::vector<Layer> layers);

  Model(const Model& other);
  Model& operator=(const Model& other);
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  const Shape& input_shape() const { return input_shape_; }
  std::size_t num_layers() const { return layers_.size(); }
  const Layer& layer(std::size_t index) const { return layers_.at(index); }
  const std::vector<Layer>& layers() const { return layers_; }

  // Output feature count of the last layer.
  std::int64_t num_outputs() const;
  std::size_t num_parameters() const;

  // Parameter leaves in order W1, b1, W2, b2, ...
  std::vector<Tensor> parameters() const;

  // Parameter values laid out like a GradientVector.
  GradientVector ParameterValues() const;
  void SetParameterValues(const GradientVector& values);
  // theta <- theta - lr * update
  void ApplyUpdate(const GradientVector& update, double lr);
  // Model with every parameter multiplied by `factor`.
  Model Scaled(double factor) const;

  // FNV-1a over the raw parameter bytes.
  std::uint64_t Checksum() const;

  void Save(const std::string& path) const;
  static Model Load(const std::string& path);

 private:
  void Validate() const;

  Shape input_shape_;
  std::vector<Layer> layers_;
};

struct Batch {
  Tensor inputs;            // (n, ...) in [0,1]
  std::vector<int> labels;  // n entries

  std::int64_t size() const { return inputs.ndim() ? inputs.dim(0) : 0; }
};

// Logits (n, num_outputs). Throws ShapeError naming the offending layer.
Tensor Forward(const Model& model, const Tensor& inputs);
// Input of the final layer, flattened to (n, features).
Tensor ForwardFeatures(const Model& model, const Tensor& inputs);

Tensor Loss(const Model& model, const Tensor& inputs,
            std::span<const int> labels);
Tensor Loss(const Model& model, const Batch& batch);

// Converts per-parameter tensors (W1,b1,...) into a GradientVector.
GradientVector ToGradientVector(const Model& model,
                                const std::vector<Tensor>& per_parameter);
// Splits a GradientVector into per-parameter constant tensors.
std::vector<Tensor> ToParameterTensors(const Model& model,
                                       const GradientVector& grads);

// d loss / d theta, as graph tensors (differentiable when create_graph).
std::vector<Tensor> ParameterGradients(const Model& model,
                                       const Tensor& inputs,
                                       std::span<const int> labels,
                                       bool create_graph);
GradientVector ComputeGradients(const Model& model, const Tensor& inputs,
                                std::span<const int> labels);
GradientVector ComputeGradients(const Model& model, const Batch& batch);

using LossFn = std::function<Tensor(const Tensor& logits)>;
using GradientScalarFn =
    std::function<Tensor(const std::vector<Tensor>& parameter_grads)>;

struct SecondOrderResult {
  double value = 0.0;
  std::vector<Tensor> grads;  // d value / d x, then d value / d extra_wrt
};

// Differentiates scalar_fn(grad_theta loss_fn(F_theta(x))) with respect to x
// (and any extra leaves, e.g. soft labels). x must require grad.
SecondOrderResult GradThroughGrad(const Model& model, const LossFn& loss_fn,
                                  const Tensor& x,
                                  const GradientScalarFn& scalar_fn,
                                  const std::vector<Tensor>& extra_wrt = {});

struct SmallCnnOptions {
  Shape input_shape{3, 16, 16};
  Activation activation = Activation::kRelu;
  std::uint64_t seed = 0;
  // Optional dense hidden layer before the classifier; 0 disables it.
  std::int64_t hidden_width = 0;
};

// conv(5x5, stride 2) -> act -> conv(5x5, stride 2) -> act -> dense.
// width_scale multiplies the base channel counts (6, 12).
Model BuildSmallCnn(std::int64_t num_classes, std::int64_t width_scale,
                    const SmallCnnOptions& options = {});
// Dense stack over dims[0] inputs; hidden layers use `activation`.
Model BuildMlp(const std::vector<std::int64_t>& dims, std::uint64_t seed = 0,
               Activation activation = Activation::kRelu);

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weight and bias.
Layer MakeConvLayer(std::int64_t in_channels, std::int64_t out_channels,
                    std::int64_t kernel, std::int64_t stride,
                    std::int64_t padding, Activation activation,
                    std::uint64_t seed);
Layer MakeDenseLayer(std::int64_t in, std::int64_t out, Activation activation,
                     std::uint64_t seed);

}  // namespace glab

#endif  // GLAB_MODEL_HPP_
