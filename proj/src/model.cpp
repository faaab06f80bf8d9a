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

#include "glab/model.hpp"

#include <bit>
#include <cmath>

#include "glab/checkpoint.hpp"
#include "glab/random.hpp"

namespace glab {
namespace {

Tensor Activate(const Tensor& x, Activation a) {
  switch (a) {
    case Activation::kRelu:
      return ops::Relu(x);
    case Activation::kSigmoid:
      return ops::Sigmoid(x);
    case Activation::kNone:
      break;
  }
  return x;
}

std::string LayerName(std::size_t index, const Layer& layer) {
  return "layer " + std::to_string(index + 1) +
         (layer.kind == LayerKind::kConv2d ? " (conv2d)" : " (dense)");
}

Tensor ApplyLayer(const Layer& layer, std::size_t index, const Tensor& x) {
  if (layer.kind == LayerKind::kConv2d) {
    if (x.ndim() != 4 || x.dim(1) != layer.weight.dim(1)) {
      throw ShapeError(LayerName(index, layer) + ": input " +
                       ShapeToString(x.shape()) +
                       " incompatible with weight " +
                       ShapeToString(layer.weight.shape()));
    }
    Tensor y = ops::Conv2d(x, layer.weight, {layer.stride, layer.padding});
    return ops::AddChannelBias(y, layer.bias);
  }
  Tensor flat = x.ndim() == 2 ? x : ops::Flatten(x);
  if (flat.dim(1) != layer.weight.dim(1)) {
    throw ShapeError(LayerName(index, layer) + ": input " +
                     ShapeToString(x.shape()) + " has " +
                     std::to_string(flat.dim(1)) + " features, weight expects " +
                     std::to_string(layer.weight.dim(1)));
  }
  Tensor y = ops::MatMul(flat, ops::Transpose(layer.weight));
  return ops::AddChannelBias(y, layer.bias);
}

Tensor CloneParameter(const Tensor& t) { return t.Detach(true); }

}  // namespace

Activation ParseActivation(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "sigmoid") return Activation::kSigmoid;
  if (name == "none") return Activation::kNone;
  throw ConfigError("unknown activation '" + name + "'");
}

Model::Model(Shape input_shape, std::vector<Layer> layers)
    : input_shape_(std::move(input_shape)), layers_(std::move(layers)) {
  Validate();
}

Model::Model(const Model& other) : input_shape_(other.input_shape_) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) {
    Layer copy = l;
    copy.weight = CloneParameter(l.weight);
    copy.bias = CloneParameter(l.bias);
    layers_.push_back(std::move(copy));
  }
}

Model& Model::operator=(const Model& other) {
  if (this != &other) {
    Model copy(other);
    *this = std::move(copy);
  }
  return *this;
}

void Model::Validate() const {
  if (layers_.empty()) throw ShapeError("model needs at least one layer");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& l = layers_[i];
    const std::size_t want = l.kind == LayerKind::kConv2d ? 4 : 2;
    if (l.weight.ndim() != want || l.bias.ndim() != 1 ||
        l.bias.dim(0) != l.weight.dim(0)) {
      throw ShapeError(LayerName(i, l) + ": malformed parameters " +
                       ShapeToString(l.weight.shape()) + " / " +
                       ShapeToString(l.bias.shape()));
    }
    for (const Tensor* t : {&l.weight, &l.bias}) {
      for (double v : t->values()) {
        if (!std::isfinite(v)) {
          throw NumericError(LayerName(i, l) + ": non-finite parameter");
        }
      }
    }
  }
  // Shape-check the composition with a single dummy sample.
  NoGrad no_grad;
  Shape probe{1};
  probe.insert(probe.end(), input_shape_.begin(), input_shape_.end());
  Tensor x = Tensor::Zeros(probe);
  Tensor out = Forward(*this, x);
  (void)out;
}

std::int64_t Model::num_outputs() const {
  return layers_.back().weight.dim(0);
}

std::size_t Model::num_parameters() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weight.numel() + l.bias.numel();
  return n;
}

std::vector<Tensor> Model::parameters() const {
  std::vector<Tensor> params;
  params.reserve(2 * layers_.size());
  for (const auto& l : layers_) {
    params.push_back(l.weight);
    params.push_back(l.bias);
  }
  return params;
}

GradientVector Model::ParameterValues() const {
  GradientVector v;
  for (const auto& l : layers_) {
    std::vector<double> flat(l.weight.values().begin(), l.weight.values().end());
    flat.insert(flat.end(), l.bias.values().begin(), l.bias.values().end());
    v.layers.push_back(std::move(flat));
  }
  return v;
}

void Model::SetParameterValues(const GradientVector& values) {
  if (values.num_layers() != layers_.size()) {
    throw ShapeError("parameter values have " +
                     std::to_string(values.num_layers()) + " layers, model " +
                     std::to_string(layers_.size()));
  }
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    auto w = layers_[i].weight.mutable_values();
    auto b = layers_[i].bias.mutable_values();
    if (values.layers[i].size() != w.size() + b.size()) {
      throw ShapeError("parameter values for layer " + std::to_string(i + 1) +
                       " have wrong length");
    }
    std::copy_n(values.layers[i].begin(), w.size(), w.begin());
    std::copy_n(values.layers[i].begin() + w.size(), b.size(), b.begin());
  }
}

void Model::ApplyUpdate(const GradientVector& update, double lr) {
  GradientVector values = ParameterValues();
  if (!values.SameLayout(update)) {
    throw ShapeError("update layout does not match model parameters");
  }
  for (std::size_t i = 0; i < values.layers.size(); ++i) {
    for (std::size_t j = 0; j < values.layers[i].size(); ++j) {
      values.layers[i][j] -= lr * update.layers[i][j];
    }
  }
  SetParameterValues(values);
}

Model Model::Scaled(double factor) const {
  Model copy(*this);
  GradientVector values = ParameterValues();
  values *= factor;
  copy.SetParameterValues(values);
  return copy;
}

std::uint64_t Model::Checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& l : layers_) {
    for (const Tensor* t : {&l.weight, &l.bias}) {
      for (double v : t->values()) {
        auto bits = std::bit_cast<std::uint64_t>(v);
        for (int k = 0; k < 8; ++k) {
          h ^= (bits >> (8 * k)) & 0xff;
          h *= 0x100000001b3ULL;
        }
      }
    }
  }
  return h;
}

void Model::Save(const std::string& path) const {
  std::vector<checkpoint::Record> records;
  records.push_back(checkpoint::TensorRecord(
      {static_cast<std::int64_t>(input_shape_.size())},
      std::vector<double>(input_shape_.begin(), input_shape_.end())));
  for (const auto& l : layers_) {
    checkpoint::Record rec;
    rec.kind = l.kind == LayerKind::kConv2d ? checkpoint::RecordKind::kConv2d
                                            : checkpoint::RecordKind::kDense;
    rec.activation = static_cast<std::uint8_t>(l.activation);
    rec.stride = static_cast<std::uint32_t>(l.stride);
    rec.padding = static_cast<std::uint32_t>(l.padding);
    rec.weight = {l.weight.shape(), {l.weight.values().begin(), l.weight.values().end()}};
    rec.bias = {l.bias.shape(), {l.bias.values().begin(), l.bias.values().end()}};
    records.push_back(std::move(rec));
  }
  checkpoint::WriteFile(path, records);
}

Model Model::Load(const std::string& path) {
  auto records = checkpoint::ReadFile(path);
  if (records.empty() || records[0].kind != checkpoint::RecordKind::kTensor) {
    throw FormatError("'" + path + "' is not a model checkpoint");
  }
  Shape input_shape;
  for (double d : records[0].weight.values) {
    input_shape.push_back(static_cast<std::int64_t>(d));
  }
  std::vector<Layer> layers;
  for (std::size_t i = 1; i < records.size(); ++i) {
    auto& rec = records[i];
    if (rec.kind == checkpoint::RecordKind::kTensor) {
      throw FormatError("unexpected tensor record in model checkpoint");
    }
    if (rec.activation > 2) {
      throw FormatError("unknown activation code " +
                        std::to_string(rec.activation));
    }
    Layer l;
    l.kind = rec.kind == checkpoint::RecordKind::kConv2d ? LayerKind::kConv2d
                                                         : LayerKind::kDense;
    l.activation = static_cast<Activation>(rec.activation);
    l.stride = rec.stride;
    l.padding = rec.padding;
    l.weight = Tensor::Leaf(rec.weight.shape, std::move(rec.weight.values));
    l.bias = Tensor::Leaf(rec.bias.shape, std::move(rec.bias.values));
    layers.push_back(std::move(l));
  }
  return Model(std::move(input_shape), std::move(layers));
}

Tensor ForwardFeatures(const Model& model, const Tensor& inputs) {
  Shape expected = model.input_shape();
  Shape got(inputs.shape().begin() + (inputs.ndim() ? 1 : 0), inputs.shape().end());
  if (inputs.ndim() == 0 || got != expected) {
    throw ShapeError("layer 1: input " + ShapeToString(inputs.shape()) +
                     " does not match model input (n," +
                     ShapeToString(expected).substr(1));
  }
  Tensor x = inputs;
  const auto& layers = model.layers();
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
    x = Activate(ApplyLayer(layers[i], i, x), layers[i].activation);
  }
  return x.ndim() == 2 ? x : ops::Flatten(x);
}

Tensor Forward(const Model& model, const Tensor& inputs) {
  Tensor features = ForwardFeatures(model, inputs);
  const std::size_t last = model.num_layers() - 1;
  const Layer& l = model.layer(last);
  return Activate(ApplyLayer(l, last, features), l.activation);
}

Tensor Loss(const Model& model, const Tensor& inputs,
            std::span<const int> labels) {
  return ops::SoftmaxCrossEntropy(Forward(model, inputs), labels);
}

Tensor Loss(const Model& model, const Batch& batch) {
  return Loss(model, batch.inputs, batch.labels);
}

GradientVector ToGradientVector(const Model& model,
                                const std::vector<Tensor>& per_parameter) {
  if (per_parameter.size() != 2 * model.num_layers()) {
    throw ShapeError("expected " + std::to_string(2 * model.num_layers()) +
                     " parameter tensors, got " +
                     std::to_string(per_parameter.size()));
  }
  GradientVector g;
  for (std::size_t i = 0; i < model.num_layers(); ++i) {
    const Tensor& w = per_parameter[2 * i];
    const Tensor& b = per_parameter[2 * i + 1];
    if (w.shape() != model.layer(i).weight.shape() ||
        b.shape() != model.layer(i).bias.shape()) {
      throw ShapeError("gradient tensor shapes differ from layer " +
                       std::to_string(i + 1));
    }
    std::vector<double> flat(w.values().begin(), w.values().end());
    flat.insert(flat.end(), b.values().begin(), b.values().end());
    g.layers.push_back(std::move(flat));
  }
  return g;
}

std::vector<Tensor> ToParameterTensors(const Model& model,
                                       const GradientVector& grads) {
  if (grads.num_layers() != model.num_layers()) {
    throw ShapeError("gradient has " + std::to_string(grads.num_layers()) +
                     " layers, model has " + std::to_string(model.num_layers()));
  }
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < model.num_layers(); ++i) {
    const Layer& l = model.layer(i);
    const auto& flat = grads.layers[i];
    const auto nw = static_cast<std::size_t>(l.weight.numel());
    const auto nb = static_cast<std::size_t>(l.bias.numel());
    if (flat.size() != nw + nb) {
      throw ShapeError("gradient layer " + std::to_string(i + 1) +
                       " has wrong length");
    }
    out.push_back(Tensor::Constant(
        l.weight.shape(), std::vector<double>(flat.begin(), flat.begin() + nw)));
    out.push_back(Tensor::Constant(
        l.bias.shape(), std::vector<double>(flat.begin() + nw, flat.end())));
  }
  return out;
}

std::vector<Tensor> ParameterGradients(const Model& model,
                                       const Tensor& inputs,
                                       std::span<const int> labels,
                                       bool create_graph) {
  GradMode mode(true);
  Tensor loss = Loss(model, inputs, labels);
  if (!std::isfinite(loss.item())) {
    throw NumericError("non-finite loss " + std::to_string(loss.item()));
  }
  return Grad(loss, model.parameters(), create_graph);
}

GradientVector ComputeGradients(const Model& model, const Tensor& inputs,
                                std::span<const int> labels) {
  Tensor x = inputs.requires_grad() ? inputs.Detach(false) : inputs;
  return ToGradientVector(model, ParameterGradients(model, x, labels, false));
}

GradientVector ComputeGradients(const Model& model, const Batch& batch) {
  return ComputeGradients(model, batch.inputs, batch.labels);
}

SecondOrderResult GradThroughGrad(const Model& model, const LossFn& loss_fn,
                                  const Tensor& x,
                                  const GradientScalarFn& scalar_fn,
                                  const std::vector<Tensor>& extra_wrt) {
  if (!x.requires_grad()) {
    throw Error("grad_through_grad: input must require grad");
  }
  GradMode mode(true);
  Tensor loss = loss_fn(Forward(model, x));
  if (!std::isfinite(loss.item())) {
    throw NumericError("grad_through_grad: non-finite loss " +
                       std::to_string(loss.item()) + " for input of shape " +
                       ShapeToString(x.shape()));
  }
  std::vector<Tensor> grads = Grad(loss, model.parameters(), true);
  Tensor scalar = scalar_fn(grads);
  SecondOrderResult result;
  result.value = Evaluate(scalar);
  if (!std::isfinite(result.value)) {
    throw NumericError("grad_through_grad: non-finite objective");
  }
  std::vector<Tensor> wrt{x};
  wrt.insert(wrt.end(), extra_wrt.begin(), extra_wrt.end());
  result.grads = Grad(scalar, wrt, false);
  return result;
}

Layer MakeConvLayer(std::int64_t in_channels, std::int64_t out_channels,
                    std::int64_t kernel, std::int64_t stride,
                    std::int64_t padding, Activation activation,
                    std::uint64_t seed) {
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_channels * kernel * kernel));
  Layer l;
  l.kind = LayerKind::kConv2d;
  l.activation = activation;
  l.stride = stride;
  l.padding = padding;
  std::vector<double> w(out_channels * in_channels * kernel * kernel);
  for (auto& v : w) v = rng.Uniform(-bound, bound);
  std::vector<double> b(out_channels);
  for (auto& v : b) v = rng.Uniform(-bound, bound);
  l.weight = Tensor::Leaf({out_channels, in_channels, kernel, kernel}, std::move(w));
  l.bias = Tensor::Leaf({out_channels}, std::move(b));
  return l;
}

Layer MakeDenseLayer(std::int64_t in, std::int64_t out, Activation activation,
                     std::uint64_t seed) {
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Layer l;
  l.kind = LayerKind::kDense;
  l.activation = activation;
  std::vector<double> w(out * in);
  for (auto& v : w) v = rng.Uniform(-bound, bound);
  std::vector<double> b(out);
  for (auto& v : b) v = rng.Uniform(-bound, bound);
  l.weight = Tensor::Leaf({out, in}, std::move(w));
  l.bias = Tensor::Leaf({out}, std::move(b));
  return l;
}

Model BuildSmallCnn(std::int64_t num_classes, std::int64_t width_scale,
                    const SmallCnnOptions& options) {
  if (width_scale < 1) throw ConfigError("width_scale must be >= 1");
  if (options.input_shape.size() != 3) {
    throw ShapeError("small cnn expects (c,h,w) input shape");
  }
  const std::int64_t c = options.input_shape[0];
  const std::int64_t c1 = 6 * width_scale, c2 = 12 * width_scale;
  const ops::Conv2dParams p{2, 2};
  const std::int64_t h1 = ops::ConvOutputSize(options.input_shape[1], 5, p);
  const std::int64_t w1 = ops::ConvOutputSize(options.input_shape[2], 5, p);
  const std::int64_t h2 = ops::ConvOutputSize(h1, 5, p);
  const std::int64_t w2 = ops::ConvOutputSize(w1, 5, p);
  std::vector<Layer> layers;
  layers.push_back(MakeConvLayer(c, c1, 5, 2, 2, options.activation,
                                 DeriveSeed(options.seed, {1})));
  layers.push_back(MakeConvLayer(c1, c2, 5, 2, 2, options.activation,
                                 DeriveSeed(options.seed, {2})));
  std::int64_t features = c2 * h2 * w2;
  if (options.hidden_width > 0) {
    layers.push_back(MakeDenseLayer(features, options.hidden_width,
                                    options.activation,
                                    DeriveSeed(options.seed, {3})));
    features = options.hidden_width;
  }
  layers.push_back(MakeDenseLayer(features, num_classes, Activation::kNone,
                                  DeriveSeed(options.seed, {4})));
  return Model(options.input_shape, std::move(layers));
}

Model BuildMlp(const std::vector<std::int64_t>& dims, std::uint64_t seed,
               Activation activation) {
  if (dims.size() < 2) throw ConfigError("mlp needs at least two dims");
  std::vector<Layer> layers;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const bool last = i + 2 == dims.size();
    layers.push_back(MakeDenseLayer(dims[i], dims[i + 1],
                                    last ? Activation::kNone : activation,
                                    DeriveSeed(seed, {i + 1})));
  }
  return Model({dims[0]}, std::move(layers));
}

}  // namespace glab
