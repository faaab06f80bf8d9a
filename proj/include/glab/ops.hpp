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

// Differentiable primitives. Every backward rule is written in terms of
// these same primitives, so gradients can be differentiated again.

#ifndef GLAB_OPS_HPP_
#define GLAB_OPS_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "glab/tensor.hpp"

namespace glab::ops {

// Elementwise, identical shapes.
Tensor Add(const Tensor& a, const Tensor& b);
Tensor Sub(const Tensor& a, const Tensor& b);
Tensor Mul(const Tensor& a, const Tensor& b);
Tensor Div(const Tensor& a, const Tensor& b);

Tensor Scale(const Tensor& a, double factor);
Tensor AddScalar(const Tensor& a, double offset);
Tensor Neg(const Tensor& a);
Tensor Square(const Tensor& a);

Tensor Exp(const Tensor& a);
Tensor Log(const Tensor& a);
Tensor Sqrt(const Tensor& a);
Tensor Reciprocal(const Tensor& a);
Tensor Relu(const Tensor& a);
Tensor Sigmoid(const Tensor& a);

// Full reduction to shape {1} and its adjoint.
Tensor Sum(const Tensor& a);
Tensor Mean(const Tensor& a);
Tensor Expand(const Tensor& scalar, const Shape& shape);

// Row reductions over the last axis of an (n, m) tensor, and the adjoint.
Tensor SumRows(const Tensor& a);                          // (n,m) -> (n,1)
Tensor ExpandRows(const Tensor& a, std::int64_t columns);  // (n,1) -> (n,m)

// Axis-1 reduction for (n, c, ...) tensors, and the adjoint broadcast.
Tensor SumChannels(const Tensor& a);  // -> (c)
Tensor BroadcastChannels(const Tensor& bias, const Shape& shape);
Tensor AddChannelBias(const Tensor& x, const Tensor& bias);

Tensor Reshape(const Tensor& a, const Shape& shape);
Tensor Flatten(const Tensor& a);  // (n, ...) -> (n, rest)

// 2-D only.
Tensor MatMul(const Tensor& a, const Tensor& b);
Tensor Transpose(const Tensor& a);

// Contiguous slab [start, start + length) along `axis`, and the adjoint
// zero padding back to `full_length`.
Tensor Narrow(const Tensor& a, std::size_t axis, std::int64_t start,
              std::int64_t length);
Tensor PadAxis(const Tensor& a, std::size_t axis, std::int64_t start,
               std::int64_t full_length);

struct Conv2dParams {
  std::int64_t stride = 1;
  std::int64_t padding = 0;
};

// Direct convolution: x (n,ci,h,w), weight (co,ci,kh,kw) -> (n,co,oh,ow).
Tensor Conv2d(const Tensor& x, const Tensor& weight, Conv2dParams params);
// Adjoint with respect to the input; `input_shape` is the forward x shape.
Tensor Conv2dInputGrad(const Tensor& grad_out, const Tensor& weight,
                       const Shape& input_shape, Conv2dParams params);
// Adjoint with respect to the weight.
Tensor Conv2dWeightGrad(const Tensor& x, const Tensor& grad_out,
                        const Shape& weight_shape, Conv2dParams params);

std::int64_t ConvOutputSize(std::int64_t in, std::int64_t kernel,
                            Conv2dParams params);

// log(sum(exp(row))) per row of (n,m) -> (n,1), numerically stabilized.
Tensor LogSumExpRows(const Tensor& logits);
Tensor LogSoftmax(const Tensor& logits);
Tensor Softmax(const Tensor& logits);

// Mean softmax cross-entropy with integer labels.
Tensor SoftmaxCrossEntropy(const Tensor& logits, std::span<const int> labels);
// Mean cross-entropy against a (n,m) probability tensor.
Tensor SoftCrossEntropy(const Tensor& logits, const Tensor& target_probs);

Tensor Mse(const Tensor& a, const Tensor& b);
Tensor Dot(const Tensor& a, const Tensor& b);

// Sums of the per-pair terms across aligned tensor lists.
Tensor SquaredDistance(const std::vector<Tensor>& a,
                       const std::vector<Tensor>& b);
// 1 - <a,b> / (|a| |b|) over the concatenation of each list.
Tensor CosineDistance(const std::vector<Tensor>& a,
                      const std::vector<Tensor>& b);

// Anisotropic total variation over the last two axes with smooth absolute
// value sqrt(d^2 + eps).
Tensor TotalVariation(const Tensor& x, double eps = 1e-8);

}  // namespace glab::ops

#endif  // GLAB_OPS_HPP_
