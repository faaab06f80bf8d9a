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

#ifndef GLAB_GRADIENT_HPP_
#define GLAB_GRADIENT_HPP_

#include <cstddef>
#include <vector>

namespace glab {

// Per-layer flat gradients. Layer i holds the weight entries followed by the
// bias entries, in the owning model's layer order.
struct GradientVector {
  std::vector<std::vector<double>> layers;

  std::size_t num_layers() const { return layers.size(); }
  std::size_t size() const;  // total element count

  bool SameLayout(const GradientVector& other) const;
  GradientVector ZerosLike() const;

  GradientVector& operator+=(const GradientVector& other);
  GradientVector& operator-=(const GradientVector& other);
  GradientVector& operator*=(double factor);

  double Dot(const GradientVector& other) const;
  double Norm() const;  // Euclidean over all layers
  bool AllFinite() const;

  std::vector<double> Flatten() const;
  // Inverse of Flatten using this vector's layout.
  void AssignFlat(const std::vector<double>& flat);
};

GradientVector operator+(GradientVector a, const GradientVector& b);
GradientVector operator-(GradientVector a, const GradientVector& b);
GradientVector operator*(GradientVector a, double factor);

double Distance(const GradientVector& a, const GradientVector& b);

}  // namespace glab

#endif  // GLAB_GRADIENT_HPP_
