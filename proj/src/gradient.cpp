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

#include "glab/gradient.hpp"

#include <cmath>
#include <string>

#include "glab/errors.hpp"

namespace glab {
namespace {

void RequireLayout(const GradientVector& a, const GradientVector& b,
                   const char* op) {
  if (!a.SameLayout(b)) {
    throw ShapeError(std::string(op) + ": gradient layouts differ");
  }
}

}  // namespace

std::size_t GradientVector::size() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.size();
  return n;
}

bool GradientVector::SameLayout(const GradientVector& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].size() != other.layers[i].size()) return false;
  }
  return true;
}

GradientVector GradientVector::ZerosLike() const {
  GradientVector z;
  z.layers.reserve(layers.size());
  for (const auto& l : layers) z.layers.emplace_back(l.size(), 0.0);
  return z;
}

GradientVector& GradientVector::operator+=(const GradientVector& other) {
  RequireLayout(*this, other, "gradient add");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    for (std::size_t j = 0; j < layers[i].size(); ++j) {
      layers[i][j] += other.layers[i][j];
    }
  }
  return *this;
}

GradientVector& GradientVector::operator-=(const GradientVector& other) {
  RequireLayout(*this, other, "gradient sub");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    for (std::size_t j = 0; j < layers[i].size(); ++j) {
      layers[i][j] -= other.layers[i][j];
    }
  }
  return *this;
}

GradientVector& GradientVector::operator*=(double factor) {
  for (auto& l : layers) {
    for (double& v : l) v *= factor;
  }
  return *this;
}

double GradientVector::Dot(const GradientVector& other) const {
  RequireLayout(*this, other, "gradient dot");
  double s = 0.0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    for (std::size_t j = 0; j < layers[i].size(); ++j) {
      s += layers[i][j] * other.layers[i][j];
    }
  }
  return s;
}

double GradientVector::Norm() const { return std::sqrt(Dot(*this)); }

bool GradientVector::AllFinite() const {
  for (const auto& l : layers) {
    for (double v : l) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

std::vector<double> GradientVector::Flatten() const {
  std::vector<double> flat;
  flat.reserve(size());
  for (const auto& l : layers) flat.insert(flat.end(), l.begin(), l.end());
  return flat;
}

void GradientVector::AssignFlat(const std::vector<double>& flat) {
  if (flat.size() != size()) {
    throw ShapeError("gradient assign: expected " + std::to_string(size()) +
                     " values, got " + std::to_string(flat.size()));
  }
  std::size_t k = 0;
  for (auto& l : layers) {
    for (double& v : l) v = flat[k++];
  }
}

GradientVector operator+(GradientVector a, const GradientVector& b) {
  a += b;
  return a;
}

GradientVector operator-(GradientVector a, const GradientVector& b) {
  a -= b;
  return a;
}

GradientVector operator*(GradientVector a, double factor) {
  a *= factor;
  return a;
}

double Distance(const GradientVector& a, const GradientVector& b) {
  return (a - b).Norm();
}

}  // namespace glab
