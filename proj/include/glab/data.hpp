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

#ifndef GLAB_DATA_HPP_
#define GLAB_DATA_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "glab/model.hpp"
#include "glab/tensor.hpp"

namespace glab {

// Immutable image collection; pixels in [0,1], stored (N,c,h,w) row-major.
struct Dataset {
  std::string name;
  Shape image_shape;  // (c,h,w)
  std::vector<double> pixels;
  std::vector<int> labels;
  int num_classes = 0;

  std::int64_t size() const { return static_cast<std::int64_t>(labels.size()); }
  std::int64_t image_size() const { return NumElements(image_shape); }
  std::span<const double> image(std::int64_t index) const;

  // Gathers the listed samples into a constant batch.
  Batch MakeBatch(std::span<const std::int64_t> indices) const;
  Dataset Subset(std::span<const std::int64_t> indices) const;

  // Throws if any pixel leaves [0,1] or a label is out of range.
  void Validate() const;

  void Save(const std::string& path) const;
  static Dataset Load(const std::string& path);
};

struct Partition {
  std::vector<std::vector<std::int64_t>> clients;

  std::size_t num_clients() const { return clients.size(); }
};

// CIFAR-10 binary layout: 3073-byte records, label byte then 3x32x32 pixels.
Dataset LoadCifar10Binary(const std::string& path);

struct SynthOptions {
  int num_classes = 10;
  int n_per_class = 50;
  std::int64_t channels = 3;
  std::int64_t height = 16;
  std::int64_t width = 16;
  std::uint64_t seed = 0;
};

// Class-conditional blob images: each class has a prototype made of a few
// coloured Gaussian blobs; samples jitter blob position/amplitude and add
// small pixel noise, then clip to [0,1].
Dataset SynthDataset(const SynthOptions& options);

// Shuffled split into k parts whose sizes differ by at most one.
Partition PartitionIid(const Dataset& dataset, std::size_t k,
                       std::uint64_t seed);

struct DirichletLog {
  std::size_t redraws = 0;  // samples redirected because a label ran out
};

// Equal per-client quotas; each client's label mixture is drawn from a
// symmetric Dirichlet(concentration).
Partition PartitionDirichlet(const Dataset& dataset, std::size_t k,
                             double concentration, std::uint64_t seed,
                             DirichletLog* log = nullptr);

// i.i.d. Uniform[0,1].
std::vector<double> SampleUniformNoise(std::int64_t count, std::uint64_t seed);
Tensor SampleUniformNoise(const Shape& shape, std::uint64_t seed);

// Train/test split by taking `test_per_class` samples of every class for test.
struct Split {
  Dataset train;
  Dataset test;
};
Split StratifiedSplit(const Dataset& dataset, int test_per_class,
                      std::uint64_t seed);

// Throws if any value lies outside [0,1].
void RequireUnitRange(std::span<const double> values, const char* where);

}  // namespace glab

#endif  // GLAB_DATA_HPP_
