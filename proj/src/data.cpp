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

#include "glab/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

#include "glab/checkpoint.hpp"
#include "glab/errors.hpp"
#include "glab/random.hpp"

namespace glab {
namespace {

constexpr std::int64_t kCifarRecord = 3073;
constexpr std::int64_t kCifarImage = 3 * 32 * 32;

}  // namespace

void RequireUnitRange(std::span<const double> values, const char* where) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] >= 0.0 && values[i] <= 1.0)) {
      throw NumericError(std::string(where) + ": value " +
                         std::to_string(values[i]) + " at index " +
                         std::to_string(i) + " outside [0,1]");
    }
  }
}

std::span<const double> Dataset::image(std::int64_t index) const {
  const auto n = static_cast<std::size_t>(image_size());
  return std::span<const double>(pixels).subspan(index * n, n);
}

Batch Dataset::MakeBatch(std::span<const std::int64_t> indices) const {
  const std::int64_t n = image_size();
  std::vector<double> values;
  values.reserve(indices.size() * n);
  std::vector<int> batch_labels;
  batch_labels.reserve(indices.size());
  for (auto i : indices) {
    if (i < 0 || i >= size()) {
      throw ShapeError("sample index " + std::to_string(i) + " out of range");
    }
    auto img = image(i);
    values.insert(values.end(), img.begin(), img.end());
    batch_labels.push_back(labels[i]);
  }
  Shape shape{static_cast<std::int64_t>(indices.size())};
  shape.insert(shape.end(), image_shape.begin(), image_shape.end());
  return Batch{Tensor::Constant(std::move(shape), std::move(values)),
               std::move(batch_labels)};
}

Dataset Dataset::Subset(std::span<const std::int64_t> indices) const {
  Dataset out;
  out.name = name;
  out.image_shape = image_shape;
  out.num_classes = num_classes;
  for (auto i : indices) {
    auto img = image(i);
    out.pixels.insert(out.pixels.end(), img.begin(), img.end());
    out.labels.push_back(labels[i]);
  }
  return out;
}

void Dataset::Validate() const {
  if (static_cast<std::int64_t>(pixels.size()) != size() * image_size()) {
    throw ShapeError("dataset '" + name + "': pixel count does not match");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw ShapeError("dataset '" + name + "': label out of range at " +
                       std::to_string(i));
    }
  }
  RequireUnitRange(pixels, "dataset");
}

void Dataset::Save(const std::string& path) const {
  Shape shape{size()};
  shape.insert(shape.end(), image_shape.begin(), image_shape.end());
  std::vector<checkpoint::Record> records;
  records.push_back(checkpoint::TensorRecord(shape, pixels));
  records.push_back(checkpoint::TensorRecord(
      {size()}, std::vector<double>(labels.begin(), labels.end())));
  records.push_back(checkpoint::TensorRecord({1}, {static_cast<double>(num_classes)}));
  checkpoint::WriteFile(path, records);
}

Dataset Dataset::Load(const std::string& path) {
  auto records = checkpoint::ReadFile(path);
  if (records.size() != 3) {
    throw FormatError("'" + path + "' is not a dataset container");
  }
  Dataset d;
  d.name = path;
  const Shape& shape = records[0].weight.shape;
  if (shape.size() < 2) throw FormatError("dataset image block has low rank");
  d.image_shape.assign(shape.begin() + 1, shape.end());
  d.pixels = std::move(records[0].weight.values);
  for (double v : records[1].weight.values) d.labels.push_back(static_cast<int>(v));
  d.num_classes = static_cast<int>(records[2].weight.values.at(0));
  d.Validate();
  return d;
}

Dataset LoadCifar10Binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  const auto total = static_cast<std::int64_t>(bytes.size());
  if (total % kCifarRecord != 0) {
    const std::int64_t offset = total - total % kCifarRecord;
    throw FormatError("truncated CIFAR-10 record at byte offset " +
                      std::to_string(offset));
  }
  Dataset d;
  d.name = "cifar10";
  d.image_shape = {3, 32, 32};
  d.num_classes = 10;
  const std::int64_t n = total / kCifarRecord;
  d.pixels.reserve(n * kCifarImage);
  d.labels.reserve(n);
  for (std::int64_t r = 0; r < n; ++r) {
    const std::int64_t base = r * kCifarRecord;
    const int label = bytes[base];
    if (label > 9) {
      throw FormatError("label out of range (" + std::to_string(label) +
                        ") at byte offset " + std::to_string(base));
    }
    d.labels.push_back(label);
    for (std::int64_t i = 1; i < kCifarRecord; ++i) {
      d.pixels.push_back(static_cast<double>(bytes[base + i]) / 255.0);
    }
  }
  return d;
}

Dataset SynthDataset(const SynthOptions& o) {
  if (o.num_classes < 1 || o.n_per_class < 1 || o.channels < 1 ||
      o.height < 1 || o.width < 1) {
    throw ConfigError("synthetic dataset sizes must be >= 1");
  }
  struct Blob {
    double cy, cx, sigma, amplitude;
    std::vector<double> color;
  };
  struct Prototype {
    std::vector<double> background;
    std::vector<Blob> blobs;
  };
  constexpr int kBlobs = 3;
  Rng proto_rng(DeriveSeed(o.seed, {0x5eed}));
  std::vector<Prototype> protos(o.num_classes);
  for (auto& p : protos) {
    for (std::int64_t c = 0; c < o.channels; ++c) {
      p.background.push_back(proto_rng.Uniform(0.1, 0.4));
    }
    for (int b = 0; b < kBlobs; ++b) {
      Blob blob;
      blob.cy = proto_rng.Uniform(0.2, 0.8) * static_cast<double>(o.height);
      blob.cx = proto_rng.Uniform(0.2, 0.8) * static_cast<double>(o.width);
      blob.sigma = proto_rng.Uniform(0.1, 0.22) *
                   static_cast<double>(std::min(o.height, o.width));
      blob.amplitude = proto_rng.Uniform(0.4, 0.7);
      for (std::int64_t c = 0; c < o.channels; ++c) {
        blob.color.push_back(proto_rng.Uniform(-0.4, 1.0));
      }
      p.blobs.push_back(std::move(blob));
    }
  }

  Dataset d;
  d.name = "synthetic";
  d.image_shape = {o.channels, o.height, o.width};
  d.num_classes = o.num_classes;
  const std::int64_t plane = o.height * o.width;
  Rng rng(DeriveSeed(o.seed, {0xda7a}));
  for (int i = 0; i < o.n_per_class; ++i) {
    for (int k = 0; k < o.num_classes; ++k) {
      const Prototype& p = protos[k];
      std::vector<double> img(o.channels * plane);
      for (std::int64_t c = 0; c < o.channels; ++c) {
        const double bg = p.background[c] + 0.05 * rng.Normal();
        std::fill_n(img.begin() + c * plane, plane, bg);
      }
      for (const Blob& blob : p.blobs) {
        const double cy = blob.cy + 1.0 * rng.Normal();
        const double cx = blob.cx + 1.0 * rng.Normal();
        const double amp = blob.amplitude * (1.0 + 0.15 * rng.Normal());
        const double inv = 1.0 / (2.0 * blob.sigma * blob.sigma);
        for (std::int64_t y = 0; y < o.height; ++y) {
          for (std::int64_t x = 0; x < o.width; ++x) {
            const double dy = static_cast<double>(y) - cy;
            const double dx = static_cast<double>(x) - cx;
            const double v = amp * std::exp(-(dy * dy + dx * dx) * inv);
            for (std::int64_t c = 0; c < o.channels; ++c) {
              img[c * plane + y * o.width + x] += v * blob.color[c];
            }
          }
        }
      }
      for (double& v : img) v = std::clamp(v + 0.02 * rng.Normal(), 0.0, 1.0);
      d.pixels.insert(d.pixels.end(), img.begin(), img.end());
      d.labels.push_back(k);
    }
  }
  return d;
}

Partition PartitionIid(const Dataset& dataset, std::size_t k,
                       std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(dataset.size());
  if (k == 0 || k > n) {
    throw ConfigError("cannot split " + std::to_string(n) + " samples into " +
                      std::to_string(k) + " clients");
  }
  std::vector<std::int64_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(DeriveSeed(seed, {0x11d}));
  rng.Shuffle(order);
  Partition p;
  p.clients.resize(k);
  const std::size_t base = n / k, extra = n % k;
  std::size_t pos = 0;
  for (std::size_t c = 0; c < k; ++c) {
    const std::size_t take = base + (c < extra ? 1 : 0);
    p.clients[c].assign(order.begin() + pos, order.begin() + pos + take);
    pos += take;
  }
  return p;
}

Partition PartitionDirichlet(const Dataset& dataset, std::size_t k,
                             double concentration, std::uint64_t seed,
                             DirichletLog* log) {
  if (!(concentration > 0.0)) {
    throw ConfigError("dirichlet concentration must be > 0");
  }
  const auto n = static_cast<std::size_t>(dataset.size());
  if (k == 0 || k > n) {
    throw ConfigError("cannot split " + std::to_string(n) + " samples into " +
                      std::to_string(k) + " clients");
  }
  const auto classes = static_cast<std::size_t>(dataset.num_classes);
  Rng rng(DeriveSeed(seed, {0xd1c}));
  std::vector<std::vector<std::int64_t>> pools(classes);
  for (std::size_t i = 0; i < n; ++i) pools[dataset.labels[i]].push_back(i);
  for (auto& pool : pools) rng.Shuffle(pool);

  const std::size_t quota = n / k;
  Partition p;
  p.clients.resize(k);
  std::size_t redraws = 0;
  for (std::size_t c = 0; c < k; ++c) {
    const std::vector<double> mix = rng.Dirichlet(concentration, classes);
    // Largest-remainder rounding of mix * quota.
    std::vector<std::size_t> counts(classes);
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t j = 0; j < classes; ++j) {
      const double exact = mix[j] * static_cast<double>(quota);
      counts[j] = static_cast<std::size_t>(std::floor(exact));
      assigned += counts[j];
      remainders.emplace_back(exact - std::floor(exact), j);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t r = 0; assigned < quota; ++r, ++assigned) {
      ++counts[remainders[r % classes].second];
    }
    auto& client = p.clients[c];
    std::size_t shortfall = 0;
    for (std::size_t j = 0; j < classes; ++j) {
      const std::size_t take = std::min(counts[j], pools[j].size());
      shortfall += counts[j] - take;
      for (std::size_t t = 0; t < take; ++t) {
        client.push_back(pools[j].back());
        pools[j].pop_back();
      }
    }
    // Exhausted labels: redraw from the remaining labels, weighted by this
    // client's mixture.
    while (shortfall > 0) {
      double total = 0.0;
      for (std::size_t j = 0; j < classes; ++j) {
        if (!pools[j].empty()) total += mix[j] + 1e-12;
      }
      if (total == 0.0) break;
      double u = rng.Uniform() * total;
      std::size_t pick = classes;
      for (std::size_t j = 0; j < classes; ++j) {
        if (pools[j].empty()) continue;
        pick = j;
        u -= mix[j] + 1e-12;
        if (u <= 0.0) break;
      }
      client.push_back(pools[pick].back());
      pools[pick].pop_back();
      --shortfall;
      ++redraws;
    }
    std::sort(client.begin(), client.end());
  }
  if (log) log->redraws = redraws;
  return p;
}

std::vector<double> SampleUniformNoise(std::int64_t count, std::uint64_t seed) {
  Rng rng(DeriveSeed(seed, {0x9015e}));
  std::vector<double> v(static_cast<std::size_t>(count));
  for (auto& x : v) x = rng.Uniform();
  return v;
}

Tensor SampleUniformNoise(const Shape& shape, std::uint64_t seed) {
  return Tensor::Constant(shape, SampleUniformNoise(NumElements(shape), seed));
}

Split StratifiedSplit(const Dataset& dataset, int test_per_class,
                      std::uint64_t seed) {
  std::vector<std::vector<std::int64_t>> by_class(dataset.num_classes);
  for (std::int64_t i = 0; i < dataset.size(); ++i) {
    by_class[dataset.labels[i]].push_back(i);
  }
  Rng rng(DeriveSeed(seed, {0x5911}));
  std::vector<std::int64_t> train, test;
  for (auto& idx : by_class) {
    rng.Shuffle(idx);
    const std::size_t t = std::min<std::size_t>(test_per_class, idx.size());
    test.insert(test.end(), idx.begin(), idx.begin() + t);
    train.insert(train.end(), idx.begin() + t, idx.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  Split s{dataset.Subset(train), dataset.Subset(test)};
  return s;
}

}  // namespace glab
