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

// Binary container shared by model checkpoints, datasets and reconstruction
// dumps. All integers and reals are little-endian.
//
//   header : "GLAB" | u32 version | u32 record_count
//   record : u8 kind | body
//     kind 0 (conv2d) / 1 (dense):
//       u8 activation | u32 stride | u32 padding | block weight | block bias
//     kind 2 (tensor): block
//   block  : u32 ndim | u32 dims[ndim] | f64 payload[prod(dims)]

#ifndef GLAB_CHECKPOINT_HPP_
#define GLAB_CHECKPOINT_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "glab/tensor.hpp"

namespace glab::checkpoint {

inline constexpr char kMagic[4] = {'G', 'L', 'A', 'B'};
inline constexpr std::uint32_t kVersion = 1;

enum class RecordKind : std::uint8_t { kConv2d = 0, kDense = 1, kTensor = 2 };

struct Block {
  Shape shape;
  std::vector<double> values;
};

struct Record {
  RecordKind kind = RecordKind::kTensor;
  std::uint8_t activation = 0;
  std::uint32_t stride = 0;
  std::uint32_t padding = 0;
  Block weight;  // the tensor payload for kTensor records
  Block bias;
};

void Write(std::ostream& out, const std::vector<Record>& records);
std::vector<Record> Read(std::istream& in);

void WriteFile(const std::string& path, const std::vector<Record>& records);
std::vector<Record> ReadFile(const std::string& path);

Record TensorRecord(Shape shape, std::vector<double> values);

}  // namespace glab::checkpoint

#endif  // GLAB_CHECKPOINT_HPP_
