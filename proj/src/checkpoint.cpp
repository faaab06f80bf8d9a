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

#include "glab/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "glab/errors.hpp"

namespace glab::checkpoint {
namespace {

void PutU8(std::ostream& out, std::uint8_t v) {
  out.put(static_cast<char>(v));
}

void PutU32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

void PutF64(std::ostream& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(b, 8);
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  void Bytes(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw FormatError("truncated checkpoint at byte offset " +
                        std::to_string(offset_ + in_.gcount()));
    }
    offset_ += n;
  }
  std::uint8_t U8() {
    char b;
    Bytes(&b, 1);
    return static_cast<std::uint8_t>(b);
  }
  std::uint32_t U32() {
    unsigned char b[4];
    Bytes(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }
  double F64() {
    unsigned char b[8];
    Bytes(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return std::bit_cast<double>(v);
  }
  std::size_t offset() const { return offset_; }

 private:
  std::istream& in_;
  std::size_t offset_ = 0;
};

void WriteBlock(std::ostream& out, const Block& block) {
  if (static_cast<std::int64_t>(block.values.size()) != NumElements(block.shape)) {
    throw ShapeError("checkpoint block payload does not match shape " +
                     ShapeToString(block.shape));
  }
  PutU32(out, static_cast<std::uint32_t>(block.shape.size()));
  for (auto d : block.shape) PutU32(out, static_cast<std::uint32_t>(d));
  for (double v : block.values) PutF64(out, v);
}

Block ReadBlock(Reader& r) {
  Block block;
  const std::uint32_t ndim = r.U32();
  if (ndim > 8) {
    throw FormatError("implausible tensor rank " + std::to_string(ndim) +
                      " at byte offset " + std::to_string(r.offset() - 4));
  }
  std::int64_t count = 1;
  for (std::uint32_t i = 0; i < ndim; ++i) {
    block.shape.push_back(r.U32());
    count *= block.shape.back();
  }
  if (count > (std::int64_t{1} << 32)) {
    throw FormatError("tensor payload too large at byte offset " +
                      std::to_string(r.offset()));
  }
  block.values.resize(static_cast<std::size_t>(count));
  for (auto& v : block.values) v = r.F64();
  return block;
}

}  // namespace

void Write(std::ostream& out, const std::vector<Record>& records) {
  out.write(kMagic, 4);
  PutU32(out, kVersion);
  PutU32(out, static_cast<std::uint32_t>(records.size()));
  for (const auto& rec : records) {
    PutU8(out, static_cast<std::uint8_t>(rec.kind));
    if (rec.kind == RecordKind::kTensor) {
      WriteBlock(out, rec.weight);
      continue;
    }
    PutU8(out, rec.activation);
    PutU32(out, rec.stride);
    PutU32(out, rec.padding);
    WriteBlock(out, rec.weight);
    WriteBlock(out, rec.bias);
  }
  if (!out) throw FormatError("checkpoint write failed");
}

std::vector<Record> Read(std::istream& in) {
  Reader r(in);
  char magic[4];
  r.Bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("bad checkpoint magic at byte offset 0");
  }
  const std::uint32_t version = r.U32();
  if (version != kVersion) {
    throw FormatError("unsupported checkpoint version " +
                      std::to_string(version));
  }
  const std::uint32_t count = r.U32();
  std::vector<Record> records;
  records.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    Record rec;
    const std::size_t at = r.offset();
    const std::uint8_t kind = r.U8();
    if (kind > 2) {
      throw FormatError("unknown record kind " + std::to_string(kind) +
                        " at byte offset " + std::to_string(at));
    }
    rec.kind = static_cast<RecordKind>(kind);
    if (rec.kind == RecordKind::kTensor) {
      rec.weight = ReadBlock(r);
    } else {
      rec.activation = r.U8();
      rec.stride = r.U32();
      rec.padding = r.U32();
      rec.weight = ReadBlock(r);
      rec.bias = ReadBlock(r);
    }
    records.push_back(std::move(rec));
  }
  return records;
}

void WriteFile(const std::string& path, const std::vector<Record>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  Write(out, records);
}

std::vector<Record> ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  return Read(in);
}

Record TensorRecord(Shape shape, std::vector<double> values) {
  Record rec;
  rec.kind = RecordKind::kTensor;
  rec.weight = Block{std::move(shape), std::move(values)};
  return rec;
}

}  // namespace glab::checkpoint
