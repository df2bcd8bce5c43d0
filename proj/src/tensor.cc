/* Copyright 2026 The Shardir Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "shardir/tensor.h"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "shardir/common.h"

namespace shardir {

int64_t TensorValue::LinearIndex(const std::vector<int64_t>& idx) const {
  int64_t lin = 0;
  for (int64_t d = 0; d < shape.rank(); ++d) {
    lin = lin * shape.dims[d] + idx[d];
  }
  return lin;
}

float& TensorValue::at(const std::vector<int64_t>& idx) {
  return data[LinearIndex(idx)];
}

float TensorValue::at(const std::vector<int64_t>& idx) const {
  return data[LinearIndex(idx)];
}

bool NextIndex(const Shape& shape, std::vector<int64_t>& idx) {
  for (int64_t d = shape.rank() - 1; d >= 0; --d) {
    if (++idx[d] < shape.dims[d]) return true;
    idx[d] = 0;
  }
  return false;
}

namespace {

constexpr char kMagic[4] = {'S', 'H', 'R', 'D'};

void WriteU32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t ReadU32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw IoError("truncated tensor stream");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

void WriteTensor(std::ostream& os, const TensorValue& t) {
  os.write(kMagic, 4);
  WriteU32(os, static_cast<uint32_t>(t.shape.rank()));
  for (int64_t d : t.shape.dims) WriteU32(os, static_cast<uint32_t>(d));
  for (float f : t.data) {
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    WriteU32(os, bits);
  }
}

TensorValue ReadTensor(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    throw IoError("bad tensor magic; expected SHRD");
  }
  uint32_t rank = ReadU32(is);
  Shape shape;
  for (uint32_t i = 0; i < rank; ++i) {
    shape.dims.push_back(static_cast<int64_t>(ReadU32(is)));
  }
  TensorValue t(shape);
  for (int64_t i = 0; i < shape.num_elements(); ++i) {
    uint32_t bits = ReadU32(is);
    std::memcpy(&t.data[i], &bits, 4);
  }
  return t;
}

void WriteTensorFile(const std::string& path, const TensorValue& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for write: " + path);
  WriteTensor(os, t);
  if (!os) throw IoError("write failed: " + path);
}

TensorValue ReadTensorFile(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for read: " + path);
  return ReadTensor(is);
}

std::string FloatToString(float v) {
  // %.9g round-trips any finite f32 exactly.
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
  return buf;
}

std::string TensorToText(const TensorValue& t) {
  std::string s = t.shape.ToString();
  s += " {";
  for (size_t i = 0; i < t.data.size(); ++i) {
    if (i) s += ",";
    s += FloatToString(t.data[i]);
  }
  s += "}";
  return s;
}

}  // namespace shardir
