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

#ifndef SHARDIR_TENSOR_H_
#define SHARDIR_TENSOR_H_

#include <iosfwd>
#include <string>
#include <vector>

#include "shardir/shape.h"

namespace shardir {

// Dense row-major f32 tensor. The only element type in the system.
struct TensorValue {
  Shape shape;
  std::vector<float> data;

  TensorValue() = default;
  explicit TensorValue(Shape s)
      : shape(std::move(s)), data(shape.num_elements(), 0.0f) {}
  TensorValue(Shape s, std::vector<float> d)
      : shape(std::move(s)), data(std::move(d)) {}

  static TensorValue Scalar(float v) {
    TensorValue t{Shape{}};
    t.data = {v};
    return t;
  }

  float& at(const std::vector<int64_t>& idx);
  float at(const std::vector<int64_t>& idx) const;

  int64_t LinearIndex(const std::vector<int64_t>& idx) const;

  bool operator==(const TensorValue& other) const {
    return shape == other.shape && data == other.data;
  }
};

// Advances a multi-index over `shape` in row-major order. Returns false when
// iteration wraps past the end.
bool NextIndex(const Shape& shape, std::vector<int64_t>& idx);

// Binary tensor format: magic "SHRD", u32 rank, u32 per-dim extents,
// little-endian f32 payload in row-major order.
void WriteTensor(std::ostream& os, const TensorValue& t);
TensorValue ReadTensor(std::istream& is);
void WriteTensorFile(const std::string& path, const TensorValue& t);
TensorValue ReadTensorFile(const std::string& path);

// Text rendering used by the CLI text dump format: shape then values with
// round-trip-exact float formatting.
std::string TensorToText(const TensorValue& t);

// Round-trip-exact decimal rendering of an f32.
std::string FloatToString(float v);

}  // namespace shardir

#endif  // SHARDIR_TENSOR_H_
