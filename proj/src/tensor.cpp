// Copyright 2026 The fracdown Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fracdown/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "fracdown/error.hpp"

namespace fracdown {

std::string to_string(const Shape& s) {
  return "(" + std::to_string(s.n) + "," + std::to_string(s.h) + "," +
         std::to_string(s.w) + "," + std::to_string(s.c) + ")";
}

void check_shape(const Shape& shape) {
  if (shape.n < 1 || shape.h < 1 || shape.w < 1 || shape.c < 1) {
    throw Error(ErrorCode::kInvalidShape, "shape " + to_string(shape));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw Error(ErrorCode::kShapeMismatch, std::string(what) + ": " +
                                               to_string(a.shape()) + " vs " +
                                               to_string(b.shape()));
  }
}

Tensor::Tensor(Shape shape, float fill) : shape_(shape) {
  check_shape(shape);
  if (!std::isfinite(fill)) throw Error(ErrorCode::kNonFinite, "fill value");
  data_.assign(shape.elements(), fill);
}

Tensor::Tensor(Shape shape, std::vector<float> data)
    : shape_(shape), data_(std::move(data)) {
  check_shape(shape);
  if (data_.size() != shape.elements()) {
    throw Error(ErrorCode::kInvalidShape,
                "data length " + std::to_string(data_.size()) +
                    " does not match shape " + to_string(shape));
  }
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](float v) { return std::isfinite(v); });
}

Tensor Tensor::slice(int n) const {
  Shape s = shape_;
  s.n = 1;
  const std::size_t plane = s.elements();
  auto first = data_.begin() + static_cast<std::ptrdiff_t>(plane * n);
  return Tensor(s, std::vector<float>(first, first + static_cast<std::ptrdiff_t>(plane)));
}

Tensor tensor_create(Shape shape, float fill) { return Tensor(shape, fill); }

Tensor map_binary(const Tensor& a, const Tensor& b, BinaryOp op) {
  require_same_shape(a, b, "map_binary");
  Tensor out = a;
  auto lhs = out.values();
  auto rhs = b.values();
  switch (op) {
    case BinaryOp::kAdd:
      for (std::size_t i = 0; i < lhs.size(); ++i) lhs[i] += rhs[i];
      break;
    case BinaryOp::kSub:
      for (std::size_t i = 0; i < lhs.size(); ++i) lhs[i] -= rhs[i];
      break;
    case BinaryOp::kMul:
      for (std::size_t i = 0; i < lhs.size(); ++i) lhs[i] *= rhs[i];
      break;
  }
  return out;
}

double dot(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "dot");
  double acc = 0.0;
  auto x = a.values();
  auto y = b.values();
  for (std::size_t i = 0; i < x.size(); ++i) {
    acc += static_cast<double>(x[i]) * static_cast<double>(y[i]);
  }
  return acc;
}

double sum(const Tensor& a) {
  double acc = 0.0;
  for (float v : a.values()) acc += v;
  return acc;
}

Tensor concat_batch(std::span<const Tensor> parts) {
  if (parts.empty()) throw Error(ErrorCode::kInvalidShape, "empty concat");
  Shape s = parts.front().shape();
  int total = 0;
  for (const Tensor& t : parts) {
    if (t.height() != s.h || t.width() != s.w || t.channels() != s.c) {
      throw Error(ErrorCode::kShapeMismatch, "concat_batch: " +
                                                 to_string(t.shape()) + " vs " +
                                                 to_string(s));
    }
    total += t.batch();
  }
  std::vector<float> data;
  data.reserve(static_cast<std::size_t>(total) * s.h * s.w * s.c);
  for (const Tensor& t : parts) {
    data.insert(data.end(), t.values().begin(), t.values().end());
  }
  s.n = total;
  return Tensor(s, std::move(data));
}

}  // namespace fracdown
