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

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace fracdown {

// (batch, height, width, channels), row-major in that order.
struct Shape {
  int n = 1;
  int h = 1;
  int w = 1;
  int c = 1;

  std::size_t elements() const {
    return static_cast<std::size_t>(n) * h * w * c;
  }
  bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& shape);

// Dense 4-D float tensor with value semantics.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, float fill);
  Tensor(Shape shape, std::vector<float> data);

  const Shape& shape() const noexcept { return shape_; }
  int batch() const noexcept { return shape_.n; }
  int height() const noexcept { return shape_.h; }
  int width() const noexcept { return shape_.w; }
  int channels() const noexcept { return shape_.c; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::size_t index(int n, int y, int x, int c) const {
    return ((static_cast<std::size_t>(n) * shape_.h + y) * shape_.w + x) *
               shape_.c + c;
  }
  float& at(int n, int y, int x, int c) { return data_[index(n, y, x, c)]; }
  float at(int n, int y, int x, int c) const { return data_[index(n, y, x, c)]; }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  std::span<float> values() & noexcept { return data_; }
  std::span<const float> values() const& noexcept { return data_; }
  std::span<const float> values() const&& = delete;
  float* data() noexcept { return data_.data(); }
  const float* data() const noexcept { return data_.data(); }

  bool all_finite() const;
  // Copies image |n| out as a batch-1 tensor.
  Tensor slice(int n) const;

 private:
  Shape shape_{0, 0, 0, 0};
  std::vector<float> data_;
};

enum class BinaryOp { kAdd, kSub, kMul };

void check_shape(const Shape& shape);
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

Tensor tensor_create(Shape shape, float fill);
Tensor map_binary(const Tensor& a, const Tensor& b, BinaryOp op);

// Left-to-right accumulation in double; dot(a, b) == dot(b, a) bitwise.
double dot(const Tensor& a, const Tensor& b);
double sum(const Tensor& a);

// Stacks batch-1 (or larger) tensors of identical (h, w, c) along batch.
Tensor concat_batch(std::span<const Tensor> parts);

}  // namespace fracdown
