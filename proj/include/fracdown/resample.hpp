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

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fracdown/rational.hpp"
#include "fracdown/tensor.hpp"

namespace fracdown {

enum class FilterTag { kBilinear, kBicubic, kLanczos3 };

struct FilterKind {
  FilterTag tag = FilterTag::kBilinear;
  // Stretch the kernel by the downscale factor so every source pixel
  // contributes. Has no effect when upscaling.
  bool antialias = true;

  bool operator==(const FilterKind&) const = default;
};

inline constexpr FilterKind kBilinear{FilterTag::kBilinear, true};
inline constexpr FilterKind kBicubic{FilterTag::kBicubic, true};
inline constexpr FilterKind kLanczos3{FilterTag::kLanczos3, true};

std::string_view to_string(FilterTag tag);
FilterTag parse_filter_tag(std::string_view name);

// Continuous kernels, centred at 0. Bicubic is Keys with a = -0.5.
double filter_radius(FilterTag tag);
double filter_kernel(FilterTag tag, double x);

// Sparse row-stochastic operator for one axis. Each destination row covers
// a contiguous run of source samples starting at |first|.
struct ResampleMatrix {
  struct Row {
    int first = 0;
    std::vector<float> weights;
  };

  int src_len = 0;
  int dst_len = 0;
  std::vector<Row> rows;

  std::vector<std::pair<int, float>> entries(int row) const;
};

ResampleMatrix build_resample_matrix(FilterKind filter, int src_len, int dst_len);

enum class Axis { kHeight, kWidth };

// Applies |m| (or its transpose) along one spatial axis of an NHWC tensor.
Tensor apply_axis(const Tensor& x, const ResampleMatrix& m, Axis axis);
Tensor apply_axis_transpose(const Tensor& g, const ResampleMatrix& m, Axis axis);

// Separable resize: height first, then width.
Tensor resize_forward(const Tensor& x, FilterKind filter, int out_h, int out_w);

// Exact adjoint of resize_forward from (in_h, in_w) to grad_out's size.
Tensor resize_backward(const Tensor& grad_out, FilterKind filter, int in_h,
                       int in_w);

enum class Direction { kDown, kUp };

// Down: (H*q/p, W*q/p), which must be exact. Up: (H*p/q, W*p/q), rounded
// half up when fractional.
Tensor resize_by_scale(const Tensor& x, FilterKind filter, RationalScale scale,
                       Direction direction);

}  // namespace fracdown
