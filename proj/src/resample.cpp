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

#include "fracdown/resample.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fracdown/error.hpp"

namespace fracdown {

std::string_view to_string(FilterTag tag) {
  switch (tag) {
    case FilterTag::kBilinear: return "bilinear";
    case FilterTag::kBicubic: return "bicubic";
    case FilterTag::kLanczos3: return "lanczos";
  }
  return "?";
}

FilterTag parse_filter_tag(std::string_view name) {
  if (name == "bilinear") return FilterTag::kBilinear;
  if (name == "bicubic") return FilterTag::kBicubic;
  if (name == "lanczos" || name == "lanczos3") return FilterTag::kLanczos3;
  throw Error(ErrorCode::kBadConfig, "unknown filter '" + std::string(name) + "'");
}

double filter_radius(FilterTag tag) {
  switch (tag) {
    case FilterTag::kBilinear: return 1.0;
    case FilterTag::kBicubic: return 2.0;
    case FilterTag::kLanczos3: return 3.0;
  }
  return 1.0;
}

namespace {

double sinc(double x) {
  if (x == 0.0) return 1.0;
  if (x == std::round(x)) return 0.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

}  // namespace

double filter_kernel(FilterTag tag, double x) {
  const double t = std::abs(x);
  switch (tag) {
    case FilterTag::kBilinear:
      return t < 1.0 ? 1.0 - t : 0.0;
    case FilterTag::kBicubic: {
      constexpr double a = -0.5;
      if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
      if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
      return 0.0;
    }
    case FilterTag::kLanczos3:
      return t < 3.0 ? sinc(t) * sinc(t / 3.0) : 0.0;
  }
  return 0.0;
}

std::vector<std::pair<int, float>> ResampleMatrix::entries(int row) const {
  std::vector<std::pair<int, float>> out;
  const Row& r = rows.at(static_cast<std::size_t>(row));
  for (std::size_t k = 0; k < r.weights.size(); ++k) {
    out.emplace_back(r.first + static_cast<int>(k), r.weights[k]);
  }
  return out;
}

ResampleMatrix build_resample_matrix(FilterKind filter, int src_len, int dst_len) {
  if (src_len < 1 || dst_len < 1) {
    throw Error(ErrorCode::kInvalidLength, std::to_string(src_len) + " -> " +
                                               std::to_string(dst_len));
  }
  ResampleMatrix m;
  m.src_len = src_len;
  m.dst_len = dst_len;
  m.rows.resize(static_cast<std::size_t>(dst_len));

  const double scale = static_cast<double>(src_len) / dst_len;
  const double stretch = (filter.antialias && scale > 1.0) ? scale : 1.0;
  const double support = filter_radius(filter.tag) * stretch;
  std::vector<double> acc(static_cast<std::size_t>(src_len));

  for (int i = 0; i < dst_len; ++i) {
    const double center = (i + 0.5) * scale - 0.5;
    const int lo = static_cast<int>(std::ceil(center - support));
    const int hi = static_cast<int>(std::floor(center + support));
    const int first = std::max(lo, 0);
    const int last = std::min(hi, src_len - 1);
    std::fill(acc.begin() + first, acc.begin() + last + 1, 0.0);
    for (int j = lo; j <= hi; ++j) {
      const double w = filter_kernel(filter.tag, (j - center) / stretch);
      acc[static_cast<std::size_t>(std::clamp(j, 0, src_len - 1))] += w;
    }
    // Trim exact zeros at the ends; interior zeros stay so the run is contiguous.
    int a = first;
    int b = last;
    while (a < b && acc[static_cast<std::size_t>(a)] == 0.0) ++a;
    while (b > a && acc[static_cast<std::size_t>(b)] == 0.0) --b;
    double total = 0.0;
    for (int j = a; j <= b; ++j) total += acc[static_cast<std::size_t>(j)];

    ResampleMatrix::Row& row = m.rows[static_cast<std::size_t>(i)];
    row.first = a;
    row.weights.reserve(static_cast<std::size_t>(b - a + 1));
    for (int j = a; j <= b; ++j) {
      row.weights.push_back(static_cast<float>(acc[static_cast<std::size_t>(j)] / total));
    }
  }
  return m;
}

Tensor apply_axis(const Tensor& x, const ResampleMatrix& m, Axis axis) {
  const Shape in = x.shape();
  const int len = axis == Axis::kHeight ? in.h : in.w;
  if (len != m.src_len) {
    throw Error(ErrorCode::kShapeMismatch, "axis length " + std::to_string(len) +
                                               " vs matrix source " +
                                               std::to_string(m.src_len));
  }
  Shape out_shape = in;
  (axis == Axis::kHeight ? out_shape.h : out_shape.w) = m.dst_len;
  Tensor out(out_shape, 0.0f);
  const float* src = x.data();
  float* dst = out.data();

  if (axis == Axis::kHeight) {
    const std::size_t row_len = static_cast<std::size_t>(in.w) * in.c;
    for (int n = 0; n < in.n; ++n) {
      for (int y = 0; y < m.dst_len; ++y) {
        float* o = dst + (static_cast<std::size_t>(n) * m.dst_len + y) * row_len;
        const auto& row = m.rows[static_cast<std::size_t>(y)];
        for (std::size_t k = 0; k < row.weights.size(); ++k) {
          const float w = row.weights[k];
          const float* s =
              src + (static_cast<std::size_t>(n) * in.h + row.first + k) * row_len;
          for (std::size_t i = 0; i < row_len; ++i) o[i] += w * s[i];
        }
      }
    }
  } else {
    const std::size_t c = static_cast<std::size_t>(in.c);
    const std::size_t lines = static_cast<std::size_t>(in.n) * in.h;
    for (std::size_t line = 0; line < lines; ++line) {
      const float* s = src + line * in.w * c;
      float* o = dst + line * m.dst_len * c;
      for (int x_out = 0; x_out < m.dst_len; ++x_out) {
        const auto& row = m.rows[static_cast<std::size_t>(x_out)];
        float* op = o + x_out * c;
        for (std::size_t k = 0; k < row.weights.size(); ++k) {
          const float w = row.weights[k];
          const float* sp = s + (row.first + k) * c;
          for (std::size_t ch = 0; ch < c; ++ch) op[ch] += w * sp[ch];
        }
      }
    }
  }
  return out;
}

Tensor apply_axis_transpose(const Tensor& g, const ResampleMatrix& m, Axis axis) {
  const Shape gs = g.shape();
  const int len = axis == Axis::kHeight ? gs.h : gs.w;
  if (len != m.dst_len) {
    throw Error(ErrorCode::kShapeMismatch, "axis length " + std::to_string(len) +
                                               " vs matrix destination " +
                                               std::to_string(m.dst_len));
  }
  Shape out_shape = gs;
  (axis == Axis::kHeight ? out_shape.h : out_shape.w) = m.src_len;
  Tensor out(out_shape, 0.0f);
  const float* src = g.data();
  float* dst = out.data();

  if (axis == Axis::kHeight) {
    const std::size_t row_len = static_cast<std::size_t>(gs.w) * gs.c;
    for (int n = 0; n < gs.n; ++n) {
      for (int y = 0; y < m.dst_len; ++y) {
        const float* s = src + (static_cast<std::size_t>(n) * m.dst_len + y) * row_len;
        const auto& row = m.rows[static_cast<std::size_t>(y)];
        for (std::size_t k = 0; k < row.weights.size(); ++k) {
          const float w = row.weights[k];
          float* o =
              dst + (static_cast<std::size_t>(n) * m.src_len + row.first + k) * row_len;
          for (std::size_t i = 0; i < row_len; ++i) o[i] += w * s[i];
        }
      }
    }
  } else {
    const std::size_t c = static_cast<std::size_t>(gs.c);
    const std::size_t lines = static_cast<std::size_t>(gs.n) * gs.h;
    for (std::size_t line = 0; line < lines; ++line) {
      const float* s = src + line * m.dst_len * c;
      float* o = dst + line * m.src_len * c;
      for (int x_out = 0; x_out < m.dst_len; ++x_out) {
        const auto& row = m.rows[static_cast<std::size_t>(x_out)];
        const float* sp = s + x_out * c;
        for (std::size_t k = 0; k < row.weights.size(); ++k) {
          const float w = row.weights[k];
          float* op = o + (row.first + k) * c;
          for (std::size_t ch = 0; ch < c; ++ch) op[ch] += w * sp[ch];
        }
      }
    }
  }
  return out;
}

Tensor resize_forward(const Tensor& x, FilterKind filter, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) {
    throw Error(ErrorCode::kInvalidLength,
                "output " + std::to_string(out_h) + "x" + std::to_string(out_w));
  }
  const auto mh = build_resample_matrix(filter, x.height(), out_h);
  const auto mw = build_resample_matrix(filter, x.width(), out_w);
  return apply_axis(apply_axis(x, mh, Axis::kHeight), mw, Axis::kWidth);
}

Tensor resize_backward(const Tensor& grad_out, FilterKind filter, int in_h,
                       int in_w) {
  if (in_h < 1 || in_w < 1) {
    throw Error(ErrorCode::kShapeMismatch,
                "input " + std::to_string(in_h) + "x" + std::to_string(in_w));
  }
  const auto mh = build_resample_matrix(filter, in_h, grad_out.height());
  const auto mw = build_resample_matrix(filter, in_w, grad_out.width());
  return apply_axis_transpose(apply_axis_transpose(grad_out, mw, Axis::kWidth), mh,
                              Axis::kHeight);
}

Tensor resize_by_scale(const Tensor& x, FilterKind filter, RationalScale scale,
                       Direction direction) {
  if (direction == Direction::kDown) {
    const long long h = scale.down_length(x.height());
    const long long w = scale.down_length(x.width());
    if (h < 1 || w < 1) {
      throw Error(ErrorCode::kIndivisibleSize,
                  std::to_string(x.height()) + "x" + std::to_string(x.width()) +
                      " at M=" + scale.str() + "; crop to a multiple of " +
                      std::to_string(scale.num()) + " first");
    }
    return resize_forward(x, filter, static_cast<int>(h), static_cast<int>(w));
  }
  return resize_forward(x, filter, static_cast<int>(scale.up_length(x.height())),
                        static_cast<int>(scale.up_length(x.width())));
}

}  // namespace fracdown
