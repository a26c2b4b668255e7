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

#include <filesystem>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fracdown/tensor.hpp"

namespace fracdown {

inline constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();

// 10*log10(peak^2 / MSE) over every element; kInfinitePsnr for identical inputs.
double psnr(const Tensor& a, const Tensor& b, double peak = 1.0);

// BT.709 luma of an RGB tensor; single-channel tensors pass through.
Tensor to_luma(const Tensor& x);

// Mean SSIM over all valid 11x11 Gaussian windows (sigma 1.5, K1 = 0.01,
// K2 = 0.03), averaged over the batch. RGB inputs are reduced to luma.
double ssim(const Tensor& a, const Tensor& b, double dynamic_range = 1.0);

enum class MetricTag { kPsnr, kSsim, kVmaf };

std::string_view to_string(MetricTag tag);
MetricTag parse_metric_tag(std::string_view name);

struct RatePoint {
  int qp = 0;
  double bitrate_kbps = 0.0;
  double quality = 0.0;
};

struct RateQualityCurve {
  MetricTag metric = MetricTag::kPsnr;
  std::vector<RatePoint> points;

  void sort_by_bitrate();
  // Human-readable invariant violations; empty when the curve is usable.
  std::vector<std::string> violations() const;
};

enum class BdFit {
  kPchip,  // monotone piecewise cubic Hermite through every point
  kCubic,  // classic least-squares cubic polynomial
};

BdFit parse_bd_fit(std::string_view name);

// Average bitrate difference of |test| against |reference| in percent at
// equal quality; negative means |test| needs fewer bits.
double bd_rate(const RateQualityCurve& reference, const RateQualityCurve& test,
               BdFit fit = BdFit::kPchip);

// One encode of a ladder, as stored in curve CSV files.
struct LadderPoint {
  int qp = 0;
  double bitrate_kbps = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
  std::optional<double> vmaf;
};

// "qp,bitrate_kbps,psnr,ssim,vmaf" with an empty vmaf cell when absent.
void write_curve_csv(const std::vector<LadderPoint>& points, std::ostream& out);
void save_curve_csv(const std::vector<LadderPoint>& points,
                    const std::filesystem::path& path);
std::vector<LadderPoint> read_curve_csv(std::istream& in);
std::vector<LadderPoint> load_curve_csv(const std::filesystem::path& path);

RateQualityCurve curve_for_metric(const std::vector<LadderPoint>& points, MetricTag metric);

}  // namespace fracdown
