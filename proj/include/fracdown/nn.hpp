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

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "fracdown/rational.hpp"
#include "fracdown/resample.hpp"
#include "fracdown/tensor.hpp"

namespace fracdown {

// 3x3 cross-correlation with one pixel of zero padding on every side.
// Output is ceil(H/s) x ceil(W/s); output (y, x) is centred on input (s*y, s*x).
struct ConvLayer {
  static constexpr int kKernel = 3;

  int in_ch = 0;
  int out_ch = 0;
  int stride = 1;
  std::vector<float> weights;  // (kh, kw, in_ch, out_ch), row-major
  std::vector<float> bias;     // (out_ch)

  ConvLayer() = default;
  ConvLayer(int in, int out, int s);

  std::size_t weight_count() const {
    return static_cast<std::size_t>(kKernel) * kKernel * in_ch * out_ch;
  }
  std::size_t parameter_count() const { return weight_count() + bias.size(); }
  float& weight(int ky, int kx, int ci, int co) {
    return weights[((static_cast<std::size_t>(ky) * kKernel + kx) * in_ch + ci) * out_ch + co];
  }
  float weight(int ky, int kx, int ci, int co) const {
    return weights[((static_cast<std::size_t>(ky) * kKernel + kx) * in_ch + ci) * out_ch + co];
  }
};

struct ConvGrads {
  Tensor grad_x;  // empty when not requested
  std::vector<float> grad_w;
  std::vector<float> grad_b;
};

Tensor conv2d_forward(const Tensor& x, const ConvLayer& layer);
ConvGrads conv2d_backward(const Tensor& x, const ConvLayer& layer,
                          const Tensor& grad_out, bool want_grad_x = true);

enum class PoolKind { kMax, kAverage };

struct PoolLayer {
  PoolKind kind = PoolKind::kAverage;
  int factor = 2;
};

Tensor pool_forward(const Tensor& x, const PoolLayer& pool);
// |x| is the pooling input; max pooling routes each gradient to the first
// maximal element of its window.
Tensor pool_backward(const Tensor& x, const PoolLayer& pool, const Tensor& grad_out);

Tensor relu(const Tensor& x);

enum class BlockKind { kStridedConv, kConvPool, kConvResize, kResizeConv };

std::string_view to_string(BlockKind kind);
BlockKind parse_block_kind(std::string_view name);
bool block_accepts_scale(BlockKind kind, const RationalScale& scale);

struct BlockOptions {
  FilterKind resizer = kBilinear;
  PoolKind pool = PoolKind::kAverage;
};

// Resolution-changing block without activation. |layer| must have stride 1
// except for kStridedConv, which convolves with stride M regardless.
Tensor block_forward(const Tensor& x, BlockKind kind, const ConvLayer& layer,
                     const RationalScale& scale, const BlockOptions& options = {});

struct NetworkConfig {
  RationalScale scale;
  BlockKind block = BlockKind::kConvResize;
  std::uint64_t seed = 0;
  int stages = 10;  // fewer than 10 gives a truncated net (minimum 2)
  int channels = 64;
  FilterKind resizer = kBilinear;
  FilterKind skip = kBicubic;
  PoolKind pool = PoolKind::kAverage;
};

struct LayerGrads {
  std::vector<float> w;
  std::vector<float> b;
};
using NetworkGrads = std::vector<LayerGrads>;

// CNN-CR downsampler: a resolution-changing first stage followed by stride-1
// 3x3 convs, ReLU after every stage but the last, plus a parameter-free
// skip path that adds the input's skip-filter downsample to the output.
class Network {
 public:
  Network(NetworkConfig config, std::vector<ConvLayer> layers);

  const NetworkConfig& config() const noexcept { return config_; }
  const RationalScale& scale() const noexcept { return config_.scale; }
  std::span<ConvLayer> layers() noexcept { return layers_; }
  std::span<const ConvLayer> layers() const noexcept { return layers_; }
  std::size_t parameter_count() const;

  std::int64_t iteration() const noexcept { return iteration_; }
  void set_iteration(std::int64_t it) noexcept { iteration_ = it; }

  Tensor forward(const Tensor& x, bool keep_intermediates = false);
  NetworkGrads backward(const Tensor& grad_out);
  bool has_forward_state() const noexcept { return cache_.has_value(); }

  // Skip-path output alone (what a zero-residual network produces).
  Tensor skip(const Tensor& x) const;

  // Flat views over all parameters / a matching zeroed gradient buffer, in
  // layer order, weights before bias.
  std::vector<std::span<float>> parameters();
  NetworkGrads zero_grads() const;

 private:
  struct Cache {
    std::vector<Tensor> conv_inputs;  // input seen by each stage's conv
    std::vector<Tensor> outputs;      // post-activation output of each stage
    Tensor first_conv_out;            // conv output before pool/resize
  };

  void check_input(const Tensor& x) const;

  NetworkConfig config_;
  std::vector<ConvLayer> layers_;
  std::int64_t iteration_ = 0;
  std::optional<Cache> cache_;
};

Network build_cnncr(const NetworkConfig& config);
Network build_cnncr(RationalScale scale, BlockKind kind, std::uint64_t seed);

}  // namespace fracdown
