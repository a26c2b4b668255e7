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

#include "fracdown/nn.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <random>

#include "fracdown/error.hpp"

namespace fracdown {

namespace {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

constexpr int kK = ConvLayer::kKernel;
constexpr int kPad = 1;

int conv_out_len(int len, int stride) { return (len - 1) / stride + 1; }

// Patch matrix for image |n|: one row per output pixel, columns ordered
// (ky, kx, ci) to match the weight layout.
void im2col(const Tensor& x, int n, int stride, int oh, int ow,
            std::vector<float>& cols) {
  const int h = x.height();
  const int w = x.width();
  const int c = x.channels();
  const std::size_t row_len = static_cast<std::size_t>(kK) * kK * c;
  cols.assign(static_cast<std::size_t>(oh) * ow * row_len, 0.0f);
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      float* dst = cols.data() + (static_cast<std::size_t>(oy) * ow + ox) * row_len;
      for (int ky = 0; ky < kK; ++ky) {
        const int iy = oy * stride + ky - kPad;
        if (iy < 0 || iy >= h) continue;
        for (int kx = 0; kx < kK; ++kx) {
          const int ix = ox * stride + kx - kPad;
          if (ix < 0 || ix >= w) continue;
          const float* src = x.data() + x.index(n, iy, ix, 0);
          std::copy(src, src + c, dst + (static_cast<std::size_t>(ky) * kK + kx) * c);
        }
      }
    }
  }
}

void col2im_add(const std::vector<float>& cols, int n, int stride, int oh, int ow,
                Tensor& grad_x) {
  const int h = grad_x.height();
  const int w = grad_x.width();
  const int c = grad_x.channels();
  const std::size_t row_len = static_cast<std::size_t>(kK) * kK * c;
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      const float* src = cols.data() + (static_cast<std::size_t>(oy) * ow + ox) * row_len;
      for (int ky = 0; ky < kK; ++ky) {
        const int iy = oy * stride + ky - kPad;
        if (iy < 0 || iy >= h) continue;
        for (int kx = 0; kx < kK; ++kx) {
          const int ix = ox * stride + kx - kPad;
          if (ix < 0 || ix >= w) continue;
          float* dst = grad_x.data() + grad_x.index(n, iy, ix, 0);
          const float* s = src + (static_cast<std::size_t>(ky) * kK + kx) * c;
          for (int ci = 0; ci < c; ++ci) dst[ci] += s[ci];
        }
      }
    }
  }
}

void check_conv_input(const Tensor& x, const ConvLayer& layer) {
  if (x.channels() != layer.in_ch) {
    throw Error(ErrorCode::kChannelMismatch,
                "conv expects " + std::to_string(layer.in_ch) + " channels, got " +
                    std::to_string(x.channels()));
  }
}

Tensor resize_down(const Tensor& x, const RationalScale& scale, FilterKind filter) {
  return resize_by_scale(x, filter, scale, Direction::kDown);
}

}  // namespace

ConvLayer::ConvLayer(int in, int out, int s)
    : in_ch(in), out_ch(out), stride(s) {
  if (in < 1 || out < 1 || s < 1) {
    throw Error(ErrorCode::kInvalidShape, "conv layer " + std::to_string(in) + "x" +
                                              std::to_string(out) + "|" +
                                              std::to_string(s));
  }
  weights.assign(weight_count(), 0.0f);
  bias.assign(static_cast<std::size_t>(out), 0.0f);
}

Tensor conv2d_forward(const Tensor& x, const ConvLayer& layer) {
  check_conv_input(x, layer);
  const int oh = conv_out_len(x.height(), layer.stride);
  const int ow = conv_out_len(x.width(), layer.stride);
  Tensor out({x.batch(), oh, ow, layer.out_ch}, 0.0f);
  const int k = kK * kK * layer.in_ch;
  const int pixels = oh * ow;
  ConstMatrixMap weights(layer.weights.data(), k, layer.out_ch);
  Eigen::Map<const Eigen::RowVectorXf> bias(layer.bias.data(), layer.out_ch);
  std::vector<float> cols;
  for (int n = 0; n < x.batch(); ++n) {
    im2col(x, n, layer.stride, oh, ow, cols);
    MatrixMap y(out.data() + out.index(n, 0, 0, 0), pixels, layer.out_ch);
    y.noalias() = ConstMatrixMap(cols.data(), pixels, k) * weights;
    y.rowwise() += bias;
  }
  return out;
}

ConvGrads conv2d_backward(const Tensor& x, const ConvLayer& layer,
                          const Tensor& grad_out, bool want_grad_x) {
  check_conv_input(x, layer);
  const int oh = conv_out_len(x.height(), layer.stride);
  const int ow = conv_out_len(x.width(), layer.stride);
  const Shape expected{x.batch(), oh, ow, layer.out_ch};
  if (grad_out.shape() != expected) {
    throw Error(ErrorCode::kShapeMismatch, "conv grad " + to_string(grad_out.shape()) +
                                               ", expected " + to_string(expected));
  }
  const int k = kK * kK * layer.in_ch;
  const int pixels = oh * ow;
  ConvGrads grads;
  grads.grad_w.assign(layer.weight_count(), 0.0f);
  grads.grad_b.assign(static_cast<std::size_t>(layer.out_ch), 0.0f);
  if (want_grad_x) grads.grad_x = Tensor(x.shape(), 0.0f);

  MatrixMap gw(grads.grad_w.data(), k, layer.out_ch);
  ConstMatrixMap weights(layer.weights.data(), k, layer.out_ch);
  std::vector<float> cols;
  for (int n = 0; n < x.batch(); ++n) {
    ConstMatrixMap g(grad_out.data() + grad_out.index(n, 0, 0, 0), pixels, layer.out_ch);
    im2col(x, n, layer.stride, oh, ow, cols);
    gw.noalias() += ConstMatrixMap(cols.data(), pixels, k).transpose() * g;
    // Plain loop: Eigen's vectorised reductions sum in an alignment-dependent
    // order, which would make training runs differ bit-wise.
    const float* go = grad_out.data() + grad_out.index(n, 0, 0, 0);
    for (int p = 0; p < pixels; ++p) {
      for (int co = 0; co < layer.out_ch; ++co) grads.grad_b[co] += go[p * layer.out_ch + co];
    }
    if (want_grad_x) {
      MatrixMap gcols(cols.data(), pixels, k);
      gcols.noalias() = g * weights.transpose();
      col2im_add(cols, n, layer.stride, oh, ow, grads.grad_x);
    }
  }
  return grads;
}

Tensor pool_forward(const Tensor& x, const PoolLayer& pool) {
  const int f = pool.factor;
  if (f < 1 || x.height() % f != 0 || x.width() % f != 0) {
    throw Error(ErrorCode::kIndivisibleSize,
                to_string(x.shape()) + " by pool factor " + std::to_string(f));
  }
  const int oh = x.height() / f;
  const int ow = x.width() / f;
  const int c = x.channels();
  Tensor out({x.batch(), oh, ow, c}, 0.0f);
  const float inv = 1.0f / static_cast<float>(f * f);
  for (int n = 0; n < x.batch(); ++n) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        for (int ch = 0; ch < c; ++ch) {
          float acc = pool.kind == PoolKind::kMax ? x.at(n, oy * f, ox * f, ch) : 0.0f;
          for (int dy = 0; dy < f; ++dy) {
            for (int dx = 0; dx < f; ++dx) {
              const float v = x.at(n, oy * f + dy, ox * f + dx, ch);
              acc = pool.kind == PoolKind::kMax ? std::max(acc, v) : acc + v;
            }
          }
          out.at(n, oy, ox, ch) = pool.kind == PoolKind::kMax ? acc : acc * inv;
        }
      }
    }
  }
  return out;
}

Tensor pool_backward(const Tensor& x, const PoolLayer& pool, const Tensor& grad_out) {
  const int f = pool.factor;
  const Shape expected{x.batch(), x.height() / f, x.width() / f, x.channels()};
  if (grad_out.shape() != expected) {
    throw Error(ErrorCode::kShapeMismatch, "pool grad " + to_string(grad_out.shape()));
  }
  Tensor gx(x.shape(), 0.0f);
  const float inv = 1.0f / static_cast<float>(f * f);
  for (int n = 0; n < x.batch(); ++n) {
    for (int oy = 0; oy < expected.h; ++oy) {
      for (int ox = 0; ox < expected.w; ++ox) {
        for (int ch = 0; ch < x.channels(); ++ch) {
          const float g = grad_out.at(n, oy, ox, ch);
          if (pool.kind == PoolKind::kAverage) {
            for (int dy = 0; dy < f; ++dy)
              for (int dx = 0; dx < f; ++dx) gx.at(n, oy * f + dy, ox * f + dx, ch) += g * inv;
            continue;
          }
          int by = 0, bx = 0;
          float best = x.at(n, oy * f, ox * f, ch);
          for (int dy = 0; dy < f; ++dy) {
            for (int dx = 0; dx < f; ++dx) {
              const float v = x.at(n, oy * f + dy, ox * f + dx, ch);
              if (v > best) {
                best = v;
                by = dy;
                bx = dx;
              }
            }
          }
          gx.at(n, oy * f + by, ox * f + bx, ch) += g;
        }
      }
    }
  }
  return gx;
}

Tensor relu(const Tensor& x) {
  Tensor out = x;
  for (float& v : out.values()) v = std::max(v, 0.0f);
  return out;
}

std::string_view to_string(BlockKind kind) {
  switch (kind) {
    case BlockKind::kStridedConv: return "strided";
    case BlockKind::kConvPool: return "conv-pool";
    case BlockKind::kConvResize: return "conv-resize";
    case BlockKind::kResizeConv: return "resize-conv";
  }
  return "?";
}

BlockKind parse_block_kind(std::string_view name) {
  if (name == "strided" || name == "strided-conv") return BlockKind::kStridedConv;
  if (name == "conv-pool") return BlockKind::kConvPool;
  if (name == "conv-resize") return BlockKind::kConvResize;
  if (name == "resize-conv") return BlockKind::kResizeConv;
  throw Error(ErrorCode::kBadConfig, "unknown block kind '" + std::string(name) + "'");
}

bool block_accepts_scale(BlockKind kind, const RationalScale& scale) {
  if (kind == BlockKind::kStridedConv || kind == BlockKind::kConvPool) {
    return scale.is_integer();
  }
  return true;
}

Tensor block_forward(const Tensor& x, BlockKind kind, const ConvLayer& layer,
                     const RationalScale& scale, const BlockOptions& options) {
  if (!block_accepts_scale(kind, scale)) {
    throw Error(ErrorCode::kNonIntegerScale,
                std::string(to_string(kind)) + " needs an integer scale, got " + scale.str());
  }
  const int m = static_cast<int>(scale.num());
  switch (kind) {
    case BlockKind::kStridedConv: {
      ConvLayer strided = layer;
      strided.stride = m;
      return conv2d_forward(x, strided);
    }
    case BlockKind::kConvPool:
      return pool_forward(conv2d_forward(x, layer), {options.pool, m});
    case BlockKind::kConvResize:
      return resize_down(conv2d_forward(x, layer), scale, options.resizer);
    case BlockKind::kResizeConv:
      return conv2d_forward(resize_down(x, scale, options.resizer), layer);
  }
  return {};
}

Network::Network(NetworkConfig config, std::vector<ConvLayer> layers)
    : config_(std::move(config)), layers_(std::move(layers)) {
  if (layers_.size() < 2) {
    throw Error(ErrorCode::kInvalidShape, "network needs at least two stages");
  }
  if (!block_accepts_scale(config_.block, config_.scale)) {
    throw Error(ErrorCode::kInfeasibleKind, std::string(to_string(config_.block)) +
                                                " at M=" + config_.scale.str());
  }
  for (std::size_t i = 1; i < layers_.size(); ++i) {
    if (layers_[i].in_ch != layers_[i - 1].out_ch || layers_[i].stride != 1) {
      throw Error(ErrorCode::kChannelMismatch, "stage " + std::to_string(i + 1) +
                                                   " does not chain onto the previous stage");
    }
  }
  if (layers_.back().out_ch != layers_.front().in_ch) {
    throw Error(ErrorCode::kChannelMismatch, "last stage must restore the input channel count");
  }
  config_.stages = static_cast<int>(layers_.size());
}

std::size_t Network::parameter_count() const {
  std::size_t total = 0;
  for (const auto& l : layers_) total += l.parameter_count();
  return total;
}

void Network::check_input(const Tensor& x) const {
  if (x.channels() != layers_.front().in_ch) {
    throw Error(ErrorCode::kChannelMismatch,
                "network expects " + std::to_string(layers_.front().in_ch) +
                    " channels, got " + std::to_string(x.channels()));
  }
  if (config_.scale.down_length(x.height()) < 1 || config_.scale.down_length(x.width()) < 1) {
    throw Error(ErrorCode::kIndivisibleSize,
                std::to_string(x.height()) + "x" + std::to_string(x.width()) +
                    " at M=" + config_.scale.str());
  }
}

Tensor Network::skip(const Tensor& x) const {
  return resize_down(x, config_.scale, config_.skip);
}

Tensor Network::forward(const Tensor& x, bool keep_intermediates) {
  check_input(x);
  Cache cache;
  const std::size_t stages = layers_.size();
  cache.conv_inputs.reserve(stages);
  cache.outputs.reserve(stages);

  const ConvLayer& first = layers_.front();
  const int m = static_cast<int>(config_.scale.num());
  Tensor pre;
  switch (config_.block) {
    case BlockKind::kStridedConv:
      cache.conv_inputs.push_back(x);
      pre = conv2d_forward(x, first);
      break;
    case BlockKind::kConvPool:
      cache.conv_inputs.push_back(x);
      cache.first_conv_out = conv2d_forward(x, first);
      pre = pool_forward(cache.first_conv_out, {config_.pool, m});
      break;
    case BlockKind::kConvResize:
      cache.conv_inputs.push_back(x);
      cache.first_conv_out = conv2d_forward(x, first);
      pre = resize_down(cache.first_conv_out, config_.scale, config_.resizer);
      break;
    case BlockKind::kResizeConv:
      cache.conv_inputs.push_back(resize_down(x, config_.scale, config_.resizer));
      pre = conv2d_forward(cache.conv_inputs.back(), first);
      break;
  }
  cache.outputs.push_back(relu(pre));

  for (std::size_t i = 1; i < stages; ++i) {
    cache.conv_inputs.push_back(cache.outputs.back());
    Tensor y = conv2d_forward(cache.conv_inputs.back(), layers_[i]);
    cache.outputs.push_back(i + 1 < stages ? relu(y) : std::move(y));
  }

  Tensor out = map_binary(cache.outputs.back(), skip(x), BinaryOp::kAdd);
  if (keep_intermediates) {
    cache_ = std::move(cache);
  } else {
    cache_.reset();
  }
  return out;
}

NetworkGrads Network::backward(const Tensor& grad_out) {
  if (!cache_) {
    throw Error(ErrorCode::kNoForwardState, "backward without a retained forward pass");
  }
  const Cache& cache = *cache_;
  if (grad_out.shape() != cache.outputs.back().shape()) {
    throw Error(ErrorCode::kShapeMismatch, "network grad " + to_string(grad_out.shape()));
  }
  NetworkGrads grads(layers_.size());
  Tensor g = grad_out;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const bool has_relu = i + 1 < layers_.size();
    if (has_relu) {
      auto out = cache.outputs[i].values();
      auto gv = g.values();
      for (std::size_t j = 0; j < gv.size(); ++j) {
        if (out[j] <= 0.0f) gv[j] = 0.0f;
      }
    }
    if (i == 0) {
      if (config_.block == BlockKind::kConvPool) {
        g = pool_backward(cache.first_conv_out,
                          {config_.pool, static_cast<int>(config_.scale.num())}, g);
      } else if (config_.block == BlockKind::kConvResize) {
        g = resize_backward(g, config_.resizer, cache.first_conv_out.height(),
                            cache.first_conv_out.width());
      }
    }
    ConvGrads cg = conv2d_backward(cache.conv_inputs[i], layers_[i], g, i > 0);
    grads[i].w = std::move(cg.grad_w);
    grads[i].b = std::move(cg.grad_b);
    g = std::move(cg.grad_x);
  }
  return grads;
}

std::vector<std::span<float>> Network::parameters() {
  std::vector<std::span<float>> params;
  for (auto& l : layers_) {
    params.emplace_back(l.weights);
    params.emplace_back(l.bias);
  }
  return params;
}

NetworkGrads Network::zero_grads() const {
  NetworkGrads grads(layers_.size());
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    grads[i].w.assign(layers_[i].weight_count(), 0.0f);
    grads[i].b.assign(layers_[i].bias.size(), 0.0f);
  }
  return grads;
}

Network build_cnncr(const NetworkConfig& config) {
  if (!block_accepts_scale(config.block, config.scale)) {
    throw Error(ErrorCode::kInfeasibleKind, std::string(to_string(config.block)) +
                                                " cannot realise M=" + config.scale.str());
  }
  if (config.stages < 2) {
    throw Error(ErrorCode::kInvalidShape, "CNN-CR needs at least 2 stages");
  }
  std::mt19937_64 rng(config.seed);
  std::vector<ConvLayer> layers;
  layers.reserve(static_cast<std::size_t>(config.stages));
  for (int i = 0; i < config.stages; ++i) {
    const bool first = i == 0;
    const bool last = i + 1 == config.stages;
    const int in = first ? 3 : config.channels;
    const int out = last ? 3 : config.channels;
    const int stride =
        first && config.block == BlockKind::kStridedConv ? static_cast<int>(config.scale.num()) : 1;
    ConvLayer layer(in, out, stride);
    if (!last) {
      // He initialisation for ReLU stages; the residual head starts at zero.
      std::normal_distribution<float> normal(
          0.0f, std::sqrt(2.0f / static_cast<float>(ConvLayer::kKernel * ConvLayer::kKernel * in)));
      for (float& w : layer.weights) w = normal(rng);
    }
    layers.push_back(std::move(layer));
  }
  return Network(config, std::move(layers));
}

Network build_cnncr(RationalScale scale, BlockKind kind, std::uint64_t seed) {
  NetworkConfig config;
  config.scale = scale;
  config.block = kind;
  config.seed = seed;
  return build_cnncr(config);
}

}  // namespace fracdown
