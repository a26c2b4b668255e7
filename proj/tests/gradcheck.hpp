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

// Central-difference gradient check for a three-stage conv-resize CNN-CR
// truncation. The finite differences run on the double-precision oracle and
// only recompute the part of the graph a parameter can influence, which
// keeps a check of every parameter cheap.

#include <algorithm>
#include <cmath>
#include <vector>

#include "fracdown/nn.hpp"
#include "fracdown/resample.hpp"
#include "fracdown/train.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace fracdown::testing {

struct GradCheckReport {
  std::size_t checked = 0;
  std::size_t failures = 0;
  std::size_t kink_crossings = 0;  // rechecked with the fine step
  double worst_rel = 0.0;
  double max_abs_fd = 0.0;
};

inline oracle::Conv to_oracle(const ConvLayer& l) {
  oracle::Conv c;
  c.in = l.in_ch;
  c.out = l.out_ch;
  c.w.assign(l.weights.begin(), l.weights.end());
  c.b.assign(l.bias.begin(), l.bias.end());
  return c;
}

// Library gradient of the reconstruction loss for one batch-1 input.
inline NetworkGrads analytic_gradients(Network& net, const Tensor& x) {
  const Tensor low = net.forward(x, true);
  const Tensor x_hat = resize_forward(low, kBicubic, x.height(), x.width());
  const LossValue loss = mse_loss(x, x_hat);
  return net.backward(resize_backward(loss.grad, kBicubic, low.height(), low.width()));
}

class ThreeStageOracle {
 public:
  ThreeStageOracle(const Network& net, const Tensor& x)
      : x_(to_image(x)), oh_(static_cast<int>(net.scale().down_length(x.height()))),
        ow_(static_cast<int>(net.scale().down_length(x.width()))) {
    for (const auto& l : net.layers()) layers_.push_back(to_oracle(l));
    wh_ = oracle::dense_weights(oracle::Kernel::kTriangle, true, x_.h, oh_);
    ww_ = oracle::dense_weights(oracle::Kernel::kTriangle, true, x_.w, ow_);
    a1_ = oracle::conv(x_, layers_[0]);
    r1_ = oracle::resize(a1_, oracle::Kernel::kTriangle, true, oh_, ow_);
    h1_ = r1_;
    oracle::relu_inplace(h1_);
    p2_ = oracle::conv(h1_, layers_[1]);
    h2_ = p2_;
    oracle::relu_inplace(h2_);
    o_ = oracle::conv(h2_, layers_[2]);
    skip_ = oracle::resize(x_, oracle::Kernel::kKeys, true, oh_, ow_);
  }

  double loss() const { return loss_from_output(o_); }

  // d loss / d parameter by central differences. |layer| in 0..2, |index|
  // runs over weights then bias, as in ConvLayer.
  // |crossed| is set when either probe flips the sign of a ReLU input, in
  // which case the secant spans a kink and does not estimate the derivative.
  double finite_difference(int layer, std::size_t index, double h, bool* crossed = nullptr) const {
    bool a = false, b = false;
    const double fd =
        (perturbed_loss(layer, index, h, a) - perturbed_loss(layer, index, -h, b)) / (2.0 * h);
    if (crossed) *crossed = a || b;
    return fd;
  }

 private:
  double loss_from_output(const oracle::Image& o) const {
    oracle::Image low = o;
    for (std::size_t i = 0; i < low.v.size(); ++i) low.v[i] += skip_.v[i];
    return oracle::reconstruction_loss(x_, low);
  }

  // Adds delta (one input channel, full plane) pushed through |layer|'s
  // weights for that input channel into |out|.
  static void push_channel(const oracle::Conv& layer, int ci, const std::vector<double>& delta,
                           int h, int w, oracle::Image& out) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int ky = 0; ky < 3; ++ky)
          for (int kx = 0; kx < 3; ++kx) {
            const int iy = y + ky - 1, ix = x + kx - 1;
            if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
            const double d = delta[static_cast<std::size_t>(iy) * w + ix];
            if (d == 0.0) continue;
            for (int co = 0; co < layer.out; ++co) out.at(y, x, co) += layer.weight(ky, kx, ci, co) * d;
          }
  }

  // Input plane of |src| channel |ci| shifted by (ky-1, kx-1), zero padded.
  static double tap(const oracle::Image& src, int y, int x, int ky, int kx, int ci) {
    const int iy = y + ky - 1, ix = x + kx - 1;
    if (iy < 0 || iy >= src.h || ix < 0 || ix >= src.w) return 0.0;
    return src.at(iy, ix, ci);
  }

  struct Param {
    bool is_bias;
    int ky, kx, ci, co;
  };

  static Param decode(const oracle::Conv& l, std::size_t index) {
    const std::size_t nw = static_cast<std::size_t>(9) * l.in * l.out;
    if (index >= nw) return {true, 0, 0, 0, static_cast<int>(index - nw)};
    const int co = static_cast<int>(index % l.out);
    std::size_t rest = index / l.out;
    const int ci = static_cast<int>(rest % l.in);
    rest /= l.in;
    return {false, static_cast<int>(rest / 3), static_cast<int>(rest % 3), ci, co};
  }

  // Perturbed pre-activation plane of output channel p.co.
  static std::vector<double> perturbed_plane(const oracle::Image& pre, const oracle::Image& input,
                                             const Param& p, double h) {
    std::vector<double> plane(static_cast<std::size_t>(pre.h) * pre.w);
    for (int y = 0; y < pre.h; ++y)
      for (int x = 0; x < pre.w; ++x) {
        double v = pre.at(y, x, p.co);
        v += p.is_bias ? h : h * tap(input, y, x, p.ky, p.kx, p.ci);
        plane[static_cast<std::size_t>(y) * pre.w + x] = v;
      }
    return plane;
  }

  double perturbed_loss(int layer, std::size_t index, double h, bool& crossed) const {
    const Param p = decode(layers_[static_cast<std::size_t>(layer)], index);
    if (layer == 2) {
      const auto plane = perturbed_plane(o_, h2_, p, h);
      oracle::Image o = o_;
      for (std::size_t i = 0; i < plane.size(); ++i) o.v[i * o.c + p.co] = plane[i];
      return loss_from_output(o);
    }
    if (layer == 1) {
      const auto plane = perturbed_plane(p2_, h1_, p, h);
      std::vector<double> delta(plane.size());
      for (std::size_t i = 0; i < plane.size(); ++i) {
        crossed |= (plane[i] > 0.0) != (p2_.v[i * p2_.c + p.co] > 0.0);
        delta[i] = std::max(plane[i], 0.0) - h2_.v[i * h2_.c + p.co];
      }
      oracle::Image o = o_;
      push_channel(layers_[2], p.co, delta, oh_, ow_, o);
      return loss_from_output(o);
    }
    // Stage 1: perturb one conv channel, resize it, then rerun stages 2-3.
    const auto plane = perturbed_plane(a1_, x_, p, h);
    std::vector<double> delta(static_cast<std::size_t>(oh_) * ow_, 0.0);
    for (int y = 0; y < oh_; ++y)
      for (int x = 0; x < ow_; ++x) {
        double acc = 0.0;
        for (int i = 0; i < a1_.h; ++i) {
          if (wh_[y][i] == 0.0) continue;
          for (int j = 0; j < a1_.w; ++j) acc += wh_[y][i] * ww_[x][j] * plane[static_cast<std::size_t>(i) * a1_.w + j];
        }
        const std::size_t k = static_cast<std::size_t>(y) * ow_ + x;
        crossed |= (acc > 0.0) != (r1_.v[k * r1_.c + p.co] > 0.0);
        delta[k] = std::max(acc, 0.0) - h1_.v[k * h1_.c + p.co];
      }
    oracle::Image p2 = p2_;
    push_channel(layers_[1], p.co, delta, oh_, ow_, p2);
    for (std::size_t i = 0; i < p2.v.size(); ++i) crossed |= (p2.v[i] > 0.0) != (p2_.v[i] > 0.0);
    oracle::relu_inplace(p2);
    return loss_from_output(oracle::conv(p2, layers_[2]));
  }

  oracle::Image x_;
  int oh_, ow_;
  std::vector<oracle::Conv> layers_;
  std::vector<std::vector<double>> wh_, ww_;
  oracle::Image a1_, r1_, h1_, p2_, h2_, o_, skip_;
};

// Builds the truncated conv-resize net with every parameter randomised
// (a zero residual head would make earlier gradients vanish).
inline Network randomised_three_stage(RationalScale scale, std::uint64_t seed) {
  NetworkConfig cfg;
  cfg.scale = scale;
  cfg.block = BlockKind::kConvResize;
  cfg.seed = seed;
  cfg.stages = 3;
  Network net = build_cnncr(cfg);
  std::mt19937_64 rng(seed + 17);
  std::normal_distribution<float> bias(0.0f, 0.05f);
  std::normal_distribution<float> head(0.0f, 0.05f);
  for (auto& l : net.layers()) {
    for (float& b : l.bias) b = bias(rng);
  }
  for (float& w : net.layers().back().weights) w = head(rng);
  return net;
}

// Every parameter is compared against a central difference with step |h|.
// Parameters whose probes cross a ReLU kink are compared against a
// |fine_h| difference instead. rel = |g - fd| / max(|g|, |fd|).
inline GradCheckReport check_three_stage(Network& net, const Tensor& x, double h, double fine_h,
                                         double tol) {
  const NetworkGrads grads = analytic_gradients(net, x);
  const ThreeStageOracle oracle_net(net, x);
  std::vector<std::vector<double>> fds(3);
  GradCheckReport report;
  for (int l = 0; l < 3; ++l) {
    const std::size_t count = net.layers()[l].parameter_count();
    fds[l].resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      bool crossed = false;
      fds[l][i] = oracle_net.finite_difference(l, i, h, &crossed);
      if (crossed) {
        ++report.kink_crossings;
        fds[l][i] = oracle_net.finite_difference(l, i, fine_h);
      }
      report.max_abs_fd = std::max(report.max_abs_fd, std::fabs(fds[l][i]));
    }
  }
  for (int l = 0; l < 3; ++l) {
    const auto& g = grads[l];
    for (std::size_t i = 0; i < fds[l].size(); ++i) {
      const double a = i < g.w.size() ? g.w[i] : g.b[i - g.w.size()];
      const double fd = fds[l][i];
      const double rel = std::fabs(a - fd) / std::max({std::fabs(a), std::fabs(fd), 1e-300});
      report.worst_rel = std::max(report.worst_rel, rel);
      if (rel > tol) ++report.failures;
      ++report.checked;
    }
  }
  return report;
}

}  // namespace fracdown::testing
