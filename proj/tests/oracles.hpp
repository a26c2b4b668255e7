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

// Test-only reference implementations. Everything here is written against
// the textbook definitions in double precision and shares no code with the
// library's resampler or convolution paths.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace oracle {

enum class Kernel { kTriangle, kKeys, kLanczos3 };

inline double kernel(Kernel k, double x) {
  const double t = std::fabs(x);
  switch (k) {
    case Kernel::kTriangle:
      return std::max(0.0, 1.0 - t);
    case Kernel::kKeys: {
      // Keys cubic convolution, a = -1/2.
      if (t < 1.0) return 1.5 * t * t * t - 2.5 * t * t + 1.0;
      if (t < 2.0) return -0.5 * t * t * t + 2.5 * t * t - 4.0 * t + 2.0;
      return 0.0;
    }
    case Kernel::kLanczos3: {
      if (t >= 3.0) return 0.0;
      if (t == 0.0) return 1.0;
      const double pi = 3.14159265358979323846;
      return 3.0 * std::sin(pi * t) * std::sin(pi * t / 3.0) / (pi * pi * t * t);
    }
  }
  return 0.0;
}

inline double radius(Kernel k) {
  return k == Kernel::kTriangle ? 1.0 : (k == Kernel::kKeys ? 2.0 : 3.0);
}

// Dense dst x src weight matrix. Every integer position in a generous window
// is visited; out-of-range taps fold onto the nearest border sample.
inline std::vector<std::vector<double>> dense_weights(Kernel k, bool antialias, int src,
                                                      int dst) {
  std::vector<std::vector<double>> w(dst, std::vector<double>(src, 0.0));
  const double ratio = static_cast<double>(src) / dst;
  const double stretch = (antialias && ratio > 1.0) ? ratio : 1.0;
  const int reach = static_cast<int>(radius(k) * stretch) + 2;
  for (int i = 0; i < dst; ++i) {
    const double centre = (i + 0.5) * ratio - 0.5;
    double total = 0.0;
    for (int t = -reach - 1; t < src + reach + 1; ++t) {
      const double v = kernel(k, (t - centre) / stretch);
      w[i][std::min(std::max(t, 0), src - 1)] += v;
      total += v;
    }
    for (double& v : w[i]) v /= total;
  }
  return w;
}

// Plain NHWC image in double for a single batch entry.
struct Image {
  int h = 0, w = 0, c = 0;
  std::vector<double> v;

  Image() = default;
  Image(int hh, int ww, int cc) : h(hh), w(ww), c(cc), v(static_cast<std::size_t>(hh) * ww * cc, 0.0) {}
  double& at(int y, int x, int ch) { return v[(static_cast<std::size_t>(y) * w + x) * c + ch]; }
  double at(int y, int x, int ch) const { return v[(static_cast<std::size_t>(y) * w + x) * c + ch]; }
};

inline Image resize(const Image& in, Kernel k, bool antialias, int oh, int ow) {
  const auto wh = dense_weights(k, antialias, in.h, oh);
  const auto ww = dense_weights(k, antialias, in.w, ow);
  Image out(oh, ow, in.c);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x)
      for (int ch = 0; ch < in.c; ++ch) {
        double acc = 0.0;
        for (int i = 0; i < in.h; ++i) {
          if (wh[y][i] == 0.0) continue;
          for (int j = 0; j < in.w; ++j) acc += wh[y][i] * ww[x][j] * in.at(i, j, ch);
        }
        out.at(y, x, ch) = acc;
      }
  return out;
}

// 3x3 'same' cross-correlation, weights (ky, kx, ci, co), stride s, pad 1.
struct Conv {
  int in = 0, out = 0;
  std::vector<double> w;
  std::vector<double> b;
  double weight(int ky, int kx, int ci, int co) const {
    return w[((static_cast<std::size_t>(ky) * 3 + kx) * in + ci) * out + co];
  }
};

inline Image conv(const Image& x, const Conv& layer, int stride = 1) {
  const int oh = (x.h - 1) / stride + 1;
  const int ow = (x.w - 1) / stride + 1;
  Image y(oh, ow, layer.out);
  for (int oy = 0; oy < oh; ++oy)
    for (int ox = 0; ox < ow; ++ox)
      for (int co = 0; co < layer.out; ++co) {
        double acc = layer.b[co];
        for (int ky = 0; ky < 3; ++ky)
          for (int kx = 0; kx < 3; ++kx) {
            const int iy = oy * stride + ky - 1;
            const int ix = ox * stride + kx - 1;
            if (iy < 0 || iy >= x.h || ix < 0 || ix >= x.w) continue;
            for (int ci = 0; ci < layer.in; ++ci) acc += layer.weight(ky, kx, ci, co) * x.at(iy, ix, ci);
          }
        y.at(oy, ox, co) = acc;
      }
  return y;
}

inline void relu_inplace(Image& x) {
  for (double& v : x.v) v = std::max(v, 0.0);
}

inline double mse(const Image& a, const Image& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.v.size(); ++i) acc += (a.v[i] - b.v[i]) * (a.v[i] - b.v[i]);
  return acc / static_cast<double>(a.v.size());
}

// Brute-force SSIM: every 11x11 window summed explicitly.
inline double ssim(const std::vector<double>& a, const std::vector<double>& b, int h, int w,
                   double range) {
  double g[11];
  double total = 0.0;
  for (int i = 0; i < 11; ++i) {
    g[i] = std::exp(-(i - 5) * (i - 5) / (2.0 * 1.5 * 1.5));
    total += g[i];
  }
  for (double& v : g) v /= total;
  const double c1 = std::pow(0.01 * range, 2), c2 = std::pow(0.03 * range, 2);
  double acc = 0.0;
  int count = 0;
  for (int y = 0; y + 11 <= h; ++y)
    for (int x = 0; x + 11 <= w; ++x) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
          const double wt = g[i] * g[j];
          const double va = a[(y + i) * w + x + j], vb = b[(y + i) * w + x + j];
          ma += wt * va;
          mb += wt * vb;
          saa += wt * va * va;
          sbb += wt * vb * vb;
          sab += wt * va * vb;
        }
      const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
      acc += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  return acc / count;
}

}  // namespace oracle

namespace oracle {

// Double-precision CNN-CR forward. |conv_first| selects conv-resize over
// resize-conv for stage 1; the skip path is a Keys downsample.
inline Image cnncr_forward(const Image& x, const std::vector<Conv>& layers, int oh, int ow,
                           bool conv_first) {
  Image h;
  if (conv_first) {
    h = resize(conv(x, layers[0]), Kernel::kTriangle, true, oh, ow);
  } else {
    h = conv(resize(x, Kernel::kTriangle, true, oh, ow), layers[0]);
  }
  relu_inplace(h);
  for (std::size_t i = 1; i < layers.size(); ++i) {
    h = conv(h, layers[i]);
    if (i + 1 < layers.size()) relu_inplace(h);
  }
  const Image skip = resize(x, Kernel::kKeys, true, oh, ow);
  for (std::size_t i = 0; i < h.v.size(); ++i) h.v[i] += skip.v[i];
  return h;
}

// Training loss: Keys upsample back to the input size, then mean squared error.
inline double reconstruction_loss(const Image& x, const Image& low) {
  return mse(x, resize(low, Kernel::kKeys, true, x.h, x.w));
}

}  // namespace oracle
