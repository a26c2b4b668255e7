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

#include "fracdown/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "fracdown/error.hpp"

namespace fracdown {

double psnr(const Tensor& a, const Tensor& b, double peak) {
  require_same_shape(a, b, "psnr");
  if (!(peak > 0.0)) throw Error(ErrorCode::kMetricFailure, "peak must be positive");
  double acc = 0.0;
  auto x = a.values();
  auto y = b.values();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(x[i]) - y[i];
    acc += d * d;
  }
  const double mse = acc / static_cast<double>(x.size());
  if (mse == 0.0) return kInfinitePsnr;
  return 10.0 * std::log10(peak * peak / mse);
}

Tensor to_luma(const Tensor& x) {
  if (x.channels() == 1) return x;
  if (x.channels() != 3) {
    throw Error(ErrorCode::kChannelMismatch, "luma needs 1 or 3 channels");
  }
  Tensor y({x.batch(), x.height(), x.width(), 1}, 0.0f);
  const float* src = x.data();
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = 0.2126f * src[3 * i] + 0.7152f * src[3 * i + 1] + 0.0722f * src[3 * i + 2];
  }
  return y;
}

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;

std::vector<double> gaussian_window() {
  std::vector<double> g(kWindow);
  double total = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    g[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    total += g[static_cast<std::size_t>(i)];
  }
  for (double& v : g) v /= total;
  return g;
}

// Valid-mode separable Gaussian filter of a single plane.
std::vector<double> blur_valid(const std::vector<double>& img, int h, int w,
                               const std::vector<double>& g) {
  const int ow = w - kWindow + 1;
  const int oh = h - kWindow + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += g[k] * img[static_cast<std::size_t>(y) * w + x + k];
      tmp[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow, 0.0);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += g[k] * tmp[static_cast<std::size_t>(y + k) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  return out;
}

}  // namespace

double ssim(const Tensor& a, const Tensor& b, double dynamic_range) {
  require_same_shape(a, b, "ssim");
  if (a.height() < kWindow || a.width() < kWindow) {
    throw Error(ErrorCode::kImageSmallerThanWindow,
                to_string(a.shape()) + " is smaller than the 11x11 window");
  }
  const Tensor la = to_luma(a);
  const Tensor lb = to_luma(b);
  const double c1 = (0.01 * dynamic_range) * (0.01 * dynamic_range);
  const double c2 = (0.03 * dynamic_range) * (0.03 * dynamic_range);
  const auto g = gaussian_window();
  const int h = a.height();
  const int w = a.width();
  const std::size_t plane = static_cast<std::size_t>(h) * w;

  double total = 0.0;
  for (int n = 0; n < a.batch(); ++n) {
    std::vector<double> x(plane), y(plane), xx(plane), yy(plane), xy(plane);
    for (std::size_t i = 0; i < plane; ++i) {
      x[i] = la[n * plane + i];
      y[i] = lb[n * plane + i];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = blur_valid(x, h, w, g);
    const auto my = blur_valid(y, h, w, g);
    const auto sxx = blur_valid(xx, h, w, g);
    const auto syy = blur_valid(yy, h, w, g);
    const auto sxy = blur_valid(xy, h, w, g);
    double acc = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double mu_xy = mx[i] * my[i];
      const double mu_sq = mx[i] * mx[i] + my[i] * my[i];
      const double var_sum = (sxx[i] + syy[i]) - mu_sq;
      const double cov = sxy[i] - mu_xy;
      acc += ((2.0 * mu_xy + c1) * (2.0 * cov + c2)) / ((mu_sq + c1) * (var_sum + c2));
    }
    total += acc / static_cast<double>(mx.size());
  }
  return total / a.batch();
}

std::string_view to_string(MetricTag tag) {
  switch (tag) {
    case MetricTag::kPsnr: return "psnr";
    case MetricTag::kSsim: return "ssim";
    case MetricTag::kVmaf: return "vmaf";
  }
  return "?";
}

MetricTag parse_metric_tag(std::string_view name) {
  if (name == "psnr") return MetricTag::kPsnr;
  if (name == "ssim") return MetricTag::kSsim;
  if (name == "vmaf" || name == "vmaf-external") return MetricTag::kVmaf;
  throw Error(ErrorCode::kBadConfig, "unknown metric '" + std::string(name) + "'");
}

BdFit parse_bd_fit(std::string_view name) {
  if (name == "pchip") return BdFit::kPchip;
  if (name == "cubic") return BdFit::kCubic;
  throw Error(ErrorCode::kBadConfig, "unknown fit '" + std::string(name) + "'");
}

void RateQualityCurve::sort_by_bitrate() {
  std::stable_sort(points.begin(), points.end(), [](const RatePoint& a, const RatePoint& b) {
    return a.bitrate_kbps < b.bitrate_kbps;
  });
}

std::vector<std::string> RateQualityCurve::violations() const {
  std::vector<std::string> out;
  if (points.size() < 4) out.push_back("fewer than 4 points");
  for (const auto& p : points) {
    if (!(p.bitrate_kbps > 0.0) || !std::isfinite(p.bitrate_kbps)) {
      out.push_back("non-positive bitrate at qp " + std::to_string(p.qp));
    }
    if (!std::isfinite(p.quality)) {
      out.push_back("non-finite quality at qp " + std::to_string(p.qp));
    }
  }
  RateQualityCurve sorted = *this;
  sorted.sort_by_bitrate();
  for (std::size_t i = 1; i < sorted.points.size(); ++i) {
    const auto& a = sorted.points[i - 1];
    const auto& b = sorted.points[i];
    if (!(b.bitrate_kbps > a.bitrate_kbps)) {
      out.push_back("repeated bitrate at qp " + std::to_string(b.qp));
    }
    if (!(b.quality > a.quality)) {
      out.push_back("quality does not increase with bitrate at qp " + std::to_string(b.qp));
    }
  }
  return out;
}

namespace {

// log10(rate) as a function of quality, sampled on a strictly increasing
// quality grid.
struct LogRateSamples {
  std::vector<double> q;
  std::vector<double> r;
};

LogRateSamples prepare(const RateQualityCurve& curve, const char* which) {
  if (curve.points.size() < 4) {
    throw Error(ErrorCode::kTooFewPoints, std::string(which) + " curve has " +
                                              std::to_string(curve.points.size()) +
                                              " points, need 4");
  }
  if (const auto bad = curve.violations(); !bad.empty()) {
    throw Error(ErrorCode::kNonMonotoneCurve, std::string(which) + " curve: " + bad.front());
  }
  RateQualityCurve sorted = curve;
  sorted.sort_by_bitrate();
  LogRateSamples s;
  for (const auto& p : sorted.points) {
    s.q.push_back(p.quality);
    s.r.push_back(std::log10(p.bitrate_kbps));
  }
  return s;
}

int sign(double v) { return (v > 0.0) - (v < 0.0); }

double pchip_end_slope(double h0, double h1, double d0, double d1) {
  const double m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
  if (sign(m) != sign(d0)) return 0.0;
  if (sign(d0) != sign(d1) && std::abs(m) > 3.0 * std::abs(d0)) return 3.0 * d0;
  return m;
}

// Fritsch-Carlson derivative estimates with the usual three-point ends.
std::vector<double> pchip_slopes(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  std::vector<double> h(n - 1), delta(n - 1), d(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    h[i] = x[i + 1] - x[i];
    delta[i] = (y[i + 1] - y[i]) / h[i];
  }
  if (n == 2) {
    d[0] = d[1] = delta[0];
    return d;
  }
  for (std::size_t k = 1; k + 1 < n; ++k) {
    if (delta[k - 1] == 0.0 || delta[k] == 0.0 ||
        std::signbit(delta[k - 1]) != std::signbit(delta[k])) {
      d[k] = 0.0;
      continue;
    }
    const double w1 = 2.0 * h[k] + h[k - 1];
    const double w2 = h[k] + 2.0 * h[k - 1];
    d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
  }
  d[0] = pchip_end_slope(h[0], h[1], delta[0], delta[1]);
  d[n - 1] = pchip_end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
  return d;
}

// Integral over one Hermite segment from its left knot to fraction tau.
double hermite_integral(double y0, double y1, double d0, double d1, double h, double tau) {
  const double t2 = tau * tau;
  const double t3 = t2 * tau;
  const double t4 = t3 * tau;
  const double h00 = tau - t3 + t4 / 2.0;
  const double h10 = t4 / 4.0 - 2.0 * t3 / 3.0 + t2 / 2.0;
  const double h01 = t3 - t4 / 2.0;
  const double h11 = t4 / 4.0 - t3 / 3.0;
  return h * (y0 * h00 + h * d0 * h10 + y1 * h01 + h * d1 * h11);
}

double pchip_integral(const LogRateSamples& s, double lo, double hi) {
  const auto d = pchip_slopes(s.q, s.r);
  // Antiderivative measured from s.q.front().
  auto antiderivative = [&](double x) {
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < s.q.size(); ++i) {
      const double h = s.q[i + 1] - s.q[i];
      if (x >= s.q[i + 1]) {
        acc += hermite_integral(s.r[i], s.r[i + 1], d[i], d[i + 1], h, 1.0);
        continue;
      }
      acc += hermite_integral(s.r[i], s.r[i + 1], d[i], d[i + 1], h, (x - s.q[i]) / h);
      break;
    }
    return acc;
  };
  return antiderivative(hi) - antiderivative(lo);
}

double cubic_integral(const LogRateSamples& s, double lo, double hi) {
  // Fit on a centred, scaled variable to keep the normal problem well posed.
  const double mid = 0.5 * (s.q.front() + s.q.back());
  const double half = std::max(0.5 * (s.q.back() - s.q.front()), 1e-12);
  const auto n = static_cast<Eigen::Index>(s.q.size());
  Eigen::MatrixXd a(n, 4);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = (s.q[static_cast<std::size_t>(i)] - mid) / half;
    a(i, 0) = 1.0;
    a(i, 1) = u;
    a(i, 2) = u * u;
    a(i, 3) = u * u * u;
    b(i) = s.r[static_cast<std::size_t>(i)];
  }
  const Eigen::VectorXd c = a.colPivHouseholderQr().solve(b);
  auto antiderivative = [&](double x) {
    const double u = (x - mid) / half;
    return half * (c(0) * u + c(1) * u * u / 2.0 + c(2) * u * u * u / 3.0 +
                   c(3) * u * u * u * u / 4.0);
  };
  return antiderivative(hi) - antiderivative(lo);
}

}  // namespace

double bd_rate(const RateQualityCurve& reference, const RateQualityCurve& test, BdFit fit) {
  const LogRateSamples ref = prepare(reference, "reference");
  const LogRateSamples tst = prepare(test, "test");
  const double lo = std::max(ref.q.front(), tst.q.front());
  const double hi = std::min(ref.q.back(), tst.q.back());
  if (!(hi > lo)) {
    throw Error(ErrorCode::kNoOverlap, "quality ranges do not overlap");
  }
  const auto integral = fit == BdFit::kPchip ? pchip_integral : cubic_integral;
  const double avg = (integral(tst, lo, hi) - integral(ref, lo, hi)) / (hi - lo);
  return (std::pow(10.0, avg) - 1.0) * 100.0;
}

void write_curve_csv(const std::vector<LadderPoint>& points, std::ostream& out) {
  out << "qp,bitrate_kbps,psnr,ssim,vmaf\n";
  out << std::setprecision(10);
  for (const auto& p : points) {
    out << p.qp << ',' << p.bitrate_kbps << ',';
    if (std::isinf(p.psnr)) out << "inf"; else out << p.psnr;
    out << ',' << p.ssim << ',';
    if (p.vmaf) out << *p.vmaf;
    out << '\n';
  }
}

void save_curve_csv(const std::vector<LadderPoint>& points,
                    const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  write_curve_csv(points, out);
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_cell(const std::string& s) {
  if (s == "inf") return kInfinitePsnr;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) {
    throw Error(ErrorCode::kDecodeError, "bad CSV number '" + s + "'");
  }
  return v;
}

}  // namespace

std::vector<LadderPoint> read_curve_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kDecodeError, "empty curve CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.rfind("qp,bitrate_kbps,psnr,ssim", 0) != 0) {
    throw Error(ErrorCode::kDecodeError, "unexpected curve header '" + line + "'");
  }
  std::vector<LadderPoint> points;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() < 4 || cells.size() > 5) {
      throw Error(ErrorCode::kDecodeError, "bad curve row '" + line + "'");
    }
    LadderPoint p;
    p.qp = static_cast<int>(parse_cell(cells[0]));
    p.bitrate_kbps = parse_cell(cells[1]);
    p.psnr = parse_cell(cells[2]);
    p.ssim = parse_cell(cells[3]);
    if (cells.size() == 5 && !cells[4].empty()) p.vmaf = parse_cell(cells[4]);
    points.push_back(p);
  }
  return points;
}

std::vector<LadderPoint> load_curve_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  return read_curve_csv(in);
}

RateQualityCurve curve_for_metric(const std::vector<LadderPoint>& points, MetricTag metric) {
  RateQualityCurve curve;
  curve.metric = metric;
  for (const auto& p : points) {
    double q = 0.0;
    switch (metric) {
      case MetricTag::kPsnr: q = p.psnr; break;
      case MetricTag::kSsim: q = p.ssim; break;
      case MetricTag::kVmaf:
        if (!p.vmaf) {
          throw Error(ErrorCode::kMetricFailure, "no vmaf score for qp " + std::to_string(p.qp));
        }
        q = *p.vmaf;
        break;
    }
    curve.points.push_back({p.qp, p.bitrate_kbps, q});
  }
  return curve;
}

}  // namespace fracdown
