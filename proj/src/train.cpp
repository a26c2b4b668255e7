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

#include "fracdown/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "fracdown/checkpoint.hpp"
#include "fracdown/error.hpp"

namespace fracdown {

void TrainConfig::validate() const {
  if (batch_size < 1) throw Error(ErrorCode::kBadConfig, "batch_size must be >= 1");
  if (!(lr > 0.0)) throw Error(ErrorCode::kBadConfig, "lr must be > 0");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
    throw Error(ErrorCode::kBadConfig, "betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw Error(ErrorCode::kBadConfig, "epsilon must be > 0");
  if (iterations < 0) throw Error(ErrorCode::kBadConfig, "iterations must be >= 0");
  if (stages < 2) throw Error(ErrorCode::kBadConfig, "stages must be >= 2");
  if (!block_accepts_scale(block, scale)) {
    throw Error(ErrorCode::kInfeasibleKind,
                std::string(to_string(block)) + " at M=" + scale.str());
  }
  crop_size(scale, crop_base);
}

NetworkConfig TrainConfig::network_config() const {
  NetworkConfig net;
  net.scale = scale;
  net.block = block;
  net.seed = seed;
  net.stages = stages;
  return net;
}

std::string format_train_config(const TrainConfig& cfg) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "scale=" << cfg.scale.str() << '\n'
      << "block=" << to_string(cfg.block) << '\n'
      << "batch_size=" << cfg.batch_size << '\n'
      << "lr=" << cfg.lr << '\n'
      << "beta1=" << cfg.beta1 << '\n'
      << "beta2=" << cfg.beta2 << '\n'
      << "epsilon=" << cfg.epsilon << '\n'
      << "iterations=" << cfg.iterations << '\n'
      << "crop_base=" << cfg.crop_base << '\n'
      << "seed=" << cfg.seed << '\n'
      << "upsampler=" << to_string(cfg.upsampler.tag) << '\n'
      << "upsampler_antialias=" << (cfg.upsampler.antialias ? 1 : 0) << '\n'
      << "stages=" << cfg.stages << '\n';
  return out.str();
}

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  T v{};
  in >> v;
  if (in.fail() || !in.eof()) {
    throw Error(ErrorCode::kBadConfig, key + "='" + value + "' is not a number");
  }
  return v;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

TrainConfig parse_train_config(const std::string& text) {
  TrainConfig cfg;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::kBadConfig, "no '=' in '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "scale") cfg.scale = RationalScale::parse(value);
    else if (key == "block") cfg.block = parse_block_kind(value);
    else if (key == "batch_size") cfg.batch_size = parse_number<int>(key, value);
    else if (key == "lr") cfg.lr = parse_number<double>(key, value);
    else if (key == "beta1") cfg.beta1 = parse_number<double>(key, value);
    else if (key == "beta2") cfg.beta2 = parse_number<double>(key, value);
    else if (key == "epsilon") cfg.epsilon = parse_number<double>(key, value);
    else if (key == "iterations") cfg.iterations = parse_number<std::int64_t>(key, value);
    else if (key == "crop_base") cfg.crop_base = parse_number<int>(key, value);
    else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "upsampler") cfg.upsampler.tag = parse_filter_tag(value);
    else if (key == "upsampler_antialias") cfg.upsampler.antialias = parse_number<int>(key, value) != 0;
    else if (key == "stages") cfg.stages = parse_number<int>(key, value);
    else throw Error(ErrorCode::kBadConfig, "unknown key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

void save_train_config(const TrainConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  out << format_train_config(cfg);
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_train_config(buf.str());
}

AdamState make_adam_state(std::span<const std::span<float>> params) {
  AdamState state;
  for (const auto& p : params) {
    state.m.emplace_back(p.size(), 0.0f);
    state.v.emplace_back(p.size(), 0.0f);
  }
  return state;
}

void adam_step(std::span<const std::span<float>> params,
               std::span<const std::span<const float>> grads, AdamState& state,
               const TrainConfig& cfg) {
  if (params.size() != grads.size() || params.size() != state.m.size() ||
      params.size() != state.v.size()) {
    throw Error(ErrorCode::kShapeMismatch, "adam: group count differs");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size() != grads[i].size() || params[i].size() != state.m[i].size() ||
        params[i].size() != state.v[i].size()) {
      throw Error(ErrorCode::kShapeMismatch, "adam: group " + std::to_string(i));
    }
  }
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  const float b1 = static_cast<float>(cfg.beta1);
  const float b2 = static_cast<float>(cfg.beta2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i];
    auto g = grads[i];
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = b1 * m[j] + (1.0f - b1) * g[j];
      v[j] = b2 * v[j] + (1.0f - b2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      p[j] -= static_cast<float>(cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon));
    }
  }
}

std::vector<std::span<const float>> gradient_views(const NetworkGrads& grads) {
  std::vector<std::span<const float>> views;
  for (const auto& g : grads) {
    views.emplace_back(g.w);
    views.emplace_back(g.b);
  }
  return views;
}

int crop_size(const RationalScale& scale, int base) {
  if (base < scale.num()) {
    throw Error(ErrorCode::kScaleTooLarge, "crop base " + std::to_string(base) +
                                               " cannot hold a crop divisible by M=" +
                                               scale.str());
  }
  return static_cast<int>(scale.num() * (base / scale.num()));
}

LossValue mse_loss(const Tensor& x, const Tensor& x_hat) {
  require_same_shape(x, x_hat, "mse_loss");
  LossValue loss;
  loss.grad = Tensor(x.shape(), 0.0f);
  const double n = static_cast<double>(x.size());
  const float scale = static_cast<float>(2.0 / n);
  double acc = 0.0;
  auto a = x.values();
  auto b = x_hat.values();
  auto g = loss.grad.values();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const float r = b[i] - a[i];
    acc += static_cast<double>(r) * r;
    g[i] = scale * r;
  }
  loss.value = acc / n;
  return loss;
}

Tensor sample_batch(std::span<const Tensor> dataset, const TrainConfig& cfg, Rng& rng) {
  if (dataset.empty()) throw Error(ErrorCode::kEmptyDataset, "no training images");
  const int crop = crop_size(cfg.scale, cfg.crop_base);
  for (const Tensor& img : dataset) {
    if (img.height() < crop || img.width() < crop) {
      throw Error(ErrorCode::kImageTooSmall, to_string(img.shape()) + " < crop " +
                                                 std::to_string(crop));
    }
  }
  const int c = dataset.front().channels();
  Tensor batch({cfg.batch_size, crop, crop, c}, 0.0f);
  std::uniform_int_distribution<std::size_t> pick(0, dataset.size() - 1);
  for (int b = 0; b < cfg.batch_size; ++b) {
    const Tensor& img = dataset[pick(rng)];
    if (img.channels() != c) throw Error(ErrorCode::kChannelMismatch, "mixed channel counts");
    std::uniform_int_distribution<int> pick_y(0, img.height() - crop);
    std::uniform_int_distribution<int> pick_x(0, img.width() - crop);
    const int y0 = pick_y(rng);
    const int x0 = pick_x(rng);
    for (int y = 0; y < crop; ++y) {
      const float* src = img.data() + img.index(0, y0 + y, x0, 0);
      std::copy(src, src + static_cast<std::ptrdiff_t>(crop) * c,
                batch.data() + batch.index(b, y, 0, 0));
    }
  }
  return batch;
}

Tensor reconstruct(Network& net, const Tensor& x, FilterKind upsampler) {
  return resize_forward(net.forward(x), upsampler, x.height(), x.width());
}

double evaluate_loss(Network& net, std::span<const Tensor> dataset, const TrainConfig& cfg) {
  if (dataset.empty()) throw Error(ErrorCode::kEmptyDataset, "no images to evaluate");
  const int crop = crop_size(cfg.scale, cfg.crop_base);
  double total = 0.0;
  for (std::size_t start = 0; start < dataset.size(); start += cfg.batch_size) {
    const std::size_t count = std::min(dataset.size() - start, static_cast<std::size_t>(cfg.batch_size));
    std::vector<Tensor> crops;
    for (std::size_t i = start; i < start + count; ++i) {
      const Tensor& img = dataset[i];
      if (img.height() < crop || img.width() < crop) {
        throw Error(ErrorCode::kImageTooSmall, to_string(img.shape()) + " < crop " +
                                                   std::to_string(crop));
      }
      const int y0 = (img.height() - crop) / 2;
      const int x0 = (img.width() - crop) / 2;
      Tensor c({1, crop, crop, img.channels()}, 0.0f);
      for (int y = 0; y < crop; ++y) {
        const float* src = img.data() + img.index(0, y0 + y, x0, 0);
        std::copy(src, src + static_cast<std::ptrdiff_t>(crop) * img.channels(),
                  c.data() + c.index(0, y, 0, 0));
      }
      crops.push_back(std::move(c));
    }
    const Tensor batch = concat_batch(crops);
    total += mse_loss(batch, reconstruct(net, batch, cfg.upsampler)).value * static_cast<double>(count);
  }
  return total / static_cast<double>(dataset.size());
}

TrainResult train_loop(std::span<const Tensor> dataset, const TrainConfig& cfg,
                       const TrainOptions& options) {
  cfg.validate();
  TrainResult result{build_cnncr(cfg.network_config()), {}};
  Network& net = result.net;
  auto params = net.parameters();
  AdamState adam = make_adam_state(params);
  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  result.history.reserve(static_cast<std::size_t>(cfg.iterations));

  for (std::int64_t it = 0; it < cfg.iterations; ++it) {
    const Tensor x = sample_batch(dataset, cfg, rng);
    const Tensor low = net.forward(x, true);
    const Tensor x_hat = resize_forward(low, cfg.upsampler, x.height(), x.width());
    const LossValue loss = mse_loss(x, x_hat);
    if (!std::isfinite(loss.value)) {
      throw Error(ErrorCode::kNonFiniteLoss,
                  "loss became " + std::to_string(loss.value) + " at iteration " +
                      std::to_string(it));
    }
    const LossRecord record{it, loss.value};
    result.history.push_back(record);

    const Tensor grad_low = resize_backward(loss.grad, cfg.upsampler, low.height(), low.width());
    const NetworkGrads grads = net.backward(grad_low);
    adam_step(params, gradient_views(grads), adam, cfg);
    net.set_iteration(it + 1);

    if (options.report_every > 0 && (it + 1) % options.report_every == 0) {
      if (options.on_report) options.on_report(record);
      if (!options.checkpoint.empty()) save_checkpoint(net, options.checkpoint);
    }
  }
  if (!options.checkpoint.empty()) save_checkpoint(net, options.checkpoint);
  return result;
}

void write_loss_csv(const std::vector<LossRecord>& history, std::ostream& out) {
  out << "iteration,loss\n";
  out << std::setprecision(17);
  for (const auto& r : history) out << r.iteration << ',' << r.loss << '\n';
}

void save_loss_csv(const std::vector<LossRecord>& history,
                   const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  write_loss_csv(history, out);
}

}  // namespace fracdown
