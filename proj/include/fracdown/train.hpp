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
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fracdown/nn.hpp"
#include "fracdown/rational.hpp"
#include "fracdown/resample.hpp"
#include "fracdown/tensor.hpp"

namespace fracdown {

struct TrainConfig {
  RationalScale scale{2, 1};
  BlockKind block = BlockKind::kConvResize;
  int batch_size = 16;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t iterations = 500000;
  int crop_base = 256;
  std::uint64_t seed = 0;
  FilterKind upsampler = kBicubic;
  int stages = 10;

  void validate() const;
  NetworkConfig network_config() const;
  bool operator==(const TrainConfig&) const = default;
};

// Plain-text "key=value" lines; unknown keys are rejected.
std::string format_train_config(const TrainConfig& cfg);
TrainConfig parse_train_config(const std::string& text);
void save_train_config(const TrainConfig& cfg, const std::filesystem::path& path);
TrainConfig load_train_config(const std::filesystem::path& path);

struct AdamState {
  std::vector<std::vector<float>> m;
  std::vector<std::vector<float>> v;
  std::int64_t t = 0;
};

AdamState make_adam_state(std::span<const std::span<float>> params);

// One bias-corrected Adam update of every parameter group.
void adam_step(std::span<const std::span<float>> params,
               std::span<const std::span<const float>> grads, AdamState& state,
               const TrainConfig& cfg);

// Views a network gradient in the same group order as Network::parameters().
std::vector<std::span<const float>> gradient_views(const NetworkGrads& grads);

// Largest square crop not above |base| whose side is exactly divisible by M;
// equals M * floor(base / M) whenever that value is an integer.
int crop_size(const RationalScale& scale, int base);

struct LossValue {
  double value = 0.0;
  Tensor grad;  // d value / d x_hat
};

// Mean of squared residuals over every element.
LossValue mse_loss(const Tensor& x, const Tensor& x_hat);

using Rng = std::mt19937_64;

// |dataset| holds batch-1 RGB images in [0, 1].
Tensor sample_batch(std::span<const Tensor> dataset, const TrainConfig& cfg, Rng& rng);

// Downsample with |net|, upsample with |upsampler| back to x's size.
Tensor reconstruct(Network& net, const Tensor& x, FilterKind upsampler);

// Mean reconstruction loss over the centred crop_size square of every
// dataset image, evaluated in batches of cfg.batch_size.
double evaluate_loss(Network& net, std::span<const Tensor> dataset, const TrainConfig& cfg);

struct LossRecord {
  std::int64_t iteration = 0;
  double loss = 0.0;
};

struct TrainOptions {
  std::int64_t report_every = 0;  // 0 disables periodic reports
  std::filesystem::path checkpoint;  // empty disables checkpointing
  std::function<void(const LossRecord&)> on_report;
};

struct TrainResult {
  Network net;
  std::vector<LossRecord> history;  // loss before the update at each iteration
};

TrainResult train_loop(std::span<const Tensor> dataset, const TrainConfig& cfg,
                       const TrainOptions& options = {});

void write_loss_csv(const std::vector<LossRecord>& history, std::ostream& out);
void save_loss_csv(const std::vector<LossRecord>& history,
                   const std::filesystem::path& path);

}  // namespace fracdown
