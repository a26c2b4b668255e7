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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "fracdown/checkpoint.hpp"
#include "fracdown/error.hpp"
#include "fracdown/train.hpp"
#include "test_util.hpp"

namespace fracdown {
namespace {

using testing::random_tensor;

template <typename Fn>
ErrorCode error_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kBadConfig;
}

TEST(CropSize, Table) {
  const std::pair<RationalScale, int> table[] = {
      {{3, 2}, 255}, {{2, 1}, 256}, {{5, 2}, 255}, {{3, 1}, 255}, {{4, 1}, 256}, {{5, 1}, 255}};
  for (const auto& [scale, expect] : table) EXPECT_EQ(crop_size(scale, 256), expect) << scale.str();
}

TEST(CropSize, AlwaysDivisible) {
  for (int p = 1; p <= 7; ++p)
    for (int q = 1; q <= p; ++q)
      for (int base = p; base < 300; base += 7) {
        const RationalScale s(p, q);
        const int c = crop_size(s, base);
        EXPECT_LE(c, base);
        EXPECT_GT(s.down_length(c), 0) << s.str() << " base " << base;
        // Exactly M*floor(base/M) when that is an integer.
        const long long lhs = s.num() * ((static_cast<long long>(base) * s.den()) / s.num());
        if (lhs % s.den() == 0) EXPECT_EQ(c, lhs / s.den());
      }
}

TEST(CropSize, ScaleTooLarge) {
  EXPECT_EQ(error_of([] { crop_size(RationalScale(5, 1), 4); }), ErrorCode::kScaleTooLarge);
}

TEST(Mse, Examples) {
  const Tensor x({1, 1, 2, 1}, std::vector<float>{1, 1});
  const LossValue same = mse_loss(x, x);
  EXPECT_EQ(same.value, 0.0);
  for (float g : same.grad.values()) EXPECT_EQ(g, 0.0f);

  const LossValue l = mse_loss(x, Tensor({1, 1, 2, 1}, 0.0f));
  EXPECT_DOUBLE_EQ(l.value, 1.0);
  EXPECT_EQ(l.grad[0], -1.0f);
  EXPECT_EQ(l.grad[1], -1.0f);
}

TEST(Mse, QuadraticHomogeneity) {
  const Tensor x = random_tensor({2, 4, 4, 3}, 1);
  const Tensor y = random_tensor({2, 4, 4, 3}, 2);
  const Tensor r = map_binary(y, x, BinaryOp::kSub);
  const Tensor y3 = map_binary(x, map_binary(r, Tensor(r.shape(), 3.0f), BinaryOp::kMul), BinaryOp::kAdd);
  EXPECT_NEAR(mse_loss(x, y3).value, 9.0 * mse_loss(x, y).value, 1e-5);
}

TEST(Mse, ShapeMismatch) {
  EXPECT_EQ(error_of([] { mse_loss(Tensor({1, 2, 2, 1}, 0.0f), Tensor({1, 2, 3, 1}, 0.0f)); }),
            ErrorCode::kShapeMismatch);
}

struct AdamFixture {
  std::vector<float> a, b;
  std::vector<std::span<float>> params;
  AdamState state;

  AdamFixture() : a(5, 0.5f), b(3, -0.25f) {
    params = {std::span<float>(a), std::span<float>(b)};
    state = make_adam_state(params);
  }
};

TEST(Adam, ZeroGradientKeepsParameters) {
  AdamFixture f;
  const std::vector<float> ga(5, 0.0f), gb(3, 0.0f);
  const std::vector<std::span<const float>> grads = {ga, gb};
  for (int k = 0; k < 10; ++k) adam_step(f.params, grads, f.state, TrainConfig{});
  for (float v : f.a) EXPECT_EQ(v, 0.5f);
  for (float v : f.b) EXPECT_EQ(v, -0.25f);
  EXPECT_EQ(f.state.t, 10);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  AdamFixture f;
  const std::vector<float> ga(5, 1.0f), gb(3, 1.0f);
  const std::vector<std::span<const float>> grads = {ga, gb};
  adam_step(f.params, grads, f.state, TrainConfig{});
  // m_hat = v_hat = 1, so the step is lr / (1 + eps).
  const double step = 1e-4 / (1.0 + 1e-8);
  for (float v : f.a) EXPECT_NEAR(v, 0.5 - step, 1e-7);
  for (float v : f.b) EXPECT_NEAR(v, -0.25 - step, 1e-7);
  EXPECT_EQ(f.state.t, 1);
}

TEST(Adam, SecondStepMatchesClosedForm) {
  AdamFixture f;
  const std::vector<float> g1a(5, 1.0f), g1b(3, 1.0f);
  const std::vector<float> g2a(5, 0.5f), g2b(3, 0.5f);
  adam_step(f.params, std::vector<std::span<const float>>{g1a, g1b}, f.state, TrainConfig{});
  const double after1 = f.a[0];
  adam_step(f.params, std::vector<std::span<const float>>{g2a, g2b}, f.state, TrainConfig{});
  // m2 = 0.09 + 0.05, v2 = 0.000999 + 0.00025; bias corrections 0.19, 0.001999.
  const double m_hat = (0.9 * 0.1 + 0.1 * 0.5) / (1 - 0.81);
  const double v_hat = (0.999 * 0.001 + 0.001 * 0.25) / (1 - 0.999 * 0.999);
  const double expected = 1e-4 * m_hat / (std::sqrt(v_hat) + 1e-8);
  EXPECT_NEAR(after1 - f.a[0], expected, 1e-8);
  EXPECT_LT(after1 - f.a[0], 1e-4);
}

TEST(Adam, RepeatedGradientDeltasShrinkAfterSignChange) {
  // Two identical steps after an opposing one: v carries the earlier history,
  // so the second identical delta is smaller than the first.
  AdamFixture f;
  const std::vector<float> up(5, 1.0f), upb(3, 1.0f), down(5, -1.0f), downb(3, -1.0f);
  adam_step(f.params, std::vector<std::span<const float>>{up, upb}, f.state, TrainConfig{});
  const double p0 = f.a[0];
  adam_step(f.params, std::vector<std::span<const float>>{down, downb}, f.state, TrainConfig{});
  const double p1 = f.a[0];
  adam_step(f.params, std::vector<std::span<const float>>{down, downb}, f.state, TrainConfig{});
  const double p2 = f.a[0];
  EXPECT_GT(p1 - p0, 0.0);
  EXPECT_GT(p2 - p1, p1 - p0);
}

TEST(Adam, ShapeMismatch) {
  AdamFixture f;
  const std::vector<float> ga(4, 0.0f), gb(3, 0.0f);
  EXPECT_EQ(error_of([&] {
              adam_step(f.params, std::vector<std::span<const float>>{ga, gb}, f.state, TrainConfig{});
            }),
            ErrorCode::kShapeMismatch);
  EXPECT_EQ(f.state.t, 0);
}

TrainConfig small_config(RationalScale scale, int crop_base) {
  TrainConfig cfg;
  cfg.scale = scale;
  cfg.crop_base = crop_base;
  cfg.batch_size = 3;
  cfg.iterations = 5;
  cfg.stages = 3;
  cfg.seed = 11;
  return cfg;
}

TEST(SampleBatch, ShapeAndContent) {
  const std::vector<Tensor> data = {random_tensor({1, 40, 50, 3}, 3, 0.0f, 1.0f)};
  TrainConfig cfg = small_config(RationalScale(3, 2), 32);
  Rng rng(1);
  const Tensor batch = sample_batch(data, cfg, rng);
  EXPECT_EQ(batch.shape(), (Shape{3, 30, 30, 3}));
  for (float v : batch.values()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
  // Each crop is a contiguous window of the source image.
  const Tensor first = batch.slice(0);
  bool found = false;
  for (int y0 = 0; y0 + 30 <= 40 && !found; ++y0)
    for (int x0 = 0; x0 + 30 <= 50 && !found; ++x0) {
      bool match = true;
      for (int y = 0; y < 30 && match; ++y)
        for (int x = 0; x < 30 && match; ++x)
          for (int c = 0; c < 3; ++c) match &= first.at(0, y, x, c) == data[0].at(0, y0 + y, x0 + x, c);
      found = match;
    }
  EXPECT_TRUE(found);
}

TEST(SampleBatch, FullRecipeBatchShape) {
  const std::vector<Tensor> data = {Tensor({1, 260, 300, 3}, 0.5f)};
  TrainConfig cfg;
  Rng rng(2);
  EXPECT_EQ(sample_batch(data, cfg, rng).shape(), (Shape{16, 256, 256, 3}));
  cfg.scale = RationalScale(3, 2);
  EXPECT_EQ(sample_batch(data, cfg, rng).shape(), (Shape{16, 255, 255, 3}));
}

TEST(SampleBatch, DeterministicForSeed) {
  const std::vector<Tensor> data = {random_tensor({1, 40, 40, 3}, 4, 0.0f, 1.0f),
                                    random_tensor({1, 36, 44, 3}, 5, 0.0f, 1.0f)};
  const TrainConfig cfg = small_config(RationalScale(2, 1), 20);
  Rng r1(9), r2(9);
  for (int k = 0; k < 4; ++k) {
    const Tensor a = sample_batch(data, cfg, r1);
    const Tensor b = sample_batch(data, cfg, r2);
    EXPECT_EQ(testing::max_abs_diff(a, b), 0.0);
  }
}

TEST(SampleBatch, Errors) {
  const TrainConfig cfg = small_config(RationalScale(2, 1), 20);
  Rng rng(1);
  EXPECT_EQ(error_of([&] { sample_batch({}, cfg, rng); }), ErrorCode::kEmptyDataset);
  const std::vector<Tensor> small = {Tensor({1, 19, 40, 3}, 0.0f)};
  EXPECT_EQ(error_of([&] { sample_batch(small, cfg, rng); }), ErrorCode::kImageTooSmall);
}

TEST(TrainConfigText, RoundTrip) {
  TrainConfig cfg = small_config(RationalScale(5, 2), 100);
  cfg.block = BlockKind::kResizeConv;
  cfg.lr = 3.25e-4;
  cfg.upsampler = {FilterTag::kLanczos3, false};
  const TrainConfig back = parse_train_config(format_train_config(cfg));
  EXPECT_EQ(back, cfg);

  const auto path = std::filesystem::temp_directory_path() / "fracdown_train_cfg.txt";
  save_train_config(cfg, path);
  EXPECT_EQ(load_train_config(path), cfg);
  std::filesystem::remove(path);
}

TEST(TrainConfigText, Rejections) {
  EXPECT_EQ(error_of([] { parse_train_config("colour=blue\n"); }), ErrorCode::kBadConfig);
  EXPECT_EQ(error_of([] { parse_train_config("lr=fast\n"); }), ErrorCode::kBadConfig);
  EXPECT_EQ(error_of([] { parse_train_config("batch_size=0\n"); }), ErrorCode::kBadConfig);
  EXPECT_EQ(error_of([] { parse_train_config("beta1=1\n"); }), ErrorCode::kBadConfig);
  EXPECT_EQ(error_of([] { parse_train_config("scale=3/2\nblock=strided\n"); }),
            ErrorCode::kInfeasibleKind);
  const TrainConfig defaults = parse_train_config("# comment only\n\n");
  EXPECT_EQ(defaults, TrainConfig{});
  EXPECT_EQ(defaults.batch_size, 16);
  EXPECT_EQ(defaults.lr, 1e-4);
  EXPECT_EQ(defaults.crop_base, 256);
}

TEST(TrainLoop, StepZeroIsBicubicBaseline) {
  const std::vector<Tensor> data = {random_tensor({1, 30, 30, 3}, 6, 0.0f, 1.0f)};
  TrainConfig cfg = small_config(RationalScale(3, 2), 30);
  cfg.batch_size = 1;
  cfg.iterations = 1;
  const TrainResult r = train_loop(data, cfg);
  const Tensor low = resize_by_scale(data[0], kBicubic, cfg.scale, Direction::kDown);
  const Tensor up = resize_forward(low, kBicubic, 30, 30);
  const double baseline = mse_loss(data[0], up).value;
  ASSERT_EQ(r.history.size(), 1u);
  EXPECT_NEAR(r.history[0].loss, baseline, 1e-5 * baseline);
}

TEST(TrainLoop, ReducesLossAndIsReproducible) {
  const std::vector<Tensor> data = {random_tensor({1, 24, 24, 3}, 7, 0.0f, 1.0f)};
  TrainConfig cfg = small_config(RationalScale(3, 2), 24);
  cfg.batch_size = 1;
  cfg.iterations = 40;
  cfg.lr = 1e-3;
  const TrainResult a = train_loop(data, cfg);
  const TrainResult b = train_loop(data, cfg);
  ASSERT_EQ(a.history.size(), 40u);
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_GE(a.history[i].loss, 0.0);
    EXPECT_EQ(a.history[i].iteration, static_cast<std::int64_t>(i));
    EXPECT_EQ(a.history[i].loss, b.history[i].loss);
  }
  EXPECT_LT(a.history.back().loss, a.history.front().loss);
  EXPECT_EQ(a.net.iteration(), 40);
}

TEST(TrainLoop, CheckpointsAndReports) {
  const std::vector<Tensor> data = {random_tensor({1, 20, 20, 3}, 8, 0.0f, 1.0f)};
  TrainConfig cfg = small_config(RationalScale(2, 1), 20);
  cfg.iterations = 6;
  const auto path = std::filesystem::temp_directory_path() / "fracdown_train_test.ckpt";
  std::vector<std::int64_t> reported;
  TrainOptions opts;
  opts.report_every = 2;
  opts.checkpoint = path;
  opts.on_report = [&](const LossRecord& r) { reported.push_back(r.iteration); };
  const TrainResult r = train_loop(data, cfg, opts);
  EXPECT_EQ(reported, (std::vector<std::int64_t>{1, 3, 5}));
  const Network back = load_checkpoint(path);
  EXPECT_EQ(back.iteration(), 6);
  EXPECT_EQ(back.layers()[1].weights, r.net.layers()[1].weights);
  std::filesystem::remove(path);
}

TEST(TrainLoop, LossCsv) {
  std::ostringstream out;
  write_loss_csv({{0, 0.5}, {1, 0.25}}, out);
  EXPECT_EQ(out.str(), "iteration,loss\n0,0.5\n1,0.25\n");
}

}  // namespace
}  // namespace fracdown
