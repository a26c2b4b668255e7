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
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fracdown/media.hpp"
#include "fracdown/metrics.hpp"
#include "fracdown/nn.hpp"
#include "fracdown/rational.hpp"
#include "fracdown/resample.hpp"
#include "fracdown/train.hpp"

namespace fracdown {

// 15 QPs spread evenly over [17, 46] and rounded.
std::vector<int> default_qps();

// Encoder and decoder templates are run through the shell after replacing
// {input}, {output}, {qp}, {width} and {height}. The encoder reads a Y4M file
// and writes a bitstream; the decoder reads that bitstream and writes either
// Y4M or headerless I420 at the downscaled size. An empty encoder template
// selects the identity "encoder", which passes frames through and reports
// their raw size.
struct LadderConfig {
  std::vector<RationalScale> scales{RationalScale(2, 1)};
  std::vector<int> qps = default_qps();
  std::string encoder_cmd;
  std::string decoder_cmd;
  FilterKind upsampler = kBicubic;
  std::vector<MetricTag> metrics{MetricTag::kPsnr, MetricTag::kSsim};
  std::filesystem::path work_dir;     // required when an encoder is set
  std::filesystem::path vmaf_scores;  // CSV "qp,vmaf" or "scale,qp,vmaf"
  int jobs = 1;                       // concurrent external encodes
  ColorOptions color;

  bool identity_encoder() const { return encoder_cmd.empty(); }
  void validate() const;
};

struct EncodeResult {
  int qp = 0;
  std::uintmax_t bitstream_bytes = 0;
  double duration_s = 0.0;
  std::filesystem::path decoded;  // empty for the identity encoder

  double bitrate_kbps() const;
};

// Maps a full-resolution RGB frame (1, H, W, 3) to its downscaled version.
struct Downsampler {
  std::string name;
  std::function<Tensor(const Tensor&, const RationalScale&)> apply;
};

Downsampler filter_downsampler(FilterKind filter);
Downsampler lanczos_downsampler();
// The network only serves its own scale; other scales raise dimension-mismatch.
Downsampler network_downsampler(std::shared_ptr<Network> net);
// "lanczos", "bicubic", "bilinear" or "ckpt:PATH".
Downsampler parse_downsampler(const std::string& name);

struct LadderResult {
  RationalScale scale;
  std::vector<LadderPoint> points;  // ascending QP
  bool degenerate = false;          // no rate-quality tradeoff in the curve
  std::vector<std::string> log;     // one entry per external command
};

std::string substitute_template(const std::string& tmpl, const std::string& input,
                                const std::string& output, int qp, int width, int height);

// Runs every (scale, QP) point. Failed encodes abort with encoder-failure;
// scales that do not map the source to even integer dimensions raise
// dimension-mismatch. |log| receives each command, exit status and stderr.
std::vector<LadderResult> run_ladder(const Y4mVideo& video, const Downsampler& down,
                                     const LadderConfig& cfg, std::ostream* log = nullptr);

std::string curve_file_name(const RationalScale& scale);
void save_ladder(const std::vector<LadderResult>& results, const std::filesystem::path& dir);

struct BdCell {
  RationalScale scale;
  MetricTag metric = MetricTag::kPsnr;
  double bd_rate = 0.0;
};

struct BdTable {
  std::vector<BdCell> cells;

  std::string text() const;  // aligned, one row per scale
  void write_csv(std::ostream& out) const;
};

BdTable report_bdrate(const std::vector<LadderResult>& baseline,
                      const std::vector<LadderResult>& test,
                      const std::vector<MetricTag>& metrics, BdFit fit = BdFit::kPchip);

struct OrderArm {
  BlockKind block = BlockKind::kConvResize;
  double final_loss = 0.0;            // evaluate_loss on the training set
  std::vector<LadderResult> ladder;   // empty without an evaluation video
  std::optional<BdTable> vs_lanczos;  // only for non-degenerate ladders
};

struct OrderReport {
  RationalScale scale;
  OrderArm conv_resize;
  OrderArm resize_conv;

  bool conv_resize_wins() const { return conv_resize.final_loss <= resize_conv.final_loss; }
  std::string text() const;
};

// Trains conv-resize and resize-conv with configurations that differ only in
// the block kind (mismatched-configs otherwise) and compares them.
OrderReport compare_order(std::span<const Tensor> dataset, const TrainConfig& conv_resize,
                          const TrainConfig& resize_conv, const Y4mVideo* video = nullptr,
                          const LadderConfig* ladder = nullptr);

// Same comparison for networks that were trained elsewhere.
OrderReport compare_trained(std::span<const Tensor> dataset, const TrainConfig& cfg,
                            Network& conv_resize, Network& resize_conv,
                            const Y4mVideo* video = nullptr, const LadderConfig* ladder = nullptr);

}  // namespace fracdown
