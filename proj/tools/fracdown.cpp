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

// fracdown: train CNN-CR downsamplers, resize media, and run evaluation
// ladders and BD-rate reports.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "fracdown/checkpoint.hpp"
#include "fracdown/error.hpp"
#include "fracdown/harness.hpp"
#include "fracdown/media.hpp"
#include "fracdown/metrics.hpp"
#include "fracdown/train.hpp"

namespace fs = std::filesystem;
using namespace fracdown;

namespace {

std::string extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

std::vector<Tensor> load_dataset(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && extension(entry.path()) == ".png") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(ErrorCode::kEmptyDataset, "no PNG files in " + dir.string());
  std::vector<Tensor> data;
  for (const auto& f : files) data.push_back(load_image_rgb(f));
  return data;
}

struct VideoSource {
  std::string path;
  int width = 0;
  int height = 0;
  int fps = 25;

  void add_options(CLI::App* cmd) {
    cmd->add_option("--src", path, "Source video (.y4m, or .yuv with --width/--height)")->required();
    cmd->add_option("--width", width, "Frame width for raw .yuv input");
    cmd->add_option("--height", height, "Frame height for raw .yuv input");
    cmd->add_option("--fps", fps, "Frame rate for raw .yuv input");
  }

  Y4mVideo load() const {
    if (extension(path) == ".yuv") {
      if (width <= 0 || height <= 0) {
        throw Error(ErrorCode::kBadConfig, "raw .yuv input needs --width and --height");
      }
      Y4mVideo v;
      v.header.width = width;
      v.header.height = height;
      v.header.fps_num = fps;
      v.frames = read_yuv420_raw(path, width, height);
      return v;
    }
    return read_y4m(fs::path(path));
  }
};

std::vector<MetricTag> parse_metrics(const std::vector<std::string>& names) {
  std::vector<MetricTag> tags;
  for (const auto& n : names) tags.push_back(parse_metric_tag(n));
  return tags;
}

std::vector<RationalScale> parse_scales(const std::vector<std::string>& texts) {
  std::vector<RationalScale> scales;
  for (const auto& t : texts) scales.push_back(RationalScale::parse(t));
  return scales;
}

// A CSV file, or a directory of curve_P_Q.csv files keyed by scale.
std::vector<LadderResult> load_curves(const fs::path& path) {
  const std::regex name(R"(curve_(\d+)_(\d+)\.csv)");
  std::vector<LadderResult> out;
  if (!fs::is_directory(path)) {
    std::smatch m;
    const std::string file = path.filename().string();
    const RationalScale scale = std::regex_match(file, m, name)
                                    ? RationalScale(std::stoll(m[1]), std::stoll(m[2]))
                                    : RationalScale(1, 1);
    out.push_back({scale, load_curve_csv(path), false, {}});
    return out;
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(path)) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    std::smatch m;
    const std::string file = f.filename().string();
    if (!std::regex_match(file, m, name)) continue;
    out.push_back({RationalScale(std::stoll(m[1]), std::stoll(m[2])), load_curve_csv(f), false, {}});
  }
  if (out.empty()) throw Error(ErrorCode::kIoError, "no curve_P_Q.csv files in " + path.string());
  return out;
}

void warn_degenerate(const std::vector<LadderResult>& results) {
  for (const auto& r : results) {
    if (r.degenerate) {
      std::cerr << "warning: curve for M=" << r.scale.str()
                << " is degenerate (no rate-quality tradeoff); BD-rate is undefined\n";
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fractional-scale learned downsampling toolkit"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "Train a CNN-CR downsampler");
  TrainConfig tcfg;
  std::string t_scale = "2", t_block = "conv-resize", t_data, t_out, t_loss_csv, t_upsampler = "bicubic";
  std::int64_t t_report_every = 1000;
  train->add_option("--scale", t_scale, "Downscaling factor p/q")->capture_default_str();
  train->add_option("--block", t_block, "conv-resize|resize-conv|strided|conv-pool")->capture_default_str();
  train->add_option("--data", t_data, "Directory of training PNGs")->required();
  train->add_option("--iters", tcfg.iterations, "Training iterations")->capture_default_str();
  train->add_option("--seed", tcfg.seed, "Seed for init and batch sampling")->capture_default_str();
  train->add_option("--out", t_out, "Checkpoint path")->required();
  train->add_option("--batch", tcfg.batch_size, "Batch size")->capture_default_str();
  train->add_option("--lr", tcfg.lr, "Adam learning rate")->capture_default_str();
  train->add_option("--crop-base", tcfg.crop_base, "Nominal crop side")->capture_default_str();
  train->add_option("--stages", tcfg.stages, "Network depth")->capture_default_str();
  train->add_option("--upsampler", t_upsampler, "Upsampler in the loss")->capture_default_str();
  train->add_option("--report-every", t_report_every, "Iterations between reports and checkpoints")
      ->capture_default_str();
  train->add_option("--loss-csv", t_loss_csv, "Write the per-iteration loss history");

  // resize
  auto* resize = app.add_subcommand("resize", "Resize a PNG or Y4M by a rational factor");
  std::string r_in, r_scale, r_method = "lanczos", r_direction = "down", r_out;
  resize->add_option("--in", r_in, "Input .png or .y4m")->required();
  resize->add_option("--scale", r_scale, "Factor p/q")->required();
  resize->add_option("--method", r_method, "lanczos|bicubic|bilinear|ckpt:PATH")->capture_default_str();
  resize->add_option("--direction", r_direction, "down|up")->capture_default_str();
  resize->add_option("--out", r_out, "Output .png, .y4m or .yuv")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "No-encoder evaluation of a downsampler");
  VideoSource e_src;
  e_src.add_options(eval);
  std::string e_ckpt, e_method, e_upsampler = "bicubic", e_out;
  std::vector<std::string> e_scales, e_metrics{"psnr", "ssim"};
  eval->add_option("--ckpt", e_ckpt, "Checkpoint to evaluate");
  eval->add_option("--method", e_method, "Filter instead of a checkpoint");
  eval->add_option("--scale", e_scales, "Scale(s); default is the checkpoint's");
  eval->add_option("--upsampler", e_upsampler, "bicubic|bilinear|lanczos")->capture_default_str();
  eval->add_option("--metrics", e_metrics, "psnr,ssim")->delimiter(',')->capture_default_str();
  eval->add_option("--out", e_out, "Curve CSV (a directory when several scales are given)")
      ->required();

  // ladder
  auto* ladder = app.add_subcommand("ladder", "Encode a rate-quality ladder per scale");
  VideoSource l_src;
  l_src.add_options(ladder);
  LadderConfig lcfg;
  std::string l_method = "lanczos", l_upsampler = "bicubic", l_out, l_work, l_vmaf;
  std::vector<std::string> l_scales{"2"}, l_metrics{"psnr", "ssim"};
  ladder->add_option("--encoder-cmd", lcfg.encoder_cmd, "Template with {input} {output} {qp} {width} {height}");
  ladder->add_option("--decoder-cmd", lcfg.decoder_cmd, "Decoder template");
  ladder->add_option("--qps", lcfg.qps, "QP list")->delimiter(',');
  ladder->add_option("--scale", l_scales, "Scale(s) p/q")->delimiter(',')->capture_default_str();
  ladder->add_option("--method", l_method, "lanczos|bicubic|bilinear|ckpt:PATH")->capture_default_str();
  ladder->add_option("--upsampler", l_upsampler, "bicubic|bilinear|lanczos")->capture_default_str();
  ladder->add_option("--metrics", l_metrics, "psnr,ssim,vmaf")->delimiter(',')->capture_default_str();
  ladder->add_option("--vmaf-scores", l_vmaf, "CSV of externally computed VMAF (qp,vmaf)");
  ladder->add_option("--jobs", lcfg.jobs, "Concurrent encodes")->capture_default_str();
  ladder->add_option("--work-dir", l_work, "Scratch directory (default OUT/work)");
  ladder->add_option("--out", l_out, "Directory for curve_P_Q.csv files")->required();

  // bdrate
  auto* bdrate = app.add_subcommand("bdrate", "BD-rate of a test curve against a baseline");
  std::string b_base, b_test, b_fit = "pchip", b_csv;
  std::vector<std::string> b_metrics{"psnr"};
  bdrate->add_option("--baseline", b_base, "Curve CSV or directory of curves")->required();
  bdrate->add_option("--test", b_test, "Curve CSV or directory of curves")->required();
  bdrate->add_option("--metric", b_metrics, "psnr|ssim|vmaf")->delimiter(',')->capture_default_str();
  bdrate->add_option("--fit", b_fit, "pchip|cubic")->capture_default_str();
  bdrate->add_option("--csv", b_csv, "Also write the table as CSV");

  // compare-order
  auto* order = app.add_subcommand("compare-order", "Train conv-resize and resize-conv and compare");
  TrainConfig ocfg;
  ocfg.scale = RationalScale(5, 2);
  std::string o_scale = "5/2", o_data, o_out, o_src;
  order->add_option("--scale", o_scale, "Factor p/q")->capture_default_str();
  order->add_option("--data", o_data, "Directory of training PNGs")->required();
  order->add_option("--iters", ocfg.iterations, "Iterations per arm")->capture_default_str();
  order->add_option("--seed", ocfg.seed, "Seed")->capture_default_str();
  order->add_option("--batch", ocfg.batch_size, "Batch size")->capture_default_str();
  order->add_option("--lr", ocfg.lr, "Adam learning rate")->capture_default_str();
  order->add_option("--crop-base", ocfg.crop_base, "Nominal crop side")->capture_default_str();
  order->add_option("--stages", ocfg.stages, "Network depth")->capture_default_str();
  order->add_option("--src", o_src, "Optional Y4M for a no-encoder ladder of both arms");
  order->add_option("--out", o_out, "Write the report here as well");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      tcfg.scale = RationalScale::parse(t_scale);
      tcfg.block = parse_block_kind(t_block);
      tcfg.upsampler = {parse_filter_tag(t_upsampler), true};
      const auto data = load_dataset(t_data);
      TrainOptions opts;
      opts.report_every = t_report_every;
      opts.checkpoint = t_out;
      opts.on_report = [](const LossRecord& r) {
        std::cerr << "iter " << r.iteration + 1 << " loss " << std::setprecision(6) << r.loss << '\n';
      };
      TrainResult result = train_loop(data, tcfg, opts);
      save_train_config(tcfg, fs::path(t_out).string() + ".cfg");
      if (!t_loss_csv.empty()) save_loss_csv(result.history, t_loss_csv);
      std::cout << "trained " << to_string(tcfg.block) << " M=" << tcfg.scale.str() << " for "
                << tcfg.iterations << " iterations; final training-set loss "
                << std::setprecision(6) << evaluate_loss(result.net, data, tcfg) << '\n';
    } else if (*resize) {
      const RationalScale scale = RationalScale::parse(r_scale);
      if (r_direction != "up" && r_direction != "down") {
        throw Error(ErrorCode::kBadConfig, "direction must be down or up");
      }
      const Direction dir = r_direction == "up" ? Direction::kUp : Direction::kDown;
      std::function<Tensor(const Tensor&)> op;
      if (r_method.rfind("ckpt:", 0) == 0) {
        if (dir == Direction::kUp) throw Error(ErrorCode::kBadConfig, "checkpoints only downscale");
        const Downsampler d = parse_downsampler(r_method);
        op = [d, scale](const Tensor& x) { return d.apply(x, scale); };
      } else {
        const FilterKind f{parse_filter_tag(r_method), true};
        op = [f, scale, dir](const Tensor& x) { return resize_by_scale(x, f, scale, dir); };
      }
      if (extension(r_in) == ".png") {
        save_image_rgb(op(load_image_rgb(r_in)), r_out);
      } else {
        Y4mVideo v = read_y4m(fs::path(r_in));
        for (auto& frame : v.frames) frame = rgb_to_yuv420(op(yuv420_to_rgb(frame)));
        if (!v.frames.empty()) {
          v.header.width = v.frames.front().width;
          v.header.height = v.frames.front().height;
        }
        if (extension(r_out) == ".yuv") {
          write_yuv420_raw(v.frames, r_out);
          std::cout << v.header.width << "x" << v.header.height << '\n';
        } else {
          write_y4m(v, fs::path(r_out));
        }
      }
    } else if (*eval) {
      if (e_ckpt.empty() == e_method.empty()) {
        throw Error(ErrorCode::kBadConfig, "give exactly one of --ckpt and --method");
      }
      LadderConfig cfg;
      cfg.upsampler = {parse_filter_tag(e_upsampler), true};
      cfg.metrics = parse_metrics(e_metrics);
      const Downsampler down = parse_downsampler(e_ckpt.empty() ? e_method : "ckpt:" + e_ckpt);
      if (!e_scales.empty()) {
        cfg.scales = parse_scales(e_scales);
      } else if (!e_ckpt.empty()) {
        cfg.scales = {load_checkpoint(e_ckpt).scale()};
      }
      const auto results = run_ladder(e_src.load(), down, cfg, &std::cerr);
      warn_degenerate(results);
      if (results.size() == 1) {
        save_curve_csv(results.front().points, e_out);
      } else {
        save_ladder(results, e_out);
      }
      for (const auto& r : results) {
        const auto& p = r.points.front();
        std::cout << "M=" << r.scale.str() << " psnr " << std::fixed << std::setprecision(4) << p.psnr
                  << " ssim " << std::setprecision(6) << p.ssim << '\n';
      }
    } else if (*ladder) {
      lcfg.scales = parse_scales(l_scales);
      lcfg.upsampler = {parse_filter_tag(l_upsampler), true};
      lcfg.metrics = parse_metrics(l_metrics);
      lcfg.vmaf_scores = l_vmaf;
      lcfg.work_dir = l_work.empty() ? fs::path(l_out) / "work" : fs::path(l_work);
      const auto results = run_ladder(l_src.load(), parse_downsampler(l_method), lcfg, &std::cerr);
      warn_degenerate(results);
      save_ladder(results, l_out);
      for (const auto& r : results) {
        std::cout << (fs::path(l_out) / curve_file_name(r.scale)).string() << '\n';
      }
    } else if (*bdrate) {
      const auto base = load_curves(b_base);
      auto test = load_curves(b_test);
      if (!fs::is_directory(b_base) && !fs::is_directory(b_test)) test.front().scale = base.front().scale;
      const BdTable table = report_bdrate(base, test, parse_metrics(b_metrics), parse_bd_fit(b_fit));
      std::cout << table.text();
      if (!b_csv.empty()) {
        std::ofstream out(b_csv);
        table.write_csv(out);
      }
    } else if (*order) {
      ocfg.scale = RationalScale::parse(o_scale);
      ocfg.block = BlockKind::kConvResize;
      TrainConfig rc = ocfg;
      rc.block = BlockKind::kResizeConv;
      const auto data = load_dataset(o_data);
      std::optional<Y4mVideo> video;
      LadderConfig lc;
      if (!o_src.empty()) video = read_y4m(fs::path(o_src));
      const OrderReport report =
          compare_order(data, ocfg, rc, video ? &*video : nullptr, video ? &lc : nullptr);
      std::cout << report.text();
      if (!o_out.empty()) std::ofstream(o_out) << report.text();
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
