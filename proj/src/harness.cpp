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

#include "fracdown/harness.hpp"

#include <sys/wait.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "fracdown/checkpoint.hpp"
#include "fracdown/error.hpp"

namespace fracdown {

namespace fs = std::filesystem;

std::vector<int> default_qps() {
  std::vector<int> qps;
  for (int i = 0; i < 15; ++i) {
    qps.push_back(static_cast<int>(std::lround(17.0 + 29.0 * i / 14.0)));
  }
  return qps;
}

void LadderConfig::validate() const {
  if (scales.empty()) throw Error(ErrorCode::kBadConfig, "no scales");
  for (const auto& s : scales) {
    if (s.value() < 1.0) throw Error(ErrorCode::kBadConfig, "scale " + s.str() + " is below 1");
  }
  if (qps.empty()) throw Error(ErrorCode::kBadConfig, "no QPs");
  for (std::size_t i = 1; i < qps.size(); ++i) {
    if (qps[i] <= qps[i - 1]) throw Error(ErrorCode::kBadConfig, "QPs must be strictly increasing");
  }
  if (metrics.empty()) throw Error(ErrorCode::kBadConfig, "no metrics");
  if (jobs < 1) throw Error(ErrorCode::kBadConfig, "jobs must be >= 1");
  if (!identity_encoder()) {
    if (decoder_cmd.empty()) throw Error(ErrorCode::kBadConfig, "encoder set without decoder");
    if (work_dir.empty()) throw Error(ErrorCode::kBadConfig, "external encodes need a work dir");
  }
  const bool wants_vmaf =
      std::find(metrics.begin(), metrics.end(), MetricTag::kVmaf) != metrics.end();
  if (wants_vmaf && vmaf_scores.empty()) {
    throw Error(ErrorCode::kBadConfig, "vmaf needs an external scores file");
  }
}

double EncodeResult::bitrate_kbps() const {
  if (!(duration_s > 0.0)) throw Error(ErrorCode::kEncoderFailure, "non-positive duration");
  return 8.0 * static_cast<double>(bitstream_bytes) / duration_s / 1000.0;
}

Downsampler filter_downsampler(FilterKind filter) {
  return {std::string(to_string(filter.tag)), [filter](const Tensor& x, const RationalScale& m) {
            return resize_by_scale(x, filter, m, Direction::kDown);
          }};
}

Downsampler lanczos_downsampler() { return filter_downsampler(kLanczos3); }

Downsampler network_downsampler(std::shared_ptr<Network> net) {
  const std::string name = "cnn-cr-" + std::string(to_string(net->config().block));
  return {name, [net](const Tensor& x, const RationalScale& m) {
            if (!(m == net->scale())) {
              throw Error(ErrorCode::kDimensionMismatch, "network trained for M=" +
                                                             net->scale().str() + ", asked for M=" +
                                                             m.str());
            }
            return net->forward(x);
          }};
}

Downsampler parse_downsampler(const std::string& name) {
  if (name.rfind("ckpt:", 0) == 0) {
    auto net = std::make_shared<Network>(load_checkpoint(name.substr(5)));
    return network_downsampler(std::move(net));
  }
  return filter_downsampler({parse_filter_tag(name), true});
}

std::string substitute_template(const std::string& tmpl, const std::string& input,
                                const std::string& output, int qp, int width, int height) {
  const std::map<std::string, std::string> values = {{"{input}", input},
                                                     {"{output}", output},
                                                     {"{qp}", std::to_string(qp)},
                                                     {"{width}", std::to_string(width)},
                                                     {"{height}", std::to_string(height)}};
  std::string out;
  for (std::size_t i = 0; i < tmpl.size();) {
    bool replaced = false;
    if (tmpl[i] == '{') {
      for (const auto& [key, value] : values) {
        if (tmpl.compare(i, key.size(), key) == 0) {
          out += value;
          i += key.size();
          replaced = true;
          break;
        }
      }
    }
    if (!replaced) out += tmpl[i++];
  }
  return out;
}

namespace {

struct CommandOutcome {
  int status = 0;
  std::string stderr_text;
  std::string log_line;
};

CommandOutcome run_command(const std::string& what, const std::string& cmd,
                           const fs::path& stderr_path) {
  const std::string full = "(" + cmd + ") 2> '" + stderr_path.string() + "'";
  const int raw = std::system(full.c_str());
  CommandOutcome out;
  out.status = raw == -1 ? -1 : (WIFEXITED(raw) ? WEXITSTATUS(raw) : 128 + WTERMSIG(raw));
  std::ifstream err(stderr_path);
  std::stringstream buf;
  buf << err.rdbuf();
  out.stderr_text = buf.str();
  out.log_line = what + " exit=" + std::to_string(out.status) + " cmd=" + cmd +
                 " stderr=" + (out.stderr_text.empty() ? "<empty>" : out.stderr_text);
  while (!out.log_line.empty() && out.log_line.back() == '\n') out.log_line.pop_back();
  return out;
}

std::vector<FramePlanar420> read_decoded(const fs::path& path, int width, int height) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw Error(ErrorCode::kEncoderFailure, "decoder wrote no " + path.string());
  char magic[9] = {};
  probe.read(magic, 9);
  probe.close();
  if (std::string(magic, 9) == "YUV4MPEG2") {
    Y4mVideo v = read_y4m(path);
    if (v.header.width != width || v.header.height != height) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "decoded " + std::to_string(v.header.width) + "x" +
                      std::to_string(v.header.height) + ", expected " + std::to_string(width) +
                      "x" + std::to_string(height));
    }
    return std::move(v.frames);
  }
  return read_yuv420_raw(path, width, height);
}

struct Quality {
  double psnr = 0.0;
  double ssim = 0.0;
};

Quality score(const std::vector<Tensor>& source, const std::vector<FramePlanar420>& decoded,
              const LadderConfig& cfg) {
  if (decoded.size() != source.size()) {
    throw Error(ErrorCode::kEncoderFailure, "decoded " + std::to_string(decoded.size()) +
                                                " frames, source has " +
                                                std::to_string(source.size()));
  }
  Quality q;
  for (std::size_t i = 0; i < source.size(); ++i) {
    const Tensor rgb = yuv420_to_rgb(decoded[i], cfg.color);
    const Tensor up = resize_forward(rgb, cfg.upsampler, source[i].height(), source[i].width());
    q.psnr += psnr(source[i], up);
    q.ssim += ssim(source[i], up);
  }
  const double n = static_cast<double>(source.size());
  q.psnr /= n;
  q.ssim /= n;
  if (std::isnan(q.psnr) || std::isnan(q.ssim)) {
    throw Error(ErrorCode::kMetricFailure, "metric evaluated to NaN");
  }
  return q;
}

// scale string ("" for files without a scale column) -> qp -> vmaf.
using VmafTable = std::map<std::string, std::map<int, double>>;

VmafTable load_vmaf(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  const bool with_scale = line.rfind("scale,", 0) == 0;
  if (!with_scale && line.rfind("qp,", 0) != 0) {
    throw Error(ErrorCode::kDecodeError, "vmaf scores need a 'qp,vmaf' or 'scale,qp,vmaf' header");
  }
  VmafTable table;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string scale, qp, value;
    if (with_scale) std::getline(row, scale, ',');
    std::getline(row, qp, ',');
    std::getline(row, value, ',');
    try {
      const std::string key = with_scale ? RationalScale::parse(scale).str() : "";
      table[key][std::stoi(qp)] = std::stod(value);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kDecodeError, "bad vmaf row '" + line + "'");
    }
  }
  return table;
}

std::optional<double> lookup_vmaf(const VmafTable& table, const RationalScale& scale, int qp) {
  for (const std::string& key : {scale.str(), std::string()}) {
    const auto it = table.find(key);
    if (it == table.end()) continue;
    const auto hit = it->second.find(qp);
    if (hit != it->second.end()) return hit->second;
  }
  return std::nullopt;
}

bool is_degenerate(const std::vector<LadderPoint>& points) {
  if (points.size() < 2) return true;
  bool same_rate = true, same_quality = true;
  for (const auto& p : points) {
    same_rate &= p.bitrate_kbps == points.front().bitrate_kbps;
    same_quality &= p.psnr == points.front().psnr && p.ssim == points.front().ssim;
  }
  return same_rate || same_quality;
}

std::string scale_dir_name(const RationalScale& s) {
  return "m" + std::to_string(s.num()) + "_" + std::to_string(s.den());
}

struct JobOutput {
  EncodeResult encode;
  std::vector<std::string> log;
};

}  // namespace

std::vector<LadderResult> run_ladder(const Y4mVideo& video, const Downsampler& down,
                                     const LadderConfig& cfg, std::ostream* log) {
  cfg.validate();
  if (video.frames.empty()) throw Error(ErrorCode::kInvalidDims, "source video has no frames");
  const int src_w = video.header.width;
  const int src_h = video.header.height;
  std::vector<Tensor> source;
  for (const auto& f : video.frames) source.push_back(yuv420_to_rgb(f, cfg.color));
  const double duration = static_cast<double>(video.frames.size()) / video.header.fps();
  const bool wants_vmaf =
      std::find(cfg.metrics.begin(), cfg.metrics.end(), MetricTag::kVmaf) != cfg.metrics.end();
  const VmafTable vmaf = cfg.vmaf_scores.empty() ? VmafTable{} : load_vmaf(cfg.vmaf_scores);

  std::vector<LadderResult> results;
  for (const RationalScale& scale : cfg.scales) {
    const long long w = scale.down_length(src_w);
    const long long h = scale.down_length(src_h);
    if (w <= 0 || h <= 0 || w % 2 != 0 || h % 2 != 0) {
      throw Error(ErrorCode::kDimensionMismatch,
                  std::to_string(src_w) + "x" + std::to_string(src_h) + " at M=" + scale.str() +
                      " does not give even integer dimensions");
    }
    Y4mVideo low;
    low.header = video.header;
    low.header.width = static_cast<int>(w);
    low.header.height = static_cast<int>(h);
    for (const Tensor& rgb : source) {
      const Tensor small = down.apply(rgb, scale);
      if (small.height() != h || small.width() != w) {
        throw Error(ErrorCode::kDimensionMismatch, down.name + " produced " +
                                                       to_string(small.shape()));
      }
      low.frames.push_back(rgb_to_yuv420(small, cfg.color));
    }

    LadderResult result;
    result.scale = scale;
    std::vector<JobOutput> jobs(cfg.qps.size());
    std::vector<std::vector<FramePlanar420>> decoded(cfg.qps.size());

    if (cfg.identity_encoder()) {
      const std::uintmax_t bytes = static_cast<std::uintmax_t>(w * h * 3 / 2) * low.frames.size();
      for (std::size_t i = 0; i < cfg.qps.size(); ++i) {
        jobs[i].encode = {cfg.qps[i], bytes, duration, {}};
      }
    } else {
      const fs::path dir = cfg.work_dir / scale_dir_name(scale);
      fs::create_directories(dir);
      const fs::path input = dir / "input.y4m";
      write_y4m(low, input);

      std::atomic<std::size_t> next{0};
      std::vector<std::exception_ptr> errors(cfg.qps.size());
      auto worker = [&] {
        for (std::size_t i = next++; i < cfg.qps.size(); i = next++) {
          try {
            const int qp = cfg.qps[i];
            const std::string tag = "qp" + std::to_string(qp);
            const fs::path bitstream = dir / (tag + ".bin");
            const fs::path out = dir / (tag + ".dec");
            JobOutput& job = jobs[i];
            const auto enc = run_command(
                "[M=" + scale.str() + " " + tag + "] encode",
                substitute_template(cfg.encoder_cmd, input.string(), bitstream.string(), qp,
                                    static_cast<int>(w), static_cast<int>(h)),
                dir / (tag + ".enc.stderr"));
            job.log.push_back(enc.log_line);
            if (enc.status != 0) {
              throw Error(ErrorCode::kEncoderFailure, enc.log_line);
            }
            if (!fs::exists(bitstream)) {
              throw Error(ErrorCode::kEncoderFailure, "no bitstream for " + tag);
            }
            const auto dec = run_command(
                "[M=" + scale.str() + " " + tag + "] decode",
                substitute_template(cfg.decoder_cmd, bitstream.string(), out.string(), qp,
                                    static_cast<int>(w), static_cast<int>(h)),
                dir / (tag + ".dec.stderr"));
            job.log.push_back(dec.log_line);
            if (dec.status != 0) throw Error(ErrorCode::kEncoderFailure, dec.log_line);
            job.encode = {qp, fs::file_size(bitstream), duration, out};
            decoded[i] = read_decoded(out, static_cast<int>(w), static_cast<int>(h));
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      };
      const int threads = std::min<int>(cfg.jobs, static_cast<int>(cfg.qps.size()));
      std::vector<std::thread> pool;
      for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
      worker();
      for (auto& t : pool) t.join();
      for (std::size_t i = 0; i < cfg.qps.size(); ++i) {
        for (const auto& line : jobs[i].log) {
          result.log.push_back(line);
          if (log) *log << line << '\n';
        }
      }
      for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
      }
    }

    std::optional<Quality> identity_quality;
    for (std::size_t i = 0; i < cfg.qps.size(); ++i) {
      Quality q;
      if (cfg.identity_encoder()) {
        if (!identity_quality) identity_quality = score(source, low.frames, cfg);
        q = *identity_quality;
      } else {
        q = score(source, decoded[i], cfg);
      }
      LadderPoint p{cfg.qps[i], jobs[i].encode.bitrate_kbps(), q.psnr, q.ssim, std::nullopt};
      p.vmaf = lookup_vmaf(vmaf, scale, p.qp);
      if (wants_vmaf && !p.vmaf) {
        throw Error(ErrorCode::kMetricFailure, "no vmaf score for M=" + scale.str() + " qp " +
                                                   std::to_string(p.qp));
      }
      result.points.push_back(p);
    }
    result.degenerate = is_degenerate(result.points);
    if (result.degenerate && log) {
      *log << "[M=" << scale.str() << "] degenerate curve: no rate-quality tradeoff\n";
    }
    results.push_back(std::move(result));
  }
  return results;
}

std::string curve_file_name(const RationalScale& scale) {
  return "curve_" + std::to_string(scale.num()) + "_" + std::to_string(scale.den()) + ".csv";
}

void save_ladder(const std::vector<LadderResult>& results, const fs::path& dir) {
  fs::create_directories(dir);
  for (const auto& r : results) save_curve_csv(r.points, dir / curve_file_name(r.scale));
}

std::string BdTable::text() const {
  std::vector<RationalScale> scales;
  std::vector<MetricTag> metrics;
  for (const auto& c : cells) {
    if (std::find(scales.begin(), scales.end(), c.scale) == scales.end()) scales.push_back(c.scale);
    if (std::find(metrics.begin(), metrics.end(), c.metric) == metrics.end()) metrics.push_back(c.metric);
  }
  std::ostringstream out;
  out << std::left << std::setw(8) << "M";
  for (MetricTag m : metrics) out << std::right << std::setw(12) << ("bd_" + std::string(to_string(m)));
  out << '\n';
  for (const auto& s : scales) {
    out << std::left << std::setw(8) << s.str();
    for (MetricTag m : metrics) {
      const auto it = std::find_if(cells.begin(), cells.end(), [&](const BdCell& c) {
        return c.scale == s && c.metric == m;
      });
      std::ostringstream cell;
      if (it != cells.end()) cell << std::fixed << std::setprecision(2) << it->bd_rate;
      out << std::right << std::setw(12) << (it != cells.end() ? cell.str() : "-");
    }
    out << '\n';
  }
  return out.str();
}

void BdTable::write_csv(std::ostream& out) const {
  out << "scale,metric,bd_rate_percent\n";
  for (const auto& c : cells) {
    out << c.scale.str() << ',' << to_string(c.metric) << ',' << std::setprecision(10)
        << c.bd_rate << '\n';
  }
}

BdTable report_bdrate(const std::vector<LadderResult>& baseline,
                      const std::vector<LadderResult>& test,
                      const std::vector<MetricTag>& metrics, BdFit fit) {
  if (baseline.size() != test.size()) {
    throw Error(ErrorCode::kCurveMismatch, "baseline and test cover different scales");
  }
  BdTable table;
  for (const auto& b : baseline) {
    const auto t = std::find_if(test.begin(), test.end(),
                                [&](const LadderResult& r) { return r.scale == b.scale; });
    if (t == test.end()) {
      throw Error(ErrorCode::kCurveMismatch, "no test curve for M=" + b.scale.str());
    }
    for (MetricTag m : metrics) {
      const auto has = [&](const LadderResult& r) {
        return m != MetricTag::kVmaf ||
               std::all_of(r.points.begin(), r.points.end(),
                           [](const LadderPoint& p) { return p.vmaf.has_value(); });
      };
      if (!has(b) || !has(*t)) {
        throw Error(ErrorCode::kCurveMismatch, std::string(to_string(m)) +
                                                   " missing for M=" + b.scale.str());
      }
      table.cells.push_back({b.scale, m,
                             bd_rate(curve_for_metric(b.points, m), curve_for_metric(t->points, m), fit)});
    }
  }
  return table;
}

std::string OrderReport::text() const {
  std::ostringstream out;
  out << "block order comparison at M=" << scale.str() << '\n';
  const bool with_bd = conv_resize.vs_lanczos && resize_conv.vs_lanczos;
  const bool with_quality = !with_bd && !conv_resize.ladder.empty() && !resize_conv.ladder.empty();
  out << std::left << std::setw(14) << "block" << std::right << std::setw(16) << "final_loss";
  if (with_bd) {
    for (const auto& c : conv_resize.vs_lanczos->cells) {
      out << std::setw(12) << ("bd_" + std::string(to_string(c.metric)));
    }
  } else if (with_quality) {
    out << std::setw(12) << "psnr" << std::setw(12) << "ssim";
  }
  out << '\n';
  for (const OrderArm* arm : {&conv_resize, &resize_conv}) {
    out << std::left << std::setw(14) << to_string(arm->block) << std::right << std::setw(16)
        << std::scientific << std::setprecision(6) << arm->final_loss << std::fixed;
    if (with_bd) {
      for (const auto& c : arm->vs_lanczos->cells) out << std::setw(12) << std::setprecision(2) << c.bd_rate;
    } else if (with_quality) {
      const auto& p = arm->ladder.front().points.front();
      out << std::setw(12) << std::setprecision(3) << p.psnr << std::setw(12)
          << std::setprecision(5) << p.ssim;
    }
    out << '\n';
  }
  out << "conv-resize final loss <= resize-conv final loss: " << (conv_resize_wins() ? "yes" : "no")
      << '\n';
  out << "expected: conv-resize ahead, since its first convolution sees the full-resolution input\n";
  return out.str();
}

namespace {

OrderArm evaluate_arm(std::span<const Tensor> dataset, const TrainConfig& cfg, Network& net,
                      const Y4mVideo* video, const LadderConfig* ladder,
                      const std::vector<LadderResult>* baseline) {
  OrderArm arm;
  arm.block = net.config().block;
  arm.final_loss = evaluate_loss(net, dataset, cfg);
  if (video && ladder) {
    LadderConfig lc = *ladder;
    lc.scales = {cfg.scale};
    if (!lc.identity_encoder()) lc.work_dir /= std::string(to_string(arm.block));
    std::shared_ptr<Network> view(&net, [](Network*) {});
    arm.ladder = run_ladder(*video, network_downsampler(view), lc);
    if (baseline && !arm.ladder.front().degenerate && !baseline->front().degenerate) {
      arm.vs_lanczos = report_bdrate(*baseline, arm.ladder, lc.metrics);
    }
  }
  return arm;
}

}  // namespace

OrderReport compare_trained(std::span<const Tensor> dataset, const TrainConfig& cfg,
                            Network& conv_resize, Network& resize_conv, const Y4mVideo* video,
                            const LadderConfig* ladder) {
  if (!(conv_resize.scale() == cfg.scale) || !(resize_conv.scale() == cfg.scale)) {
    throw Error(ErrorCode::kMismatchedConfigs, "networks and config disagree on the scale");
  }
  if (conv_resize.layers().size() != resize_conv.layers().size() ||
      conv_resize.config().channels != resize_conv.config().channels) {
    throw Error(ErrorCode::kMismatchedConfigs, "networks differ in depth or width");
  }
  std::optional<std::vector<LadderResult>> baseline;
  if (video && ladder) {
    LadderConfig lc = *ladder;
    lc.scales = {cfg.scale};
    if (!lc.identity_encoder()) lc.work_dir /= "lanczos";
    baseline = run_ladder(*video, lanczos_downsampler(), lc);
  }
  OrderReport report;
  report.scale = cfg.scale;
  const auto* base = baseline ? &*baseline : nullptr;
  report.conv_resize = evaluate_arm(dataset, cfg, conv_resize, video, ladder, base);
  report.resize_conv = evaluate_arm(dataset, cfg, resize_conv, video, ladder, base);
  return report;
}

OrderReport compare_order(std::span<const Tensor> dataset, const TrainConfig& conv_resize,
                          const TrainConfig& resize_conv, const Y4mVideo* video,
                          const LadderConfig* ladder) {
  TrainConfig aligned = resize_conv;
  aligned.block = conv_resize.block;
  if (conv_resize.block != BlockKind::kConvResize || resize_conv.block != BlockKind::kResizeConv ||
      !(aligned == conv_resize)) {
    throw Error(ErrorCode::kMismatchedConfigs,
                "configs must match except for block kind conv-resize vs resize-conv");
  }
  TrainResult a = train_loop(dataset, conv_resize);
  TrainResult b = train_loop(dataset, resize_conv);
  return compare_trained(dataset, conv_resize, a.net, b.net, video, ladder);
}

}  // namespace fracdown
