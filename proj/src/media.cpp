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

#include "fracdown/media.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fracdown/error.hpp"
#include "fracdown/resample.hpp"

namespace fracdown {

Tensor load_image_rgb(const std::filesystem::path& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  probe.close();

  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw Error(ErrorCode::kDecodeError, path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    throw Error(ErrorCode::kDecodeError, path.string() + ": " + image.message);
  }
  const int w = static_cast<int>(image.width);
  const int h = static_cast<int>(image.height);
  std::vector<float> data(pixels.size());
  std::transform(pixels.begin(), pixels.end(), data.begin(),
                 [](std::uint8_t v) { return static_cast<float>(v) / 255.0f; });
  return Tensor({1, h, w, 3}, std::move(data));
}

namespace {

std::uint8_t to_code(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace

void save_image_rgb(const Tensor& x, const std::filesystem::path& path) {
  if (x.channels() != 3) throw Error(ErrorCode::kChannelMismatch, "PNG writer needs RGB");
  const std::size_t count = static_cast<std::size_t>(x.height()) * x.width() * 3;
  std::vector<std::uint8_t> pixels(count);
  for (std::size_t i = 0; i < count; ++i) pixels[i] = to_code(x[i] * 255.0);
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(x.width());
  image.height = static_cast<png_uint_32>(x.height());
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, pixels.data(), 0, nullptr)) {
    throw Error(ErrorCode::kIoError, path.string() + ": " + image.message);
  }
}

FramePlanar420::FramePlanar420(int w, int h) : width(w), height(h) {
  validate();
  y.assign(static_cast<std::size_t>(w) * h, 16);
  u.assign(static_cast<std::size_t>(w / 2) * (h / 2), 128);
  v.assign(u.size(), 128);
}

void FramePlanar420::validate() const {
  if (width < 2 || height < 2 || width % 2 != 0 || height % 2 != 0) {
    throw Error(ErrorCode::kInvalidDims,
                std::to_string(width) + "x" + std::to_string(height) + " is not even");
  }
  const std::size_t luma = static_cast<std::size_t>(width) * height;
  if ((!y.empty() || !u.empty() || !v.empty()) &&
      (y.size() != luma || u.size() != luma / 4 || v.size() != luma / 4)) {
    throw Error(ErrorCode::kInvalidDims, "plane sizes do not match frame dims");
  }
}

namespace {

constexpr double kKr = 0.2126;
constexpr double kKb = 0.0722;
constexpr double kKg = 1.0 - kKr - kKb;

struct RangeScale {
  double y_offset, y_scale, c_scale;
};

RangeScale range_scale(ColorRange range) {
  if (range == ColorRange::kLimited) return {16.0, 219.0, 224.0};
  return {0.0, 255.0, 255.0};
}

}  // namespace

Tensor yuv420_to_rgb(const FramePlanar420& frame, const ColorOptions& options) {
  frame.validate();
  const int w = frame.width;
  const int h = frame.height;
  const RangeScale rs = range_scale(options.range);

  Tensor chroma({1, h / 2, w / 2, 2}, 0.0f);
  for (std::size_t i = 0; i < frame.u.size(); ++i) {
    chroma[2 * i] = static_cast<float>((frame.u[i] - 128.0) / rs.c_scale);
    chroma[2 * i + 1] = static_cast<float>((frame.v[i] - 128.0) / rs.c_scale);
  }
  // Bilinear 2x up with half-pixel centres lands on the centre-sited grid.
  const Tensor full = resize_forward(chroma, {FilterTag::kBilinear, false}, h, w);

  Tensor rgb({1, h, w, 3}, 0.0f);
  for (std::size_t i = 0; i < frame.y.size(); ++i) {
    const double luma = (frame.y[i] - rs.y_offset) / rs.y_scale;
    const double cb = full[2 * i];
    const double cr = full[2 * i + 1];
    const double r = luma + 2.0 * (1.0 - kKr) * cr;
    const double b = luma + 2.0 * (1.0 - kKb) * cb;
    const double g = (luma - kKr * r - kKb * b) / kKg;
    rgb[3 * i] = static_cast<float>(std::clamp(r, 0.0, 1.0));
    rgb[3 * i + 1] = static_cast<float>(std::clamp(g, 0.0, 1.0));
    rgb[3 * i + 2] = static_cast<float>(std::clamp(b, 0.0, 1.0));
  }
  return rgb;
}

FramePlanar420 rgb_to_yuv420(const Tensor& x, const ColorOptions& options) {
  if (x.batch() != 1) throw Error(ErrorCode::kInvalidShape, "rgb_to_yuv420 takes one image");
  if (x.channels() != 3) {
    throw Error(ErrorCode::kChannelMismatch, "rgb_to_yuv420 needs a (1, H, W, 3) tensor");
  }
  if (x.height() % 2 != 0 || x.width() % 2 != 0) {
    throw Error(ErrorCode::kOddDims,
                std::to_string(x.width()) + "x" + std::to_string(x.height()));
  }
  const int w = x.width();
  const int h = x.height();
  const RangeScale rs = range_scale(options.range);
  FramePlanar420 frame(w, h);
  std::vector<double> cb(static_cast<std::size_t>(w) * h), cr(cb.size());
  for (std::size_t i = 0; i < cb.size(); ++i) {
    const double r = x[3 * i];
    const double g = x[3 * i + 1];
    const double b = x[3 * i + 2];
    const double luma = kKr * r + kKg * g + kKb * b;
    cb[i] = (b - luma) / (2.0 * (1.0 - kKb));
    cr[i] = (r - luma) / (2.0 * (1.0 - kKr));
    frame.y[i] = to_code(rs.y_offset + rs.y_scale * luma);
  }
  for (int cy = 0; cy < h / 2; ++cy) {
    for (int cx = 0; cx < w / 2; ++cx) {
      double su = 0.0, sv = 0.0;
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          const std::size_t i = static_cast<std::size_t>(2 * cy + dy) * w + 2 * cx + dx;
          su += cb[i];
          sv += cr[i];
        }
      }
      const std::size_t ci = static_cast<std::size_t>(cy) * (w / 2) + cx;
      frame.u[ci] = to_code(128.0 + rs.c_scale * su / 4.0);
      frame.v[ci] = to_code(128.0 + rs.c_scale * sv / 4.0);
    }
  }
  return frame;
}

namespace {

bool parse_ratio(const std::string& s, int& num, int& den) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) return false;
  try {
    num = std::stoi(s.substr(0, colon));
    den = std::stoi(s.substr(colon + 1));
  } catch (const std::exception&) {
    return false;
  }
  return true;
}

bool is_420(const std::string& cs) {
  return cs == "420" || cs == "420jpeg" || cs == "420paldv" || cs == "420mpeg2";
}

std::string read_line(std::istream& in, std::size_t limit) {
  std::string line;
  char ch = 0;
  while (in.get(ch)) {
    if (ch == '\n') return line;
    line.push_back(ch);
    if (line.size() > limit) throw Error(ErrorCode::kDecodeError, "header line too long");
  }
  throw Error(ErrorCode::kTruncatedFile, "missing newline after Y4M header");
}

}  // namespace

Y4mVideo read_y4m(std::istream& in) {
  const std::string header = read_line(in, 4096);
  std::istringstream tokens(header);
  std::string tok;
  tokens >> tok;
  if (tok != "YUV4MPEG2") throw Error(ErrorCode::kDecodeError, "not a YUV4MPEG2 stream");
  Y4mVideo video;
  Y4mHeader& hd = video.header;
  hd.colorspace.clear();
  bool seen_c = false;
  while (tokens >> tok) {
    const char key = tok[0];
    const std::string val = tok.substr(1);
    try {
      switch (key) {
        case 'W': hd.width = std::stoi(val); break;
        case 'H': hd.height = std::stoi(val); break;
        case 'F':
          if (!parse_ratio(val, hd.fps_num, hd.fps_den)) throw Error(ErrorCode::kDecodeError, tok);
          break;
        case 'I': hd.interlace = val.empty() ? 'p' : val[0]; break;
        case 'A':
          if (!parse_ratio(val, hd.aspect_num, hd.aspect_den)) throw Error(ErrorCode::kDecodeError, tok);
          break;
        case 'C': hd.colorspace = val; seen_c = true; break;
        case 'X': hd.extra.push_back(tok); break;
        default: throw Error(ErrorCode::kDecodeError, "unknown Y4M token " + tok);
      }
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::kDecodeError, "bad Y4M token " + tok);
    }
  }
  if (seen_c && !is_420(hd.colorspace)) {
    throw Error(ErrorCode::kUnsupportedColorspace, "C" + hd.colorspace);
  }
  if (hd.fps_num <= 0 || hd.fps_den <= 0) throw Error(ErrorCode::kDecodeError, "bad frame rate");
  FramePlanar420 probe_dims;
  probe_dims.width = hd.width;
  probe_dims.height = hd.height;
  probe_dims.validate();

  const std::size_t luma = static_cast<std::size_t>(hd.width) * hd.height;
  while (in.peek() != std::char_traits<char>::eof()) {
    const std::string frame_line = read_line(in, 1024);
    if (frame_line.rfind("FRAME", 0) != 0) {
      throw Error(ErrorCode::kDecodeError, "expected FRAME marker");
    }
    FramePlanar420 f(hd.width, hd.height);
    in.read(reinterpret_cast<char*>(f.y.data()), static_cast<std::streamsize>(luma));
    in.read(reinterpret_cast<char*>(f.u.data()), static_cast<std::streamsize>(luma / 4));
    in.read(reinterpret_cast<char*>(f.v.data()), static_cast<std::streamsize>(luma / 4));
    if (!in) {
      throw Error(ErrorCode::kTruncatedFile,
                  "frame " + std::to_string(video.frames.size()) + " is incomplete");
    }
    video.frames.push_back(std::move(f));
  }
  return video;
}

Y4mVideo read_y4m(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  return read_y4m(in);
}

void write_y4m(const Y4mVideo& video, std::ostream& out) {
  const Y4mHeader& hd = video.header;
  out << "YUV4MPEG2 W" << hd.width << " H" << hd.height << " F" << hd.fps_num << ':'
      << hd.fps_den << " I" << hd.interlace << " A" << hd.aspect_num << ':' << hd.aspect_den;
  if (!hd.colorspace.empty()) out << " C" << hd.colorspace;
  for (const auto& x : hd.extra) out << ' ' << x;
  out << '\n';
  for (const auto& f : video.frames) {
    if (f.width != hd.width || f.height != hd.height) {
      throw Error(ErrorCode::kInvalidDims, "frame dims differ from header");
    }
    out << "FRAME\n";
    out.write(reinterpret_cast<const char*>(f.y.data()), static_cast<std::streamsize>(f.y.size()));
    out.write(reinterpret_cast<const char*>(f.u.data()), static_cast<std::streamsize>(f.u.size()));
    out.write(reinterpret_cast<const char*>(f.v.data()), static_cast<std::streamsize>(f.v.size()));
  }
  if (!out) throw Error(ErrorCode::kIoError, "failed writing Y4M");
}

void write_y4m(const Y4mVideo& video, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  write_y4m(video, out);
}

void write_yuv420_raw(const std::vector<FramePlanar420>& frames,
                      const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  for (const auto& f : frames) {
    out.write(reinterpret_cast<const char*>(f.y.data()), static_cast<std::streamsize>(f.y.size()));
    out.write(reinterpret_cast<const char*>(f.u.data()), static_cast<std::streamsize>(f.u.size()));
    out.write(reinterpret_cast<const char*>(f.v.data()), static_cast<std::streamsize>(f.v.size()));
  }
  if (!out) throw Error(ErrorCode::kIoError, "failed writing " + path.string());
}

std::vector<FramePlanar420> read_yuv420_raw(const std::filesystem::path& path, int width,
                                            int height) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::vector<FramePlanar420> frames;
  const std::size_t luma = static_cast<std::size_t>(width) * height;
  while (in.peek() != std::char_traits<char>::eof()) {
    FramePlanar420 f(width, height);
    in.read(reinterpret_cast<char*>(f.y.data()), static_cast<std::streamsize>(luma));
    in.read(reinterpret_cast<char*>(f.u.data()), static_cast<std::streamsize>(luma / 4));
    in.read(reinterpret_cast<char*>(f.v.data()), static_cast<std::streamsize>(luma / 4));
    if (!in) throw Error(ErrorCode::kTruncatedFile, path.string());
    frames.push_back(std::move(f));
  }
  return frames;
}

}  // namespace fracdown
