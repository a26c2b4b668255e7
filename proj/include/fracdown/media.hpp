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
#include <iosfwd>
#include <string>
#include <vector>

#include "fracdown/tensor.hpp"

namespace fracdown {

// 8-bit RGB PNG -> (1, H, W, 3) in [0, 1]. Grey, palette, alpha and 16-bit
// inputs are converted by libpng.
Tensor load_image_rgb(const std::filesystem::path& path);
// Writes image 0 of |x| as 8-bit RGB, rounding and clamping to [0, 255].
void save_image_rgb(const Tensor& x, const std::filesystem::path& path);

// 8-bit planar 4:2:0 frame; chroma planes are (width/2) x (height/2) and
// centre-sited between each 2x2 luma block.
struct FramePlanar420 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> y;
  std::vector<std::uint8_t> u;
  std::vector<std::uint8_t> v;

  FramePlanar420() = default;
  FramePlanar420(int w, int h);
  void validate() const;
  bool operator==(const FramePlanar420&) const = default;
};

enum class ColorRange { kLimited, kFull };

// BT.709 matrix. Limited range maps luma to 16-235 and chroma to 16-240.
struct ColorOptions {
  ColorRange range = ColorRange::kLimited;
};

Tensor yuv420_to_rgb(const FramePlanar420& frame, const ColorOptions& options = {});
// |x| is (1, H, W, 3) with even H and W; chroma is the 2x2 box mean.
FramePlanar420 rgb_to_yuv420(const Tensor& x, const ColorOptions& options = {});

struct Y4mHeader {
  int width = 0;
  int height = 0;
  int fps_num = 25;
  int fps_den = 1;
  char interlace = 'p';
  int aspect_num = 0;  // 0:0 means unknown
  int aspect_den = 0;
  std::string colorspace = "420jpeg";  // empty: no C token written
  std::vector<std::string> extra;      // X tokens, verbatim

  double fps() const { return static_cast<double>(fps_num) / fps_den; }
};

struct Y4mVideo {
  Y4mHeader header;
  std::vector<FramePlanar420> frames;
};

Y4mVideo read_y4m(std::istream& in);
Y4mVideo read_y4m(const std::filesystem::path& path);
void write_y4m(const Y4mVideo& video, std::ostream& out);
void write_y4m(const Y4mVideo& video, const std::filesystem::path& path);

// Headerless I420: Y, then U, then V, frame after frame.
void write_yuv420_raw(const std::vector<FramePlanar420>& frames,
                      const std::filesystem::path& path);
std::vector<FramePlanar420> read_yuv420_raw(const std::filesystem::path& path, int width,
                                            int height);

}  // namespace fracdown
