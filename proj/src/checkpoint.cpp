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

#include "fracdown/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <string>

#include "fracdown/error.hpp"

namespace fracdown {

namespace {

constexpr std::array<char, 8> kMagic = {'F', 'R', 'A', 'C', 'D', 'O', 'W', 'N'};
constexpr std::uint32_t kVersion = 1;
constexpr std::string_view kArchTag = "cnn-cr";

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void bytes(std::string_view s) { out_.write(s.data(), static_cast<std::streamsize>(s.size())); }

 private:
  void le(std::uint64_t v, int n) {
    char buf[8];
    for (int i = 0; i < n; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out_.write(buf, n);
  }
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string bytes(std::size_t n) {
    std::string s(n, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(n));
    check();
    return s;
  }

 private:
  std::uint64_t le(int n) {
    unsigned char buf[8];
    in_.read(reinterpret_cast<char*>(buf), n);
    check();
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
  }
  void check() {
    if (!in_) throw Error(ErrorCode::kBadCheckpoint, "unexpected end of checkpoint");
  }
  std::istream& in_;
};

std::uint32_t encode_block(BlockKind kind) { return static_cast<std::uint32_t>(kind); }

}  // namespace

void write_checkpoint(const Network& net, std::ostream& out) {
  const NetworkConfig& cfg = net.config();
  Writer w(out);
  w.bytes(std::string_view(kMagic.data(), kMagic.size()));
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(kArchTag.size()));
  w.bytes(kArchTag);
  w.u32(static_cast<std::uint32_t>(cfg.scale.num()));
  w.u32(static_cast<std::uint32_t>(cfg.scale.den()));
  w.u32(encode_block(cfg.block));
  w.u32(static_cast<std::uint32_t>(cfg.pool));
  w.u32(static_cast<std::uint32_t>(cfg.resizer.tag));
  w.u32(cfg.resizer.antialias ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(cfg.skip.tag));
  w.u32(cfg.skip.antialias ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(net.layers().size()));
  w.u32(static_cast<std::uint32_t>(cfg.channels));
  w.u64(cfg.seed);
  w.u64(static_cast<std::uint64_t>(net.iteration()));
  for (const ConvLayer& layer : net.layers()) {
    w.u32(static_cast<std::uint32_t>(layer.in_ch));
    w.u32(static_cast<std::uint32_t>(layer.out_ch));
    w.u32(static_cast<std::uint32_t>(layer.stride));
    for (float v : layer.weights) w.f32(v);
    for (float v : layer.bias) w.f32(v);
  }
  if (!out) throw Error(ErrorCode::kIoError, "failed writing checkpoint");
}

void save_checkpoint(const Network& net, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  write_checkpoint(net, out);
}

Network read_checkpoint(std::istream& in) {
  Reader r(in);
  if (r.bytes(kMagic.size()) != std::string_view(kMagic.data(), kMagic.size())) {
    throw Error(ErrorCode::kBadCheckpoint, "bad magic");
  }
  if (const auto v = r.u32(); v != kVersion) {
    throw Error(ErrorCode::kBadCheckpoint, "unsupported version " + std::to_string(v));
  }
  const std::uint32_t tag_len = r.u32();
  if (tag_len > 64 || r.bytes(tag_len) != kArchTag) {
    throw Error(ErrorCode::kBadCheckpoint, "unknown architecture tag");
  }
  NetworkConfig cfg;
  const std::uint32_t num = r.u32();
  const std::uint32_t den = r.u32();
  if (num == 0 || den == 0 || num > 1u << 20 || den > 1u << 20) {
    throw Error(ErrorCode::kBadCheckpoint, "bad scale");
  }
  cfg.scale = RationalScale(static_cast<std::int64_t>(num), static_cast<std::int64_t>(den));
  const std::uint32_t block = r.u32();
  const std::uint32_t pool = r.u32();
  const std::uint32_t resizer = r.u32();
  cfg.resizer.antialias = r.u32() != 0;
  const std::uint32_t skip = r.u32();
  cfg.skip.antialias = r.u32() != 0;
  if (block > 3 || pool > 1 || resizer > 2 || skip > 2) {
    throw Error(ErrorCode::kBadCheckpoint, "enum field out of range");
  }
  cfg.block = static_cast<BlockKind>(block);
  cfg.pool = static_cast<PoolKind>(pool);
  cfg.resizer.tag = static_cast<FilterTag>(resizer);
  cfg.skip.tag = static_cast<FilterTag>(skip);
  const std::uint32_t stages = r.u32();
  cfg.channels = static_cast<int>(r.u32());
  cfg.seed = r.u64();
  const auto iteration = static_cast<std::int64_t>(r.u64());
  if (stages < 2 || stages > 1024 || cfg.channels < 1 || cfg.channels > 4096) {
    throw Error(ErrorCode::kBadCheckpoint, "implausible architecture");
  }
  cfg.stages = static_cast<int>(stages);

  std::vector<ConvLayer> layers;
  for (std::uint32_t i = 0; i < stages; ++i) {
    const auto in_ch = static_cast<int>(r.u32());
    const auto out_ch = static_cast<int>(r.u32());
    const auto stride = static_cast<int>(r.u32());
    if (in_ch < 1 || out_ch < 1 || stride < 1 || in_ch > 4096 || out_ch > 4096) {
      throw Error(ErrorCode::kBadCheckpoint, "bad layer header");
    }
    ConvLayer layer(in_ch, out_ch, stride);
    for (float& v : layer.weights) v = r.f32();
    for (float& v : layer.bias) v = r.f32();
    layers.push_back(std::move(layer));
  }
  try {
    Network net(cfg, std::move(layers));
    net.set_iteration(iteration);
    return net;
  } catch (const Error& e) {
    throw Error(ErrorCode::kBadCheckpoint, e.what());
  }
}

Network load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace fracdown
