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

#include "fracdown/rational.hpp"

#include <charconv>
#include <numeric>

#include "fracdown/error.hpp"

namespace fracdown {

namespace {

long long parse_int(std::string_view text, std::string_view whole) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw Error(ErrorCode::kInvalidScale, "cannot parse '" + std::string(whole) + "'");
  }
  return v;
}

}  // namespace

RationalScale::RationalScale(long long num, long long den) {
  if (num <= 0 || den <= 0) {
    throw Error(ErrorCode::kInvalidScale,
                std::to_string(num) + "/" + std::to_string(den));
  }
  const long long g = std::gcd(num, den);
  num_ = num / g;
  den_ = den / g;
}

RationalScale RationalScale::parse(std::string_view text) {
  if (auto slash = text.find('/'); slash != std::string_view::npos) {
    return RationalScale(parse_int(text.substr(0, slash), text),
                         parse_int(text.substr(slash + 1), text));
  }
  if (auto dot = text.find('.'); dot != std::string_view::npos) {
    std::string_view frac = text.substr(dot + 1);
    if (frac.size() > 9) throw Error(ErrorCode::kInvalidScale, std::string(text));
    long long den = 1;
    for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
    const long long whole = dot == 0 ? 0 : parse_int(text.substr(0, dot), text);
    const long long part = frac.empty() ? 0 : parse_int(frac, text);
    return RationalScale(whole * den + part, den);
  }
  return RationalScale(parse_int(text, text), 1);
}

long long RationalScale::down_length(long long len) const {
  if ((len * den_) % num_ != 0) return -1;
  return len * den_ / num_;
}

long long RationalScale::up_length(long long len) const {
  // Round half up when len * p / q is fractional.
  return (2 * len * num_ + den_) / (2 * den_);
}

std::string RationalScale::str() const {
  if (den_ == 1) return std::to_string(num_);
  return std::to_string(num_) + "/" + std::to_string(den_);
}

}  // namespace fracdown
