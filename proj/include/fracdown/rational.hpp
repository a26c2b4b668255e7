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

#include <string>
#include <string_view>

namespace fracdown {

// Exact scaling factor M = p/q kept in lowest terms. M >= 1 means the
// output is smaller than the input by that ratio.
class RationalScale {
 public:
  RationalScale() = default;
  RationalScale(long long num, long long den);

  // Accepts "3/2", "2", or a terminating decimal such as "2.5".
  static RationalScale parse(std::string_view text);

  long long num() const noexcept { return num_; }
  long long den() const noexcept { return den_; }
  double value() const noexcept { return static_cast<double>(num_) / den_; }
  bool is_integer() const noexcept { return den_ == 1; }

  // Length after downscaling by M; -1 when len * q / p is not an integer.
  long long down_length(long long len) const;
  long long up_length(long long len) const;

  std::string str() const;
  bool operator==(const RationalScale&) const = default;

 private:
  long long num_ = 1;
  long long den_ = 1;
};

}  // namespace fracdown
