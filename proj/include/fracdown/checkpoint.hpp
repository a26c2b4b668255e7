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
#include <iosfwd>

#include "fracdown/nn.hpp"

namespace fracdown {

// Binary little-endian checkpoint; layout is described in docs/checkpoint.md.
void save_checkpoint(const Network& net, const std::filesystem::path& path);
void write_checkpoint(const Network& net, std::ostream& out);

Network load_checkpoint(const std::filesystem::path& path);
Network read_checkpoint(std::istream& in);

}  // namespace fracdown
