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

#include <cstring>

#include "fracdown/error.hpp"
#include "fracdown/rational.hpp"
#include "fracdown/tensor.hpp"
#include "test_util.hpp"

namespace fracdown {
namespace {

TEST(TensorCreate, FillsEveryElement) {
  const Tensor zeros = tensor_create({1, 2, 2, 1}, 0.0f);
  EXPECT_EQ(zeros.size(), 4u);
  for (float v : zeros.values()) EXPECT_EQ(v, 0.0f);

  const Tensor halves = tensor_create({1, 1, 1, 3}, 0.5f);
  EXPECT_EQ(halves.size(), 3u);
  for (float v : halves.values()) EXPECT_EQ(v, 0.5f);

  const Tensor ones = tensor_create({2, 3, 3, 1}, 1.0f);
  EXPECT_EQ(ones.size(), 18u);
  EXPECT_EQ(sum(ones), 18.0);
}

TEST(TensorCreate, ShapeRoundTrips) {
  const Shape s{3, 5, 7, 2};
  EXPECT_EQ(tensor_create(s, 1.0f).shape(), s);
}

TEST(TensorCreate, RejectsZeroComponent) {
  for (Shape s : {Shape{0, 1, 1, 1}, Shape{1, 0, 1, 1}, Shape{1, 1, 0, 1}, Shape{1, 1, 1, 0}}) {
    try {
      tensor_create(s, 0.0f);
      FAIL() << "expected invalid-shape";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kInvalidShape);
    }
  }
}

TEST(TensorCreate, RejectsNonFiniteFill) {
  EXPECT_THROW(tensor_create({1, 1, 1, 1}, std::nanf("")), Error);
}

TEST(TensorCreate, RejectsWrongDataLength) {
  EXPECT_THROW(Tensor({1, 2, 2, 1}, std::vector<float>{1, 2, 3}), Error);
}

TEST(MapBinary, Elementwise) {
  const Tensor a({1, 1, 2, 1}, std::vector<float>{1, 2});
  const Tensor b({1, 1, 2, 1}, std::vector<float>{3, 4});
  const Tensor sum_ab = map_binary(a, b, BinaryOp::kAdd);
  EXPECT_EQ(sum_ab[0], 4.0f);
  EXPECT_EQ(sum_ab[1], 6.0f);

  const Tensor c({1, 1, 2, 1}, std::vector<float>{2, 3});
  const Tensor d({1, 1, 2, 1}, std::vector<float>{0.5f, 2});
  const Tensor prod = map_binary(c, d, BinaryOp::kMul);
  EXPECT_EQ(prod[0], 1.0f);
  EXPECT_EQ(prod[1], 6.0f);

  const Tensor x = testing::random_tensor({2, 3, 4, 2}, 7);
  const Tensor diff = map_binary(x, x, BinaryOp::kSub);
  for (float v : diff.values()) EXPECT_EQ(v, 0.0f);
}

TEST(MapBinary, AddZerosIsBitwiseIdentity) {
  const Tensor x = testing::random_tensor({2, 5, 3, 3}, 11);
  const Tensor y = map_binary(x, Tensor(x.shape(), 0.0f), BinaryOp::kAdd);
  EXPECT_EQ(std::memcmp(x.data(), y.data(), x.size() * sizeof(float)), 0);
}

TEST(MapBinary, ShapeMismatch) {
  try {
    map_binary(Tensor({1, 2, 2, 1}, 0.0f), Tensor({1, 2, 1, 2}, 0.0f), BinaryOp::kAdd);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShapeMismatch);
  }
}

TEST(Dot, Examples) {
  const Tensor x = testing::random_tensor({1, 4, 4, 3}, 3);
  EXPECT_EQ(dot(x, Tensor(x.shape(), 0.0f)), 0.0);
  const Tensor a({1, 1, 3, 1}, std::vector<float>{1, 2, 3});
  EXPECT_EQ(dot(a, Tensor(a.shape(), 1.0f)), 6.0);
  EXPECT_THROW(dot(a, Tensor({1, 3, 1, 1}, 1.0f)), Error);
}

TEST(Dot, SymmetricAndPositiveSemidefinite) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Shape s{1 + static_cast<int>(seed % 3), 3, 5, 2};
    const Tensor a = testing::random_tensor(s, seed);
    const Tensor b = testing::random_tensor(s, seed + 1000);
    EXPECT_EQ(dot(a, b), dot(b, a));
    EXPECT_GE(dot(a, a), 0.0);
  }
}

TEST(ConcatBatch, StacksImages) {
  const Tensor a = testing::random_tensor({1, 2, 2, 3}, 1);
  const Tensor b = testing::random_tensor({2, 2, 2, 3}, 2);
  const std::vector<Tensor> parts{a, b};
  const Tensor c = concat_batch(parts);
  EXPECT_EQ(c.batch(), 3);
  EXPECT_EQ(c.slice(0)[5], a[5]);
  EXPECT_EQ(c.slice(2)[7], b.slice(1)[7]);
}

TEST(RationalScale, LowestTermsAndParsing) {
  const RationalScale m(6, 4);
  EXPECT_EQ(m.num(), 3);
  EXPECT_EQ(m.den(), 2);
  EXPECT_EQ(RationalScale::parse("3/2"), m);
  EXPECT_EQ(RationalScale::parse("1.5"), m);
  EXPECT_EQ(RationalScale::parse("2.5"), RationalScale(5, 2));
  EXPECT_EQ(RationalScale::parse("4"), RationalScale(4, 1));
  EXPECT_THROW(RationalScale::parse("x/2"), Error);
  EXPECT_THROW(RationalScale(0, 1), Error);
  EXPECT_EQ(m.down_length(255), 170);
  EXPECT_EQ(m.down_length(256), -1);
  EXPECT_EQ(m.up_length(170), 255);
}

}  // namespace
}  // namespace fracdown
