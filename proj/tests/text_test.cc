// Copyright 2026 The Damper Authors
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

#include "damper/text.h"

#include <string>

#include <gtest/gtest.h>
#include "damper/rng.h"

namespace damper {
namespace {

TEST(Utf8Test, CountsCodePointsNotBytes) {
  const std::string s = "caf\xC3\xA9 \xE2\x82\xAC";  // "café €"
  EXPECT_EQ(CodepointCount(s), 6u);
  const Utf8Index index(s);
  EXPECT_EQ(index.Slice(0, 4), "caf\xC3\xA9");
  EXPECT_EQ(index.Slice(5, 6), "\xE2\x82\xAC");
  EXPECT_EQ(index.ByteOffset(6), s.size());
}

TEST(Utf8Test, DecodeEncodeRoundTrip) {
  const std::string s = "a\xC3\xA9\xE2\x82\xAC\xF0\x9F\x98\x80z";
  EXPECT_EQ(EncodeUtf8(DecodeUtf8(s)), s);
  EXPECT_EQ(DecodeUtf8(s).size(), 5u);
}

TEST(Utf8Test, RejectsMalformedInput) {
  EXPECT_THROW(DecodeUtf8("\xC3"), ValidationError);
  EXPECT_THROW(DecodeUtf8("\xFF"), ValidationError);
}

TEST(Utf8Test, CodepointAtRejectsInteriorBytes) {
  const Utf8Index index("\xC3\xA9x");
  EXPECT_EQ(index.CodepointAt(2), 1u);
  EXPECT_THROW(index.CodepointAt(1), ValidationError);
}

TEST(WhitespaceTest, NormalizeAndSplit) {
  EXPECT_EQ(NormalizeWhitespace("  a \t b\n c  "), "a b c");
  const auto tokens = SplitWhitespace(" x  y ");
  ASSERT_EQ(tokens.size(), 2u);
  EXPECT_EQ(tokens[0], "x");
  EXPECT_EQ(JoinTokens(tokens), "x y");
  EXPECT_TRUE(SplitWhitespace("   ").empty());
}

TEST(HashTest, KnownFnvVectors) {
  // Published FNV-1a 64-bit test vectors.
  EXPECT_EQ(Fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(Fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(Fnv1a64("foobar"), 0x85944171f73967e8ULL);
  EXPECT_EQ(HexDigest(0xabcULL), "0000000000000abc");
}

TEST(RngTest, DeterministicAndInRange) {
  Rng a(42);
  Rng b(42);
  for (int i = 0; i < 1000; ++i) {
    const double u = a.Uniform();
    EXPECT_EQ(u, b.Uniform());
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_LT(a.UniformInt(7), 7u);
    b.UniformInt(7);
  }
  EXPECT_NE(DeriveSeed(1, "x"), DeriveSeed(1, "y"));
  EXPECT_NE(DeriveSeed(1, "x"), DeriveSeed(2, "x"));
}

TEST(RngTest, UniformIntIsRoughlyUniform) {
  Rng rng(3);
  std::vector<int> counts(5, 0);
  const int n = 50000;
  for (int i = 0; i < n; ++i) ++counts[rng.UniformInt(5)];
  // 4 sigma for a binomial with p = 0.2.
  const double sigma = std::sqrt(n * 0.2 * 0.8);
  for (int c : counts) EXPECT_NEAR(c, n * 0.2, 4 * sigma);
}

}  // namespace
}  // namespace damper
