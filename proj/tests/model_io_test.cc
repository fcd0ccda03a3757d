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

#include "damper/model_io.h"

#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>
#include "damper/rng.h"
#include "damper/text.h"

namespace damper {
namespace {

EncoderParams RandomEncoder(std::uint64_t seed) {
  EncoderConfig c;
  c.embed_dim = 8;
  c.feature_dim = 64;
  c.tau = 0.07;
  c.seed = seed;
  EncoderParams p = EncoderParams::Init(c);
  Rng rng(seed);
  for (auto& w : p.weights) w = rng.Normal() * 1e-3 + 1e-300 * rng.Uniform();
  return p;
}

PolicyParams RandomPolicy(std::uint64_t seed) {
  PolicyConfig c;
  c.feature_dim = 32;
  c.max_len = 5;
  c.seed = seed;
  PolicyParams p({std::string(kEndToken), "ünïcode", "b", "c d"}, c);
  Rng rng(seed);
  for (auto& w : p.weights()) w = rng.Normal();
  return p;
}

TEST(ModelIoTest, EncoderRoundTripIsExact) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const EncoderParams p = RandomEncoder(seed);
    std::stringstream buf;
    WriteEncoder(p, buf);
    const EncoderParams q = ReadEncoder(buf);
    EXPECT_EQ(q.weights, p.weights);
    EXPECT_EQ(q.config.embed_dim, 8);
    EXPECT_EQ(q.config.feature_dim, 64);
    EXPECT_EQ(q.config.tau, 0.07);
    EXPECT_EQ(Encode(q, "chest pain"), Encode(p, "chest pain"));
  }
}

TEST(ModelIoTest, PolicyRoundTripIsExact) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const PolicyParams p = RandomPolicy(seed);
    std::stringstream buf;
    WritePolicy(p, buf);
    EXPECT_EQ(ReadPolicy(buf), p);
  }
}

TEST(ModelIoTest, FilesRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "damper_model_io_test";
  std::filesystem::create_directories(dir);
  const EncoderParams e = RandomEncoder(3);
  const PolicyParams p = RandomPolicy(3);
  SaveEncoder(e, dir / "enc.bin");
  SavePolicy(p, dir / "pol.bin");
  EXPECT_EQ(LoadEncoder(dir / "enc.bin").weights, e.weights);
  EXPECT_EQ(LoadPolicy(dir / "pol.bin"), p);
  EXPECT_THROW(LoadEncoder(dir / "missing.bin"), ValidationError);
  std::filesystem::remove_all(dir);
}

TEST(ModelIoTest, RejectsCorruptInput) {
  std::stringstream enc;
  WriteEncoder(RandomEncoder(1), enc);
  const std::string bytes = enc.str();
  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(ReadEncoder(truncated), ValidationError);
  std::stringstream trailing(bytes + "x");
  EXPECT_THROW(ReadEncoder(trailing), ValidationError);
  std::stringstream policy;
  WritePolicy(RandomPolicy(1), policy);
  std::stringstream wrong_kind(policy.str());
  EXPECT_THROW(ReadEncoder(wrong_kind), ValidationError);
  std::stringstream garbage("not json\n");
  EXPECT_THROW(ReadPolicy(garbage), ValidationError);
}

}  // namespace
}  // namespace damper
