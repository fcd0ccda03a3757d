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

#include "damper/config.h"

#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>
#include "damper/text.h"

namespace damper {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

TEST(ConfigTest, Defaults) {
  const PipelineConfig c = PipelineConfig::Default();
  EXPECT_EQ(c.budget.eps_text, 150.0);
  EXPECT_EQ(c.budget.r1, 5.0);
  EXPECT_EQ(c.budget.r2, 20.0);
  EXPECT_EQ(c.beta, 0.1);
  EXPECT_EQ(c.preference.alpha, 0.3);
  EXPECT_EQ(c.preference.num_candidates, 10);
  EXPECT_FALSE(c.n_sp_max.has_value());
  EXPECT_EQ(c.eval.alpha_sweep.size(), 11u);
}

TEST(ConfigTest, ShippedDefaultMatchesBuiltIn) {
  const PipelineConfig c =
      LoadConfig(fs::path(DAMPER_SOURCE_DIR) / "configs" / "default.json");
  EXPECT_EQ(ConfigToJson(c), ConfigToJson(PipelineConfig::Default()));
}

TEST(ConfigTest, JsonRoundTrip) {
  PipelineConfig c = PipelineConfig::Default();
  c.encoder.epochs = 3;
  c.prototypes.method = PrototypeMethod::kKMeans;
  c.prototypes.kmeans_k = 6;
  c.preference.alpha = 0.6;
  c.n_sp_max = 40;
  c.budget.n_sp_max = 40;
  c.eval.alpha_sweep = {0.0, 0.5};
  ApplySeed(c, 99);
  const json j = ConfigToJson(c);
  const PipelineConfig back = ConfigFromJson(j);
  EXPECT_EQ(ConfigToJson(back), j);
  EXPECT_EQ(back.encoder.seed, c.encoder.seed);
  EXPECT_EQ(back.dpo_train.seed, c.dpo_train.seed);
  EXPECT_EQ(back.corpus.seed, c.corpus.seed);
  EXPECT_EQ(back.budget.n_sp_max, 40);
}

TEST(ConfigTest, SeedDerivesComponentSeeds) {
  PipelineConfig a = PipelineConfig::Default();
  PipelineConfig b = PipelineConfig::Default();
  ApplySeed(a, 1);
  ApplySeed(b, 2);
  EXPECT_NE(a.encoder.seed, b.encoder.seed);
  EXPECT_NE(a.encoder.seed, a.policy.seed);
  EXPECT_NE(a.reference_train.seed, a.dpo_train.seed);
  EXPECT_EQ(ConfigFromJson(json{{"seed", 2}}).encoder.seed, b.encoder.seed);
}

TEST(ConfigTest, HyperEpsilonDoubles) {
  const PipelineConfig c = ConfigFromJson(json::parse(R"({"budget": {"eps": 75}})"));
  EXPECT_EQ(c.budget.eps_text, 150.0);
  EXPECT_THROW(ConfigFromJson(json::parse(R"({"budget": {"eps": 75, "eps_text": 150}})")),
               ValidationError);
}

TEST(ConfigTest, RejectsInvalid) {
  for (const char* text : {
           R"({"bogus": 1})",
           R"({"encoder": {"dim": 3}})",
           R"({"preference": {"alpha": 1.5}})",
           R"({"preference": {"n": 1}})",
           R"({"policy": {"beta": 0}})",
           R"({"budget": {"r1": 20, "r2": 5}})",
           R"({"budget": {"eps_text": -1}})",
           R"({"eval": {"test_fraction": 1.0}})",
           R"({"eval": {"alpha_sweep": [0.2, 2]}})",
           R"({"prototypes": {"method": "dbscan"}})",
           R"({"seed": "one"})",
           R"({"policy": {"dpo": {"epochs": -1}}})"}) {
    EXPECT_THROW(ConfigFromJson(json::parse(text)), ValidationError) << text;
  }
}

TEST(ConfigTest, LoadResolvesRelativeTables) {
  const auto dir = std::filesystem::temp_directory_path() / "damper_config_test";
  std::filesystem::create_directories(dir / "tables");
  {
    std::ofstream(dir / "cfg.json") << "// comment\n"
                                       R"({"chunker": {"triggers": "tables/t.txt"}})";
    std::ofstream(dir / "tables" / "t.txt") << "# header\n\\bflagged\\b\n\n";
  }
  const PipelineConfig c = LoadConfig(dir / "cfg.json");
  ASSERT_TRUE(c.chunker.triggers.has_value());
  EXPECT_EQ(*c.chunker.triggers, dir / "tables" / "t.txt");
  const ChunkerTables tables = ResolveChunkerTables(c.chunker);
  EXPECT_EQ(tables.triggers, std::vector<std::string>{"\\bflagged\\b"});
  EXPECT_EQ(tables.function_words, ChunkerTables::Default().function_words);
  EXPECT_THROW(LoadConfig(dir / "none.json"), ValidationError);
  ChunkerConfig missing;
  missing.function_words = dir / "nope.txt";
  EXPECT_THROW(ResolveChunkerTables(missing), ValidationError);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace damper
