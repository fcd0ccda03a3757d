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

#ifndef DAMPER_CONFIG_H_
#define DAMPER_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "damper/chunker.h"
#include "damper/corpus.h"
#include "damper/dp_sampler.h"
#include "damper/encoder.h"
#include "damper/policy.h"
#include "damper/preference.h"
#include "damper/prototypes.h"
#include "json.hpp"

namespace damper {

struct EvalConfig {
  double test_fraction = 0.25;
  // Empty disables the Drop metrics.
  std::vector<double> alpha_sweep = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5,
                                     0.6, 0.7, 0.8, 0.9, 1.0};
};

struct ChunkerConfig {
  std::optional<std::filesystem::path> triggers;
  std::optional<std::filesystem::path> function_words;
};

struct PipelineConfig {
  std::uint64_t seed = 1;
  SynthSpec corpus;
  EncoderConfig encoder;
  PrototypeOptions prototypes;
  PreferenceOptions preference;
  PolicyConfig policy;
  TrainConfig reference_train;
  TrainConfig dpo_train;
  double beta = 0.1;
  PrivacyBudget budget;
  // Unset means the largest regenerable token count of the training corpus.
  std::optional<int> n_sp_max;
  EvalConfig eval;
  ChunkerConfig chunker;

  static PipelineConfig Default();
};

// Sets every component seed from `seed`.
void ApplySeed(PipelineConfig& config, std::uint64_t seed);

nlohmann::json ConfigToJson(const PipelineConfig& config);
// Missing keys keep their defaults; unknown keys are rejected.
PipelineConfig ConfigFromJson(const nlohmann::json& j);
PipelineConfig LoadConfig(const std::filesystem::path& path);

ChunkerTables ResolveChunkerTables(const ChunkerConfig& config);

}  // namespace damper

#endif  // DAMPER_CONFIG_H_
