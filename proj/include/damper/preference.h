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

#ifndef DAMPER_PREFERENCE_H_
#define DAMPER_PREFERENCE_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "damper/corpus.h"
#include "damper/encoder.h"
#include "damper/policy.h"
#include "damper/preference_pair.h"
#include "damper/prototypes.h"
#include "json.hpp"

namespace damper {

inline constexpr double kDefaultAlpha = 0.3;
inline constexpr int kDefaultCandidates = 10;

// 1 - mean cosine between paired embeddings.
double RewardPriv(const std::vector<Embedding>& original,
                  const std::vector<Embedding>& rewritten);
double RewardPriv(const std::vector<std::string>& original,
                  const std::vector<std::string>& rewritten,
                  const EncoderParams& encoder);

// Mean over spans of the best cosine to any prototype.
double RewardUtil(const std::vector<Embedding>& rewritten,
                  const PrototypeSet& protos);
double RewardUtil(const std::vector<std::string>& rewritten,
                  const PrototypeSet& protos, const EncoderParams& encoder);

double Reward(double r_priv, double r_util, double alpha);
double Reward(const Candidate& candidate, double alpha);

// Fills r_priv, r_util and r of `candidate` for document `x`.
void ScoreCandidate(Candidate& candidate, const Document& x,
                    const PrototypeSet& protos, const EncoderParams& encoder,
                    double alpha);

// `n` reference-policy samples with unscored rewards. Candidates containing
// an empty replacement are dropped.
std::vector<Candidate> GenerateCandidates(const PolicyParams& ref,
                                          const Document& x, int n,
                                          double temperature,
                                          std::uint64_t seed);

struct PreferenceOptions {
  double alpha = kDefaultAlpha;
  int num_candidates = kDefaultCandidates;
  double temperature = 1.0;
  std::uint64_t seed = 1;
};

// Index of the winner and loser (first in order on ties), or nullopt when
// all rewards are equal.
std::optional<std::pair<std::size_t, std::size_t>> SelectPair(
    const std::vector<Candidate>& candidates);

std::vector<PreferencePair> BuildPreferences(const Corpus& corpus,
                                             const PolicyParams& ref,
                                             const PrototypeMap& protos,
                                             const EncoderParams& encoder,
                                             const PreferenceOptions& options);

nlohmann::json PreferenceToJson(const PreferencePair& pair);
// Rebuilds x from its text and private span offsets. Only r survives the
// round trip; r_priv and r_util are zero after loading.
PreferencePair PreferenceFromJson(const nlohmann::json& record);
void WritePreferences(const std::vector<PreferencePair>& pairs,
                      std::ostream& out);
std::vector<PreferencePair> ReadPreferences(std::istream& in);
void SavePreferences(const std::vector<PreferencePair>& pairs,
                     const std::filesystem::path& path);
std::vector<PreferencePair> LoadPreferences(const std::filesystem::path& path);

}  // namespace damper

#endif  // DAMPER_PREFERENCE_H_
