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

#ifndef DAMPER_LOCALIZER_H_
#define DAMPER_LOCALIZER_H_

#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "damper/chunker.h"
#include "damper/encoder.h"
#include "damper/prototypes.h"
#include "json.hpp"

namespace damper {

// Maximum cosine similarity of `z` to the domain's prototypes.
double Affinity(const Embedding& z, const PrototypeSet& protos);

// Mean affinity per domain over the chunk embeddings.
std::map<std::string, double> DomainScores(
    const std::vector<Embedding>& chunk_embeddings, const PrototypeMap& protos);

// Domain with the highest mean affinity; ties go to the lexicographically
// smallest name.
std::string InferDomain(const std::vector<Embedding>& chunk_embeddings,
                        const PrototypeMap& protos);

struct OtsuResult {
  // Size of the lower class after sorting ascending (1 <= split < M).
  int split = 1;
  // Midpoint of the two sorted values straddling the split.
  double threshold = 0.0;
};

// Maximizes the between-class variance over all splits of the sorted values;
// the smallest split wins ties.
OtsuResult OtsuThreshold(std::span<const double> values);

// Threshold used when a text yields a single chunk.
inline constexpr double kSingleChunkThreshold = 0.5;

struct DetectionResult {
  std::vector<Chunk> chunks;
  // domain -> per-chunk affinity
  std::map<std::string, std::vector<double>> affinities;
  std::string inferred_domain;
  double threshold = 0.0;
  int split = 0;
  bool single_chunk_fallback = false;
  // Indices into `chunks` whose affinity strictly exceeds the threshold.
  std::vector<std::size_t> detected;

  std::vector<Chunk> DetectedChunks() const;
};

DetectionResult DetectChunks(std::vector<Chunk> chunks,
                             const EncoderParams& encoder,
                             const PrototypeMap& protos);
// Segments with the default rule-based chunker, then DetectChunks.
DetectionResult Detect(std::string_view text, const EncoderParams& encoder,
                       const PrototypeMap& protos);

nlohmann::json DetectionToJson(const DetectionResult& result);

struct LocalizationMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double pf1 = 0.0;
};

// Set comparison by exact string match after whitespace normalization. An
// empty prediction has precision 1; an empty gold set has recall 1.
LocalizationMetrics ComputeLocalizationMetrics(
    const std::set<std::string>& predicted, const std::set<std::string>& gold);

}  // namespace damper

#endif  // DAMPER_LOCALIZER_H_
