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

#include "damper/localizer.h"

#include <algorithm>
#include <limits>

#include "damper/text.h"
#include "spdlog/spdlog.h"

namespace damper {

double Affinity(const Embedding& z, const PrototypeSet& protos) {
  if (protos.prototypes.empty()) {
    throw ValidationError("empty prototype set for domain " + protos.domain);
  }
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& p : protos.prototypes) best = std::max(best, Cosine(z, p));
  return best;
}

std::map<std::string, double> DomainScores(
    const std::vector<Embedding>& chunk_embeddings, const PrototypeMap& protos) {
  if (chunk_embeddings.empty()) {
    throw ValidationError("domain inference needs at least one chunk");
  }
  if (protos.empty()) throw ValidationError("no domains to infer from");
  std::map<std::string, double> scores;
  for (const auto& [name, set] : protos) {
    double sum = 0.0;
    for (const auto& z : chunk_embeddings) sum += Affinity(z, set);
    scores[name] = sum / static_cast<double>(chunk_embeddings.size());
  }
  return scores;
}

std::string InferDomain(const std::vector<Embedding>& chunk_embeddings,
                        const PrototypeMap& protos) {
  const auto scores = DomainScores(chunk_embeddings, protos);
  // std::map iterates in name order, so strict > keeps the smallest name.
  auto best = scores.begin();
  for (auto it = scores.begin(); it != scores.end(); ++it) {
    if (it->second > best->second) best = it;
  }
  return best->first;
}

namespace {
constexpr double kOtsuTieTolerance = 1e-12;
}  // namespace

OtsuResult OtsuThreshold(std::span<const double> values) {
  const std::size_t m = values.size();
  if (m < 2) throw ValidationError("Otsu threshold needs at least 2 values");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  double total = 0.0;
  for (double v : sorted) total += v;
  const double mean = total / static_cast<double>(m);

  OtsuResult best;
  double best_var = -1.0;
  double left_sum = 0.0;
  for (std::size_t t = 1; t < m; ++t) {
    left_sum += sorted[t - 1];
    const double nl = static_cast<double>(t);
    const double nr = static_cast<double>(m - t);
    const double mu_l = left_sum / nl;
    const double mu_r = (total - left_sum) / nr;
    const double var = nl / m * (mu_l - mean) * (mu_l - mean) +
                       nr / m * (mu_r - mean) * (mu_r - mean);
    if (var > best_var + kOtsuTieTolerance) {
      best_var = var;
      best.split = static_cast<int>(t);
    }
  }
  best.threshold = (sorted[best.split - 1] + sorted[best.split]) / 2.0;
  return best;
}

std::vector<Chunk> DetectionResult::DetectedChunks() const {
  std::vector<Chunk> out;
  for (std::size_t i : detected) out.push_back(chunks[i]);
  return out;
}

DetectionResult DetectChunks(std::vector<Chunk> chunks,
                             const EncoderParams& encoder,
                             const PrototypeMap& protos) {
  DetectionResult result;
  result.chunks = std::move(chunks);
  std::vector<Embedding> z;
  z.reserve(result.chunks.size());
  for (const auto& c : result.chunks) z.push_back(Encode(encoder, c.text));
  result.inferred_domain = InferDomain(z, protos);
  for (const auto& [name, set] : protos) {
    auto& row = result.affinities[name];
    for (const auto& e : z) row.push_back(Affinity(e, set));
  }
  const std::vector<double>& scores = result.affinities[result.inferred_domain];
  if (scores.size() == 1) {
    result.single_chunk_fallback = true;
    result.threshold = kSingleChunkThreshold;
    spdlog::warn("single chunk input: using fixed threshold {}",
                 kSingleChunkThreshold);
  } else {
    const OtsuResult otsu = OtsuThreshold(scores);
    result.threshold = otsu.threshold;
    result.split = otsu.split;
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] > result.threshold) result.detected.push_back(i);
  }
  return result;
}

DetectionResult Detect(std::string_view text, const EncoderParams& encoder,
                       const PrototypeMap& protos) {
  return DetectChunks(Segment(text), encoder, protos);
}

nlohmann::json DetectionToJson(const DetectionResult& result) {
  nlohmann::json chunks = nlohmann::json::array();
  for (const auto& c : result.chunks) {
    chunks.push_back({{"start", c.start}, {"end", c.end}, {"text", c.text}});
  }
  return {{"chunks", chunks},
          {"affinities", result.affinities},
          {"inferred_domain", result.inferred_domain},
          {"threshold", result.threshold},
          {"split", result.split},
          {"single_chunk_fallback", result.single_chunk_fallback},
          {"detected", result.detected}};
}

LocalizationMetrics ComputeLocalizationMetrics(
    const std::set<std::string>& predicted, const std::set<std::string>& gold) {
  std::set<std::string> p;
  std::set<std::string> g;
  for (const auto& s : predicted) p.insert(NormalizeWhitespace(s));
  for (const auto& s : gold) g.insert(NormalizeWhitespace(s));
  std::size_t hits = 0;
  for (const auto& s : p) hits += g.count(s);
  LocalizationMetrics m;
  m.precision = p.empty() ? 1.0 : static_cast<double>(hits) / p.size();
  m.recall = g.empty() ? 1.0 : static_cast<double>(hits) / g.size();
  m.pf1 = m.precision + m.recall > 0.0
              ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
              : 0.0;
  return m;
}

}  // namespace damper
