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

#ifndef DAMPER_PROTOTYPES_H_
#define DAMPER_PROTOTYPES_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "damper/corpus.h"
#include "damper/encoder.h"
#include "json.hpp"

namespace damper {

// Cluster ids are contiguous from 0, numbered by first occurrence.
struct Partition {
  std::vector<int> assignment;
  int num_clusters = 0;
  int level = 0;
};

// Index of each point's most cosine-similar other point (lowest index wins
// ties).
std::vector<int> FirstNeighbors(const std::vector<Embedding>& points);

// FINCH hierarchy. Level 0 links every point to its first neighbour and takes
// connected components; each further level repeats on the normalized cluster
// means until one cluster remains. Returned finest first; the last entry has
// a single cluster.
std::vector<Partition> Finch(const std::vector<Embedding>& points);

// Unit-normalized mean of the members of each cluster.
std::vector<Embedding> ClusterMeans(const std::vector<Embedding>& points,
                                    const std::vector<int>& assignment,
                                    int num_clusters);

struct KMeansResult {
  std::vector<Embedding> centroids;
  std::vector<int> assignment;
  // Sum of (1 - cos) to the assigned centroid, recorded after each
  // assignment step.
  std::vector<double> objective;
};

// Spherical Lloyd iterations from a seeded farthest-point initialization.
KMeansResult KMeans(const std::vector<Embedding>& points, int k,
                    std::uint64_t seed, int max_iterations = 100);

enum class PrototypeMethod { kFinch, kKMeans, kMean };

std::string MethodName(PrototypeMethod method);
PrototypeMethod ParseMethod(const std::string& name);

struct PrototypeOptions {
  PrototypeMethod method = PrototypeMethod::kFinch;
  int kmeans_k = 4;
  // FINCH level to use; unset selects the coarsest level with >= 2 clusters.
  std::optional<int> finch_level;
  std::uint64_t seed = 1;
};

struct PrototypeSet {
  std::string domain;
  std::vector<Embedding> prototypes;
  PrototypeMethod method = PrototypeMethod::kFinch;
  std::optional<int> level;
  // Number of distinct private spans the prototypes were built from.
  int source_count = 0;
};

using PrototypeMap = std::map<std::string, PrototypeSet>;

// Encodes each domain's distinct private span texts and clusters them.
PrototypeMap BuildPrototypes(const Corpus& corpus, const EncoderParams& encoder,
                             const PrototypeOptions& options);

nlohmann::json PrototypesToJson(const PrototypeMap& protos);
PrototypeMap PrototypesFromJson(const nlohmann::json& j);
void SavePrototypes(const PrototypeMap& protos,
                    const std::filesystem::path& path);
PrototypeMap LoadPrototypes(const std::filesystem::path& path);

}  // namespace damper

#endif  // DAMPER_PROTOTYPES_H_
