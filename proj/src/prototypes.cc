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

#include "damper/prototypes.h"

#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

#include "damper/rng.h"
#include "damper/text.h"
#include "spdlog/spdlog.h"

namespace damper {
namespace {

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }
  std::size_t Find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void Union(std::size_t a, std::size_t b) {
    a = Find(a);
    b = Find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

// Components of the first-neighbour graph. Linking i to nn(i) also joins
// every pair sharing a first neighbour.
std::vector<int> FirstNeighborComponents(const std::vector<Embedding>& points,
                                         int* num_clusters) {
  const std::vector<int> nn = FirstNeighbors(points);
  UnionFind uf(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    uf.Union(i, static_cast<std::size_t>(nn[i]));
  }
  std::vector<int> label(points.size(), -1);
  std::vector<int> assignment(points.size());
  int next = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const std::size_t root = uf.Find(i);
    if (label[root] < 0) label[root] = next++;
    assignment[i] = label[root];
  }
  *num_clusters = next;
  return assignment;
}

}  // namespace

std::vector<int> FirstNeighbors(const std::vector<Embedding>& points) {
  const std::size_t n = points.size();
  std::vector<int> nn(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double c = Cosine(points[i], points[j]);
      if (c > best) {
        best = c;
        nn[i] = static_cast<int>(j);
      }
    }
  }
  return nn;
}

std::vector<Embedding> ClusterMeans(const std::vector<Embedding>& points,
                                    const std::vector<int>& assignment,
                                    int num_clusters) {
  const std::size_t d = points.empty() ? 0 : points[0].size();
  std::vector<std::vector<double>> sums(num_clusters,
                                        std::vector<double>(d, 0.0));
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t r = 0; r < d; ++r) sums[assignment[i]][r] += points[i][r];
  }
  std::vector<Embedding> means;
  means.reserve(num_clusters);
  for (const auto& s : sums) means.push_back(Normalized(s));
  return means;
}

std::vector<Partition> Finch(const std::vector<Embedding>& points) {
  if (points.size() < 2) throw ValidationError("FINCH needs at least 2 points");
  std::vector<Partition> levels;
  int k = 0;
  std::vector<int> assignment = FirstNeighborComponents(points, &k);
  levels.push_back({assignment, k, 0});
  while (k > 1) {
    const std::vector<Embedding> means = ClusterMeans(points, assignment, k);
    int merged_k = 0;
    const std::vector<int> merged = FirstNeighborComponents(means, &merged_k);
    for (int& a : assignment) a = merged[a];
    // Renumber by first occurrence over the original points.
    std::vector<int> relabel(merged_k, -1);
    int next = 0;
    for (int& a : assignment) {
      if (relabel[a] < 0) relabel[a] = next++;
      a = relabel[a];
    }
    k = merged_k;
    levels.push_back({assignment, k, static_cast<int>(levels.size())});
  }
  return levels;
}

KMeansResult KMeans(const std::vector<Embedding>& points, int k,
                    std::uint64_t seed, int max_iterations) {
  const std::size_t n = points.size();
  if (k < 1 || static_cast<std::size_t>(k) > n) {
    throw ValidationError("k-means: k=" + std::to_string(k) +
                          " outside [1, " + std::to_string(n) + "]");
  }
  Rng rng(seed);
  KMeansResult result;
  std::vector<std::size_t> chosen = {rng.UniformInt(n)};
  std::vector<double> closest(n, -std::numeric_limits<double>::infinity());
  while (chosen.size() < static_cast<std::size_t>(k)) {
    for (std::size_t i = 0; i < n; ++i) {
      closest[i] = std::max(closest[i], Cosine(points[i], points[chosen.back()]));
    }
    std::size_t far = 0;
    double far_dist = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool taken =
          std::find(chosen.begin(), chosen.end(), i) != chosen.end();
      if (!taken && 1.0 - closest[i] > far_dist) {
        far_dist = 1.0 - closest[i];
        far = i;
      }
    }
    chosen.push_back(far);
  }
  for (std::size_t c : chosen) result.centroids.push_back(Normalized(points[c]));

  result.assignment.assign(n, -1);
  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    double objective = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_cos = -std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double cs = Cosine(points[i], result.centroids[c]);
        if (cs > best_cos) {
          best_cos = cs;
          best = c;
        }
      }
      changed |= result.assignment[i] != best;
      result.assignment[i] = best;
      objective += 1.0 - best_cos;
    }
    result.objective.push_back(objective);
    if (!changed && iter > 0) break;
    // Empty clusters keep their previous centroid.
    std::vector<int> sizes(k, 0);
    for (int a : result.assignment) ++sizes[a];
    const std::vector<Embedding> means =
        ClusterMeans(points, result.assignment, k);
    for (int c = 0; c < k; ++c) {
      if (sizes[c] > 0) result.centroids[c] = means[c];
    }
  }
  return result;
}

std::string MethodName(PrototypeMethod method) {
  switch (method) {
    case PrototypeMethod::kFinch:
      return "finch";
    case PrototypeMethod::kKMeans:
      return "kmeans";
    case PrototypeMethod::kMean:
      return "mean";
  }
  return "finch";
}

PrototypeMethod ParseMethod(const std::string& name) {
  if (name == "finch") return PrototypeMethod::kFinch;
  if (name == "kmeans") return PrototypeMethod::kKMeans;
  if (name == "mean") return PrototypeMethod::kMean;
  throw ValidationError("unknown prototype method " + name);
}

PrototypeMap BuildPrototypes(const Corpus& corpus, const EncoderParams& encoder,
                             const PrototypeOptions& options) {
  std::map<std::string, std::set<std::string>> spans;
  for (const auto& doc : corpus.documents) {
    if (!doc.domain) continue;
    auto& bucket = spans[*doc.domain];
    for (const auto& s : doc.spans) {
      if (s.is_private) bucket.insert(NormalizeWhitespace(doc.SpanText(s)));
    }
  }
  PrototypeMap out;
  for (const auto& [domain, texts] : spans) {
    if (texts.size() < 2) {
      throw ValidationError("domain " + domain +
                            " has fewer than 2 private spans");
    }
    std::vector<Embedding> z;
    for (const auto& t : texts) z.push_back(Encode(encoder, t));

    PrototypeSet set;
    set.domain = domain;
    set.method = options.method;
    set.source_count = static_cast<int>(z.size());
    switch (options.method) {
      case PrototypeMethod::kMean: {
        set.prototypes = ClusterMeans(z, std::vector<int>(z.size(), 0), 1);
        break;
      }
      case PrototypeMethod::kKMeans: {
        set.prototypes =
            KMeans(z, options.kmeans_k, DeriveSeed(options.seed, domain))
                .centroids;
        break;
      }
      case PrototypeMethod::kFinch: {
        const std::vector<Partition> levels = Finch(z);
        int chosen = 0;
        if (options.finch_level) {
          chosen = std::clamp(*options.finch_level, 0,
                              static_cast<int>(levels.size()) - 1);
        } else {
          for (const auto& p : levels) {
            if (p.num_clusters >= 2) chosen = p.level;
          }
        }
        const Partition& part = levels[chosen];
        set.prototypes = ClusterMeans(z, part.assignment, part.num_clusters);
        set.level = chosen;
        break;
      }
    }
    spdlog::info("domain {}: {} prototypes from {} private spans ({})",
                 domain, set.prototypes.size(), z.size(),
                 MethodName(options.method));
    out.emplace(domain, std::move(set));
  }
  return out;
}

nlohmann::json PrototypesToJson(const PrototypeMap& protos) {
  nlohmann::json domains = nlohmann::json::array();
  for (const auto& [name, set] : protos) {
    domains.push_back(
        {{"domain", name},
         {"method", MethodName(set.method)},
         {"level", set.level ? nlohmann::json(*set.level) : nlohmann::json()},
         {"dim", set.prototypes.empty() ? 0 : set.prototypes[0].size()},
         {"sources", set.source_count},
         {"prototypes", set.prototypes}});
  }
  return {{"domains", domains}};
}

PrototypeMap PrototypesFromJson(const nlohmann::json& j) {
  PrototypeMap out;
  try {
    for (const auto& d : j.at("domains")) {
      PrototypeSet set;
      set.domain = d.at("domain").get<std::string>();
      set.method = ParseMethod(d.at("method").get<std::string>());
      if (!d.at("level").is_null()) set.level = d.at("level").get<int>();
      set.source_count = d.value("sources", 0);
      set.prototypes = d.at("prototypes").get<std::vector<Embedding>>();
      const auto dim = d.at("dim").get<std::size_t>();
      if (set.prototypes.empty()) {
        throw ValidationError("domain " + set.domain + " has no prototypes");
      }
      for (const auto& p : set.prototypes) {
        if (p.size() != dim) {
          throw ValidationError("prototype dimension mismatch in " +
                                set.domain);
        }
      }
      out.emplace(set.domain, std::move(set));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad prototype file: ") + e.what());
  }
  return out;
}

void SavePrototypes(const PrototypeMap& protos,
                    const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << PrototypesToJson(protos).dump() << '\n';
}

PrototypeMap LoadPrototypes(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open prototypes " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad prototype file: ") + e.what());
  }
  return PrototypesFromJson(j);
}

}  // namespace damper
