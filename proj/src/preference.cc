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

#include "damper/preference.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "damper/rng.h"
#include "damper/text.h"
#include "spdlog/spdlog.h"

namespace damper {

using nlohmann::json;

double RewardPriv(const std::vector<Embedding>& original,
                  const std::vector<Embedding>& rewritten) {
  if (original.empty() || original.size() != rewritten.size()) {
    throw ValidationError("reward_priv needs equal, nonempty span lists");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < original.size(); ++i) {
    sum += Cosine(rewritten[i], original[i]);
  }
  return 1.0 - sum / static_cast<double>(original.size());
}

double RewardPriv(const std::vector<std::string>& original,
                  const std::vector<std::string>& rewritten,
                  const EncoderParams& encoder) {
  if (original.empty() || original.size() != rewritten.size()) {
    throw ValidationError("reward_priv needs equal, nonempty span lists");
  }
  std::vector<Embedding> a;
  std::vector<Embedding> b;
  for (std::size_t i = 0; i < original.size(); ++i) {
    a.push_back(Encode(encoder, original[i]));
    b.push_back(Encode(encoder, rewritten[i]));
  }
  return RewardPriv(a, b);
}

double RewardUtil(const std::vector<Embedding>& rewritten,
                  const PrototypeSet& protos) {
  if (protos.prototypes.empty()) {
    throw ValidationError("empty prototype set for domain " + protos.domain);
  }
  if (rewritten.empty()) throw ValidationError("reward_util needs >= 1 span");
  double sum = 0.0;
  for (const auto& z : rewritten) {
    double best = -1.0;
    for (const auto& p : protos.prototypes) best = std::max(best, Cosine(z, p));
    sum += best;
  }
  return sum / static_cast<double>(rewritten.size());
}

double RewardUtil(const std::vector<std::string>& rewritten,
                  const PrototypeSet& protos, const EncoderParams& encoder) {
  std::vector<Embedding> z;
  for (const auto& s : rewritten) z.push_back(Encode(encoder, s));
  return RewardUtil(z, protos);
}

double Reward(double r_priv, double r_util, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ValidationError("alpha must lie in [0, 1]");
  }
  return (1.0 - alpha) * r_priv + alpha * r_util;
}

double Reward(const Candidate& candidate, double alpha) {
  return Reward(candidate.r_priv, candidate.r_util, alpha);
}

void ScoreCandidate(Candidate& candidate, const Document& x,
                    const PrototypeSet& protos, const EncoderParams& encoder,
                    double alpha) {
  std::vector<std::string> original;
  for (const auto& s : x.PrivateSpans()) original.push_back(x.SpanText(s));
  candidate.r_priv = RewardPriv(original, candidate.replacements, encoder);
  candidate.r_util = RewardUtil(candidate.replacements, protos, encoder);
  candidate.r = Reward(candidate, alpha);
}

std::vector<Candidate> GenerateCandidates(const PolicyParams& ref,
                                          const Document& x, int n,
                                          double temperature,
                                          std::uint64_t seed) {
  const auto spans = x.PrivateSpans();
  if (spans.empty()) {
    throw ValidationError("document " + x.id + " has no private spans");
  }
  if (n < 2) throw ValidationError("need at least 2 candidates");
  Rng rng(seed);
  std::vector<Candidate> out;
  for (int i = 0; i < n; ++i) {
    Candidate c;
    bool empty = false;
    for (std::size_t s = 0; s < spans.size(); ++s) {
      c.replacements.push_back(SampleReplacement(ref, x, s, temperature, rng));
      empty = empty || c.replacements.back().empty();
    }
    if (!empty) out.push_back(std::move(c));
  }
  if (out.size() < 2) {
    throw ValidationError("document " + x.id +
                          ": fewer than 2 nonempty candidates");
  }
  const bool all_same = std::all_of(out.begin(), out.end(), [&](const auto& c) {
    return c.replacements == out.front().replacements;
  });
  if (all_same) {
    throw ValidationError("document " + x.id +
                          ": insufficient diversity among candidates");
  }
  return out;
}

std::optional<std::pair<std::size_t, std::size_t>> SelectPair(
    const std::vector<Candidate>& candidates) {
  if (candidates.empty()) return std::nullopt;
  std::size_t hi = 0;
  std::size_t lo = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    if (candidates[i].r > candidates[hi].r) hi = i;
    if (candidates[i].r < candidates[lo].r) lo = i;
  }
  if (!(candidates[hi].r > candidates[lo].r)) return std::nullopt;
  return std::make_pair(hi, lo);
}

std::vector<PreferencePair> BuildPreferences(const Corpus& corpus,
                                             const PolicyParams& ref,
                                             const PrototypeMap& protos,
                                             const EncoderParams& encoder,
                                             const PreferenceOptions& options) {
  std::vector<PreferencePair> pairs;
  int skipped = 0;
  for (const auto& doc : corpus.documents) {
    if (!doc.domain || doc.PrivateSpans().empty()) {
      ++skipped;
      continue;
    }
    auto it = protos.find(*doc.domain);
    if (it == protos.end()) {
      throw ValidationError("no prototypes for domain " + *doc.domain);
    }
    std::vector<Candidate> candidates;
    try {
      candidates = GenerateCandidates(ref, doc, options.num_candidates,
                                      options.temperature,
                                      DeriveSeed(options.seed, doc.id));
    } catch (const ValidationError& e) {
      spdlog::debug("skipping {}: {}", doc.id, e.what());
      ++skipped;
      continue;
    }
    for (auto& c : candidates) {
      ScoreCandidate(c, doc, it->second, encoder, options.alpha);
    }
    const auto sel = SelectPair(candidates);
    if (!sel) {
      spdlog::debug("skipping {}: zero reward spread", doc.id);
      ++skipped;
      continue;
    }
    pairs.push_back({doc, candidates[sel->first], candidates[sel->second]});
  }
  spdlog::info("built {} preference pairs, skipped {} documents", pairs.size(),
               skipped);
  return pairs;
}

json PreferenceToJson(const PreferencePair& pair) {
  json offsets = json::array();
  for (const auto& s : pair.x.PrivateSpans()) offsets.push_back({s.start, s.end});
  json j;
  j["doc_id"] = pair.x.id;
  j["x"] = pair.x.text;
  j["span_offsets"] = offsets;
  j["y_w"] = pair.winner.replacements;
  j["y_l"] = pair.loser.replacements;
  j["r_w"] = pair.winner.r;
  j["r_l"] = pair.loser.r;
  return j;
}

PreferencePair PreferenceFromJson(const json& record) {
  PreferencePair pair;
  pair.x.id = record.at("doc_id").get<std::string>();
  pair.x.text = record.at("x").get<std::string>();
  for (const auto& o : record.at("span_offsets")) {
    AnnotatedSpan s;
    s.start = o.at(0).get<std::int64_t>();
    s.end = o.at(1).get<std::int64_t>();
    s.is_private = true;
    pair.x.spans.push_back(s);
  }
  ValidateDocument(pair.x);
  pair.winner.replacements = record.at("y_w").get<std::vector<std::string>>();
  pair.loser.replacements = record.at("y_l").get<std::vector<std::string>>();
  pair.winner.r = record.at("r_w").get<double>();
  pair.loser.r = record.at("r_l").get<double>();
  const std::size_t n = pair.x.spans.size();
  if (pair.winner.replacements.size() != n || pair.loser.replacements.size() != n) {
    throw ValidationError("preference " + pair.x.id +
                          ": replacement count does not match span_offsets");
  }
  if (pair.winner.r < pair.loser.r) {
    throw ValidationError("preference " + pair.x.id + ": r_w < r_l");
  }
  return pair;
}

void WritePreferences(const std::vector<PreferencePair>& pairs,
                      std::ostream& out) {
  for (const auto& p : pairs) out << PreferenceToJson(p).dump() << '\n';
}

std::vector<PreferencePair> ReadPreferences(std::istream& in) {
  std::vector<PreferencePair> pairs;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (NormalizeWhitespace(line).empty()) continue;
    try {
      pairs.push_back(PreferenceFromJson(json::parse(line)));
    } catch (const json::exception& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return pairs;
}

void SavePreferences(const std::vector<PreferencePair>& pairs,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  WritePreferences(pairs, out);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<PreferencePair> LoadPreferences(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  return ReadPreferences(in);
}

}  // namespace damper
