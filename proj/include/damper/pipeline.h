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

#ifndef DAMPER_PIPELINE_H_
#define DAMPER_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "damper/config.h"
#include "damper/corpus.h"
#include "damper/dp_sampler.h"
#include "damper/encoder.h"
#include "damper/localizer.h"
#include "damper/policy.h"
#include "damper/prototypes.h"
#include "json.hpp"

namespace damper {

struct ModelBundle {
  EncoderParams encoder;
  PrototypeMap prototypes;
  PolicyParams reference;
  PolicyParams policy;
  // Largest regenerable token count over the training documents.
  int corpus_n_sp_max = 1;
  std::string corpus_fingerprint;
  std::string config_fingerprint;
  std::uint64_t seed = 0;
};

// Content hash over every component of the bundle.
std::string BundleFingerprint(const ModelBundle& bundle);
std::string CorpusFingerprint(const Corpus& corpus);

// Per-document cap used when the config leaves n_sp_max unset: private
// spans times the policy's max_len, maximized over documents.
int CorpusNspMax(const Corpus& corpus, int max_len);

inline constexpr const char* kStageNames[] = {"encoder", "prototypes",
                                              "reference", "preferences",
                                              "dpo"};

struct StageStatus {
  std::string name;
  std::filesystem::path artifact;
  std::string fingerprint;
  // False when the artifact was reused from an earlier run.
  bool ran = false;
};

struct TrainSummary {
  std::vector<StageStatus> stages;
  std::size_t preference_pairs = 0;
};

// Offline phase. With a non-empty `workdir` every stage artifact is written
// there along with a manifest; a later call reuses an artifact when its
// fingerprint matches and no upstream stage was re-run.
ModelBundle TrainOffline(const Corpus& corpus, const PipelineConfig& config,
                         const std::filesystem::path& workdir = {},
                         TrainSummary* summary = nullptr);

// Loads a bundle written by TrainOffline.
ModelBundle LoadBundle(const std::filesystem::path& workdir);

PrivacyBudget ResolveBudget(const PipelineConfig& config,
                            const ModelBundle& bundle);

// detect followed by DpRewrite.
RewriteResult RewriteOnline(const ModelBundle& bundle, std::string_view text,
                            const PrivacyBudget& budget, std::uint64_t seed,
                            const TextChunker& chunker);
RewriteResult RewriteOnline(const ModelBundle& bundle, std::string_view text,
                            const PrivacyBudget& budget, std::uint64_t seed);

// True when the output outside the rewritten spans equals the input outside
// those spans byte for byte.
bool PreservesContext(std::string_view input, const RewriteResult& result);

// Token LCS F-measure.
double RougeL(std::string_view candidate, std::string_view reference);

using Rewriter = std::function<RewriteResult(
    std::string_view text, const DetectionResult& detection,
    std::uint64_t seed)>;

struct DocumentMetrics {
  std::string id;
  std::string domain;
  std::string inferred_domain;
  double precision = 0.0;
  double recall = 0.0;
  double pf1 = 0.0;
  bool domain_correct = false;
  std::optional<double> soi;
  std::optional<double> dfs;
  std::optional<double> rouge_l;
  int n_sp = 0;
  double realized_eps = 0.0;
  bool budget_exhausted = false;
  bool context_preserved = false;
  std::size_t detected = 0;
};

struct SweepPoint {
  double alpha = 0.0;
  double soi = 0.0;
  double dfs = 0.0;
  double soi_drop = 0.0;
  double dfs_drop = 0.0;
  double sum_drop = 0.0;
};

struct Report {
  std::vector<DocumentMetrics> documents;
  double pf1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double domain_accuracy = 0.0;
  std::optional<double> soi;
  std::optional<double> dfs;
  std::optional<double> rouge_l;
  double context_preserved_rate = 0.0;
  double eps_mean = 0.0;
  double eps_max = 0.0;
  double eps_min = 0.0;
  int budget_exhausted = 0;
  double eps_text = 0.0;
  double eps_token = 0.0;
  int n_sp_max = 0;
  std::vector<SweepPoint> sweep;
  std::optional<double> soi_drop;
  std::optional<double> dfs_drop;
  std::optional<double> sum_drop;
  nlohmann::json config;
};

// Drop = 1 - (m - min) / (max - min) over `values`; 0 when max == min.
std::vector<double> DropScores(const std::vector<double>& values);

Report Evaluate(const ModelBundle& bundle, const Corpus& test,
                const PipelineConfig& config);
Report EvaluateWith(const ModelBundle& bundle, const Corpus& test,
                    const PipelineConfig& config, const Rewriter& rewriter);

// Retrains the aligned policy from the bundle's reference for every alpha of
// config.eval.alpha_sweep, measures mean SOI/DFS on `test`, and fills
// report.sweep plus the Drop scores of the report's own SOI/DFS.
void AddAlphaSweep(Report& report, const ModelBundle& bundle,
                   const Corpus& train, const Corpus& test,
                   const PipelineConfig& config);

nlohmann::json ReportToJson(const Report& report);
// Pretty-printed with sorted keys and a trailing newline.
std::string CanonicalJson(const nlohmann::json& j);

struct PipelineRun {
  Corpus train;
  Corpus test;
  ModelBundle bundle;
  Report report;
  TrainSummary summary;
};

// Generates the configured corpus (unless one is given), splits it, trains,
// and evaluates.
PipelineRun RunPipeline(const PipelineConfig& config,
                        const std::optional<Corpus>& corpus,
                        const std::filesystem::path& workdir);

}  // namespace damper

#endif  // DAMPER_PIPELINE_H_
