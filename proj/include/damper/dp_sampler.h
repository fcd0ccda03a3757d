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

#ifndef DAMPER_DP_SAMPLER_H_
#define DAMPER_DP_SAMPLER_H_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "damper/localizer.h"
#include "damper/policy.h"
#include "damper/rng.h"
#include "json.hpp"

namespace damper {

struct PrivacyBudget {
  double eps_text = 150.0;
  double r1 = 5.0;
  double r2 = 20.0;
  int n_sp_max = 52;
  // When set, eps_text must equal 2 * eps_hyper.
  std::optional<double> eps_hyper;

  static PrivacyBudget FromHyper(double eps, double r1, double r2,
                                 int n_sp_max);
  void Validate() const;
};

struct Calibration {
  double tau2 = 0.0;
  double eps_token = 0.0;
};

// tau2 = 2 (R2 - R1) n_sp_max / eps_text, eps_token = 2 (R2 - R1) / tau2.
Calibration Calibrate(const PrivacyBudget& budget);

std::vector<double> Clip(const std::vector<double>& logits, double r1,
                         double r2);

// Shifts the logits so the largest equals r2, then clips to [r1, r2].
std::vector<double> AnchorAndClip(const std::vector<double>& logits, double r1,
                                  double r2);

// softmax(u / tau2), log-sum-exp stabilized.
std::vector<double> EmProbabilities(const std::vector<double>& clipped,
                                    double tau2);
std::size_t EmSample(const std::vector<double>& clipped, double tau2, Rng& rng);
std::size_t EmSample(const std::vector<double>& clipped, double tau2,
                     std::uint64_t seed);

struct SpanRewrite {
  std::int64_t start = 0;
  std::int64_t end = 0;
  std::string original;
  std::string replacement;
  // Exponential-mechanism draws charged to this span.
  int tokens = 0;
  // False when the span was copied verbatim because the budget ran out.
  bool regenerated = true;
};

struct RewriteResult {
  std::string output_text;
  std::vector<SpanRewrite> replacements;
  int n_sp = 0;
  double eps_token = 0.0;
  double realized_eps = 0.0;
  bool budget_exhausted = false;
  std::string inferred_domain;
};

// Union of overlapping [start, end) intervals, sorted.
std::vector<std::pair<std::int64_t, std::int64_t>> MergeSpans(
    std::vector<std::pair<std::int64_t, std::int64_t>> spans);

// Regenerates each detected span with the exponential mechanism over the
// policy's clipped logits. Each draw, including a drawn end marker, costs
// eps_token. When the next draw would exceed n_sp_max the current span keeps
// the tokens drawn so far (or its original text if none) and all later spans
// are copied verbatim.
RewriteResult DpRewrite(std::string_view text, const DetectionResult& detection,
                        const PolicyParams& policy, const PrivacyBudget& budget,
                        std::uint64_t seed);

nlohmann::json RewriteToJson(const RewriteResult& result);

// max_i |log p_i - log q_i| for p = softmax(u / tau2), q = softmax(v / tau2).
double MaxLogRatio(const std::vector<double>& u, const std::vector<double>& v,
                   double tau2);

// Largest MaxLogRatio over every pair of corner vectors (each coordinate R1
// or R2) plus `trials` random clipped pairs.
double AuditRatio(double r1, double r2, double tau2, int vocab_size,
                  long trials, std::uint64_t seed);

}  // namespace damper

#endif  // DAMPER_DP_SAMPLER_H_
