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

#include "damper/dp_sampler.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "damper/text.h"
#include "spdlog/spdlog.h"

namespace damper {
namespace {

double LogSumExp(const std::vector<double>& xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

// Corner pairs grouped by the per-coordinate class (u, v) in
// {(R1,R1), (R1,R2), (R2,R1), (R2,R2)}; the ratio only depends on the class
// counts and the class of the token.
double CornerClassMax(double r1, double r2, double tau2, int v) {
  const std::array<double, 4> u = {r1, r1, r2, r2};
  const std::array<double, 4> w = {r1, r2, r1, r2};
  double best = 0.0;
  for (int a = 0; a <= v; ++a) {
    for (int b = 0; a + b <= v; ++b) {
      for (int c = 0; a + b + c <= v; ++c) {
        const std::array<int, 4> n = {a, b, c, v - a - b - c};
        std::vector<double> zu;
        std::vector<double> zw;
        for (int k = 0; k < 4; ++k) {
          if (n[k] == 0) continue;
          zu.push_back(std::log(n[k]) + u[k] / tau2);
          zw.push_back(std::log(n[k]) + w[k] / tau2);
        }
        const double lu = LogSumExp(zu);
        const double lw = LogSumExp(zw);
        for (int k = 0; k < 4; ++k) {
          if (n[k] == 0) continue;
          best = std::max(best, std::abs((u[k] / tau2 - lu) - (w[k] / tau2 - lw)));
        }
      }
    }
  }
  return best;
}

double CornerLiteralMax(double r1, double r2, double tau2, int v) {
  const unsigned total = 1u << v;
  auto corner = [&](unsigned mask) {
    std::vector<double> out(v);
    for (int i = 0; i < v; ++i) out[i] = (mask >> i) & 1u ? r2 : r1;
    return out;
  };
  double best = 0.0;
  for (unsigned x = 0; x < total; ++x) {
    const auto u = corner(x);
    for (unsigned y = 0; y < total; ++y) {
      best = std::max(best, MaxLogRatio(u, corner(y), tau2));
    }
  }
  return best;
}

}  // namespace

PrivacyBudget PrivacyBudget::FromHyper(double eps, double r1, double r2,
                                       int n_sp_max) {
  PrivacyBudget b;
  b.eps_text = 2.0 * eps;
  b.r1 = r1;
  b.r2 = r2;
  b.n_sp_max = n_sp_max;
  b.eps_hyper = eps;
  b.Validate();
  return b;
}

void PrivacyBudget::Validate() const {
  if (!(eps_text > 0.0) || !std::isfinite(eps_text)) {
    throw ValidationError("eps_text must be positive and finite");
  }
  if (!(r1 < r2)) throw ValidationError("clipping bounds need R1 < R2");
  if (n_sp_max < 1) throw ValidationError("n_sp_max must be >= 1");
  if (eps_hyper && std::abs(eps_text - 2.0 * *eps_hyper) > 1e-12 * eps_text) {
    throw ValidationError("eps_text must equal 2 * eps_hyper");
  }
}

Calibration Calibrate(const PrivacyBudget& budget) {
  budget.Validate();
  Calibration c;
  c.tau2 = 2.0 * (budget.r2 - budget.r1) * budget.n_sp_max / budget.eps_text;
  c.eps_token = 2.0 * (budget.r2 - budget.r1) / c.tau2;
  return c;
}

std::vector<double> Clip(const std::vector<double>& logits, double r1,
                         double r2) {
  if (!(r1 < r2)) throw ValidationError("clipping bounds need R1 < R2");
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::clamp(logits[i], r1, r2);
  }
  return out;
}

std::vector<double> AnchorAndClip(const std::vector<double>& logits, double r1,
                                  double r2) {
  if (logits.empty()) return {};
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> shifted(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) shifted[i] = logits[i] - m + r2;
  return Clip(shifted, r1, r2);
}

std::vector<double> EmProbabilities(const std::vector<double>& clipped,
                                    double tau2) {
  if (!(tau2 > 0.0)) throw ValidationError("tau2 must be positive");
  if (clipped.empty()) throw ValidationError("empty logit vector");
  std::vector<double> scaled(clipped.size());
  for (std::size_t i = 0; i < clipped.size(); ++i) scaled[i] = clipped[i] / tau2;
  const double lse = LogSumExp(scaled);
  std::vector<double> p(clipped.size());
  for (std::size_t i = 0; i < clipped.size(); ++i) p[i] = std::exp(scaled[i] - lse);
  return p;
}

std::size_t EmSample(const std::vector<double>& clipped, double tau2, Rng& rng) {
  const std::vector<double> p = EmProbabilities(clipped, tau2);
  const double u = rng.Uniform();
  double cdf = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    cdf += p[i];
    if (u < cdf) return i;
  }
  return p.size() - 1;
}

std::size_t EmSample(const std::vector<double>& clipped, double tau2,
                     std::uint64_t seed) {
  Rng rng(seed);
  return EmSample(clipped, tau2, rng);
}

std::vector<std::pair<std::int64_t, std::int64_t>> MergeSpans(
    std::vector<std::pair<std::int64_t, std::int64_t>> spans) {
  std::sort(spans.begin(), spans.end());
  std::vector<std::pair<std::int64_t, std::int64_t>> out;
  for (const auto& s : spans) {
    if (!out.empty() && s.first < out.back().second) {
      out.back().second = std::max(out.back().second, s.second);
    } else {
      out.push_back(s);
    }
  }
  return out;
}

RewriteResult DpRewrite(std::string_view text, const DetectionResult& detection,
                        const PolicyParams& policy, const PrivacyBudget& budget,
                        std::uint64_t seed) {
  const Calibration cal = Calibrate(budget);
  const Utf8Index index(text);
  std::vector<std::pair<std::int64_t, std::int64_t>> raw;
  for (const auto& c : detection.DetectedChunks()) {
    if (c.start < 0 || c.end > static_cast<std::int64_t>(index.size()) ||
        c.start >= c.end) {
      throw ValidationError("detected span out of range of the input text");
    }
    raw.emplace_back(c.start, c.end);
  }
  const auto spans = MergeSpans(std::move(raw));

  RewriteResult result;
  result.eps_token = cal.eps_token;
  result.inferred_domain = detection.inferred_domain;
  Rng rng(seed);
  const int max_len = policy.config().max_len;
  std::size_t cursor = 0;
  for (const auto& [start, end] : spans) {
    result.output_text += index.Slice(cursor, static_cast<std::size_t>(start));
    SpanRewrite rw;
    rw.start = start;
    rw.end = end;
    rw.original = std::string(index.Slice(start, end));
    if (result.budget_exhausted) {
      rw.replacement = rw.original;
      rw.regenerated = false;
    } else {
      const SparseFeatures context =
          SpanContextFeatures(policy, text, rw.original);
      std::vector<std::string> tokens;
      int prev = -1;
      for (int pos = 0; pos < max_len; ++pos) {
        if (result.n_sp + 1 > budget.n_sp_max) {
          result.budget_exhausted = true;
          break;
        }
        const std::vector<double> u = AnchorAndClip(
            StepLogits(policy, StepFeatures(policy, context, pos, prev)),
            budget.r1, budget.r2);
        const std::size_t token = EmSample(u, cal.tau2, rng);
        ++result.n_sp;
        ++rw.tokens;
        if (token == 0) break;
        tokens.push_back(policy.vocab()[token]);
        prev = static_cast<int>(token);
      }
      if (result.budget_exhausted && tokens.empty()) {
        rw.replacement = rw.original;
        rw.regenerated = false;
      } else {
        rw.replacement = JoinTokens(tokens);
      }
    }
    result.output_text += rw.replacement;
    result.replacements.push_back(std::move(rw));
    cursor = static_cast<std::size_t>(end);
  }
  result.output_text += index.Slice(cursor, index.size());
  result.realized_eps = result.n_sp * cal.eps_token;
  if (result.budget_exhausted) {
    spdlog::warn("privacy budget exhausted after {} tokens; remaining spans "
                 "copied verbatim",
                 result.n_sp);
  }
  return result;
}

nlohmann::json RewriteToJson(const RewriteResult& result) {
  nlohmann::json spans = nlohmann::json::array();
  for (const auto& r : result.replacements) {
    spans.push_back({{"offsets", {r.start, r.end}},
                     {"original", r.original},
                     {"replacement", r.replacement},
                     {"tokens", r.tokens},
                     {"regenerated", r.regenerated}});
  }
  return {{"output_text", result.output_text},
          {"replacements", spans},
          {"n_sp", result.n_sp},
          {"eps_token", result.eps_token},
          {"realized_eps", result.realized_eps},
          {"budget_exhausted", result.budget_exhausted},
          {"inferred_domain", result.inferred_domain}};
}

double MaxLogRatio(const std::vector<double>& u, const std::vector<double>& v,
                   double tau2) {
  if (u.size() != v.size() || u.empty()) {
    throw ValidationError("logit vectors must have equal nonzero length");
  }
  std::vector<double> su(u.size());
  std::vector<double> sv(v.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    su[i] = u[i] / tau2;
    sv[i] = v[i] / tau2;
  }
  const double lu = LogSumExp(su);
  const double lv = LogSumExp(sv);
  double best = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    best = std::max(best, std::abs((su[i] - lu) - (sv[i] - lv)));
  }
  return best;
}

double AuditRatio(double r1, double r2, double tau2, int vocab_size,
                  long trials, std::uint64_t seed) {
  if (vocab_size < 2) throw ValidationError("vocab_size must be >= 2");
  if (trials < 1) throw ValidationError("trials must be >= 1");
  if (!(tau2 > 0.0)) throw ValidationError("tau2 must be positive");
  if (!(r1 <= r2)) throw ValidationError("clipping bounds need R1 <= R2");
  double best = vocab_size <= 4 ? CornerLiteralMax(r1, r2, tau2, vocab_size)
                                : CornerClassMax(r1, r2, tau2, vocab_size);
  Rng rng(seed);
  std::vector<double> u(vocab_size);
  std::vector<double> v(vocab_size);
  auto draw = [&](std::vector<double>& out) {
    for (auto& x : out) {
      const std::size_t kind = rng.UniformInt(4);
      if (kind == 0) {
        x = r1;
      } else if (kind == 1) {
        x = r2;
      } else {
        x = r1 + (r2 - r1) * rng.Uniform();
      }
    }
  };
  for (long t = 0; t < trials; ++t) {
    draw(u);
    draw(v);
    best = std::max(best, MaxLogRatio(u, v, tau2));
  }
  return best;
}

}  // namespace damper
