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
#include <cmath>
#include <limits>

#include <gtest/gtest.h>
#include "damper/rng.h"
#include "damper/text.h"

namespace damper {
namespace {

PrototypeSet MakeSet(const std::string& name, std::vector<Embedding> protos) {
  PrototypeSet s;
  s.domain = name;
  s.prototypes = std::move(protos);
  return s;
}

Embedding RandomUnit(Rng& rng, int dim) {
  std::vector<double> v(dim);
  for (auto& x : v) x = rng.Normal();
  return Normalized(v);
}

// Direct evaluation of the between-class variance for every split.
std::pair<int, double> ExhaustiveOtsu(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const int m = static_cast<int>(v.size());
  double mu = 0.0;
  for (double x : v) mu += x;
  mu /= m;
  int best_t = 1;
  double best = -1.0;
  for (int t = 1; t < m; ++t) {
    double ml = 0.0;
    double mr = 0.0;
    for (int i = 0; i < t; ++i) ml += v[i];
    for (int i = t; i < m; ++i) mr += v[i];
    ml /= t;
    mr /= (m - t);
    const double s = static_cast<double>(t) / m * (ml - mu) * (ml - mu) +
                     static_cast<double>(m - t) / m * (mr - mu) * (mr - mu);
    if (s > best + 1e-12) {
      best = s;
      best_t = t;
    }
  }
  return {best_t, (v[best_t - 1] + v[best_t]) / 2.0};
}

TEST(AffinityTest, Basics) {
  const Embedding p1 = {1.0, 0.0, 0.0};
  const Embedding p2 = {0.0, 1.0, 0.0};
  const auto set = MakeSet("k", {p1, p2});
  EXPECT_DOUBLE_EQ(Affinity(p2, set), 1.0);
  EXPECT_DOUBLE_EQ(Affinity({0.0, 0.0, 1.0}, set), 0.0);
  EXPECT_THROW(Affinity(p1, MakeSet("empty", {})), ValidationError);
}

TEST(AffinityTest, EqualsBruteForceMax) {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Embedding> protos;
    const int j = 1 + static_cast<int>(rng.UniformInt(6));
    for (int i = 0; i < j; ++i) protos.push_back(RandomUnit(rng, 5));
    const Embedding z = RandomUnit(rng, 5);
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& p : protos) {
      double d = 0.0;
      for (int k = 0; k < 5; ++k) d += z[k] * p[k];
      best = std::max(best, d);
    }
    EXPECT_NEAR(Affinity(z, MakeSet("k", protos)), best, 1e-12);
  }
}

TEST(InferDomainTest, SingleDomain) {
  PrototypeMap protos = {{"only", MakeSet("only", {{1.0, 0.0}})}};
  EXPECT_EQ(InferDomain({{0.0, 1.0}}, protos), "only");
  EXPECT_THROW(InferDomain({}, protos), ValidationError);
}

TEST(InferDomainTest, TiesGoToSmallestName) {
  PrototypeMap protos = {{"zeta", MakeSet("zeta", {{1.0, 0.0}})},
                         {"alpha", MakeSet("alpha", {{1.0, 0.0}})}};
  EXPECT_EQ(InferDomain({{0.6, 0.8}}, protos), "alpha");
}

TEST(InferDomainTest, EqualsMeanArgmaxOracle) {
  Rng rng(2);
  for (int trial = 0; trial < 500; ++trial) {
    PrototypeMap protos;
    const int k = 1 + static_cast<int>(rng.UniformInt(5));
    for (int d = 0; d < k; ++d) {
      std::vector<Embedding> ps;
      const int j = 1 + static_cast<int>(rng.UniformInt(4));
      for (int i = 0; i < j; ++i) ps.push_back(RandomUnit(rng, 4));
      const std::string name = "d" + std::to_string(d);
      protos[name] = MakeSet(name, ps);
    }
    std::vector<Embedding> chunks;
    const int m = 1 + static_cast<int>(rng.UniformInt(8));
    for (int i = 0; i < m; ++i) chunks.push_back(RandomUnit(rng, 4));
    std::string best_name;
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& [name, set] : protos) {
      double sum = 0.0;
      for (const auto& z : chunks) {
        double mx = -2.0;
        for (const auto& p : set.prototypes) {
          double dot = 0.0;
          for (int q = 0; q < 4; ++q) dot += z[q] * p[q];
          mx = std::max(mx, dot);
        }
        sum += mx;
      }
      if (sum / m > best) {
        best = sum / m;
        best_name = name;
      }
    }
    EXPECT_EQ(InferDomain(chunks, protos), best_name);
    const auto scores = DomainScores(chunks, protos);
    EXPECT_NEAR(scores.at(best_name), best, 1e-12);
  }
}

TEST(OtsuTest, WorkedExamples) {
  const std::vector<double> two = {0.1, 0.9};
  auto r = OtsuThreshold(two);
  EXPECT_EQ(r.split, 1);
  EXPECT_DOUBLE_EQ(r.threshold, 0.5);
  const std::vector<double> four = {0.9, 0.1, 0.8, 0.2};
  r = OtsuThreshold(four);
  EXPECT_EQ(r.split, 2);
  EXPECT_DOUBLE_EQ(r.threshold, 0.5);
  const std::vector<double> flat = {0.4, 0.4, 0.4};
  r = OtsuThreshold(flat);
  EXPECT_EQ(r.split, 1);
  EXPECT_DOUBLE_EQ(r.threshold, 0.4);
  EXPECT_THROW(OtsuThreshold(std::vector<double>{0.3}), ValidationError);
}

TEST(OtsuTest, WorkedExampleVariances) {
  // sigma^2 for [0.1, 0.2, 0.8, 0.9] at t = 1, 2, 3.
  const std::vector<double> v = {0.1, 0.2, 0.8, 0.9};
  const double mu = 0.5;
  auto sigma = [&](int t) {
    double ml = 0, mr = 0;
    for (int i = 0; i < t; ++i) ml += v[i];
    for (int i = t; i < 4; ++i) mr += v[i];
    ml /= t;
    mr /= 4 - t;
    return t / 4.0 * (ml - mu) * (ml - mu) + (4 - t) / 4.0 * (mr - mu) * (mr - mu);
  };
  EXPECT_NEAR(sigma(1), 0.0533, 1e-4);
  EXPECT_NEAR(sigma(2), 0.1225, 1e-4);
  EXPECT_NEAR(sigma(3), 0.0533, 1e-4);
}

TEST(OtsuTest, MatchesExhaustiveSearch) {
  Rng rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    const int m = 2 + static_cast<int>(rng.UniformInt(63));
    std::vector<double> v(m);
    for (auto& x : v) x = 2.0 * rng.Uniform() - 1.0;
    const auto [t, gamma] = ExhaustiveOtsu(v);
    const auto r = OtsuThreshold(v);
    EXPECT_EQ(r.split, t) << "trial " << trial;
    EXPECT_DOUBLE_EQ(r.threshold, gamma) << "trial " << trial;
  }
}

bool DetectedUnderOtsu(const std::vector<double>& v, std::size_t i) {
  return v[i] > OtsuThreshold(v).threshold;
}

TEST(OtsuTest, RaisingAffinityNeverRemovesDetection) {
  Rng rng(4);
  int violations = 0;
  int checks = 0;
  for (int trial = 0; trial < 5000; ++trial) {
    const int m = 2 + static_cast<int>(rng.UniformInt(20));
    std::vector<double> v(m);
    for (auto& x : v) x = rng.Uniform();
    const std::size_t i = rng.UniformInt(m);
    if (!DetectedUnderOtsu(v, i)) continue;
    std::vector<double> w = v;
    w[i] = std::min(1.0, w[i] + rng.Uniform() * 0.5);
    ++checks;
    if (!DetectedUnderOtsu(w, i)) ++violations;
  }
  EXPECT_GT(checks, 1000);
  EXPECT_EQ(violations, 0);
}

TEST(MetricsTest, WorkedExamples) {
  const std::set<std::string> g = {"a", "b", "c", "d", "e"};
  auto m = ComputeLocalizationMetrics(g, g);
  EXPECT_EQ(m.precision, 1.0);
  EXPECT_EQ(m.recall, 1.0);
  EXPECT_EQ(m.pf1, 1.0);
  m = ComputeLocalizationMetrics({"x"}, {"y"});
  EXPECT_EQ(m.precision, 0.0);
  EXPECT_EQ(m.recall, 0.0);
  EXPECT_EQ(m.pf1, 0.0);
  m = ComputeLocalizationMetrics({"a", "b", "c", "d"}, g);
  EXPECT_DOUBLE_EQ(m.precision, 1.0);
  EXPECT_DOUBLE_EQ(m.recall, 0.8);
  EXPECT_NEAR(m.pf1, 8.0 / 9.0, 1e-12);
  m = ComputeLocalizationMetrics({}, g);
  EXPECT_EQ(m.precision, 1.0);
  EXPECT_EQ(m.recall, 0.0);
  m = ComputeLocalizationMetrics({"chest  pain "}, {"chest pain"});
  EXPECT_EQ(m.pf1, 1.0);
}

class DetectTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    SynthSpec spec = DefaultSynthSpec();
    spec.docs_per_domain = 40;
    const Corpus corpus = SynthCorpus(spec);
    encoder_ = new EncoderParams(
        TrainEncoder(corpus, EncoderParams::Init(EncoderConfig{})));
    protos_ = new PrototypeMap(BuildPrototypes(corpus, *encoder_, PrototypeOptions{}));
  }
  static void TearDownTestSuite() {
    delete encoder_;
    delete protos_;
  }
  static EncoderParams* encoder_;
  static PrototypeMap* protos_;
};
EncoderParams* DetectTest::encoder_ = nullptr;
PrototypeMap* DetectTest::protos_ = nullptr;

TEST_F(DetectTest, PrivatePhrasesOfOneDomainAreFound) {
  const SynthSpec spec = DefaultSynthSpec();
  for (const auto& dom : spec.domains) {
    const auto& pv = dom.private_vocab;
    const std::string text = "The case notes " + pv[0] + ", " + pv[3] +
                             " and " + pv[5] + ". It shows " + pv[7] + ".";
    const DetectionResult r = Detect(text, *encoder_, *protos_);
    EXPECT_EQ(r.inferred_domain, dom.name);
    std::set<std::string> found;
    for (const auto& c : r.DetectedChunks()) found.insert(c.text);
    for (int i : {0, 3, 5, 7}) {
      EXPECT_TRUE(found.count(pv[i])) << dom.name << ": " << pv[i];
    }
  }
}

TEST_F(DetectTest, DetectionMatchesThresholdRule) {
  const SynthSpec spec = DefaultSynthSpec();
  const auto& neutral = spec.domains[0].neutral_vocab;
  const std::string text =
      "The record notes " + neutral[0] + ", " + neutral[1] + " and " + neutral[2] + ".";
  const DetectionResult r = Detect(text, *encoder_, *protos_);
  const auto& scores = r.affinities.at(r.inferred_domain);
  ASSERT_GE(scores.size(), 2u);
  EXPECT_FALSE(r.single_chunk_fallback);
  EXPECT_DOUBLE_EQ(r.threshold, OtsuThreshold(scores).threshold);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool det = std::find(r.detected.begin(), r.detected.end(), i) != r.detected.end();
    EXPECT_EQ(det, scores[i] > r.threshold);
    for (const auto& [name, row] : r.affinities) {
      EXPECT_GE(row[i], -1.0);
      EXPECT_LE(row[i], 1.0);
    }
  }
}

TEST_F(DetectTest, SingleChunkFallback) {
  const SynthSpec spec = DefaultSynthSpec();
  const auto& pv = spec.domains[1].private_vocab;
  const DetectionResult r = Detect(pv[0], *encoder_, *protos_);
  ASSERT_EQ(r.chunks.size(), 1u);
  EXPECT_TRUE(r.single_chunk_fallback);
  EXPECT_EQ(r.threshold, kSingleChunkThreshold);
  const double score = r.affinities.at(r.inferred_domain)[0];
  EXPECT_EQ(r.detected.size(), score > 0.5 ? 1u : 0u);
}

TEST_F(DetectTest, Deterministic) {
  const std::string text = "The client alleges wire fraud, and the court notes a hearing.";
  const auto a = DetectionToJson(Detect(text, *encoder_, *protos_));
  const auto b = DetectionToJson(Detect(text, *encoder_, *protos_));
  EXPECT_EQ(a.dump(), b.dump());
}

}  // namespace
}  // namespace damper
