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

#include "damper/corpus.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <gtest/gtest.h>
#include "damper/text.h"

namespace damper {
namespace {

namespace fs = std::filesystem;

fs::path TempPath(const std::string& name) {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  const fs::path dir = fs::temp_directory_path() / "damper_corpus_test";
  fs::create_directories(dir);
  return dir / (std::string(info->name()) + "_" + name);
}

std::string ReadFile(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SynthSpec SmallSpec(std::uint64_t seed, int docs) {
  SynthSpec spec = DefaultSynthSpec();
  spec.docs_per_domain = docs;
  spec.seed = seed;
  return spec;
}

TEST(CorpusIoTest, LoadsSingleRecord) {
  std::istringstream in(
      R"({"id":"d1","domain":"medical","text":"chest pain today","spans":[{"start":0,"end":10,"private":true,"label":null}]})"
      "\n");
  const Corpus c = ReadCorpus(in);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c.documents[0].SpanText(c.documents[0].spans[0]), "chest pain");
}

TEST(CorpusIoTest, OutOfRangeSpanNamesDocument) {
  std::istringstream in(
      R"({"id":"doc-7","domain":null,"text":"abc","spans":[{"start":1,"end":9,"private":true,"label":null}]})");
  try {
    ReadCorpus(in);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("doc-7"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("line 1"), std::string::npos);
  }
}

TEST(CorpusIoTest, RejectsOverlapDuplicatesAndBadJson) {
  std::istringstream overlap(
      R"({"id":"a","domain":null,"text":"abcdef","spans":[{"start":0,"end":3,"private":true,"label":null},{"start":2,"end":4,"private":false,"label":null}]})");
  EXPECT_THROW(ReadCorpus(overlap), ValidationError);
  std::istringstream dup(
      "{\"id\":\"a\",\"domain\":null,\"text\":\"x\",\"spans\":[]}\n"
      "{\"id\":\"a\",\"domain\":null,\"text\":\"y\",\"spans\":[]}\n");
  EXPECT_THROW(ReadCorpus(dup), ValidationError);
  std::istringstream bad("{\"id\": \n");
  try {
    ReadCorpus(bad);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("line 1"), std::string::npos);
  }
}

TEST(CorpusIoTest, OffsetsCountCodePoints) {
  Document d;
  d.id = "u";
  d.text = "na\xC3\xAFve caf\xC3\xA9";
  d.spans.push_back({6, 10, true, std::nullopt});
  ValidateDocument(d);
  EXPECT_EQ(d.SpanText(d.spans[0]), "caf\xC3\xA9");
  d.spans[0].end = 11;
  EXPECT_THROW(ValidateDocument(d), ValidationError);
}

TEST(CorpusIoTest, EmptyCorpusWritesEmptyFile) {
  const fs::path p = TempPath("empty.jsonl");
  SaveCorpus(Corpus{}, p);
  EXPECT_EQ(fs::file_size(p), 0u);
  EXPECT_TRUE(LoadCorpus(p).empty());
}

TEST(CorpusIoTest, TwoDocumentsTwoLines) {
  const Corpus c = SynthCorpus(SmallSpec(1, 1));
  Corpus two;
  two.documents = {c.documents[0], c.documents[1]};
  const fs::path p = TempPath("two.jsonl");
  SaveCorpus(two, p);
  const std::string text = ReadFile(p);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
  EXPECT_EQ(text.back(), '\n');
}

TEST(CorpusIoTest, CanonicalKeyOrder) {
  const Corpus c = SynthCorpus(SmallSpec(2, 1));
  const std::string line = SerializeDocument(c.documents[0]);
  const auto pos = [&](const char* k) { return line.find(k); };
  EXPECT_LT(pos("\"domain\""), pos("\"id\""));
  EXPECT_LT(pos("\"id\""), pos("\"spans\""));
  EXPECT_LT(pos("\"spans\""), pos("\"text\""));
}

TEST(CorpusIoTest, RoundTripIsByteIdenticalOnRandomCorpora) {
  const fs::path a = TempPath("a.jsonl");
  const fs::path b = TempPath("b.jsonl");
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Corpus c = SynthCorpus(SmallSpec(seed, 2));
    SaveCorpus(c, a);
    const Corpus loaded = LoadCorpus(a);
    ASSERT_EQ(loaded, c) << "seed " << seed;
    SaveCorpus(loaded, b);
    ASSERT_EQ(ReadFile(a), ReadFile(b)) << "seed " << seed;
  }
}

TEST(SynthTest, DocumentCountAndPrivateSpans) {
  SynthSpec spec = SmallSpec(5, 10);
  spec.domains.resize(2);
  const Corpus c = SynthCorpus(spec);
  ASSERT_EQ(c.size(), 20u);
  for (const auto& d : c.documents) EXPECT_GE(d.PrivateSpans().size(), 1u);
}

TEST(SynthTest, Deterministic) {
  EXPECT_EQ(SynthCorpus(SmallSpec(9, 5)), SynthCorpus(SmallSpec(9, 5)));
  EXPECT_NE(SynthCorpus(SmallSpec(9, 5)), SynthCorpus(SmallSpec(10, 5)));
}

TEST(SynthTest, AnnotationsMatchInsertedPhrases) {
  const SynthSpec spec = SmallSpec(11, 30);
  const Corpus c = SynthCorpus(spec);
  std::map<std::string, const SynthDomain*> domains;
  for (const auto& d : spec.domains) domains[d.name] = &d;
  for (const auto& doc : c.documents) {
    ASSERT_TRUE(doc.domain.has_value());
    const SynthDomain& dom = *domains.at(*doc.domain);
    for (const auto& s : doc.spans) {
      const std::string text = doc.SpanText(s);
      const auto& vocab = s.is_private ? dom.private_vocab : dom.neutral_vocab;
      EXPECT_NE(std::find(vocab.begin(), vocab.end(), text), vocab.end())
          << doc.id << ": '" << text << "'";
      ASSERT_TRUE(s.label.has_value());
      EXPECT_EQ(*s.label,
                *doc.domain + (s.is_private ? "/private" : "/neutral"));
    }
    ValidateDocument(doc);
  }
}

TEST(SynthTest, SpecValidation) {
  SynthSpec spec = DefaultSynthSpec();
  spec.domains[0].private_vocab.resize(1);
  EXPECT_THROW(ValidateSynthSpec(spec), ValidationError);
  spec = DefaultSynthSpec();
  spec.domains[1].private_vocab.push_back(spec.domains[0].private_vocab[0]);
  EXPECT_THROW(ValidateSynthSpec(spec), ValidationError);
  spec = DefaultSynthSpec();
  spec.domains[0].neutral_vocab.clear();
  EXPECT_THROW(ValidateSynthSpec(spec), ValidationError);
  EXPECT_NO_THROW(ValidateSynthSpec(DefaultSynthSpec()));
}

TEST(SynthTest, SpecJsonRoundTrip) {
  SynthSpec spec = SmallSpec(4, 7);
  spec.min_spans = 1;
  spec.max_spans = 3;
  const SynthSpec back = SynthSpecFromJson(SynthSpecToJson(spec));
  EXPECT_EQ(SynthCorpus(back), SynthCorpus(spec));
}

TEST(SplitTest, TenDocsEightTwo) {
  SynthSpec spec = SmallSpec(3, 10);
  spec.domains.resize(1);
  const auto [train, test] = SplitCorpus(SynthCorpus(spec), 0.8, 1);
  EXPECT_EQ(train.size(), 8u);
  EXPECT_EQ(test.size(), 2u);
}

TEST(SplitTest, PartitionLawAndStratification) {
  const Corpus c = SynthCorpus(SmallSpec(6, 17));
  for (double frac : {0.1, 0.5, 0.75, 0.9}) {
    const auto [train, test] = SplitCorpus(c, frac, 21);
    std::set<std::string> a;
    std::set<std::string> b;
    for (const auto& d : train.documents) a.insert(d.id);
    for (const auto& d : test.documents) b.insert(d.id);
    std::set<std::string> all;
    for (const auto& d : c.documents) all.insert(d.id);
    std::set<std::string> both;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                          std::inserter(both, both.begin()));
    EXPECT_TRUE(both.empty());
    std::set<std::string> uni = a;
    uni.insert(b.begin(), b.end());
    EXPECT_EQ(uni, all);
    std::map<std::string, int> per_domain;
    for (const auto& d : train.documents) ++per_domain[*d.domain];
    for (const auto& [name, n] : per_domain) {
      EXPECT_LE(std::abs(n - frac * 17), 1.0) << name << " " << frac;
    }
  }
  EXPECT_EQ(SplitCorpus(c, 0.5, 3), SplitCorpus(c, 0.5, 3));
}

TEST(SplitTest, RejectsBadFraction) {
  const Corpus c = SynthCorpus(SmallSpec(6, 2));
  EXPECT_THROW(SplitCorpus(c, 0.0, 1), ValidationError);
  EXPECT_THROW(SplitCorpus(c, 1.0, 1), ValidationError);
  EXPECT_THROW(SplitCorpus(Corpus{}, 0.5, 1), ValidationError);
}

}  // namespace
}  // namespace damper
