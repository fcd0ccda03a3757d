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

#include "damper/chunker.h"

#include <algorithm>
#include <set>
#include <string>

#include <gtest/gtest.h>
#include "damper/corpus.h"
#include "damper/text.h"

namespace damper {
namespace {

std::set<std::string> Texts(const std::vector<Chunk>& chunks) {
  std::set<std::string> out;
  for (const auto& c : chunks) out.insert(c.text);
  return out;
}

void ExpectChunkInvariants(std::string_view text,
                           const std::vector<Chunk>& chunks) {
  const Utf8Index index(text);
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    const Chunk& c = chunks[i];
    ASSERT_LT(c.start, c.end);
    ASSERT_LE(c.end, static_cast<std::int64_t>(index.size()));
    EXPECT_EQ(c.text, index.Slice(c.start, c.end));
    EXPECT_FALSE(CrossesStrongBoundary(text, c.start, c.end)) << c.text;
    if (i > 0) EXPECT_LE(chunks[i - 1].start, c.start);
  }
}

TEST(SegmentTest, EnumerationAfterTrigger) {
  const std::string text = "A woman reports cough, cough up blood, fatigue.";
  const auto chunks = Segment(text);
  const auto texts = Texts(chunks);
  EXPECT_TRUE(texts.count("cough"));
  EXPECT_TRUE(texts.count("cough up blood"));
  EXPECT_TRUE(texts.count("fatigue"));
  ExpectChunkInvariants(text, chunks);
}

TEST(SegmentTest, SingleWordSentence) {
  const auto chunks = Segment("Hello.");
  ASSERT_EQ(chunks.size(), 1u);
  EXPECT_EQ(chunks[0].text, "Hello");
  EXPECT_EQ(chunks[0].start, 0);
  EXPECT_EQ(chunks[0].end, 5);
}

TEST(SegmentTest, RejectsBlankInput) {
  EXPECT_THROW(Segment(""), ValidationError);
  EXPECT_THROW(Segment(" \n\t "), ValidationError);
}

TEST(SegmentTest, StripsConjunctionsAndPunctuation) {
  const auto texts =
      Texts(Segment("The patient reports night sweats, and chest pain."));
  EXPECT_TRUE(texts.count("night sweats"));
  EXPECT_TRUE(texts.count("chest pain"));
  for (const auto& t : texts) {
    EXPECT_NE(t.rfind("and ", 0), 0u) << t;
    EXPECT_NE(t.back(), '.');
    EXPECT_NE(t.back(), ',');
  }
}

TEST(SegmentTest, GerundAndInfinitivePhrases) {
  const auto texts = Texts(Segment("He keeps running daily. She wants to travel."));
  EXPECT_TRUE(texts.count("running daily"));
  EXPECT_TRUE(texts.count("to travel"));
}

TEST(SegmentTest, NonAsciiOffsets) {
  const std::string text = "Caf\xC3\xA9 owner reports na\xC3\xAFve fraud.";
  const auto chunks = Segment(text);
  ExpectChunkInvariants(text, chunks);
  EXPECT_TRUE(Texts(chunks).count("na\xC3\xAFve fraud"));
}

TEST(SegmentTest, Deterministic) {
  const std::string text = "The client alleges wire fraud; and tax evasion!";
  EXPECT_EQ(Segment(text), Segment(text));
}

TEST(SegmentTest, CoversEverySyntheticSpan) {
  SynthSpec spec = DefaultSynthSpec();
  spec.docs_per_domain = 80;
  spec.seed = 12;
  const Corpus corpus = SynthCorpus(spec);
  std::size_t spans = 0;
  std::size_t covered = 0;
  for (const auto& doc : corpus.documents) {
    const auto chunks = Segment(doc.text);
    ExpectChunkInvariants(doc.text, chunks);
    std::set<std::pair<std::int64_t, std::int64_t>> offsets;
    for (const auto& c : chunks) offsets.emplace(c.start, c.end);
    for (const auto& s : doc.spans) {
      ++spans;
      if (offsets.count({s.start, s.end})) {
        ++covered;
      } else {
        ADD_FAILURE() << doc.id << " misses '" << doc.SpanText(s) << "' in: "
                      << doc.text;
      }
    }
  }
  EXPECT_EQ(covered, spans);
}

TEST(ChunkerTablesTest, ParseSkipsCommentsAndBlanks) {
  const auto rows = ChunkerTables::ParseTable("# header\nreports?\n\n  alleges  \n# x\n");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], "reports?");
  EXPECT_EQ(rows[1], "alleges");
}

TEST(ChunkerTablesTest, CustomTriggerTable) {
  ChunkerTables tables = ChunkerTables::Default();
  tables.triggers = {"flagged"};
  const TextChunker chunker(tables);
  const auto texts = Texts(chunker.Segment("Audit flagged ledger gaps, cash leaks."));
  EXPECT_TRUE(texts.count("ledger gaps"));
  EXPECT_TRUE(texts.count("cash leaks"));
}

TEST(NgramTest, EnumeratesWindows) {
  const auto texts = Texts(SegmentNgrams("a b c", 2));
  EXPECT_EQ(texts, (std::set<std::string>{"a", "b", "c", "a b", "b c"}));
  EXPECT_EQ(Texts(SegmentNgrams("x y z y", 1)),
            (std::set<std::string>{"x", "y", "z"}));
  EXPECT_THROW(SegmentNgrams("a", 0), ValidationError);
}

TEST(NgramTest, CountFormula) {
  for (int n = 1; n <= 12; ++n) {
    std::string text;
    for (int i = 0; i < n; ++i) text += "t" + std::to_string(i) + "  ";
    for (int L = 1; L <= 6; ++L) {
      std::size_t expected = 0;
      for (int l = 1; l <= L; ++l) expected += std::max(0, n - l + 1);
      const auto chunks = SegmentNgrams(text, L);
      EXPECT_EQ(chunks.size(), expected) << n << " " << L;
      ExpectChunkInvariants(text, chunks);
    }
  }
}

TEST(PerturbTest, ZeroIsIdentity) {
  const std::string text = "The client alleges wire fraud, tax evasion and bribery.";
  const auto chunks = Segment(text);
  EXPECT_EQ(PerturbBoundaries(text, chunks, 0.0, 5), chunks);
  EXPECT_THROW(PerturbBoundaries(text, chunks, 1.5, 5), ValidationError);
}

TEST(PerturbTest, SingleTokenChunksOnlyMerge) {
  const std::string text = "alpha beta gamma delta epsilon zeta eta theta";
  const auto chunks = SegmentNgrams(text, 1);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto out = PerturbBoundaries(text, chunks, 1.0, seed);
    EXPECT_LT(out.size(), chunks.size());
    for (const auto& c : out) {
      // A merge covers whole original chunks.
      const auto starts_ok = std::any_of(chunks.begin(), chunks.end(),
                                         [&](const Chunk& o) { return o.start == c.start; });
      const auto ends_ok = std::any_of(chunks.begin(), chunks.end(),
                                       [&](const Chunk& o) { return o.end == c.end; });
      EXPECT_TRUE(starts_ok && ends_ok) << c.text;
    }
  }
}

TEST(PerturbTest, OutputTilesWithoutOverlap) {
  const std::string text =
      "one two three four five six seven eight nine ten eleven twelve";
  std::vector<Chunk> chunks;
  const Utf8Index index(text);
  const auto offsets = SegmentNgrams(text, 1);
  for (std::size_t i = 0; i + 1 < offsets.size(); i += 2) {
    chunks.push_back({offsets[i].start, offsets[i + 1].end,
                      std::string(index.Slice(offsets[i].start, offsets[i + 1].end))});
  }
  std::sort(chunks.begin(), chunks.end(), [](const Chunk& a, const Chunk& b) {
    return a.start < b.start;
  });
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    for (double p : {0.25, 0.5, 1.0}) {
      const auto out = PerturbBoundaries(text, chunks, p, seed);
      ExpectChunkInvariants(text, out);
      for (std::size_t i = 1; i < out.size(); ++i) {
        EXPECT_LE(out[i - 1].end, out[i].start);
      }
      EXPECT_EQ(out, PerturbBoundaries(text, chunks, p, seed));
    }
  }
}

TEST(PerturbTest, MergesNeverCrossSentences) {
  const std::string text = "fever. cough. rash. pain.";
  const auto chunks = Segment(text);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ExpectChunkInvariants(text, PerturbBoundaries(text, chunks, 1.0, seed));
  }
}

}  // namespace
}  // namespace damper
