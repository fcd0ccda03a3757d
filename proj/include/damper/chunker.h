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

#ifndef DAMPER_CHUNKER_H_
#define DAMPER_CHUNKER_H_

#include <cstdint>
#include <filesystem>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace damper {

// A candidate span. Offsets are code points into the source text.
struct Chunk {
  std::int64_t start = 0;
  std::int64_t end = 0;
  std::string text;

  bool operator==(const Chunk&) const = default;
};

// Trigger patterns (ECMAScript regexes, matched case-insensitively against
// a sentence) and the function-word list. Both tables use the same plain
// text format: one entry per line, `#` starts a comment.
struct ChunkerTables {
  std::vector<std::string> triggers;
  std::set<std::string> function_words;

  static ChunkerTables Default();
  static std::vector<std::string> ParseTable(std::string_view text);
  static ChunkerTables Load(const std::filesystem::path& triggers,
                            const std::filesystem::path& function_words);
};

// Rule-based segmenter: sentence split on strong punctuation, trigger-led
// enumerations split on weak separators, plus noun-like runs, gerund phrases
// and infinitive phrases. Output is de-duplicated by offsets and sorted.
class TextChunker {
 public:
  TextChunker();
  explicit TextChunker(ChunkerTables tables);

  std::vector<Chunk> Segment(std::string_view text) const;

  const ChunkerTables& tables() const { return tables_; }

 private:
  ChunkerTables tables_;
  std::vector<std::regex> triggers_;
};

// Segments with the default tables.
std::vector<Chunk> Segment(std::string_view text);

// Every contiguous window of at most `max_len` whitespace tokens.
std::vector<Chunk> SegmentNgrams(std::string_view text, int max_len);

// Re-segments floor(p * chunks.size()) randomly chosen chunks: each is either
// merged with a neighbour from the same sentence or split at an internal
// whitespace. `text` is the source the chunks were cut from.
std::vector<Chunk> PerturbBoundaries(std::string_view text,
                                     const std::vector<Chunk>& chunks,
                                     double p, std::uint64_t seed);

// True if [start, end) contains a sentence-ending punctuation mark.
bool CrossesStrongBoundary(std::string_view text, std::int64_t start,
                           std::int64_t end);

}  // namespace damper

#endif  // DAMPER_CHUNKER_H_
