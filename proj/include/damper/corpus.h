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

#ifndef DAMPER_CORPUS_H_
#define DAMPER_CORPUS_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace damper {

// A character range of a document. Offsets count code points; `end` is
// exclusive.
struct AnnotatedSpan {
  std::int64_t start = 0;
  std::int64_t end = 0;
  bool is_private = false;
  std::optional<std::string> label;

  bool operator==(const AnnotatedSpan&) const = default;
};

struct Document {
  std::string id;
  // Present in training data, absent at inference.
  std::optional<std::string> domain;
  std::string text;
  std::vector<AnnotatedSpan> spans;

  bool operator==(const Document&) const = default;

  std::string SpanText(const AnnotatedSpan& span) const;
  // Private spans in offset order.
  std::vector<AnnotatedSpan> PrivateSpans() const;
};

struct Corpus {
  std::vector<Document> documents;

  bool operator==(const Corpus&) const = default;

  std::size_t size() const { return documents.size(); }
  bool empty() const { return documents.empty(); }
  // Sorted, de-duplicated domain labels present in the corpus.
  std::vector<std::string> Domains() const;
};

// Throws ValidationError naming the document when an invariant is violated.
void ValidateDocument(const Document& doc);
void ValidateCorpus(const Corpus& corpus);

nlohmann::json DocumentToJson(const Document& doc);
Document DocumentFromJson(const nlohmann::json& record);
// Canonical single-line form: sorted keys, no insignificant whitespace.
std::string SerializeDocument(const Document& doc);

Corpus ReadCorpus(std::istream& in);
void WriteCorpus(const Corpus& corpus, std::ostream& out);
Corpus LoadCorpus(const std::filesystem::path& path);
void SaveCorpus(const Corpus& corpus, const std::filesystem::path& path);

// Synthetic multi-domain generator.
//
// Templates are sentence patterns with `{P}` (private phrase) and `{N}`
// (neutral phrase) slots. A document is a space-joined sequence of filled
// templates; every filled slot becomes an annotated span.
struct SynthDomain {
  std::string name;
  std::vector<std::string> private_vocab;
  std::vector<std::string> neutral_vocab;
  std::vector<std::string> templates;
};

struct SynthSpec {
  std::vector<SynthDomain> domains;
  int docs_per_domain = 60;
  int min_spans = 2;
  int max_spans = 5;
  std::uint64_t seed = 7;
};

// Three domains (medical, legal, finance) with disjoint private vocabularies.
SynthSpec DefaultSynthSpec();
void ValidateSynthSpec(const SynthSpec& spec);
Corpus SynthCorpus(const SynthSpec& spec);

nlohmann::json SynthSpecToJson(const SynthSpec& spec);
SynthSpec SynthSpecFromJson(const nlohmann::json& j);

// Stratified by domain; documents keep their input order in both outputs.
std::pair<Corpus, Corpus> SplitCorpus(const Corpus& corpus,
                                      double train_fraction,
                                      std::uint64_t seed);

}  // namespace damper

#endif  // DAMPER_CORPUS_H_
