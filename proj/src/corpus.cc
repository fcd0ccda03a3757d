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
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "damper/rng.h"
#include "damper/text.h"

namespace damper {

using nlohmann::json;

std::string Document::SpanText(const AnnotatedSpan& span) const {
  Utf8Index index(text);
  return std::string(index.Slice(static_cast<std::size_t>(span.start),
                                 static_cast<std::size_t>(span.end)));
}

std::vector<AnnotatedSpan> Document::PrivateSpans() const {
  std::vector<AnnotatedSpan> out;
  for (const auto& s : spans) {
    if (s.is_private) out.push_back(s);
  }
  std::sort(out.begin(), out.end(),
            [](const AnnotatedSpan& a, const AnnotatedSpan& b) {
              return a.start < b.start;
            });
  return out;
}

std::vector<std::string> Corpus::Domains() const {
  std::set<std::string> names;
  for (const auto& d : documents) {
    if (d.domain) names.insert(*d.domain);
  }
  return {names.begin(), names.end()};
}

void ValidateDocument(const Document& doc) {
  if (doc.id.empty()) throw ValidationError("document with empty id");
  std::size_t length = 0;
  try {
    length = CodepointCount(doc.text);
  } catch (const ValidationError& e) {
    throw ValidationError("document " + doc.id + ": " + e.what());
  }
  std::vector<std::pair<std::int64_t, std::int64_t>> ranges;
  for (const auto& s : doc.spans) {
    if (s.start < 0 || s.start >= s.end ||
        s.end > static_cast<std::int64_t>(length)) {
      throw ValidationError("document " + doc.id + ": span [" +
                            std::to_string(s.start) + ", " +
                            std::to_string(s.end) +
                            ") out of range for text of length " +
                            std::to_string(length));
    }
    ranges.emplace_back(s.start, s.end);
  }
  std::sort(ranges.begin(), ranges.end());
  for (std::size_t i = 1; i < ranges.size(); ++i) {
    if (ranges[i].first < ranges[i - 1].second) {
      throw ValidationError("document " + doc.id + ": overlapping spans at " +
                            std::to_string(ranges[i].first));
    }
  }
}

void ValidateCorpus(const Corpus& corpus) {
  std::set<std::string> ids;
  for (const auto& doc : corpus.documents) {
    ValidateDocument(doc);
    if (!ids.insert(doc.id).second) {
      throw ValidationError("duplicate document id " + doc.id);
    }
  }
}

json DocumentToJson(const Document& doc) {
  json spans = json::array();
  for (const auto& s : doc.spans) {
    spans.push_back({{"start", s.start},
                     {"end", s.end},
                     {"private", s.is_private},
                     {"label", s.label ? json(*s.label) : json(nullptr)}});
  }
  return {{"id", doc.id},
          {"domain", doc.domain ? json(*doc.domain) : json(nullptr)},
          {"text", doc.text},
          {"spans", std::move(spans)}};
}

namespace {

std::optional<std::string> OptionalString(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<std::string>();
}

}  // namespace

Document DocumentFromJson(const json& record) {
  if (!record.is_object()) throw ValidationError("record is not an object");
  Document doc;
  try {
    doc.id = record.at("id").get<std::string>();
    doc.domain = OptionalString(record, "domain");
    doc.text = record.at("text").get<std::string>();
    for (const auto& s : record.at("spans")) {
      AnnotatedSpan span;
      span.start = s.at("start").get<std::int64_t>();
      span.end = s.at("end").get<std::int64_t>();
      span.is_private = s.at("private").get<bool>();
      span.label = OptionalString(s, "label");
      doc.spans.push_back(std::move(span));
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad record: ") + e.what());
  }
  return doc;
}

std::string SerializeDocument(const Document& doc) {
  return DocumentToJson(doc).dump();
}

Corpus ReadCorpus(std::istream& in) {
  Corpus corpus;
  std::set<std::string> ids;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (NormalizeWhitespace(line).empty()) continue;
    Document doc;
    try {
      doc = DocumentFromJson(json::parse(line));
      ValidateDocument(doc);
    } catch (const json::exception& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " +
                            e.what());
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " +
                            e.what());
    }
    if (!ids.insert(doc.id).second) {
      throw ValidationError("line " + std::to_string(line_no) +
                            ": duplicate document id " + doc.id);
    }
    corpus.documents.push_back(std::move(doc));
  }
  return corpus;
}

void WriteCorpus(const Corpus& corpus, std::ostream& out) {
  for (const auto& doc : corpus.documents) {
    out << SerializeDocument(doc) << '\n';
  }
}

Corpus LoadCorpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open corpus " + path.string());
  return ReadCorpus(in);
}

void SaveCorpus(const Corpus& corpus, const std::filesystem::path& path) {
  ValidateCorpus(corpus);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  WriteCorpus(corpus, out);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

SynthSpec DefaultSynthSpec() {
  SynthSpec spec;
  spec.domains.push_back(
      {"medical",
       {"cough up blood", "chest pain", "night sweats", "blurred vision",
        "irregular heartbeat", "hiv infection", "chronic hepatitis",
        "panic attacks", "seizure episodes", "kidney stones", "lung cancer",
        "severe depression", "high blood pressure", "swollen lymph nodes",
        "memory loss", "breast lump", "opioid dependence", "bipolar disorder",
        "stomach ulcer", "migraine headaches", "insulin resistance",
        "heart murmur"},
       {"waiting room", "front desk", "clinic parking", "appointment card",
        "weekly schedule", "reception staff", "hallway lights", "lunch menu",
        "visitor badge", "elevator queue"},
       {"The patient reports {P}, {P} and {N}.",
        "A woman complains of {P} and {P}.",
        "During the visit she mentions {P}, {N}.",
        "He was diagnosed with {P}.", "Notes include {N} and {N}.",
        "She asked about the {N}.", "There is a history of {P}.",
        "I want to discuss {P}."}});
  spec.domains.push_back(
      {"legal",
       {"tax fraud", "domestic violence", "assault charges", "custody dispute",
        "restraining order", "prior conviction", "probation violation",
        "identity theft", "wrongful dismissal", "divorce settlement",
        "criminal record", "arson charge", "bribery allegation",
        "visa overstay", "juvenile offense", "embezzlement case",
        "parole hearing", "eviction notice", "harassment complaint",
        "immigration status"},
       {"courthouse lobby", "filing cabinet", "meeting agenda",
        "office printer", "conference room", "reception area",
        "parking garage", "coffee break", "mail room", "staff directory"},
       {"The client was charged with {P} and {P}.",
        "My lawyer mentions {P}, {N}.",
        "The case involves {P}, {P} and {N}.", "He has a history of {P}.",
        "We discussed the {N} and the {N}.", "She is worried about {P}.",
        "Notes include {N}.", "I want to discuss {P} and {N}."}});
  spec.domains.push_back(
      {"finance",
       {"credit card debt", "loan default", "overdraft fees",
        "gambling losses", "mortgage arrears", "payday loans",
        "unpaid taxes", "credit score", "bankruptcy record",
        "investment losses", "pension savings", "stock portfolio",
        "alimony payments", "student loans", "collection agency",
        "repossessed car", "wire transfers", "offshore account",
        "salary garnishment", "foreclosure notice"},
       {"branch office", "monthly newsletter", "customer lounge",
        "holiday hours", "printed brochure", "website layout", "mobile app",
        "service counter", "queue ticket", "lobby music"},
       {"The customer reports {P}, {P} and {N}.",
        "I am worried about {P} and {P}.", "The statement shows {P}, {N}.",
        "He asked about the {N}.", "She has a history of {P}.",
        "Notes include {N} and {N}.", "I want to discuss {P}."}});
  return spec;
}

void ValidateSynthSpec(const SynthSpec& spec) {
  if (spec.domains.empty()) throw ValidationError("synth spec has no domains");
  if (spec.docs_per_domain < 1) {
    throw ValidationError("docs_per_domain must be positive");
  }
  if (spec.min_spans < 1 || spec.max_spans < spec.min_spans) {
    throw ValidationError("invalid spans_per_doc range");
  }
  std::map<std::string, std::string> owner;
  std::set<std::string> names;
  for (const auto& d : spec.domains) {
    if (!names.insert(d.name).second) {
      throw ValidationError("duplicate synthetic domain " + d.name);
    }
    if (d.private_vocab.size() < 2 || d.neutral_vocab.size() < 2) {
      throw ValidationError("domain " + d.name +
                            " needs at least 2 private and 2 neutral phrases");
    }
    bool has_private_slot = false;
    for (const auto& t : d.templates) {
      has_private_slot |= t.find("{P}") != std::string::npos;
    }
    if (!has_private_slot) {
      throw ValidationError("domain " + d.name +
                            " has no template with a {P} slot");
    }
    for (const auto& p : d.private_vocab) {
      auto [it, inserted] = owner.emplace(p, d.name);
      if (!inserted && it->second != d.name) {
        throw ValidationError("private phrase '" + p +
                              "' shared by domains " + it->second + " and " +
                              d.name);
      }
    }
  }
}

namespace {

struct Slot {
  std::size_t pos;
  bool is_private;
};

std::vector<Slot> FindSlots(const std::string& tmpl) {
  std::vector<Slot> slots;
  for (std::size_t i = 0; i + 2 < tmpl.size(); ++i) {
    if (tmpl[i] == '{' && tmpl[i + 2] == '}' &&
        (tmpl[i + 1] == 'P' || tmpl[i + 1] == 'N')) {
      slots.push_back({i, tmpl[i + 1] == 'P'});
    }
  }
  return slots;
}

// Draws phrases without replacement within a document until the pool runs
// out, then refills it.
class PhrasePool {
 public:
  PhrasePool(const std::vector<std::string>& vocab, Rng& rng)
      : vocab_(vocab), rng_(rng) {}

  const std::string& Next() {
    if (order_.empty()) {
      order_.resize(vocab_.size());
      for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
      rng_.Shuffle(order_);
    }
    const std::size_t idx = order_.back();
    order_.pop_back();
    return vocab_[idx];
  }

 private:
  const std::vector<std::string>& vocab_;
  Rng& rng_;
  std::vector<std::size_t> order_;
};

}  // namespace

Corpus SynthCorpus(const SynthSpec& spec) {
  ValidateSynthSpec(spec);
  Rng rng(spec.seed);
  Corpus corpus;
  for (const auto& domain : spec.domains) {
    std::vector<std::size_t> private_templates;
    for (std::size_t t = 0; t < domain.templates.size(); ++t) {
      if (domain.templates[t].find("{P}") != std::string::npos) {
        private_templates.push_back(t);
      }
    }
    for (int n = 0; n < spec.docs_per_domain; ++n) {
      Document doc;
      char id[32];
      std::snprintf(id, sizeof(id), "-%04d", n);
      doc.id = domain.name + id;
      doc.domain = domain.name;
      PhrasePool private_pool(domain.private_vocab, rng);
      PhrasePool neutral_pool(domain.neutral_vocab, rng);
      const int target =
          spec.min_spans + static_cast<int>(rng.UniformInt(
                               spec.max_spans - spec.min_spans + 1));
      std::int64_t cursor = 0;
      int filled = 0;
      bool has_private = false;
      while (filled < target || !has_private) {
        const std::string& tmpl =
            filled < target
                ? domain.templates[rng.UniformInt(domain.templates.size())]
                : domain.templates[private_templates[rng.UniformInt(
                      private_templates.size())]];
        if (!doc.text.empty()) {
          doc.text.push_back(' ');
          ++cursor;
        }
        std::size_t prev = 0;
        for (const Slot& slot : FindSlots(tmpl)) {
          const std::string literal = tmpl.substr(prev, slot.pos - prev);
          doc.text += literal;
          cursor += static_cast<std::int64_t>(CodepointCount(literal));
          const std::string& phrase =
              slot.is_private ? private_pool.Next() : neutral_pool.Next();
          const auto len = static_cast<std::int64_t>(CodepointCount(phrase));
          doc.spans.push_back(
              {cursor, cursor + len, slot.is_private,
               domain.name + (slot.is_private ? "/private" : "/neutral")});
          doc.text += phrase;
          cursor += len;
          prev = slot.pos + 3;
          ++filled;
          has_private |= slot.is_private;
        }
        const std::string tail = tmpl.substr(prev);
        doc.text += tail;
        cursor += static_cast<std::int64_t>(CodepointCount(tail));
      }
      corpus.documents.push_back(std::move(doc));
    }
  }
  return corpus;
}

json SynthSpecToJson(const SynthSpec& spec) {
  json domains = json::array();
  for (const auto& d : spec.domains) {
    domains.push_back({{"name", d.name},
                       {"private_vocab", d.private_vocab},
                       {"neutral_vocab", d.neutral_vocab},
                       {"templates", d.templates}});
  }
  return {{"domains", domains},
          {"docs_per_domain", spec.docs_per_domain},
          {"spans_per_doc", {spec.min_spans, spec.max_spans}},
          {"seed", spec.seed}};
}

SynthSpec SynthSpecFromJson(const json& j) {
  SynthSpec spec = DefaultSynthSpec();
  try {
    if (j.contains("domains")) {
      spec.domains.clear();
      for (const auto& d : j.at("domains")) {
        spec.domains.push_back(
            {d.at("name").get<std::string>(),
             d.at("private_vocab").get<std::vector<std::string>>(),
             d.at("neutral_vocab").get<std::vector<std::string>>(),
             d.at("templates").get<std::vector<std::string>>()});
      }
    }
    spec.docs_per_domain = j.value("docs_per_domain", spec.docs_per_domain);
    if (j.contains("spans_per_doc")) {
      const auto range = j.at("spans_per_doc").get<std::vector<int>>();
      if (range.size() != 2) {
        throw ValidationError("spans_per_doc must be [min, max]");
      }
      spec.min_spans = range[0];
      spec.max_spans = range[1];
    }
    spec.seed = j.value("seed", spec.seed);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad synth spec: ") + e.what());
  }
  return spec;
}

std::pair<Corpus, Corpus> SplitCorpus(const Corpus& corpus,
                                      double train_fraction,
                                      std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ValidationError("train fraction must lie in (0, 1)");
  }
  if (corpus.empty()) throw ValidationError("cannot split an empty corpus");
  std::map<std::string, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    strata[corpus.documents[i].domain.value_or("")].push_back(i);
  }
  Rng rng(seed);
  std::vector<bool> in_train(corpus.size(), false);
  for (auto& [name, members] : strata) {
    rng.Shuffle(members);
    const auto take = static_cast<std::size_t>(
        std::lround(train_fraction * static_cast<double>(members.size())));
    for (std::size_t k = 0; k < take; ++k) in_train[members[k]] = true;
  }
  Corpus train;
  Corpus test;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    (in_train[i] ? train : test).documents.push_back(corpus.documents[i]);
  }
  return {std::move(train), std::move(test)};
}

}  // namespace damper
