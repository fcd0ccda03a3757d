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
#include <fstream>
#include <sstream>
#include <utility>

#include "damper/rng.h"
#include "damper/text.h"

namespace damper {
namespace {

constexpr std::string_view kDefaultTriggers = R"(# Enumeration triggers. The text after a match, up to the next trigger or
# the end of the sentence, is split on weak separators.
reports?|reported
complains? of|complained of
presents? with|presented with
suffers? from|suffered from
mentions?|mentioned
describes?|described
denies|denied
diagnosed with
history of
charged with|accused of
involves?|involved
alleges?|alleged
shows?|showed
includes?|included
notes?|noted
discuss|discusses|discussed
experiencing
)";

constexpr std::string_view kDefaultFunctionWords = R"(# determiners and pronouns
a
an
the
this
that
these
those
my
your
his
her
its
our
their
i
you
he
she
it
we
they
me
him
us
them
some
any
all
each
every
both
no
not
# auxiliaries
is
am
are
was
were
be
been
being
has
have
had
do
does
did
will
would
can
could
should
may
might
must
shall
# prepositions and particles
of
in
on
at
by
for
with
from
about
into
onto
over
after
before
since
during
under
between
through
as
than
to
# conjunctions and adverbs
and
or
but
nor
so
if
then
because
while
when
where
which
who
whom
whose
what
there
here
very
also
too
just
only
again
now
)";

// Words ending in -ing that are not gerunds.
const std::set<std::string>& NonGerunds() {
  static const std::set<std::string> kWords = {
      "anything", "bring", "ceiling", "during", "evening", "everything",
      "king",     "morning", "nothing", "ring", "sibling", "something",
      "spring",   "string", "thing", "wedding", "wing"};
  return kWords;
}

bool IsConjunction(const std::string& w) {
  return w == "and" || w == "or" || w == "but" || w == "nor";
}

bool IsStrongMark(char c) {
  return c == '.' || c == '!' || c == '?' || c == ';';
}

bool IsBaseWordChar(char c) {
  return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
}

// One byte per code point: ASCII lower-cased, everything else mapped to '_'
// (a word character that matches no trigger letter). Byte offsets in the
// folded string are therefore code point offsets in the source.
std::string Fold(const std::u32string& cps) {
  std::string out(cps.size(), '_');
  for (std::size_t i = 0; i < cps.size(); ++i) {
    const char32_t c = cps[i];
    if (c < 0x80) {
      char a = static_cast<char>(c);
      if (a >= 'A' && a <= 'Z') a = static_cast<char>(a - 'A' + 'a');
      out[i] = a;
    }
  }
  return out;
}

// '.', '\'' and '-' join a word only between two word characters, so "3.5"
// and "follow-up" stay single tokens.
bool IsWordCharAt(const std::string& folded, std::size_t i) {
  const char c = folded[i];
  if (IsBaseWordChar(c)) return true;
  if (c == '.' || c == '\'' || c == '-') {
    return i > 0 && i + 1 < folded.size() && IsBaseWordChar(folded[i - 1]) &&
           IsBaseWordChar(folded[i + 1]);
  }
  return false;
}

bool IsStrongAt(const std::string& folded, std::size_t i) {
  return IsStrongMark(folded[i]) && !IsWordCharAt(folded, i);
}

struct Token {
  std::int64_t start;
  std::int64_t end;
  bool is_word;
  std::string lower;
};

std::vector<Token> Tokenize(const std::string& folded) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < folded.size()) {
    if (IsAsciiSpace(folded[i])) {
      ++i;
    } else if (IsWordCharAt(folded, i)) {
      const std::size_t start = i;
      while (i < folded.size() && IsWordCharAt(folded, i)) ++i;
      tokens.push_back({static_cast<std::int64_t>(start),
                        static_cast<std::int64_t>(i), true,
                        folded.substr(start, i - start)});
    } else {
      tokens.push_back({static_cast<std::int64_t>(i),
                        static_cast<std::int64_t>(i + 1), false,
                        folded.substr(i, 1)});
      ++i;
    }
  }
  return tokens;
}

bool EndsWith(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

std::vector<std::string> ChunkerTables::ParseTable(std::string_view text) {
  std::vector<std::string> entries;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    // Patterns may contain spaces; only the ends are trimmed.
    std::size_t b = 0;
    std::size_t e = line.size();
    while (b < e && IsAsciiSpace(line[b])) ++b;
    while (e > b && IsAsciiSpace(line[e - 1])) --e;
    if (e > b) entries.push_back(line.substr(b, e - b));
  }
  return entries;
}

ChunkerTables ChunkerTables::Default() {
  ChunkerTables tables;
  tables.triggers = ParseTable(kDefaultTriggers);
  for (auto& w : ParseTable(kDefaultFunctionWords)) {
    tables.function_words.insert(AsciiLower(w));
  }
  return tables;
}

ChunkerTables ChunkerTables::Load(const std::filesystem::path& triggers,
                                  const std::filesystem::path& function_words) {
  auto read = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw ValidationError("cannot open chunker table " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  ChunkerTables tables;
  tables.triggers = ParseTable(read(triggers));
  for (auto& w : ParseTable(read(function_words))) {
    tables.function_words.insert(AsciiLower(w));
  }
  return tables;
}

TextChunker::TextChunker() : TextChunker(ChunkerTables::Default()) {}

TextChunker::TextChunker(ChunkerTables tables) : tables_(std::move(tables)) {
  for (const auto& pattern : tables_.triggers) {
    try {
      triggers_.emplace_back("\\b(?:" + AsciiLower(pattern) + ")\\b",
                             std::regex::ECMAScript | std::regex::icase |
                                 std::regex::optimize);
    } catch (const std::regex_error& e) {
      throw ValidationError("bad trigger pattern '" + pattern +
                            "': " + e.what());
    }
  }
}

std::vector<Chunk> TextChunker::Segment(std::string_view text) const {
  if (NormalizeWhitespace(text).empty()) {
    throw ValidationError("cannot segment empty text");
  }
  const std::u32string cps = DecodeUtf8(text);
  const std::string folded = Fold(cps);
  const std::vector<Token> tokens = Tokenize(folded);

  std::set<std::pair<std::int64_t, std::int64_t>> spans;
  auto emit = [&](std::size_t first, std::size_t last_exclusive) {
    std::size_t b = first;
    std::size_t e = last_exclusive;
    while (b < e && (!tokens[b].is_word || IsConjunction(tokens[b].lower))) ++b;
    while (e > b && !tokens[e - 1].is_word) --e;
    if (b < e) spans.emplace(tokens[b].start, tokens[e - 1].end);
  };

  std::size_t s = 0;
  while (s < tokens.size()) {
    std::size_t e = s;
    while (e < tokens.size() &&
           !(!tokens[e].is_word && IsStrongMark(tokens[e].lower[0]))) {
      ++e;
    }
    if (e > s) {
      const std::int64_t sent_begin = tokens[s].start;
      const std::int64_t sent_end = tokens[e - 1].end;
      const std::string sentence =
          folded.substr(static_cast<std::size_t>(sent_begin),
                        static_cast<std::size_t>(sent_end - sent_begin));

      // Leftmost-longest non-overlapping trigger matches.
      std::vector<std::pair<std::int64_t, std::int64_t>> found;
      for (const auto& re : triggers_) {
        for (auto it = std::sregex_iterator(sentence.begin(), sentence.end(),
                                            re);
             it != std::sregex_iterator(); ++it) {
          if (it->length() == 0) continue;
          found.emplace_back(sent_begin + it->position(),
                             sent_begin + it->position() + it->length());
        }
      }
      std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first < b.first : a.second > b.second;
      });
      std::vector<std::pair<std::int64_t, std::int64_t>> matches;
      for (const auto& m : found) {
        if (matches.empty() || m.first >= matches.back().second) {
          matches.push_back(m);
        }
      }

      std::vector<bool> is_trigger(e - s, false);
      for (std::size_t k = s; k < e; ++k) {
        for (const auto& m : matches) {
          if (tokens[k].start < m.second && m.first < tokens[k].end) {
            is_trigger[k - s] = true;
          }
        }
      }
      auto content = [&](std::size_t k) {
        return tokens[k].is_word && !is_trigger[k - s] &&
               !tables_.function_words.count(tokens[k].lower);
      };

      // Enumeration regions after each trigger.
      for (std::size_t m = 0; m < matches.size(); ++m) {
        const std::int64_t region_end =
            m + 1 < matches.size() ? matches[m + 1].first : sent_end;
        std::size_t k = s;
        while (k < e && tokens[k].start < matches[m].second) ++k;
        std::size_t piece = k;
        for (; k < e && tokens[k].end <= region_end; ++k) {
          const std::string& w = tokens[k].lower;
          if (w == "," || w == "and" || w == "or") {
            emit(piece, k);
            piece = k + 1;
          }
        }
        emit(piece, k);
      }

      // Noun-like runs.
      for (std::size_t k = s; k < e;) {
        if (!content(k)) {
          ++k;
          continue;
        }
        std::size_t j = k;
        while (j < e && content(j)) ++j;
        emit(k, j);
        k = j;
      }

      // Gerund phrases: an -ing head plus the content words that follow.
      for (std::size_t k = s; k < e; ++k) {
        const std::string& w = tokens[k].lower;
        if (!content(k) || w.size() < 5 || !EndsWith(w, "ing") ||
            NonGerunds().count(w)) {
          continue;
        }
        std::size_t j = k + 1;
        while (j < e && content(j)) ++j;
        emit(k, j);
      }

      // Infinitive purpose phrases.
      for (std::size_t k = s; k + 1 < e; ++k) {
        if (tokens[k].lower == "to" && content(k + 1)) emit(k, k + 2);
      }
    }
    s = e + 1;
  }

  const Utf8Index index(text);
  std::vector<Chunk> chunks;
  chunks.reserve(spans.size());
  for (const auto& [b, e] : spans) {
    chunks.push_back({b, e,
                      std::string(index.Slice(static_cast<std::size_t>(b),
                                              static_cast<std::size_t>(e)))});
  }
  return chunks;
}

std::vector<Chunk> Segment(std::string_view text) {
  static const TextChunker* const kChunker = new TextChunker();
  return kChunker->Segment(text);
}

std::vector<Chunk> SegmentNgrams(std::string_view text, int max_len) {
  if (max_len < 1) throw ValidationError("max_len must be at least 1");
  if (NormalizeWhitespace(text).empty()) {
    throw ValidationError("cannot segment empty text");
  }
  const std::u32string cps = DecodeUtf8(text);
  std::vector<std::pair<std::int64_t, std::int64_t>> words;
  std::size_t i = 0;
  auto is_space = [](char32_t c) { return c < 0x80 && IsAsciiSpace(static_cast<char>(c)); };
  while (i < cps.size()) {
    while (i < cps.size() && is_space(cps[i])) ++i;
    const std::size_t start = i;
    while (i < cps.size() && !is_space(cps[i])) ++i;
    if (i > start) {
      words.emplace_back(static_cast<std::int64_t>(start),
                         static_cast<std::int64_t>(i));
    }
  }
  const Utf8Index index(text);
  std::vector<Chunk> chunks;
  for (std::size_t b = 0; b < words.size(); ++b) {
    for (std::size_t len = 1;
         len <= static_cast<std::size_t>(max_len) && b + len <= words.size();
         ++len) {
      const auto start = words[b].first;
      const auto end = words[b + len - 1].second;
      chunks.push_back({start, end,
                        std::string(index.Slice(static_cast<std::size_t>(start),
                                                static_cast<std::size_t>(end)))});
    }
  }
  return chunks;
}

bool CrossesStrongBoundary(std::string_view text, std::int64_t start,
                           std::int64_t end) {
  const std::string folded = Fold(DecodeUtf8(text));
  for (auto i = static_cast<std::size_t>(start);
       i < static_cast<std::size_t>(end) && i < folded.size(); ++i) {
    if (IsStrongAt(folded, i)) return true;
  }
  return false;
}

namespace {

// Trims whitespace, leading conjunctions and trailing punctuation from
// [start, end). Returns an empty range if nothing remains.
std::pair<std::int64_t, std::int64_t> NormalizeRange(const std::string& folded,
                                                     std::int64_t start,
                                                     std::int64_t end) {
  const std::vector<Token> all = Tokenize(
      folded.substr(static_cast<std::size_t>(start),
                    static_cast<std::size_t>(end - start)));
  std::size_t b = 0;
  std::size_t e = all.size();
  while (b < e && (!all[b].is_word || IsConjunction(all[b].lower))) ++b;
  while (e > b && !all[e - 1].is_word) --e;
  if (b >= e) return {0, 0};
  return {start + all[b].start, start + all[e - 1].end};
}

}  // namespace

std::vector<Chunk> PerturbBoundaries(std::string_view text,
                                     const std::vector<Chunk>& chunks,
                                     double p, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ValidationError("perturbation fraction must lie in [0, 1]");
  }
  const std::string folded = Fold(DecodeUtf8(text));
  const Utf8Index index(text);
  auto make = [&](std::int64_t b, std::int64_t e) {
    return Chunk{b, e,
                 std::string(index.Slice(static_cast<std::size_t>(b),
                                         static_cast<std::size_t>(e)))};
  };

  const std::size_t n = chunks.size();
  std::vector<std::vector<Chunk>> slots(n);
  for (std::size_t i = 0; i < n; ++i) slots[i] = {chunks[i]};
  std::vector<bool> touched(n, false);

  Rng rng(seed);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.Shuffle(order);
  const auto count = static_cast<std::size_t>(std::floor(p * static_cast<double>(n)));

  for (std::size_t c = 0; c < count; ++c) {
    const std::size_t i = order[c];
    if (touched[i]) continue;
    const Chunk& chunk = chunks[i];

    std::vector<std::int64_t> cuts;
    for (auto k = chunk.start + 1; k < chunk.end; ++k) {
      if (IsAsciiSpace(folded[static_cast<std::size_t>(k)])) cuts.push_back(k);
    }
    std::vector<std::size_t> partners;
    for (std::size_t j : {i - 1, i + 1}) {
      if (j >= n || touched[j]) continue;  // i - 1 wraps when i == 0
      const auto b = std::min(chunk.start, chunks[j].start);
      const auto e = std::max(chunk.end, chunks[j].end);
      if (!CrossesStrongBoundary(text, b, e)) partners.push_back(j);
    }

    const bool split = !cuts.empty() && (partners.empty() || rng.Uniform() < 0.5);
    if (split) {
      const std::int64_t cut = cuts[rng.UniformInt(cuts.size())];
      const auto left = NormalizeRange(folded, chunk.start, cut);
      const auto right = NormalizeRange(folded, cut, chunk.end);
      if (left.second > left.first && right.second > right.first) {
        slots[i] = {make(left.first, left.second),
                    make(right.first, right.second)};
        touched[i] = true;
      }
    } else if (!partners.empty()) {
      const std::size_t j = partners[rng.UniformInt(partners.size())];
      const auto b = std::min(chunk.start, chunks[j].start);
      const auto e = std::max(chunk.end, chunks[j].end);
      slots[i] = {make(b, e)};
      slots[j].clear();
      touched[i] = true;
      touched[j] = true;
    }
  }

  std::vector<Chunk> out;
  for (auto& slot : slots) {
    for (auto& c : slot) out.push_back(std::move(c));
  }
  std::sort(out.begin(), out.end(), [](const Chunk& a, const Chunk& b) {
    return a.start != b.start ? a.start < b.start : a.end < b.end;
  });
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace damper
