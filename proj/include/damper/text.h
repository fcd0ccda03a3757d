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

#ifndef DAMPER_TEXT_H_
#define DAMPER_TEXT_H_

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace damper {

// Raised for malformed inputs: bad records, violated preconditions, bad
// configuration. The CLI maps it to exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when an offline training stage fails. Carries the stage name.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

// UTF-8 helpers. Offsets throughout the library count Unicode scalar values.
std::u32string DecodeUtf8(std::string_view text);
std::string EncodeUtf8(std::u32string_view text);

// Byte offset of every code point boundary; the result has
// CodepointCount(text) + 1 entries and ends with text.size().
std::vector<std::size_t> CodepointByteOffsets(std::string_view text);

std::size_t CodepointCount(std::string_view text);

// Maps code point offsets of `text` to byte offsets and back.
class Utf8Index {
 public:
  explicit Utf8Index(std::string_view text);

  std::size_t size() const { return offsets_.size() - 1; }
  std::size_t ByteOffset(std::size_t codepoint) const;
  // Code point index whose byte offset equals `byte`; throws if `byte` does
  // not fall on a boundary.
  std::size_t CodepointAt(std::size_t byte) const;
  std::string_view Slice(std::size_t start, std::size_t end) const;

 private:
  std::string_view text_;
  std::vector<std::size_t> offsets_;
};

std::string AsciiLower(std::string_view text);
bool IsAsciiSpace(char c);

std::vector<std::string> SplitWhitespace(std::string_view text);
// Collapses internal whitespace runs to one space and trims both ends.
std::string NormalizeWhitespace(std::string_view text);
std::string JoinTokens(const std::vector<std::string>& tokens);

// 64-bit FNV-1a. Stable across platforms; used for feature hashing and
// artifact fingerprints.
std::uint64_t Fnv1a64(std::string_view data,
                      std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string HexDigest(std::uint64_t value);

}  // namespace damper

#endif  // DAMPER_TEXT_H_
