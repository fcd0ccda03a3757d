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

#include "damper/model_io.h"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "damper/text.h"
#include "json.hpp"

namespace damper {
namespace {

using nlohmann::json;

constexpr const char* kEncoderFormat = "damper-encoder/1";
constexpr const char* kPolicyFormat = "damper-policy/1";

void WriteDoubles(const std::vector<double>& values, std::ostream& out) {
  for (double v : values) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(bits >> (8 * i));
    out.write(reinterpret_cast<const char*>(buf), 8);
  }
}

std::vector<double> ReadDoubles(std::istream& in, std::size_t count) {
  std::vector<double> values(count);
  unsigned char buf[8];
  for (std::size_t k = 0; k < count; ++k) {
    if (!in.read(reinterpret_cast<char*>(buf), 8)) {
      throw ValidationError("model file truncated: expected " +
                            std::to_string(count) + " weights");
    }
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    values[k] = std::bit_cast<double>(bits);
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw ValidationError("trailing bytes after model weights");
  }
  return values;
}

json ReadHeader(std::istream& in, const char* format) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty model file");
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad model header: ") + e.what());
  }
  if (header.value("format", "") != format) {
    throw ValidationError(std::string("model file is not ") + format);
  }
  return header;
}

}  // namespace

void WriteEncoder(const EncoderParams& params, std::ostream& out) {
  params.Validate();
  const auto& c = params.config;
  json header = {{"format", kEncoderFormat},
                 {"embed_dim", c.embed_dim},
                 {"feature_dim", c.feature_dim},
                 {"tau", c.tau},
                 {"learning_rate", c.learning_rate},
                 {"epochs", c.epochs},
                 {"batch_size", c.batch_size},
                 {"seed", c.seed}};
  out << header.dump() << '\n';
  WriteDoubles(params.weights, out);
}

EncoderParams ReadEncoder(std::istream& in) {
  try {
    const json h = ReadHeader(in, kEncoderFormat);
    EncoderParams params;
    auto& c = params.config;
    c.embed_dim = h.at("embed_dim").get<int>();
    c.feature_dim = h.at("feature_dim").get<int>();
    c.tau = h.at("tau").get<double>();
    c.learning_rate = h.at("learning_rate").get<double>();
    c.epochs = h.at("epochs").get<int>();
    c.batch_size = h.at("batch_size").get<int>();
    c.seed = h.at("seed").get<std::uint64_t>();
    if (c.embed_dim < 1 || c.feature_dim < 1) {
      throw ValidationError("bad encoder dimensions");
    }
    params.weights = ReadDoubles(
        in, static_cast<std::size_t>(c.embed_dim) * c.feature_dim);
    params.Validate();
    return params;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad encoder header: ") + e.what());
  }
}

void SaveEncoder(const EncoderParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  WriteEncoder(params, out);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

EncoderParams LoadEncoder(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  return ReadEncoder(in);
}

void WritePolicy(const PolicyParams& params, std::ostream& out) {
  params.Validate();
  const auto& c = params.config();
  json header = {{"format", kPolicyFormat},
                 {"vocab", params.vocab()},
                 {"feature_dim", c.feature_dim},
                 {"max_len", c.max_len},
                 {"seed", c.seed}};
  out << header.dump() << '\n';
  WriteDoubles(params.weights(), out);
}

PolicyParams ReadPolicy(std::istream& in) {
  try {
    const json h = ReadHeader(in, kPolicyFormat);
    PolicyConfig c;
    c.feature_dim = h.at("feature_dim").get<int>();
    c.max_len = h.at("max_len").get<int>();
    c.seed = h.at("seed").get<std::uint64_t>();
    PolicyParams params(h.at("vocab").get<std::vector<std::string>>(), c);
    params.weights() = ReadDoubles(in, params.weights().size());
    params.Validate();
    return params;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad policy header: ") + e.what());
  }
}

void SavePolicy(const PolicyParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  WritePolicy(params, out);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

PolicyParams LoadPolicy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  return ReadPolicy(in);
}

}  // namespace damper
