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

#ifndef DAMPER_MODEL_IO_H_
#define DAMPER_MODEL_IO_H_

#include <filesystem>
#include <iosfwd>

#include "damper/encoder.h"
#include "damper/policy.h"

namespace damper {

// Model files are one JSON header line followed by the weights as raw
// little-endian float64 values.
void WriteEncoder(const EncoderParams& params, std::ostream& out);
EncoderParams ReadEncoder(std::istream& in);
void SaveEncoder(const EncoderParams& params, const std::filesystem::path& path);
EncoderParams LoadEncoder(const std::filesystem::path& path);

void WritePolicy(const PolicyParams& params, std::ostream& out);
PolicyParams ReadPolicy(std::istream& in);
void SavePolicy(const PolicyParams& params, const std::filesystem::path& path);
PolicyParams LoadPolicy(const std::filesystem::path& path);

}  // namespace damper

#endif  // DAMPER_MODEL_IO_H_
