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

#ifndef DAMPER_PREFERENCE_PAIR_H_
#define DAMPER_PREFERENCE_PAIR_H_

#include <string>
#include <vector>

#include "damper/corpus.h"

namespace damper {

// A candidate rewrite: one replacement per private span of the input, in
// offset order, with its reward terms.
struct Candidate {
  std::vector<std::string> replacements;
  double r_priv = 0.0;
  double r_util = 0.0;
  double r = 0.0;

  bool operator==(const Candidate&) const = default;
};

struct PreferencePair {
  Document x;
  Candidate winner;
  Candidate loser;
};

}  // namespace damper

#endif  // DAMPER_PREFERENCE_PAIR_H_
