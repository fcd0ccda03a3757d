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

#ifndef DAMPER_ENCODER_H_
#define DAMPER_ENCODER_H_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "damper/corpus.h"

namespace damper {

// Sparse hashed features: case-folded character 2/3/4-grams plus word
// unigrams. Entries are sorted by index with positive counts.
struct FeatureVector {
  int dim = 0;
  std::vector<std::pair<std::uint32_t, double>> entries;
};

FeatureVector Featurize(std::string_view text, int dim);

// Dense unit-norm vector.
using Embedding = std::vector<double>;

double Dot(std::span<const double> a, std::span<const double> b);
double Cosine(std::span<const double> a, std::span<const double> b);
// Unit vector along `v`; the first basis vector when `v` is zero.
Embedding Normalized(std::span<const double> v);

struct EncoderConfig {
  int embed_dim = 64;
  int feature_dim = 4096;
  double tau = 0.1;
  double learning_rate = 0.02;
  int epochs = 30;
  int batch_size = 32;
  std::uint64_t seed = 1;
};

// h(s) = normalize(W * featurize(s)), with W stored row-major as
// embed_dim x feature_dim.
struct EncoderParams {
  EncoderConfig config;
  std::vector<double> weights;

  // Gaussian initialization with unit variance, seeded by config.seed.
  static EncoderParams Init(const EncoderConfig& config);
  void Validate() const;

  double& W(int row, int col) {
    return weights[static_cast<std::size_t>(row) * config.feature_dim + col];
  }
  double W(int row, int col) const {
    return weights[static_cast<std::size_t>(row) * config.feature_dim + col];
  }
};

Embedding Encode(const EncoderParams& params, std::string_view text);

// Multi-positive InfoNCE for one anchor, log-sum-exp stabilized.
double InfoNceLoss(const Embedding& anchor,
                   const std::vector<Embedding>& positives,
                   const std::vector<Embedding>& negatives, double tau);

// One element of a contrastive batch. Within a batch every private item is
// an anchor; its positives are the other private items of its domain, its
// negatives are private items of other domains plus all non-private items.
struct ContrastiveItem {
  std::string text;
  std::string domain;
  bool is_private = false;

  bool operator==(const ContrastiveItem&) const = default;
};
using ContrastiveBatch = std::vector<ContrastiveItem>;

// Mean loss over the batch's anchors (anchors without a positive or a
// negative are skipped). If `grad` is non-null it receives dLoss/dW with the
// same layout as EncoderParams::weights.
double ContrastiveLoss(const EncoderParams& params,
                       const ContrastiveBatch& batch,
                       std::vector<double>* grad = nullptr);

// Distinct (text, domain, private) items of the labelled corpus, sorted.
std::vector<ContrastiveItem> ContrastiveItems(const Corpus& corpus);

struct EncoderTrainLog {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::vector<double> epoch_loss;
};

// Mean contrastive loss over fixed consecutive batches of `items`.
double EvaluateContrastiveLoss(const EncoderParams& params,
                               const std::vector<ContrastiveItem>& items);

EncoderParams TrainEncoder(const Corpus& corpus, const EncoderParams& init,
                           EncoderTrainLog* log = nullptr);

}  // namespace damper

#endif  // DAMPER_ENCODER_H_
