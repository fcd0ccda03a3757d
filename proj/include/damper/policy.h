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

#ifndef DAMPER_POLICY_H_
#define DAMPER_POLICY_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "damper/corpus.h"
#include "damper/preference_pair.h"
#include "damper/rng.h"

namespace damper {

inline constexpr std::string_view kEndToken = "</s>";

struct PolicyConfig {
  int feature_dim = 1024;
  int max_len = 4;
  std::uint64_t seed = 1;
};

// Log-linear autoregressive replacement policy. At each decoding step the
// logits are W * phi(context), where phi hashes document words, original
// span words, the step position and the previous token. Vocabulary entry 0
// is the end marker. After `max_len` tokens the end marker is forced.
class PolicyParams {
 public:
  PolicyParams() = default;
  // Zero weights, i.e. the uniform policy.
  PolicyParams(std::vector<std::string> vocab, PolicyConfig config);

  const PolicyConfig& config() const { return config_; }
  const std::vector<std::string>& vocab() const { return vocab_; }
  std::size_t vocab_size() const { return vocab_.size(); }
  std::vector<double>& weights() { return weights_; }
  const std::vector<double>& weights() const { return weights_; }

  // Throws ValidationError for out-of-vocabulary tokens.
  int TokenId(const std::string& token) const;
  void Validate() const;

  bool operator==(const PolicyParams& other) const {
    return vocab_ == other.vocab_ && weights_ == other.weights_ &&
           config_.feature_dim == other.config_.feature_dim &&
           config_.max_len == other.config_.max_len &&
           config_.seed == other.config_.seed;
  }

 private:
  PolicyConfig config_;
  std::vector<std::string> vocab_;
  std::vector<double> weights_;
  std::unordered_map<std::string, int> index_;
};

using SparseFeatures = std::vector<std::pair<std::uint32_t, double>>;

// Step-independent features of one span: bias, document words, original
// span words.
SparseFeatures SpanContextFeatures(const PolicyParams& policy,
                                   std::string_view document_text,
                                   std::string_view original_span);
// Adds the position and previous-token features (prev < 0 at the start).
SparseFeatures StepFeatures(const PolicyParams& policy,
                            const SparseFeatures& span_context, int position,
                            int prev_token);
std::vector<double> StepLogits(const PolicyParams& policy,
                               const SparseFeatures& features);
std::vector<double> LogSoftmax(const std::vector<double>& logits);

// Log-probability of one replacement (end marker included). If `grad` is
// non-null, `scale` times the gradient w.r.t. the weights is added to it.
double SpanLogProb(const PolicyParams& policy, std::string_view document_text,
                   std::string_view original_span,
                   const std::vector<std::string>& tokens,
                   std::vector<double>* grad = nullptr, double scale = 1.0);

// Sum of SpanLogProb over the private spans of `x` in offset order.
double SeqLogProb(const PolicyParams& policy, const Document& x,
                  const std::vector<std::string>& replacements,
                  std::vector<double>* grad = nullptr, double scale = 1.0);

// Ancestral sampling at `temperature` for private span `span_index` of `x`.
std::string SampleReplacement(const PolicyParams& policy, const Document& x,
                              std::size_t span_index, double temperature,
                              Rng& rng);
std::string SampleReplacement(const PolicyParams& policy, const Document& x,
                              std::size_t span_index, double temperature,
                              std::uint64_t seed);
std::string GreedyReplacement(const PolicyParams& policy, const Document& x,
                              std::size_t span_index);

// End marker, a generic word list, and every token of the annotated spans.
std::vector<std::string> BuildVocabulary(const Corpus& corpus);

// Maximum-likelihood pairs mapping each private span to a different private
// span of the same domain.
using ReplacementPair = std::pair<Document, std::vector<std::string>>;
std::vector<ReplacementPair> SiblingPairs(const Corpus& corpus,
                                          std::uint64_t seed);

struct TrainConfig {
  double learning_rate = 0.05;
  int epochs = 5;
  int batch_size = 16;
  std::uint64_t seed = 1;
};

struct TrainLog {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::vector<double> epoch_loss;
};

// Mean negative log-likelihood; `grad` receives its gradient.
double MleLoss(const PolicyParams& policy,
               const std::vector<ReplacementPair>& pairs,
               std::vector<double>* grad = nullptr);

PolicyParams PretrainReference(const std::vector<ReplacementPair>& pairs,
                               const PolicyParams& init,
                               const TrainConfig& config,
                               TrainLog* log = nullptr);

// beta * [(log pi(y_w) - log ref(y_w)) - (log pi(y_l) - log ref(y_l))]
double DpoMargin(const PolicyParams& policy, const PolicyParams& reference,
                 const PreferencePair& pair, double beta);
// -log sigmoid(margin), computed as a stable softplus.
double DpoLoss(const PolicyParams& policy, const PolicyParams& reference,
               const PreferencePair& pair, double beta,
               std::vector<double>* grad = nullptr, double scale = 1.0);
double DpoBatchLoss(const PolicyParams& policy, const PolicyParams& reference,
                    const std::vector<PreferencePair>& pairs, double beta,
                    std::vector<double>* grad = nullptr);

// Starts from the reference and minimizes the mean DPO loss.
PolicyParams TrainDpo(const std::vector<PreferencePair>& prefs,
                      const PolicyParams& reference, double beta,
                      const TrainConfig& config, TrainLog* log = nullptr);

}  // namespace damper

#endif  // DAMPER_POLICY_H_
