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

#include "damper/policy.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "damper/optim.h"
#include "damper/text.h"
#include "spdlog/spdlog.h"

namespace damper {
namespace {

constexpr const char* kGenericWords[] = {
    "case",     "certain", "concern",  "condition", "detail",  "event",
    "factor",   "general", "issue",    "item",      "matter",  "minor",
    "personal", "private", "problem",  "question",  "recent",  "record",
    "relevant", "routine", "situation", "standard", "thing",   "topic",
    "unspecified"};

// Lower-cased words with surrounding punctuation removed.
std::vector<std::string> Words(std::string_view text) {
  std::vector<std::string> out;
  for (auto w : SplitWhitespace(AsciiLower(text))) {
    auto keep = [](char c) {
      return std::isalnum(static_cast<unsigned char>(c)) ||
             static_cast<unsigned char>(c) >= 0x80;
    };
    std::size_t b = 0;
    std::size_t e = w.size();
    while (b < e && !keep(w[b])) ++b;
    while (e > b && !keep(w[e - 1])) --e;
    if (e > b) out.push_back(w.substr(b, e - b));
  }
  return out;
}

void AddFeature(std::map<std::uint32_t, double>& acc, const std::string& key,
                int dim, double value) {
  acc[static_cast<std::uint32_t>(Fnv1a64(key) %
                                 static_cast<std::uint64_t>(dim))] += value;
}

double LogSumExp(const std::vector<double>& xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

std::vector<std::string> ReplacementTokens(const std::string& replacement) {
  return SplitWhitespace(replacement);
}

}  // namespace

PolicyParams::PolicyParams(std::vector<std::string> vocab, PolicyConfig config)
    : config_(config), vocab_(std::move(vocab)) {
  weights_.assign(vocab_.size() * static_cast<std::size_t>(config_.feature_dim),
                  0.0);
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    index_.emplace(vocab_[i], static_cast<int>(i));
  }
  Validate();
}

int PolicyParams::TokenId(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end()) {
    throw ValidationError("token '" + token + "' is not in the policy vocabulary");
  }
  return it->second;
}

void PolicyParams::Validate() const {
  if (vocab_.size() < 4) throw ValidationError("policy vocabulary needs >= 4 tokens");
  if (vocab_[0] != kEndToken) throw ValidationError("vocab[0] must be the end marker");
  if (index_.size() != vocab_.size()) {
    throw ValidationError("duplicate tokens in policy vocabulary");
  }
  if (config_.max_len < 1) throw ValidationError("max_len must be >= 1");
  if (config_.feature_dim < 16) throw ValidationError("feature_dim must be >= 16");
  if (weights_.size() != vocab_.size() * static_cast<std::size_t>(config_.feature_dim)) {
    throw ValidationError("policy weight shape mismatch");
  }
  for (double w : weights_) {
    if (!std::isfinite(w)) throw ValidationError("non-finite policy weight");
  }
}

SparseFeatures SpanContextFeatures(const PolicyParams& policy,
                                   std::string_view document_text,
                                   std::string_view original_span) {
  const int dim = policy.config().feature_dim;
  std::map<std::uint32_t, double> acc;
  AddFeature(acc, "b", dim, 1.0);
  std::set<std::string> doc_words;
  for (auto& w : Words(document_text)) doc_words.insert(std::move(w));
  for (const auto& w : doc_words) AddFeature(acc, "d:" + w, dim, 1.0);
  for (const auto& w : Words(original_span)) AddFeature(acc, "s:" + w, dim, 1.0);
  return {acc.begin(), acc.end()};
}

SparseFeatures StepFeatures(const PolicyParams& policy,
                            const SparseFeatures& span_context, int position,
                            int prev_token) {
  const int dim = policy.config().feature_dim;
  std::map<std::uint32_t, double> acc(span_context.begin(), span_context.end());
  AddFeature(acc, "p:" + std::to_string(position), dim, 1.0);
  AddFeature(acc, prev_token < 0 ? "t:^" : "t:" + std::to_string(prev_token),
             dim, 1.0);
  return {acc.begin(), acc.end()};
}

std::vector<double> StepLogits(const PolicyParams& policy,
                               const SparseFeatures& features) {
  const std::size_t v = policy.vocab_size();
  const auto dim = static_cast<std::size_t>(policy.config().feature_dim);
  const auto& w = policy.weights();
  std::vector<double> logits(v, 0.0);
  for (std::size_t t = 0; t < v; ++t) {
    double s = 0.0;
    for (const auto& [idx, val] : features) s += w[t * dim + idx] * val;
    logits[t] = s;
  }
  return logits;
}

std::vector<double> LogSoftmax(const std::vector<double>& logits) {
  const double lse = LogSumExp(logits);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

double SpanLogProb(const PolicyParams& policy, std::string_view document_text,
                   std::string_view original_span,
                   const std::vector<std::string>& tokens,
                   std::vector<double>* grad, double scale) {
  const int max_len = policy.config().max_len;
  if (static_cast<int>(tokens.size()) > max_len) {
    throw ValidationError("replacement longer than max_len");
  }
  std::vector<int> ids;
  for (const auto& t : tokens) ids.push_back(policy.TokenId(t));
  if (static_cast<int>(ids.size()) < max_len) ids.push_back(0);

  const auto dim = static_cast<std::size_t>(policy.config().feature_dim);
  const SparseFeatures context =
      SpanContextFeatures(policy, document_text, original_span);
  double total = 0.0;
  int prev = -1;
  for (std::size_t pos = 0; pos < ids.size(); ++pos) {
    const SparseFeatures phi =
        StepFeatures(policy, context, static_cast<int>(pos), prev);
    const std::vector<double> logp = LogSoftmax(StepLogits(policy, phi));
    total += logp[ids[pos]];
    if (grad != nullptr) {
      for (std::size_t t = 0; t < logp.size(); ++t) {
        const double coeff =
            scale * ((static_cast<int>(t) == ids[pos] ? 1.0 : 0.0) -
                     std::exp(logp[t]));
        for (const auto& [idx, val] : phi) (*grad)[t * dim + idx] += coeff * val;
      }
    }
    prev = ids[pos];
  }
  // Reaching max_len forces the end marker: probability one, no gradient.
  return total;
}

double SeqLogProb(const PolicyParams& policy, const Document& x,
                  const std::vector<std::string>& replacements,
                  std::vector<double>* grad, double scale) {
  const auto spans = x.PrivateSpans();
  if (spans.size() != replacements.size()) {
    throw ValidationError("document " + x.id + " has " +
                          std::to_string(spans.size()) +
                          " private spans but " +
                          std::to_string(replacements.size()) + " replacements");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    total += SpanLogProb(policy, x.text, x.SpanText(spans[i]),
                         ReplacementTokens(replacements[i]), grad, scale);
  }
  return total;
}

namespace {

std::string Decode(const PolicyParams& policy, const Document& x,
                   std::size_t span_index, double temperature, Rng* rng) {
  const auto spans = x.PrivateSpans();
  if (span_index >= spans.size()) {
    throw ValidationError("span index out of range for document " + x.id);
  }
  const SparseFeatures context =
      SpanContextFeatures(policy, x.text, x.SpanText(spans[span_index]));
  std::vector<std::string> out;
  int prev = -1;
  for (int pos = 0; pos < policy.config().max_len; ++pos) {
    const std::vector<double> logits =
        StepLogits(policy, StepFeatures(policy, context, pos, prev));
    int token = 0;
    if (rng == nullptr) {
      token = static_cast<int>(std::max_element(logits.begin(), logits.end()) -
                               logits.begin());
    } else {
      std::vector<double> scaled(logits.size());
      for (std::size_t i = 0; i < logits.size(); ++i) {
        scaled[i] = logits[i] / temperature;
      }
      const std::vector<double> logp = LogSoftmax(scaled);
      const double u = rng->Uniform();
      double cdf = 0.0;
      token = static_cast<int>(logp.size()) - 1;
      for (std::size_t i = 0; i < logp.size(); ++i) {
        cdf += std::exp(logp[i]);
        if (u < cdf) {
          token = static_cast<int>(i);
          break;
        }
      }
    }
    if (token == 0) break;
    out.push_back(policy.vocab()[token]);
    prev = token;
  }
  return JoinTokens(out);
}

}  // namespace

std::string SampleReplacement(const PolicyParams& policy, const Document& x,
                              std::size_t span_index, double temperature,
                              Rng& rng) {
  if (!(temperature > 0.0)) throw ValidationError("temperature must be positive");
  return Decode(policy, x, span_index, temperature, &rng);
}

std::string SampleReplacement(const PolicyParams& policy, const Document& x,
                              std::size_t span_index, double temperature,
                              std::uint64_t seed) {
  Rng rng(seed);
  return SampleReplacement(policy, x, span_index, temperature, rng);
}

std::string GreedyReplacement(const PolicyParams& policy, const Document& x,
                              std::size_t span_index) {
  return Decode(policy, x, span_index, 1.0, nullptr);
}

std::vector<std::string> BuildVocabulary(const Corpus& corpus) {
  std::set<std::string> tokens(std::begin(kGenericWords), std::end(kGenericWords));
  for (const auto& doc : corpus.documents) {
    for (const auto& span : doc.spans) {
      for (auto& w : Words(doc.SpanText(span))) tokens.insert(std::move(w));
    }
  }
  std::vector<std::string> vocab = {std::string(kEndToken)};
  vocab.insert(vocab.end(), tokens.begin(), tokens.end());
  return vocab;
}

std::vector<ReplacementPair> SiblingPairs(const Corpus& corpus,
                                          std::uint64_t seed) {
  std::map<std::string, std::vector<std::string>> by_domain;
  for (const auto& doc : corpus.documents) {
    if (!doc.domain) continue;
    auto& bucket = by_domain[*doc.domain];
    for (const auto& s : doc.PrivateSpans()) {
      bucket.push_back(JoinTokens(Words(doc.SpanText(s))));
    }
  }
  for (auto& [name, texts] : by_domain) {
    std::sort(texts.begin(), texts.end());
    texts.erase(std::unique(texts.begin(), texts.end()), texts.end());
  }
  std::vector<ReplacementPair> pairs;
  for (const auto& doc : corpus.documents) {
    if (!doc.domain) continue;
    const auto spans = doc.PrivateSpans();
    if (spans.empty()) continue;
    const auto& pool = by_domain[*doc.domain];
    if (pool.size() < 2) continue;
    Rng rng(DeriveSeed(seed, doc.id));
    std::vector<std::string> replacements;
    for (const auto& s : spans) {
      const std::string original = JoinTokens(Words(doc.SpanText(s)));
      std::string sibling;
      do {
        sibling = pool[rng.UniformInt(pool.size())];
      } while (sibling == original);
      replacements.push_back(sibling);
    }
    pairs.emplace_back(doc, std::move(replacements));
  }
  return pairs;
}

double MleLoss(const PolicyParams& policy,
               const std::vector<ReplacementPair>& pairs,
               std::vector<double>* grad) {
  if (pairs.empty()) throw ValidationError("empty training set");
  if (grad) grad->assign(policy.weights().size(), 0.0);
  const double scale = 1.0 / static_cast<double>(pairs.size());
  double total = 0.0;
  for (const auto& [doc, replacements] : pairs) {
    // Gradient of the negative mean log-likelihood.
    total -= SeqLogProb(policy, doc, replacements, grad, -scale);
  }
  return total * scale;
}

PolicyParams PretrainReference(const std::vector<ReplacementPair>& pairs,
                               const PolicyParams& init,
                               const TrainConfig& config, TrainLog* log) {
  if (pairs.empty()) throw ValidationError("empty training set");
  PolicyParams policy = init;
  const double initial = MleLoss(policy, pairs);
  Adam adam(policy.weights().size(), config.learning_rate);
  Rng rng(config.seed);
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<double> grad;
  std::vector<double> epoch_losses;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.Shuffle(order);
    double total = 0.0;
    int batches = 0;
    for (std::size_t b = 0; b < order.size();
         b += static_cast<std::size_t>(config.batch_size)) {
      std::vector<ReplacementPair> batch;
      for (std::size_t k = b;
           k < std::min(order.size(), b + static_cast<std::size_t>(config.batch_size));
           ++k) {
        batch.push_back(pairs[order[k]]);
      }
      total += MleLoss(policy, batch, &grad);
      ++batches;
      adam.Step(policy.weights(), grad);
    }
    epoch_losses.push_back(total / std::max(batches, 1));
    spdlog::debug("reference epoch {} nll {:.6f}", epoch, epoch_losses.back());
  }
  const double final_loss = MleLoss(policy, pairs);
  spdlog::info("reference policy nll {:.4f} -> {:.4f}", initial, final_loss);
  if (log != nullptr) {
    log->initial_loss = initial;
    log->final_loss = final_loss;
    log->epoch_loss = std::move(epoch_losses);
  }
  return policy;
}

double DpoMargin(const PolicyParams& policy, const PolicyParams& reference,
                 const PreferencePair& pair, double beta) {
  const double dw = SeqLogProb(policy, pair.x, pair.winner.replacements) -
                    SeqLogProb(reference, pair.x, pair.winner.replacements);
  const double dl = SeqLogProb(policy, pair.x, pair.loser.replacements) -
                    SeqLogProb(reference, pair.x, pair.loser.replacements);
  return beta * (dw - dl);
}

double DpoLoss(const PolicyParams& policy, const PolicyParams& reference,
               const PreferencePair& pair, double beta,
               std::vector<double>* grad, double scale) {
  if (!(beta > 0.0)) throw ValidationError("beta must be positive");
  const double margin = DpoMargin(policy, reference, pair, beta);
  // softplus(-m) = max(-m, 0) + log1p(exp(-|m|))
  const double loss = std::max(-margin, 0.0) + std::log1p(std::exp(-std::abs(margin)));
  if (grad != nullptr) {
    // dL/dm = -sigmoid(-m)
    const double sig_neg = margin >= 0.0
                               ? std::exp(-margin) / (1.0 + std::exp(-margin))
                               : 1.0 / (1.0 + std::exp(margin));
    const double coeff = -sig_neg * beta * scale;
    SeqLogProb(policy, pair.x, pair.winner.replacements, grad, coeff);
    SeqLogProb(policy, pair.x, pair.loser.replacements, grad, -coeff);
  }
  return loss;
}

double DpoBatchLoss(const PolicyParams& policy, const PolicyParams& reference,
                    const std::vector<PreferencePair>& pairs, double beta,
                    std::vector<double>* grad) {
  if (pairs.empty()) throw ValidationError("empty preference set");
  if (grad) grad->assign(policy.weights().size(), 0.0);
  const double scale = 1.0 / static_cast<double>(pairs.size());
  double total = 0.0;
  for (const auto& p : pairs) total += DpoLoss(policy, reference, p, beta, grad, scale);
  return total * scale;
}

PolicyParams TrainDpo(const std::vector<PreferencePair>& prefs,
                      const PolicyParams& reference, double beta,
                      const TrainConfig& config, TrainLog* log) {
  if (prefs.empty()) throw ValidationError("empty preference set");
  PolicyParams policy = reference;
  const double initial = DpoBatchLoss(policy, reference, prefs, beta);
  Adam adam(policy.weights().size(), config.learning_rate);
  Rng rng(config.seed);
  std::vector<std::size_t> order(prefs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<double> grad;
  std::vector<double> epoch_losses;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.Shuffle(order);
    double total = 0.0;
    int batches = 0;
    for (std::size_t b = 0; b < order.size();
         b += static_cast<std::size_t>(config.batch_size)) {
      std::vector<PreferencePair> batch;
      for (std::size_t k = b;
           k < std::min(order.size(), b + static_cast<std::size_t>(config.batch_size));
           ++k) {
        batch.push_back(prefs[order[k]]);
      }
      total += DpoBatchLoss(policy, reference, batch, beta, &grad);
      ++batches;
      adam.Step(policy.weights(), grad);
    }
    epoch_losses.push_back(total / std::max(batches, 1));
    spdlog::debug("dpo epoch {} loss {:.6f}", epoch, epoch_losses.back());
  }
  const double final_loss = DpoBatchLoss(policy, reference, prefs, beta);
  spdlog::info("dpo loss {:.4f} -> {:.4f}", initial, final_loss);
  if (log != nullptr) {
    log->initial_loss = initial;
    log->final_loss = final_loss;
    log->epoch_loss = std::move(epoch_losses);
  }
  return policy;
}

}  // namespace damper
