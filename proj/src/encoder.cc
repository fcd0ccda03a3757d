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

#include "damper/encoder.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <tuple>

#include "damper/optim.h"
#include "damper/rng.h"
#include "damper/text.h"
#include "spdlog/spdlog.h"

namespace damper {

FeatureVector Featurize(std::string_view text, int dim) {
  if (dim < 16) throw ValidationError("feature dimension must be >= 16");
  const std::string lower = AsciiLower(text);
  const std::u32string cps = DecodeUtf8(lower);
  std::map<std::uint32_t, double> counts;
  auto add = [&](const std::string& key) {
    counts[static_cast<std::uint32_t>(Fnv1a64(key) %
                                      static_cast<std::uint64_t>(dim))] += 1.0;
  };
  for (std::size_t n = 2; n <= 4; ++n) {
    for (std::size_t i = 0; i + n <= cps.size(); ++i) {
      add("c" + std::to_string(n) + ":" +
          EncodeUtf8(std::u32string_view(cps).substr(i, n)));
    }
  }
  for (const auto& w : SplitWhitespace(lower)) add("w:" + w);
  FeatureVector fv;
  fv.dim = dim;
  fv.entries.assign(counts.begin(), counts.end());
  return fv;
}

double Dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double Cosine(std::span<const double> a, std::span<const double> b) {
  const double na = std::sqrt(Dot(a, a));
  const double nb = std::sqrt(Dot(b, b));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(Dot(a, b) / (na * nb), -1.0, 1.0);
}

Embedding Normalized(std::span<const double> v) {
  Embedding out(v.begin(), v.end());
  const double norm = std::sqrt(Dot(v, v));
  if (norm == 0.0) {
    std::fill(out.begin(), out.end(), 0.0);
    if (!out.empty()) out[0] = 1.0;
    return out;
  }
  for (double& x : out) x /= norm;
  return out;
}

EncoderParams EncoderParams::Init(const EncoderConfig& config) {
  EncoderParams params;
  params.config = config;
  params.Validate();
  Rng rng(config.seed);
  params.weights.resize(static_cast<std::size_t>(config.embed_dim) *
                        config.feature_dim);
  for (double& w : params.weights) w = rng.Normal();
  return params;
}

void EncoderParams::Validate() const {
  if (config.embed_dim < 2) throw ValidationError("embed_dim must be >= 2");
  if (config.feature_dim < 16) {
    throw ValidationError("feature_dim must be >= 16");
  }
  if (!(config.tau > 0.0)) throw ValidationError("tau must be positive");
  if (config.batch_size < 2) throw ValidationError("batch_size must be >= 2");
  if (!weights.empty() &&
      weights.size() !=
          static_cast<std::size_t>(config.embed_dim) * config.feature_dim) {
    throw ValidationError("encoder weight shape mismatch");
  }
}

namespace {

// Unnormalized projection u = W f.
std::vector<double> Project(const EncoderParams& params,
                            const FeatureVector& fv) {
  const int d = params.config.embed_dim;
  std::vector<double> u(d, 0.0);
  for (const auto& [idx, count] : fv.entries) {
    for (int r = 0; r < d; ++r) u[r] += params.W(r, static_cast<int>(idx)) * count;
  }
  return u;
}

double LogSumExp(const std::vector<double>& xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

Embedding Encode(const EncoderParams& params, std::string_view text) {
  const FeatureVector fv = Featurize(text, params.config.feature_dim);
  const std::vector<double> u = Project(params, fv);
  for (double x : u) {
    if (!std::isfinite(x)) {
      throw std::runtime_error("non-finite encoder activation (corrupted params)");
    }
  }
  return Normalized(u);
}

double InfoNceLoss(const Embedding& anchor,
                   const std::vector<Embedding>& positives,
                   const std::vector<Embedding>& negatives, double tau) {
  if (positives.empty()) throw ValidationError("InfoNCE needs a positive");
  if (negatives.empty()) throw ValidationError("InfoNCE needs a negative");
  if (!(tau > 0.0)) throw ValidationError("tau must be positive");
  std::vector<double> pos;
  std::vector<double> all;
  for (const auto& a : positives) {
    pos.push_back(Cosine(anchor, a) / tau);
    all.push_back(pos.back());
  }
  for (const auto& n : negatives) all.push_back(Cosine(anchor, n) / tau);
  return LogSumExp(all) - LogSumExp(pos);
}

double ContrastiveLoss(const EncoderParams& params,
                       const ContrastiveBatch& batch,
                       std::vector<double>* grad) {
  const int d = params.config.embed_dim;
  const double tau = params.config.tau;
  const std::size_t n = batch.size();

  std::vector<FeatureVector> features(n);
  std::vector<std::vector<double>> raw(n);
  std::vector<double> norms(n);
  std::vector<Embedding> z(n);
  for (std::size_t i = 0; i < n; ++i) {
    features[i] = Featurize(batch[i].text, params.config.feature_dim);
    raw[i] = Project(params, features[i]);
    norms[i] = std::sqrt(Dot(raw[i], raw[i]));
    z[i] = Normalized(raw[i]);
  }

  std::vector<std::vector<double>> dz(n, std::vector<double>(d, 0.0));
  double total = 0.0;
  int anchors = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!batch[i].is_private) continue;
    std::vector<std::size_t> pos;
    std::vector<std::size_t> neg;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      if (batch[j].is_private && batch[j].domain == batch[i].domain) {
        pos.push_back(j);
      } else {
        neg.push_back(j);
      }
    }
    if (pos.empty() || neg.empty()) continue;

    std::vector<std::size_t> all = pos;
    all.insert(all.end(), neg.begin(), neg.end());
    std::vector<double> logits(all.size());
    for (std::size_t k = 0; k < all.size(); ++k) {
      logits[k] = Dot(z[i], z[all[k]]) / tau;
    }
    const std::vector<double> pos_logits(logits.begin(),
                                         logits.begin() + pos.size());
    const double lse_all = LogSumExp(logits);
    const double lse_pos = LogSumExp(pos_logits);
    total += lse_all - lse_pos;
    ++anchors;

    if (grad == nullptr) continue;
    for (std::size_t k = 0; k < all.size(); ++k) {
      double w = std::exp(logits[k] - lse_all);
      if (k < pos.size()) w -= std::exp(logits[k] - lse_pos);
      const double dc = w / tau;  // dL/dcos(z_i, z_g)
      const std::size_t g = all[k];
      for (int r = 0; r < d; ++r) {
        dz[i][r] += dc * z[g][r];
        dz[g][r] += dc * z[i][r];
      }
    }
  }
  if (anchors == 0) {
    if (grad) grad->assign(params.weights.size(), 0.0);
    return 0.0;
  }
  const double scale = 1.0 / anchors;

  if (grad != nullptr) {
    grad->assign(params.weights.size(), 0.0);
    for (std::size_t m = 0; m < n; ++m) {
      // Zero projections map to a constant vector and carry no gradient.
      if (features[m].entries.empty() || norms[m] == 0.0) continue;
      const double proj = Dot(z[m], dz[m]);
      std::vector<double> du(d);
      for (int r = 0; r < d; ++r) {
        du[r] = scale * (dz[m][r] - z[m][r] * proj) / norms[m];
      }
      for (const auto& [idx, count] : features[m].entries) {
        for (int r = 0; r < d; ++r) {
          (*grad)[static_cast<std::size_t>(r) * params.config.feature_dim +
                  idx] += du[r] * count;
        }
      }
    }
  }
  return total * scale;
}

std::vector<ContrastiveItem> ContrastiveItems(const Corpus& corpus) {
  std::set<std::tuple<std::string, std::string, bool>> seen;
  for (const auto& doc : corpus.documents) {
    if (!doc.domain) continue;
    for (const auto& span : doc.spans) {
      seen.emplace(NormalizeWhitespace(doc.SpanText(span)), *doc.domain,
                   span.is_private);
    }
  }
  std::vector<ContrastiveItem> items;
  for (const auto& [text, domain, is_private] : seen) {
    items.push_back({text, domain, is_private});
  }
  return items;
}

double EvaluateContrastiveLoss(const EncoderParams& params,
                               const std::vector<ContrastiveItem>& items) {
  const auto bs = static_cast<std::size_t>(params.config.batch_size);
  double total = 0.0;
  int batches = 0;
  for (std::size_t b = 0; b < items.size(); b += bs) {
    ContrastiveBatch batch(items.begin() + b,
                           items.begin() + std::min(items.size(), b + bs));
    total += ContrastiveLoss(params, batch);
    ++batches;
  }
  return batches ? total / batches : 0.0;
}

EncoderParams TrainEncoder(const Corpus& corpus, const EncoderParams& init,
                           EncoderTrainLog* log) {
  init.Validate();
  const std::vector<ContrastiveItem> items = ContrastiveItems(corpus);
  std::map<std::string, int> private_per_domain;
  int non_private = 0;
  for (const auto& it : items) {
    if (it.is_private) {
      ++private_per_domain[it.domain];
    } else {
      ++non_private;
    }
  }
  for (const auto& name : corpus.Domains()) {
    if (private_per_domain[name] < 2) {
      throw ValidationError("domain " + name +
                            " has fewer than 2 distinct private spans");
    }
  }
  if (private_per_domain.size() < 2) {
    throw ValidationError("contrastive training needs at least 2 domains");
  }
  if (non_private < 1) {
    throw ValidationError("contrastive training needs a non-private span");
  }

  EncoderParams params = init;
  // Shuffled batches mix domains; evaluation uses a fixed shuffled order so
  // the logged initial and final losses are comparable.
  std::vector<ContrastiveItem> eval_items = items;
  Rng eval_rng(DeriveSeed(params.config.seed, "eval"));
  eval_rng.Shuffle(eval_items);
  const double initial = EvaluateContrastiveLoss(params, eval_items);

  Adam adam(params.weights.size(), params.config.learning_rate);
  Rng rng(DeriveSeed(params.config.seed, "batches"));
  std::vector<std::size_t> order(items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto bs = static_cast<std::size_t>(params.config.batch_size);
  std::vector<double> grad;
  std::vector<double> epoch_losses;
  for (int epoch = 0; epoch < params.config.epochs; ++epoch) {
    rng.Shuffle(order);
    double total = 0.0;
    int batches = 0;
    for (std::size_t b = 0; b < order.size(); b += bs) {
      ContrastiveBatch batch;
      for (std::size_t k = b; k < std::min(order.size(), b + bs); ++k) {
        batch.push_back(items[order[k]]);
      }
      total += ContrastiveLoss(params, batch, &grad);
      ++batches;
      adam.Step(params.weights, grad);
    }
    epoch_losses.push_back(total / std::max(batches, 1));
    spdlog::debug("encoder epoch {} loss {:.6f}", epoch, epoch_losses.back());
  }
  const double final_loss = EvaluateContrastiveLoss(params, eval_items);
  spdlog::info("encoder contrastive loss {:.6f} -> {:.6f}", initial,
               final_loss);
  if (log != nullptr) {
    log->initial_loss = initial;
    log->final_loss = final_loss;
    log->epoch_loss = std::move(epoch_losses);
  }
  return params;
}

}  // namespace damper
