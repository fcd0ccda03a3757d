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

#include "damper/config.h"

#include <fstream>
#include <set>
#include <sstream>

#include "damper/rng.h"
#include "damper/text.h"

namespace damper {
namespace {

using nlohmann::json;

void CheckKeys(const json& j, const std::string& section,
               const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ValidationError("config section '" + section + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) {
      throw ValidationError("unknown config key '" + section + "." + key + "'");
    }
  }
}

template <typename T>
void Read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

json TrainToJson(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size}};
}

void TrainFromJson(const json& j, const std::string& section, TrainConfig& c) {
  CheckKeys(j, section, {"learning_rate", "epochs", "batch_size"});
  Read(j, "learning_rate", c.learning_rate);
  Read(j, "epochs", c.epochs);
  Read(j, "batch_size", c.batch_size);
  if (c.epochs < 0 || c.batch_size < 1 || !(c.learning_rate > 0.0)) {
    throw ValidationError("invalid training settings in '" + section + "'");
  }
}

}  // namespace

PipelineConfig PipelineConfig::Default() {
  PipelineConfig c;
  c.corpus = DefaultSynthSpec();
  c.reference_train = {0.05, 8, 16, 1};
  c.dpo_train = {0.05, 10, 16, 1};
  ApplySeed(c, c.seed);
  return c;
}

void ApplySeed(PipelineConfig& config, std::uint64_t seed) {
  config.seed = seed;
  config.corpus.seed = DeriveSeed(seed, "corpus");
  config.encoder.seed = DeriveSeed(seed, "encoder");
  config.prototypes.seed = DeriveSeed(seed, "prototypes");
  config.preference.seed = DeriveSeed(seed, "preference");
  config.policy.seed = DeriveSeed(seed, "policy");
  config.reference_train.seed = DeriveSeed(seed, "reference");
  config.dpo_train.seed = DeriveSeed(seed, "dpo");
}

json ConfigToJson(const PipelineConfig& c) {
  json corpus = SynthSpecToJson(c.corpus);
  corpus.erase("seed");
  json prototypes = {{"method", MethodName(c.prototypes.method)},
                     {"kmeans_k", c.prototypes.kmeans_k}};
  prototypes["finch_level"] =
      c.prototypes.finch_level ? json(*c.prototypes.finch_level) : json(nullptr);
  json budget = {{"eps_text", c.budget.eps_text},
                 {"r1", c.budget.r1},
                 {"r2", c.budget.r2}};
  budget["n_sp_max"] = c.n_sp_max ? json(*c.n_sp_max) : json(nullptr);
  json chunker = json::object();
  chunker["triggers"] =
      c.chunker.triggers ? json(c.chunker.triggers->string()) : json(nullptr);
  chunker["function_words"] = c.chunker.function_words
                                  ? json(c.chunker.function_words->string())
                                  : json(nullptr);
  return {
      {"seed", c.seed},
      {"corpus", corpus},
      {"encoder",
       {{"embed_dim", c.encoder.embed_dim},
        {"feature_dim", c.encoder.feature_dim},
        {"tau", c.encoder.tau},
        {"learning_rate", c.encoder.learning_rate},
        {"epochs", c.encoder.epochs},
        {"batch_size", c.encoder.batch_size}}},
      {"prototypes", prototypes},
      {"preference",
       {{"alpha", c.preference.alpha},
        {"n", c.preference.num_candidates},
        {"temperature", c.preference.temperature}}},
      {"policy",
       {{"feature_dim", c.policy.feature_dim},
        {"max_len", c.policy.max_len},
        {"beta", c.beta},
        {"reference", TrainToJson(c.reference_train)},
        {"dpo", TrainToJson(c.dpo_train)}}},
      {"budget", budget},
      {"eval",
       {{"test_fraction", c.eval.test_fraction},
        {"alpha_sweep", c.eval.alpha_sweep}}},
      {"chunker", chunker}};
}

PipelineConfig ConfigFromJson(const json& j) {
  PipelineConfig c = PipelineConfig::Default();
  try {
    CheckKeys(j, "<root>",
              {"seed", "corpus", "encoder", "prototypes", "preference",
               "policy", "budget", "eval", "chunker"});
    std::uint64_t seed = c.seed;
    Read(j, "seed", seed);
    if (j.contains("corpus")) {
      CheckKeys(j["corpus"], "corpus",
                {"domains", "docs_per_domain", "spans_per_doc"});
      c.corpus = SynthSpecFromJson(j["corpus"]);
      ValidateSynthSpec(c.corpus);
    }
    if (j.contains("encoder")) {
      const json& e = j["encoder"];
      CheckKeys(e, "encoder",
                {"embed_dim", "feature_dim", "tau", "learning_rate", "epochs",
                 "batch_size"});
      Read(e, "embed_dim", c.encoder.embed_dim);
      Read(e, "feature_dim", c.encoder.feature_dim);
      Read(e, "tau", c.encoder.tau);
      Read(e, "learning_rate", c.encoder.learning_rate);
      Read(e, "epochs", c.encoder.epochs);
      Read(e, "batch_size", c.encoder.batch_size);
    }
    if (j.contains("prototypes")) {
      const json& p = j["prototypes"];
      CheckKeys(p, "prototypes", {"method", "kmeans_k", "finch_level"});
      if (p.contains("method")) {
        c.prototypes.method = ParseMethod(p["method"].get<std::string>());
      }
      Read(p, "kmeans_k", c.prototypes.kmeans_k);
      if (p.contains("finch_level") && !p["finch_level"].is_null()) {
        c.prototypes.finch_level = p["finch_level"].get<int>();
      }
    }
    if (j.contains("preference")) {
      const json& p = j["preference"];
      CheckKeys(p, "preference", {"alpha", "n", "temperature"});
      Read(p, "alpha", c.preference.alpha);
      Read(p, "n", c.preference.num_candidates);
      Read(p, "temperature", c.preference.temperature);
      if (!(c.preference.alpha >= 0.0 && c.preference.alpha <= 1.0)) {
        throw ValidationError("preference.alpha must lie in [0, 1]");
      }
      if (c.preference.num_candidates < 2) {
        throw ValidationError("preference.n must be >= 2");
      }
      if (!(c.preference.temperature > 0.0)) {
        throw ValidationError("preference.temperature must be positive");
      }
    }
    if (j.contains("policy")) {
      const json& p = j["policy"];
      CheckKeys(p, "policy",
                {"feature_dim", "max_len", "beta", "reference", "dpo"});
      Read(p, "feature_dim", c.policy.feature_dim);
      Read(p, "max_len", c.policy.max_len);
      Read(p, "beta", c.beta);
      if (p.contains("reference")) {
        TrainFromJson(p["reference"], "policy.reference", c.reference_train);
      }
      if (p.contains("dpo")) TrainFromJson(p["dpo"], "policy.dpo", c.dpo_train);
      if (!(c.beta > 0.0)) throw ValidationError("policy.beta must be positive");
    }
    if (j.contains("budget")) {
      const json& b = j["budget"];
      CheckKeys(b, "budget", {"eps_text", "eps", "r1", "r2", "n_sp_max"});
      if (b.contains("eps_text") && b.contains("eps")) {
        throw ValidationError("budget: give eps_text or eps, not both");
      }
      Read(b, "eps_text", c.budget.eps_text);
      if (b.contains("eps")) {
        c.budget.eps_hyper = b["eps"].get<double>();
        c.budget.eps_text = 2.0 * *c.budget.eps_hyper;
      }
      Read(b, "r1", c.budget.r1);
      Read(b, "r2", c.budget.r2);
      if (b.contains("n_sp_max") && !b["n_sp_max"].is_null()) {
        c.n_sp_max = b["n_sp_max"].get<int>();
        c.budget.n_sp_max = *c.n_sp_max;
      }
      c.budget.Validate();
    }
    if (j.contains("eval")) {
      const json& e = j["eval"];
      CheckKeys(e, "eval", {"test_fraction", "alpha_sweep"});
      Read(e, "test_fraction", c.eval.test_fraction);
      Read(e, "alpha_sweep", c.eval.alpha_sweep);
      if (!(c.eval.test_fraction > 0.0 && c.eval.test_fraction < 1.0)) {
        throw ValidationError("eval.test_fraction must lie in (0, 1)");
      }
      for (double a : c.eval.alpha_sweep) {
        if (!(a >= 0.0 && a <= 1.0)) {
          throw ValidationError("eval.alpha_sweep values must lie in [0, 1]");
        }
      }
    }
    if (j.contains("chunker")) {
      const json& k = j["chunker"];
      CheckKeys(k, "chunker", {"triggers", "function_words"});
      if (k.contains("triggers") && !k["triggers"].is_null()) {
        c.chunker.triggers = k["triggers"].get<std::string>();
      }
      if (k.contains("function_words") && !k["function_words"].is_null()) {
        c.chunker.function_words = k["function_words"].get<std::string>();
      }
    }
    ApplySeed(c, seed);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad config: ") + e.what());
  }
  return c;
}

PipelineConfig LoadConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::exception& e) {
    throw ValidationError("config " + path.string() + ": " + e.what());
  }
  PipelineConfig c = ConfigFromJson(j);
  // Relative table paths resolve against the config's directory.
  const auto base = path.parent_path();
  if (c.chunker.triggers && c.chunker.triggers->is_relative()) {
    c.chunker.triggers = base / *c.chunker.triggers;
  }
  if (c.chunker.function_words && c.chunker.function_words->is_relative()) {
    c.chunker.function_words = base / *c.chunker.function_words;
  }
  return c;
}

ChunkerTables ResolveChunkerTables(const ChunkerConfig& config) {
  auto read = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw ValidationError("cannot open chunker table " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ChunkerTables::ParseTable(ss.str());
  };
  ChunkerTables tables = ChunkerTables::Default();
  if (config.triggers) tables.triggers = read(*config.triggers);
  if (config.function_words) {
    tables.function_words.clear();
    for (auto& w : read(*config.function_words)) {
      tables.function_words.insert(AsciiLower(w));
    }
  }
  return tables;
}

}  // namespace damper
