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

// damper: command-line front end for the rewriting pipeline.

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "damper/chunker.h"
#include "damper/config.h"
#include "damper/corpus.h"
#include "damper/dp_sampler.h"
#include "damper/encoder.h"
#include "damper/localizer.h"
#include "damper/model_io.h"
#include "damper/pipeline.h"
#include "damper/policy.h"
#include "damper/preference.h"
#include "damper/prototypes.h"
#include "damper/text.h"
#include "json.hpp"
#include "spdlog/sinks/stdout_sinks.h"
#include "spdlog/spdlog.h"

namespace {

using damper::PipelineConfig;
using nlohmann::json;

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "-";
  bool verbose = false;
  bool quiet = false;
};

PipelineConfig ResolveConfig(const Globals& g) {
  PipelineConfig c = g.config_path.empty() ? PipelineConfig::Default()
                                           : damper::LoadConfig(g.config_path);
  if (g.seed) damper::ApplySeed(c, *g.seed);
  return c;
}

// Writes to --out, or stdout for "-".
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path != "-") {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      if (!*file_) throw damper::ValidationError("cannot write " + path);
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

std::string ReadText(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw damper::ValidationError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void RequireFile(CLI::Option* opt) { opt->required()->check(CLI::ExistingFile); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Span-level differentially private text rewriting"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "JSON config file")
      ->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Global seed");
  app.add_option("--out", g.out, "Output path ('-' for stdout)");
  app.add_flag("-v,--verbose", g.verbose, "Debug logging");
  app.add_flag("-q,--quiet", g.quiet, "Only log warnings and errors");

  // gen-corpus
  auto* gen = app.add_subcommand("gen-corpus", "Generate a synthetic corpus");
  int docs_per_domain = 0;
  gen->add_option("--docs-per-domain", docs_per_domain);

  // chunk
  auto* chunk = app.add_subcommand("chunk", "Segment text into candidate chunks");
  std::string chunk_in;
  std::string chunk_text;
  std::string variant = "rule";
  int max_len = 3;
  chunk->add_option("--in", chunk_in, "Corpus JSONL")->check(CLI::ExistingFile);
  chunk->add_option("--text", chunk_text, "Literal text");
  chunk->add_option("--variant", variant, "rule or ngram")
      ->check(CLI::IsMember({"rule", "ngram"}));
  chunk->add_option("--max-len", max_len, "Longest n-gram for --variant ngram")
      ->check(CLI::PositiveNumber);

  // train-encoder
  auto* tenc = app.add_subcommand("train-encoder", "Train the span encoder");
  std::string corpus_path;
  RequireFile(tenc->add_option("--in", corpus_path, "Training corpus"));

  // build-prototypes
  auto* bproto = app.add_subcommand("build-prototypes", "Cluster domain prototypes");
  std::string model_path;
  std::string method;
  RequireFile(bproto->add_option("--model", model_path, "Encoder file"));
  RequireFile(bproto->add_option("--in,--corpus", corpus_path, "Training corpus"));
  bproto->add_option("--method", method, "finch, kmeans or mean");

  // pretrain-ref
  auto* pref = app.add_subcommand("pretrain-ref", "Pretrain the reference policy");
  RequireFile(pref->add_option("--in", corpus_path, "Training corpus"));

  // build-preferences
  auto* bpref = app.add_subcommand("build-preferences", "Build preference pairs");
  std::string protos_path;
  std::string ref_path;
  std::optional<double> alpha;
  std::optional<int> n_candidates;
  RequireFile(bpref->add_option("--model", model_path, "Encoder file"));
  RequireFile(bpref->add_option("--protos", protos_path, "Prototype file"));
  RequireFile(bpref->add_option("--ref", ref_path, "Reference policy file"));
  RequireFile(bpref->add_option("--in", corpus_path, "Training corpus"));
  bpref->add_option("--alpha", alpha, "Reward trade-off");
  bpref->add_option("--n", n_candidates, "Candidates per document");

  // train-dpo
  auto* tdpo = app.add_subcommand("train-dpo", "Align the policy on preferences");
  std::string prefs_path;
  std::optional<double> beta;
  RequireFile(tdpo->add_option("--ref", ref_path, "Reference policy file"));
  RequireFile(tdpo->add_option("--prefs", prefs_path, "Preference JSONL"));
  tdpo->add_option("--beta", beta, "DPO temperature");

  // detect
  auto* det = app.add_subcommand("detect", "Localize privacy spans");
  RequireFile(det->add_option("--model", model_path, "Encoder file"));
  RequireFile(det->add_option("--protos", protos_path, "Prototype file"));
  RequireFile(det->add_option("--in", corpus_path, "Corpus JSONL"));

  // rewrite
  auto* rew = app.add_subcommand("rewrite", "Detect and rewrite privately");
  std::string policy_path;
  std::string rewrite_text;
  std::optional<double> eps_text;
  std::optional<double> r1;
  std::optional<double> r2;
  std::optional<int> nsp_max;
  RequireFile(rew->add_option("--model", model_path, "Encoder file"));
  RequireFile(rew->add_option("--protos", protos_path, "Prototype file"));
  RequireFile(rew->add_option("--policy", policy_path, "Policy file"));
  rew->add_option("--in", corpus_path, "Corpus JSONL")->check(CLI::ExistingFile);
  rew->add_option("--text", rewrite_text, "Literal text");
  rew->add_option("--eps-text", eps_text, "Query budget");
  rew->add_option("--r1", r1, "Lower clipping bound");
  rew->add_option("--r2", r2, "Upper clipping bound");
  rew->add_option("--nsp-max", nsp_max, "Token cap per query");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Evaluate a trained bundle");
  std::string workdir;
  std::string sweep_train;
  RequireFile(eval->add_option("--in", corpus_path, "Held-out corpus"));
  eval->add_option("--workdir", workdir, "Directory written by 'train'")
      ->required()
      ->check(CLI::ExistingDirectory);
  eval->add_option("--sweep-train", sweep_train,
                   "Training corpus for the alpha sweep")
      ->check(CLI::ExistingFile);

  // audit-dp
  auto* audit = app.add_subcommand("audit-dp", "Empirical DP ratio audit");
  double a_r1 = 5.0;
  double a_r2 = 20.0;
  double a_tau2 = 10.4;
  int a_vocab = 8;
  long a_trials = 100000;
  audit->add_option("--r1", a_r1);
  audit->add_option("--r2", a_r2);
  audit->add_option("--tau2", a_tau2);
  audit->add_option("--vocab", a_vocab);
  audit->add_option("--trials", a_trials);

  // train
  auto* train = app.add_subcommand("train", "Run every offline stage and evaluate");
  std::string train_in;
  train->add_option("--workdir", workdir, "Artifact directory")->required();
  train->add_option("--in", train_in, "Corpus (default: generated)")
      ->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  auto sink = std::make_shared<spdlog::sinks::stderr_sink_mt>();
  spdlog::set_default_logger(std::make_shared<spdlog::logger>("damper", sink));
  spdlog::set_level(g.verbose ? spdlog::level::debug
                    : g.quiet ? spdlog::level::warn
                              : spdlog::level::info);

  try {
    PipelineConfig config = ResolveConfig(g);

    if (*gen) {
      if (docs_per_domain > 0) config.corpus.docs_per_domain = docs_per_domain;
      damper::ValidateSynthSpec(config.corpus);
      Output out(g.out);
      damper::WriteCorpus(damper::SynthCorpus(config.corpus), out.stream());
    } else if (*chunk) {
      const damper::TextChunker chunker(damper::ResolveChunkerTables(config.chunker));
      auto segment = [&](const std::string& text) {
        return variant == "ngram" ? damper::SegmentNgrams(text, max_len)
                                  : chunker.Segment(text);
      };
      auto emit = [&](std::ostream& os, const std::string& id,
                      const std::vector<damper::Chunk>& chunks) {
        json arr = json::array();
        for (const auto& c : chunks) {
          arr.push_back({{"start", c.start}, {"end", c.end}, {"text", c.text}});
        }
        os << json{{"id", id}, {"chunks", arr}}.dump() << '\n';
      };
      Output out(g.out);
      if (!chunk_text.empty()) {
        emit(out.stream(), "text", segment(chunk_text));
      } else if (!chunk_in.empty()) {
        for (const auto& doc : damper::LoadCorpus(chunk_in).documents) {
          emit(out.stream(), doc.id, segment(doc.text));
        }
      } else {
        throw damper::ValidationError("chunk needs --in or --text");
      }
    } else if (*tenc) {
      if (g.out == "-") throw damper::ValidationError("--out is required");
      const auto corpus = damper::LoadCorpus(corpus_path);
      damper::EncoderTrainLog log;
      const auto enc = damper::TrainEncoder(
          corpus, damper::EncoderParams::Init(config.encoder), &log);
      damper::SaveEncoder(enc, g.out);
    } else if (*bproto) {
      if (!method.empty()) config.prototypes.method = damper::ParseMethod(method);
      const auto protos = damper::BuildPrototypes(
          damper::LoadCorpus(corpus_path), damper::LoadEncoder(model_path),
          config.prototypes);
      Output out(g.out);
      out.stream() << damper::CanonicalJson(damper::PrototypesToJson(protos));
    } else if (*pref) {
      if (g.out == "-") throw damper::ValidationError("--out is required");
      const auto corpus = damper::LoadCorpus(corpus_path);
      damper::PolicyParams init(damper::BuildVocabulary(corpus), config.policy);
      const auto ref = damper::PretrainReference(
          damper::SiblingPairs(corpus, config.policy.seed), init,
          config.reference_train);
      damper::SavePolicy(ref, g.out);
    } else if (*bpref) {
      if (alpha) config.preference.alpha = *alpha;
      if (n_candidates) config.preference.num_candidates = *n_candidates;
      const auto prefs = damper::BuildPreferences(
          damper::LoadCorpus(corpus_path), damper::LoadPolicy(ref_path),
          damper::LoadPrototypes(protos_path), damper::LoadEncoder(model_path),
          config.preference);
      Output out(g.out);
      damper::WritePreferences(prefs, out.stream());
    } else if (*tdpo) {
      if (g.out == "-") throw damper::ValidationError("--out is required");
      if (beta) config.beta = *beta;
      damper::TrainLog log;
      const auto policy =
          damper::TrainDpo(damper::LoadPreferences(prefs_path),
                           damper::LoadPolicy(ref_path), config.beta,
                           config.dpo_train, &log);
      damper::SavePolicy(policy, g.out);
    } else if (*det) {
      const auto encoder = damper::LoadEncoder(model_path);
      const auto protos = damper::LoadPrototypes(protos_path);
      const damper::TextChunker chunker(damper::ResolveChunkerTables(config.chunker));
      Output out(g.out);
      for (const auto& doc : damper::LoadCorpus(corpus_path).documents) {
        json j = damper::DetectionToJson(
            damper::DetectChunks(chunker.Segment(doc.text), encoder, protos));
        j["id"] = doc.id;
        out.stream() << j.dump() << '\n';
      }
    } else if (*rew) {
      damper::ModelBundle bundle;
      bundle.encoder = damper::LoadEncoder(model_path);
      bundle.prototypes = damper::LoadPrototypes(protos_path);
      bundle.policy = damper::LoadPolicy(policy_path);
      damper::PrivacyBudget budget = config.budget;
      if (eps_text) {
        budget.eps_text = *eps_text;
        budget.eps_hyper.reset();
      }
      if (r1) budget.r1 = *r1;
      if (r2) budget.r2 = *r2;
      if (nsp_max) {
        budget.n_sp_max = *nsp_max;
      } else if (config.n_sp_max) {
        budget.n_sp_max = *config.n_sp_max;
      }
      budget.Validate();
      const damper::TextChunker chunker(damper::ResolveChunkerTables(config.chunker));
      const std::uint64_t seed = damper::DeriveSeed(config.seed, "rewrite");
      Output out(g.out);
      auto emit = [&](const std::string& id, const std::string& text) {
        json j = damper::RewriteToJson(damper::RewriteOnline(
            bundle, text, budget, damper::DeriveSeed(seed, id), chunker));
        j["id"] = id;
        out.stream() << j.dump() << '\n';
      };
      if (!rewrite_text.empty()) {
        emit("text", rewrite_text);
      } else if (!corpus_path.empty()) {
        for (const auto& doc : damper::LoadCorpus(corpus_path).documents) {
          emit(doc.id, doc.text);
        }
      } else {
        throw damper::ValidationError("rewrite needs --in or --text");
      }
    } else if (*eval) {
      const auto bundle = damper::LoadBundle(workdir);
      const auto test = damper::LoadCorpus(corpus_path);
      auto report = damper::Evaluate(bundle, test, config);
      if (!sweep_train.empty()) {
        damper::AddAlphaSweep(report, bundle, damper::LoadCorpus(sweep_train),
                              test, config);
      }
      Output out(g.out);
      out.stream() << damper::CanonicalJson(damper::ReportToJson(report));
    } else if (*audit) {
      const double observed = damper::AuditRatio(a_r1, a_r2, a_tau2, a_vocab,
                                                 a_trials, config.seed);
      const double bound = 2.0 * (a_r2 - a_r1) / a_tau2;
      Output out(g.out);
      out.stream() << damper::CanonicalJson({{"max_log_ratio", observed},
                                             {"bound", bound},
                                             {"within_bound", observed <= bound + 1e-9},
                                             {"vocab", a_vocab},
                                             {"trials", a_trials}});
      if (observed > bound + 1e-9) return 2;
    } else if (*train) {
      std::optional<damper::Corpus> corpus;
      if (!train_in.empty()) corpus = damper::LoadCorpus(train_in);
      const auto run = damper::RunPipeline(config, corpus, workdir);
      damper::SaveCorpus(run.train, std::filesystem::path(workdir) / "train.jsonl");
      damper::SaveCorpus(run.test, std::filesystem::path(workdir) / "test.jsonl");
      Output out(g.out);
      out.stream() << damper::CanonicalJson(damper::ReportToJson(run.report));
    }
  } catch (const damper::ValidationError& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const damper::StageError& e) {
    spdlog::error("stage {} failed: {}", e.stage(), e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 0;
}
