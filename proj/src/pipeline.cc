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

#include "damper/pipeline.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "damper/model_io.h"
#include "damper/preference.h"
#include "damper/rng.h"
#include "damper/text.h"
#include "spdlog/spdlog.h"

namespace damper {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kManifest = "manifest.json";

const std::map<std::string, std::string>& ArtifactNames() {
  static const std::map<std::string, std::string> names = {
      {"encoder", "encoder.bin"},
      {"prototypes", "prototypes.json"},
      {"reference", "reference.bin"},
      {"preferences", "preferences.jsonl"},
      {"dpo", "policy.bin"}};
  return names;
}

std::string Hash(const std::vector<std::string>& parts) {
  std::string joined;
  for (const auto& p : parts) {
    joined += p;
    joined += '\x1f';
  }
  return HexDigest(Fnv1a64(joined));
}

std::string EncoderBytes(const EncoderParams& p) {
  std::ostringstream out;
  WriteEncoder(p, out);
  return out.str();
}

std::string PolicyBytes(const PolicyParams& p) {
  std::ostringstream out;
  WritePolicy(p, out);
  return out.str();
}

template <typename Fn>
auto RunStage(const std::string& stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

std::set<std::string> NormalizedSet(const std::vector<std::string>& texts) {
  std::set<std::string> out;
  for (const auto& t : texts) out.insert(NormalizeWhitespace(t));
  return out;
}

template <typename T>
json Optional(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

double Mean(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

}  // namespace

std::string CorpusFingerprint(const Corpus& corpus) {
  std::ostringstream out;
  WriteCorpus(corpus, out);
  return HexDigest(Fnv1a64(out.str()));
}

std::string BundleFingerprint(const ModelBundle& b) {
  return Hash({EncoderBytes(b.encoder), PrototypesToJson(b.prototypes).dump(),
               PolicyBytes(b.reference), PolicyBytes(b.policy),
               std::to_string(b.corpus_n_sp_max), b.corpus_fingerprint,
               b.config_fingerprint, std::to_string(b.seed)});
}

int CorpusNspMax(const Corpus& corpus, int max_len) {
  int best = 1;
  for (const auto& doc : corpus.documents) {
    best = std::max(best,
                    static_cast<int>(doc.PrivateSpans().size()) * max_len);
  }
  return best;
}

ModelBundle TrainOffline(const Corpus& corpus, const PipelineConfig& config,
                         const fs::path& workdir, TrainSummary* summary) {
  ValidateCorpus(corpus);
  if (corpus.Domains().size() < 2) {
    throw ValidationError("training needs a labelled corpus with >= 2 domains");
  }
  const bool persist = !workdir.empty();
  if (persist) fs::create_directories(workdir);

  const json cfg = ConfigToJson(config);
  ModelBundle bundle;
  bundle.seed = config.seed;
  bundle.corpus_fingerprint = CorpusFingerprint(corpus);
  bundle.config_fingerprint = Hash({cfg.dump()});
  bundle.corpus_n_sp_max = CorpusNspMax(corpus, config.policy.max_len);

  const std::string seed = std::to_string(config.seed);
  std::map<std::string, std::string> fp;
  fp["encoder"] = Hash({"encoder", bundle.corpus_fingerprint,
                        cfg["encoder"].dump(), seed});
  fp["prototypes"] = Hash({"prototypes", fp["encoder"],
                           cfg["prototypes"].dump(), seed});
  fp["reference"] = Hash({"reference", bundle.corpus_fingerprint,
                          cfg["policy"]["feature_dim"].dump(),
                          cfg["policy"]["max_len"].dump(),
                          cfg["policy"]["reference"].dump(), seed});
  fp["preferences"] = Hash({"preferences", fp["encoder"], fp["prototypes"],
                            fp["reference"], cfg["preference"].dump(), seed});
  fp["dpo"] = Hash({"dpo", fp["preferences"], fp["reference"],
                    cfg["policy"]["beta"].dump(), cfg["policy"]["dpo"].dump(),
                    seed});
  const std::map<std::string, std::vector<std::string>> deps = {
      {"encoder", {}},
      {"prototypes", {"encoder"}},
      {"reference", {}},
      {"preferences", {"encoder", "prototypes", "reference"}},
      {"dpo", {"preferences", "reference"}}};

  json manifest = json::object();
  if (persist && fs::exists(workdir / kManifest)) {
    std::ifstream in(workdir / kManifest);
    try {
      manifest = json::parse(in);
    } catch (const json::exception&) {
      spdlog::warn("ignoring unreadable manifest in {}", workdir.string());
      manifest = json::object();
    }
  }
  std::map<std::string, bool> ran;
  auto must_run = [&](const std::string& stage) {
    if (!persist) return true;
    for (const auto& d : deps.at(stage)) {
      if (ran[d]) return true;
    }
    const fs::path artifact = workdir / ArtifactNames().at(stage);
    if (!fs::exists(artifact)) return true;
    const json stages = manifest.value("stages", json::object());
    return !stages.contains(stage) ||
           stages[stage].value("fingerprint", "") != fp[stage];
  };
  auto write_manifest = [&]() {
    if (!persist) return;
    json stages = json::object();
    for (const auto& [name, done] : ran) {
      stages[name] = {{"fingerprint", fp[name]},
                      {"artifact", ArtifactNames().at(name)}};
    }
    const json m = {{"stages", stages},
                    {"corpus_fingerprint", bundle.corpus_fingerprint},
                    {"config_fingerprint", bundle.config_fingerprint},
                    {"corpus_n_sp_max", bundle.corpus_n_sp_max},
                    {"seed", bundle.seed},
                    {"config", cfg}};
    std::ofstream out(workdir / kManifest, std::ios::binary);
    out << CanonicalJson(m);
    if (!out) throw std::runtime_error("cannot write manifest");
  };
  auto record = [&](const std::string& stage, bool did_run) {
    ran[stage] = did_run;
    if (summary != nullptr) {
      summary->stages.push_back(
          {stage, persist ? workdir / ArtifactNames().at(stage) : fs::path(),
           fp[stage], did_run});
    }
    spdlog::info("stage {} {}", stage, did_run ? "ran" : "loaded");
  };
  auto path_of = [&](const std::string& stage) {
    return workdir / ArtifactNames().at(stage);
  };

  // Encoder.
  if (must_run("encoder")) {
    bundle.encoder = RunStage("encoder", [&] {
      return TrainEncoder(corpus, EncoderParams::Init(config.encoder));
    });
    if (persist) SaveEncoder(bundle.encoder, path_of("encoder"));
    record("encoder", true);
  } else {
    bundle.encoder = RunStage("encoder", [&] { return LoadEncoder(path_of("encoder")); });
    record("encoder", false);
  }

  // Prototypes.
  if (must_run("prototypes")) {
    bundle.prototypes = RunStage("prototypes", [&] {
      return BuildPrototypes(corpus, bundle.encoder, config.prototypes);
    });
    if (persist) SavePrototypes(bundle.prototypes, path_of("prototypes"));
    record("prototypes", true);
  } else {
    bundle.prototypes =
        RunStage("prototypes", [&] { return LoadPrototypes(path_of("prototypes")); });
    record("prototypes", false);
  }

  // Reference policy.
  if (must_run("reference")) {
    bundle.reference = RunStage("reference", [&] {
      PolicyParams init(BuildVocabulary(corpus), config.policy);
      return PretrainReference(SiblingPairs(corpus, config.policy.seed), init,
                               config.reference_train);
    });
    if (persist) SavePolicy(bundle.reference, path_of("reference"));
    record("reference", true);
  } else {
    bundle.reference =
        RunStage("reference", [&] { return LoadPolicy(path_of("reference")); });
    record("reference", false);
  }

  // Preferences.
  std::vector<PreferencePair> prefs;
  if (must_run("preferences")) {
    prefs = RunStage("preferences", [&] {
      return BuildPreferences(corpus, bundle.reference, bundle.prototypes,
                              bundle.encoder, config.preference);
    });
    if (persist) SavePreferences(prefs, path_of("preferences"));
    record("preferences", true);
  } else {
    prefs = RunStage("preferences",
                     [&] { return LoadPreferences(path_of("preferences")); });
    record("preferences", false);
  }
  if (summary != nullptr) summary->preference_pairs = prefs.size();

  // Aligned policy.
  if (must_run("dpo")) {
    bundle.policy = RunStage("dpo", [&] {
      return TrainDpo(prefs, bundle.reference, config.beta, config.dpo_train);
    });
    if (persist) SavePolicy(bundle.policy, path_of("dpo"));
    record("dpo", true);
  } else {
    bundle.policy = RunStage("dpo", [&] { return LoadPolicy(path_of("dpo")); });
    record("dpo", false);
  }
  write_manifest();
  return bundle;
}

ModelBundle LoadBundle(const fs::path& workdir) {
  std::ifstream in(workdir / kManifest);
  if (!in) throw ValidationError("no manifest in " + workdir.string());
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad manifest: ") + e.what());
  }
  ModelBundle b;
  b.encoder = LoadEncoder(workdir / ArtifactNames().at("encoder"));
  b.prototypes = LoadPrototypes(workdir / ArtifactNames().at("prototypes"));
  b.reference = LoadPolicy(workdir / ArtifactNames().at("reference"));
  b.policy = LoadPolicy(workdir / ArtifactNames().at("dpo"));
  b.corpus_fingerprint = m.value("corpus_fingerprint", "");
  b.config_fingerprint = m.value("config_fingerprint", "");
  b.corpus_n_sp_max = m.value("corpus_n_sp_max", 1);
  b.seed = m.value("seed", std::uint64_t{0});
  return b;
}

PrivacyBudget ResolveBudget(const PipelineConfig& config,
                            const ModelBundle& bundle) {
  PrivacyBudget budget = config.budget;
  budget.n_sp_max = config.n_sp_max.value_or(bundle.corpus_n_sp_max);
  budget.Validate();
  return budget;
}

RewriteResult RewriteOnline(const ModelBundle& bundle, std::string_view text,
                            const PrivacyBudget& budget, std::uint64_t seed,
                            const TextChunker& chunker) {
  const DetectionResult detection =
      DetectChunks(chunker.Segment(text), bundle.encoder, bundle.prototypes);
  return DpRewrite(text, detection, bundle.policy, budget, seed);
}

RewriteResult RewriteOnline(const ModelBundle& bundle, std::string_view text,
                            const PrivacyBudget& budget, std::uint64_t seed) {
  static const TextChunker chunker;
  return RewriteOnline(bundle, text, budget, seed, chunker);
}

bool PreservesContext(std::string_view input, const RewriteResult& result) {
  const Utf8Index in(input);
  std::string_view out = result.output_text;
  std::size_t cursor = 0;
  std::size_t pos = 0;
  auto take = [&](std::string_view expected) {
    if (out.substr(pos, expected.size()) != expected) return false;
    pos += expected.size();
    return true;
  };
  for (const auto& r : result.replacements) {
    if (r.start < static_cast<std::int64_t>(cursor) || r.end < r.start ||
        r.end > static_cast<std::int64_t>(in.size())) {
      return false;
    }
    if (!take(in.Slice(cursor, r.start))) return false;
    if (!take(r.replacement)) return false;
    cursor = static_cast<std::size_t>(r.end);
  }
  return take(in.Slice(cursor, in.size())) && pos == out.size();
}

double RougeL(std::string_view candidate, std::string_view reference) {
  const auto c = SplitWhitespace(candidate);
  const auto r = SplitWhitespace(reference);
  if (c.empty() || r.empty()) return 0.0;
  std::vector<int> prev(r.size() + 1, 0);
  std::vector<int> cur(r.size() + 1, 0);
  for (std::size_t i = 1; i <= c.size(); ++i) {
    for (std::size_t j = 1; j <= r.size(); ++j) {
      cur[j] = c[i - 1] == r[j - 1] ? prev[j - 1] + 1
                                    : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  const double lcs = prev[r.size()];
  if (lcs == 0.0) return 0.0;
  const double p = lcs / static_cast<double>(c.size());
  const double rec = lcs / static_cast<double>(r.size());
  return 2.0 * p * rec / (p + rec);
}

std::vector<double> DropScores(const std::vector<double>& values) {
  std::vector<double> out(values.size(), 0.0);
  if (values.empty()) return out;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (*hi == *lo) return out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = 1.0 - (values[i] - *lo) / (*hi - *lo);
  }
  return out;
}

Report Evaluate(const ModelBundle& bundle, const Corpus& test,
                const PipelineConfig& config) {
  const PrivacyBudget budget = ResolveBudget(config, bundle);
  const PolicyParams& policy = bundle.policy;
  return EvaluateWith(bundle, test, config,
                      [&](std::string_view text, const DetectionResult& d,
                          std::uint64_t seed) {
                        return DpRewrite(text, d, policy, budget, seed);
                      });
}

Report EvaluateWith(const ModelBundle& bundle, const Corpus& test,
                    const PipelineConfig& config, const Rewriter& rewriter) {
  ValidateCorpus(test);
  if (test.empty()) throw ValidationError("empty evaluation corpus");
  const PrivacyBudget budget = ResolveBudget(config, bundle);
  const Calibration cal = Calibrate(budget);
  const TextChunker chunker(ResolveChunkerTables(config.chunker));
  const std::uint64_t rewrite_seed = DeriveSeed(config.seed, "rewrite");

  Report report;
  report.eps_text = budget.eps_text;
  report.eps_token = cal.eps_token;
  report.n_sp_max = budget.n_sp_max;
  report.config = ConfigToJson(config);
  report.config["budget"]["n_sp_max"] = budget.n_sp_max;

  std::vector<double> soi;
  std::vector<double> dfs;
  std::vector<double> rouge;
  std::vector<double> eps;
  int correct = 0;
  int preserved = 0;
  for (const auto& doc : test.documents) {
    if (!doc.domain) {
      throw ValidationError("evaluation document " + doc.id + " has no domain");
    }
    auto proto_it = bundle.prototypes.find(*doc.domain);
    if (proto_it == bundle.prototypes.end()) {
      throw ValidationError("no prototypes for domain " + *doc.domain);
    }
    DocumentMetrics m;
    m.id = doc.id;
    m.domain = *doc.domain;

    const DetectionResult detection =
        DetectChunks(chunker.Segment(doc.text), bundle.encoder, bundle.prototypes);
    m.inferred_domain = detection.inferred_domain;
    m.domain_correct = detection.inferred_domain == *doc.domain;
    m.detected = detection.detected.size();

    std::vector<std::string> predicted;
    for (const auto& c : detection.DetectedChunks()) predicted.push_back(c.text);
    std::vector<std::string> gold;
    for (const auto& s : doc.PrivateSpans()) gold.push_back(doc.SpanText(s));
    const LocalizationMetrics lm =
        ComputeLocalizationMetrics(NormalizedSet(predicted), NormalizedSet(gold));
    m.precision = lm.precision;
    m.recall = lm.recall;
    m.pf1 = lm.pf1;

    const RewriteResult rw =
        rewriter(doc.text, detection, DeriveSeed(rewrite_seed, doc.id));
    m.n_sp = rw.n_sp;
    m.realized_eps = rw.realized_eps;
    m.budget_exhausted = rw.budget_exhausted;
    m.context_preserved = PreservesContext(doc.text, rw);
    if (!rw.replacements.empty()) {
      std::vector<std::string> originals;
      std::vector<std::string> replacements;
      double rsum = 0.0;
      for (const auto& r : rw.replacements) {
        originals.push_back(r.original);
        replacements.push_back(r.replacement);
        rsum += RougeL(r.replacement, r.original);
      }
      m.soi = RewardPriv(originals, replacements, bundle.encoder);
      m.dfs = RewardUtil(replacements, proto_it->second, bundle.encoder);
      m.rouge_l = rsum / static_cast<double>(rw.replacements.size());
      soi.push_back(*m.soi);
      dfs.push_back(*m.dfs);
      rouge.push_back(*m.rouge_l);
    }
    eps.push_back(m.realized_eps);
    correct += m.domain_correct ? 1 : 0;
    preserved += m.context_preserved ? 1 : 0;
    report.budget_exhausted += m.budget_exhausted ? 1 : 0;
    report.pf1 += m.pf1;
    report.precision += m.precision;
    report.recall += m.recall;
    report.documents.push_back(std::move(m));
  }
  const double n = static_cast<double>(test.size());
  report.pf1 /= n;
  report.precision /= n;
  report.recall /= n;
  report.domain_accuracy = correct / n;
  report.context_preserved_rate = preserved / n;
  if (!soi.empty()) {
    report.soi = Mean(soi);
    report.dfs = Mean(dfs);
    report.rouge_l = Mean(rouge);
  }
  report.eps_mean = Mean(eps);
  report.eps_max = *std::max_element(eps.begin(), eps.end());
  report.eps_min = *std::min_element(eps.begin(), eps.end());
  return report;
}

void AddAlphaSweep(Report& report, const ModelBundle& bundle,
                   const Corpus& train, const Corpus& test,
                   const PipelineConfig& config) {
  if (config.eval.alpha_sweep.empty()) return;
  std::vector<double> soi;
  std::vector<double> dfs;
  for (double alpha : config.eval.alpha_sweep) {
    PipelineConfig c = config;
    c.preference.alpha = alpha;
    ModelBundle b = bundle;
    const auto prefs = BuildPreferences(train, bundle.reference,
                                        bundle.prototypes, bundle.encoder,
                                        c.preference);
    b.policy = TrainDpo(prefs, bundle.reference, c.beta, c.dpo_train);
    c.eval.alpha_sweep.clear();
    const Report r = Evaluate(b, test, c);
    SweepPoint p;
    p.alpha = alpha;
    p.soi = r.soi.value_or(0.0);
    p.dfs = r.dfs.value_or(0.0);
    soi.push_back(p.soi);
    dfs.push_back(p.dfs);
    report.sweep.push_back(p);
    spdlog::info("alpha {:.2f}: soi {:.4f} dfs {:.4f}", alpha, p.soi, p.dfs);
  }
  // Normalized over the sweep together with the report's own values.
  soi.push_back(report.soi.value_or(0.0));
  dfs.push_back(report.dfs.value_or(0.0));
  const auto soi_drop = DropScores(soi);
  const auto dfs_drop = DropScores(dfs);
  for (std::size_t i = 0; i < report.sweep.size(); ++i) {
    report.sweep[i].soi_drop = soi_drop[i];
    report.sweep[i].dfs_drop = dfs_drop[i];
    report.sweep[i].sum_drop = soi_drop[i] + dfs_drop[i];
  }
  report.soi_drop = soi_drop.back();
  report.dfs_drop = dfs_drop.back();
  report.sum_drop = *report.soi_drop + *report.dfs_drop;
}

json ReportToJson(const Report& r) {
  json docs = json::array();
  for (const auto& m : r.documents) {
    docs.push_back({{"id", m.id},
                    {"domain", m.domain},
                    {"inferred_domain", m.inferred_domain},
                    {"domain_correct", m.domain_correct},
                    {"precision", m.precision},
                    {"recall", m.recall},
                    {"pf1", m.pf1},
                    {"detected", m.detected},
                    {"soi", Optional(m.soi)},
                    {"dfs", Optional(m.dfs)},
                    {"rouge_l", Optional(m.rouge_l)},
                    {"n_sp", m.n_sp},
                    {"realized_eps", m.realized_eps},
                    {"budget_exhausted", m.budget_exhausted},
                    {"context_preserved", m.context_preserved}});
  }
  json sweep = json::array();
  for (const auto& p : r.sweep) {
    sweep.push_back({{"alpha", p.alpha},
                     {"soi", p.soi},
                     {"dfs", p.dfs},
                     {"soi_drop", p.soi_drop},
                     {"dfs_drop", p.dfs_drop},
                     {"sum_drop", p.sum_drop}});
  }
  return {{"aggregate",
           {{"documents", r.documents.size()},
            {"pf1", r.pf1},
            {"precision", r.precision},
            {"recall", r.recall},
            {"domain_accuracy", r.domain_accuracy},
            {"soi", Optional(r.soi)},
            {"dfs", Optional(r.dfs)},
            {"rouge_l", Optional(r.rouge_l)},
            {"soi_drop", Optional(r.soi_drop)},
            {"dfs_drop", Optional(r.dfs_drop)},
            {"sum_drop", Optional(r.sum_drop)},
            {"context_preserved_rate", r.context_preserved_rate},
            {"realized_eps",
             {{"mean", r.eps_mean},
              {"max", r.eps_max},
              {"min", r.eps_min},
              {"budget_exhausted", r.budget_exhausted}}},
            {"eps_text", r.eps_text},
            {"eps_token", r.eps_token},
            {"n_sp_max", r.n_sp_max}}},
          {"alpha_sweep", sweep},
          {"documents", docs},
          {"config", r.config}};
}

std::string CanonicalJson(const json& j) { return j.dump(2) + "\n"; }

PipelineRun RunPipeline(const PipelineConfig& config,
                        const std::optional<Corpus>& corpus,
                        const fs::path& workdir) {
  PipelineRun run;
  const Corpus full = corpus ? *corpus : SynthCorpus(config.corpus);
  std::tie(run.train, run.test) = SplitCorpus(
      full, 1.0 - config.eval.test_fraction, DeriveSeed(config.seed, "split"));
  run.bundle = TrainOffline(run.train, config, workdir, &run.summary);
  run.report = Evaluate(run.bundle, run.test, config);
  AddAlphaSweep(run.report, run.bundle, run.train, run.test, config);
  return run;
}

}  // namespace damper
