// core/src/harness.cc

// Copyright 2026  perasr authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "perasr/harness.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "json_io.h"
#include "perasr/checkpoint.h"
#include "perasr/common.h"

namespace perasr {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

// ---- configuration -----------------------------------------------------------

namespace {

void CheckKeys(const json &j, std::initializer_list<const char *> allowed, const std::string &where) {
  if (!j.is_object()) ThrowUsage(where + " must be an object");
  for (const auto &[k, v] : j.items()) {
    bool ok = false;
    for (const char *a : allowed) ok = ok || k == a;
    if (!ok) ThrowUsage("unknown key '" + k + "' in " + where);
  }
}

template <typename T>
void Get(const json &j, const char *key, T *out) {
  if (j.contains(key)) *out = j.at(key).get<T>();
}

HyperParams ParseHyperParams(const json &j, HyperParams hp, const std::string &where) {
  CheckKeys(j, {"learning_rate", "beta1", "beta2", "epsilon", "batch_size", "max_epochs",
                "patience", "clip_norm", "dev_fraction"},
            where);
  Get(j, "learning_rate", &hp.learning_rate);
  Get(j, "beta1", &hp.beta1);
  Get(j, "beta2", &hp.beta2);
  Get(j, "epsilon", &hp.epsilon);
  Get(j, "batch_size", &hp.batch_size);
  Get(j, "max_epochs", &hp.max_epochs);
  Get(j, "patience", &hp.patience);
  Get(j, "clip_norm", &hp.clip_norm);
  Get(j, "dev_fraction", &hp.dev_fraction);
  return hp;
}

ordered_json HyperParamsJson(const HyperParams &hp) {
  return {{"learning_rate", hp.learning_rate}, {"beta1", hp.beta1},
          {"beta2", hp.beta2},                 {"epsilon", hp.epsilon},
          {"batch_size", hp.batch_size},       {"max_epochs", hp.max_epochs},
          {"patience", hp.patience},           {"clip_norm", hp.clip_norm},
          {"dev_fraction", hp.dev_fraction}};
}

NoiseConfig ParseNoise(const json &j) {
  CheckKeys(j, {"target_snr_db", "snr_jitter_db", "kind"}, "corpus.noise");
  NoiseConfig n;
  if (j.contains("target_snr_db")) {
    const auto &v = j.at("target_snr_db");
    if (v.is_null() || (v.is_string() && v.get<std::string>() == "inf"))
      n.target_snr_db = NoiseConfig::kDisabled;
    else
      n.target_snr_db = v.get<double>();
  }
  Get(j, "snr_jitter_db", &n.snr_jitter_db);
  std::string kind = j.value("kind", "white");
  if (kind == "white")
    n.kind = NoiseKind::kWhite;
  else if (kind == "babble")
    n.kind = NoiseKind::kBabble;
  else
    ThrowUsage("noise kind must be 'white' or 'babble'");
  return n;
}

ordered_json NoiseJson(const NoiseConfig &n) {
  ordered_json j;
  if (std::isinf(n.target_snr_db))
    j["target_snr_db"] = "inf";
  else
    j["target_snr_db"] = n.target_snr_db;
  j["snr_jitter_db"] = n.snr_jitter_db;
  j["kind"] = n.kind == NoiseKind::kWhite ? "white" : "babble";
  return j;
}

ordered_json CorpusJson(const CorpusConfig &c) {
  ordered_json groups = ordered_json::array();
  for (const auto &g : c.groups)
    groups.push_back({{"condition", ConditionName(g.condition)},
                      {"count", g.count},
                      {"severities", g.severities},
                      {"sentences", g.sentences},
                      {"prefix", g.prefix}});
  json features = c.features;
  return {{"groups", groups},
          {"test_fraction", c.test_fraction},
          {"noise", NoiseJson(c.noise)},
          {"features", features},
          {"synth",
           {{"sample_rate", c.synth.sample_rate},
            {"edge_silence_ms", c.synth.edge_silence_ms},
            {"rms_level", c.synth.rms_level}}}};
}

std::string Resolve(const std::string &path, const std::string &base_dir) {
  if (path.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(base_dir) / path).lexically_normal().string();
}

}  // namespace

bool SpeakerFilter::Matches(const SpeakerProfile &s) const {
  if (std::find(conditions.begin(), conditions.end(), ConditionName(s.condition)) ==
      conditions.end())
    return false;
  return s.severity >= min_severity - 1e-12 && s.severity <= max_severity + 1e-12;
}

ExperimentConfig ExperimentConfig::FromJson(const std::string &text, const std::string &base_dir) {
  ExperimentConfig c;
  json j;
  try {
    j = json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::exception &e) {
    ThrowUsage(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    CheckKeys(j, {"name", "seed", "workers", "out", "lexicon", "corpus", "stack_factor", "model",
                  "base", "finetune", "base_checkpoint", "speakers", "sweep", "headline_mask",
                  "subset_mask", "save_checkpoints"},
              "config");
    Get(j, "name", &c.name);
    Get(j, "seed", &c.seed);
    Get(j, "workers", &c.workers);
    c.out_dir = "runs/" + c.name;
    Get(j, "out", &c.out_dir);
    Get(j, "lexicon", &c.lexicon_path);
    Get(j, "stack_factor", &c.stack_factor);
    Get(j, "base_checkpoint", &c.base_checkpoint);
    Get(j, "headline_mask", &c.headline_mask);
    Get(j, "subset_mask", &c.subset_mask);
    Get(j, "save_checkpoints", &c.save_checkpoints);
    if (j.contains("corpus")) {
      const auto &cj = j.at("corpus");
      CheckKeys(cj, {"groups", "test_fraction", "noise", "features", "synth"}, "corpus");
      for (const auto &gj : cj.value("groups", json::array())) {
        CheckKeys(gj, {"condition", "count", "severities", "sentences", "prefix"}, "corpus.groups[]");
        SpeakerGroup g;
        g.condition = ParseCondition(gj.at("condition").get<std::string>());
        Get(gj, "count", &g.count);
        Get(gj, "severities", &g.severities);
        Get(gj, "sentences", &g.sentences);
        Get(gj, "prefix", &g.prefix);
        c.corpus.groups.push_back(std::move(g));
      }
      Get(cj, "test_fraction", &c.corpus.test_fraction);
      if (cj.contains("noise")) c.corpus.noise = ParseNoise(cj.at("noise"));
      if (cj.contains("features")) c.corpus.features = cj.at("features").get<FeatureConfig>();
      if (cj.contains("synth")) {
        const auto &sj = cj.at("synth");
        CheckKeys(sj, {"sample_rate", "edge_silence_ms", "rms_level"}, "corpus.synth");
        Get(sj, "sample_rate", &c.corpus.synth.sample_rate);
        Get(sj, "edge_silence_ms", &c.corpus.synth.edge_silence_ms);
        Get(sj, "rms_level", &c.corpus.synth.rms_level);
      }
    }
    if (j.contains("model")) c.model = j.at("model").get<ModelConfig>();
    c.finetune_hp.learning_rate = 1e-4;
    if (j.contains("base")) c.base_hp = ParseHyperParams(j.at("base"), c.base_hp, "base");
    if (j.contains("finetune"))
      c.finetune_hp = ParseHyperParams(j.at("finetune"), c.finetune_hp, "finetune");
    if (j.contains("speakers")) {
      const auto &sj = j.at("speakers");
      CheckKeys(sj, {"conditions", "min_severity", "max_severity"}, "speakers");
      Get(sj, "conditions", &c.speakers.conditions);
      Get(sj, "min_severity", &c.speakers.min_severity);
      Get(sj, "max_severity", &c.speakers.max_severity);
    }
    if (j.contains("sweep")) {
      for (const auto &gj : j.at("sweep")) {
        CheckKeys(gj, {"masks", "budgets"}, "sweep[]");
        SweepGrid g;
        Get(gj, "masks", &g.masks);
        Get(gj, "budgets", &g.budgets);
        c.sweep.push_back(std::move(g));
      }
    }
  } catch (const json::exception &e) {
    ThrowUsage(std::string("bad config value: ") + e.what());
  }
  c.corpus.seed = c.seed;
  c.base_hp.seed = c.seed;
  c.finetune_hp.seed = c.seed;
  c.out_dir = Resolve(c.out_dir, base_dir);
  c.lexicon_path = Resolve(c.lexicon_path, base_dir);
  c.base_checkpoint = Resolve(c.base_checkpoint, base_dir);
  c.Validate();
  return c;
}

std::string ExperimentConfig::ToJson() const {
  ordered_json j;
  j["name"] = name;
  j["seed"] = seed;
  j["workers"] = workers;
  j["out"] = out_dir;
  j["lexicon"] = lexicon_path;
  j["corpus"] = CorpusJson(corpus);
  j["stack_factor"] = stack_factor;
  json model_json = model;
  j["model"] = model_json;
  j["base"] = HyperParamsJson(base_hp);
  j["finetune"] = HyperParamsJson(finetune_hp);
  j["base_checkpoint"] = base_checkpoint;
  j["speakers"] = {{"conditions", speakers.conditions},
                   {"min_severity", speakers.min_severity},
                   {"max_severity", speakers.max_severity}};
  ordered_json grids = ordered_json::array();
  for (const auto &g : sweep) grids.push_back({{"masks", g.masks}, {"budgets", g.budgets}});
  j["sweep"] = grids;
  j["headline_mask"] = headline_mask;
  j["subset_mask"] = subset_mask;
  j["save_checkpoints"] = save_checkpoints;
  return j.dump(2);
}

void ExperimentConfig::Validate() const {
  if (workers < 1) ThrowUsage("workers must be >= 1");
  if (stack_factor < 1) ThrowUsage("stack_factor must be >= 1");
  if (out_dir.empty()) ThrowUsage("out directory must be set");
  model.Validate();
  if (model.input_dim != corpus.features.mel_bins * stack_factor)
    ThrowUsage("model.input_dim must equal mel_bins * stack_factor");
  base_hp.Validate();
  finetune_hp.Validate();
  corpus.features.Validate(corpus.synth.sample_rate);
  if (!(corpus.test_fraction > 0 && corpus.test_fraction < 1))
    ThrowUsage("test_fraction must lie in (0, 1)");
  for (const auto &c : speakers.conditions) ParseCondition(c);
  for (const auto &g : sweep) {
    if (g.masks.empty() || g.budgets.empty()) ThrowUsage("sweep grids need masks and budgets");
    for (const auto &m : g.masks)
      if (m != "default") FreezeMask::Parse(m, model.encoder_layers);
  }
  FreezeMask::Parse(headline_mask, model.encoder_layers);
  FreezeMask::Parse(subset_mask, model.encoder_layers);
}

ExperimentConfig LoadExperimentConfig(const std::string &path) {
  std::ifstream is(path);
  if (!is) ThrowUsage("cannot open config " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ExperimentConfig::FromJson(ss.str(), fs::path(path).parent_path().string());
}

ConfigOverrides OverridesFromEnv(const std::function<const char *(const char *)> &getenv_fn) {
  ConfigOverrides o;
  try {
    if (const char *v = getenv_fn("PERASR_SEED"); v && *v) o.seed = std::stoull(v);
    if (const char *v = getenv_fn("PERASR_WORKERS"); v && *v) o.workers = std::stoi(v);
  } catch (const std::exception &) {
    ThrowUsage("PERASR_SEED / PERASR_WORKERS must be integers");
  }
  if (const char *v = getenv_fn("PERASR_OUT"); v && *v) o.out_dir = v;
  return o;
}

void ApplyOverrides(ExperimentConfig *config, const ConfigOverrides &env,
                    const ConfigOverrides &flags) {
  for (const ConfigOverrides *o : {&env, &flags}) {
    if (o->seed) {
      config->seed = *o->seed;
      config->corpus.seed = config->base_hp.seed = config->finetune_hp.seed = *o->seed;
    }
    if (o->workers) config->workers = *o->workers;
    if (o->out_dir) config->out_dir = *o->out_dir;
  }
  config->Validate();
}

// ---- evaluation summaries and results logs ----------------------------------

EvalSummary Summarize(std::vector<UtteranceResult> results) {
  EvalSummary s;
  s.utterances = std::move(results);
  for (const auto &u : s.utterances) s.per_speaker[u.speaker_id] += u.stats;
  s.micro = PooledWer(s.utterances);
  s.macro_wer = MacroWer(s.utterances);
  return s;
}

std::string EvalToJsonLines(const EvalSummary &s) {
  std::string out;
  for (const auto &u : s.utterances) {
    ordered_json j;
    j["utterance_id"] = u.utterance_id;
    j["speaker_id"] = u.speaker_id;
    j["reference"] = u.reference;
    j["hypothesis"] = u.hypothesis;
    j["sub"] = u.stats.substitutions;
    j["del"] = u.stats.deletions;
    j["ins"] = u.stats.insertions;
    j["ref_words"] = u.stats.ref_words;
    out += j.dump() + "\n";
  }
  return out;
}

std::string EvalSummaryToJson(const EvalSummary &s) {
  ordered_json j;
  j["utterances"] = s.utterances.size();
  j["macro_wer"] = s.macro_wer;
  j["micro_wer"] = s.micro.Wer();
  j["micro"] = {{"sub", s.micro.substitutions},
                {"del", s.micro.deletions},
                {"ins", s.micro.insertions},
                {"ref_words", s.micro.ref_words}};
  ordered_json per = ordered_json::object();
  for (const auto &[spk, st] : s.per_speaker)
    per[spk] = {{"wer", st.Wer()}, {"ref_words", st.ref_words}};
  j["per_speaker"] = per;
  return j.dump(2);
}

std::vector<RunRecord> ReadResults(const std::string &path) {
  std::vector<RunRecord> out;
  std::ifstream is(path);
  if (!is) return out;
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) out.push_back(RunRecord::FromJson(line));
  return out;
}

void AppendResult(const std::string &path, const RunRecord &record) {
  if (auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream os(path, std::ios::app | std::ios::binary);
  if (!os) ThrowData("cannot append to " + path);
  os << record.ToJson() << '\n';
  os.flush();
  if (!os) ThrowData("write failed: " + path);
}

std::string CanonicalResults(std::vector<RunRecord> records) {
  for (auto &r : records) {
    r.wall_s = 0.0;
    r.checkpoint.clear();
  }
  std::stable_sort(records.begin(), records.end(),
                   [](const RunRecord &a, const RunRecord &b) { return a.key < b.key; });
  std::string out;
  for (const auto &r : records) out += r.ToJson() + "\n";
  return out;
}

// ---- experiment ----------------------------------------------------------------

Experiment::Experiment(ExperimentConfig config) : config_(std::move(config)) { config_.Validate(); }

std::string Experiment::CorpusDir() const { return (fs::path(config_.out_dir) / "corpus").string(); }
std::string Experiment::BasePath() const {
  return config_.base_checkpoint.empty() ? (fs::path(config_.out_dir) / "base.rntc").string()
                                         : config_.base_checkpoint;
}
std::string Experiment::ResultsPath() const {
  return (fs::path(config_.out_dir) / "results.jsonl").string();
}
std::string Experiment::CheckpointDir() const {
  return (fs::path(config_.out_dir) / "checkpoints").string();
}
std::string Experiment::EvalDir() const { return (fs::path(config_.out_dir) / "eval").string(); }
std::string Experiment::AnalysisDir() const {
  return (fs::path(config_.out_dir) / "analysis").string();
}
std::string Experiment::ReportDir() const { return (fs::path(config_.out_dir) / "report").string(); }

Corpus Experiment::Synth(bool force) {
  Lexicon lexicon = Lexicon::Load(config_.lexicon_path);
  const std::string dir = CorpusDir();
  const std::string stamp_path = (fs::path(dir) / "corpus_config.json").string();
  ordered_json stamp = CorpusJson(config_.corpus);
  stamp["seed"] = config_.corpus.seed;
  stamp["lexicon_hash"] = HashString(internal::ReadTextFile(config_.lexicon_path));
  const std::string stamp_text = stamp.dump(2) + "\n";
  if (!force && fs::exists(stamp_path) && fs::exists(fs::path(dir) / "manifest.jsonl") &&
      internal::ReadTextFile(stamp_path) == stamp_text) {
    corpus_.reset();
    return LoadCorpus();
  }
  if (fs::exists(dir)) fs::remove_all(dir);
  Corpus c = BuildCorpus(config_.corpus, lexicon, dir, config_.workers);
  internal::WriteTextFile(stamp_path, stamp_text);
  corpus_ = c;
  lexicon_ = std::move(lexicon);
  return c;
}

const Corpus &Experiment::LoadCorpus() {
  if (corpus_) return *corpus_;
  const std::string dir = CorpusDir();
  if (!fs::exists(fs::path(dir) / "manifest.jsonl"))
    ThrowData("no corpus at " + dir + " (run `synth` first)");
  Corpus c;
  c.manifest = Manifest::Load((fs::path(dir) / "manifest.jsonl").string());
  c.speakers = LoadSpeakers((fs::path(dir) / "speakers.json").string());
  lexicon_ = Lexicon::Load((fs::path(dir) / "lexicon.txt").string());
  corpus_ = std::move(c);
  return *corpus_;
}

RunRecord Experiment::TrainBase(const std::function<void(const EpochLog &)> &progress) {
  const Corpus &c = LoadCorpus();
  std::set<std::string> typical;
  for (const auto &s : c.speakers)
    if (s.condition == Condition::kTypical) typical.insert(s.id);
  if (typical.empty()) ThrowData("corpus has no typical speakers for base training");
  Manifest base_manifest;
  for (const auto &r : c.manifest.records)
    if (typical.count(r.speaker_id) && r.split == Split::kTrain) base_manifest.records.push_back(r);
  auto res = perasr::TrainBase(base_manifest, CorpusDir(), config_.model, config_.corpus.features,
                               config_.stack_factor, config_.base_hp, progress);
  fs::create_directories(config_.out_dir);
  const std::string path = (fs::path(config_.out_dir) / "base.rntc").string();
  SaveCheckpoint(path, res.train.checkpoint);
  res.record.checkpoint = path;

  Manifest typical_test;
  for (const auto &r : c.manifest.records)
    if (typical.count(r.speaker_id) && r.split == Split::kTest) typical_test.records.push_back(r);
  auto results = DecodeManifest(res.train.checkpoint, typical_test, CorpusDir());
  res.record.base_wer = res.record.ft_wer = PooledWer(results).Wer();
  AppendResult(ResultsPath(), res.record);
  return res.record;
}

ModelCheckpoint Experiment::LoadBase() const {
  const std::string path = BasePath();
  if (!fs::exists(path)) ThrowData("no base checkpoint at " + path + " (run `train-base` first)");
  return LoadCheckpoint(path);
}

std::vector<std::string> Experiment::TargetSpeakers() {
  const Corpus &c = LoadCorpus();
  std::vector<std::string> out;
  for (const auto &s : c.speakers)
    if (config_.speakers.Matches(s)) out.push_back(s.id);
  return out;
}

std::vector<FinetunePlan> Experiment::SweepPlans() {
  const Corpus &c = LoadCorpus();
  const int layers = config_.model.encoder_layers;
  std::vector<FinetunePlan> plans;
  std::set<std::string> seen;
  for (const auto &spk : TargetSpeakers())
    for (const auto &grid : config_.sweep) {
      std::vector<FreezeMask> masks;
      for (const auto &m : grid.masks) {
        if (m == "default") {
          auto fam = DefaultMaskFamily(layers);
          masks.insert(masks.end(), fam.begin(), fam.end());
        } else {
          masks.push_back(FreezeMask::Parse(m, layers));
        }
      }
      for (const auto &mask : masks)
        for (const auto &b : grid.budgets) {
          FinetunePlan p;
          p.speaker_id = spk;
          p.budget_label = b;
          p.budget = ResolveBudget(b, c.manifest, spk, config_.seed);
          p.mask = mask;
          p.hp = config_.finetune_hp;
          if (seen.insert(p.Key()).second) plans.push_back(std::move(p));
        }
    }
  return plans;
}

std::vector<RunRecord> Experiment::Sweep(const std::function<void(const RunRecord &)> &on_done) {
  const Corpus &c = LoadCorpus();
  ModelCheckpoint base = LoadBase();
  std::set<std::string> done;
  for (const auto &r : ReadResults(ResultsPath()))
    if (r.error.empty()) done.insert(r.key);
  std::vector<FinetunePlan> todo;
  for (auto &p : SweepPlans())
    if (!done.count(p.Key())) todo.push_back(std::move(p));
  std::string ckpt_dir;
  if (config_.save_checkpoints) {
    ckpt_dir = CheckpointDir();
    fs::create_directories(ckpt_dir);
  }
  const std::string results = ResultsPath();
  return RunPlans(
      todo, base, c.manifest, CorpusDir(), config_.workers,
      [&](const RunRecord &r) {
        AppendResult(results, r);
        if (on_done) on_done(r);
      },
      ckpt_dir);
}

RunRecord Experiment::FinetuneOne(const std::string &speaker, const std::string &mask,
                                  const std::string &budget) {
  const Corpus &c = LoadCorpus();
  ModelCheckpoint base = LoadBase();
  FinetunePlan p;
  p.speaker_id = speaker;
  p.budget_label = budget;
  p.budget = ResolveBudget(budget, c.manifest, speaker, config_.seed);
  p.mask = FreezeMask::Parse(mask, config_.model.encoder_layers);
  p.hp = config_.finetune_hp;
  std::string path;
  if (config_.save_checkpoints) {
    fs::create_directories(CheckpointDir());
    path = (fs::path(CheckpointDir()) / (p.Key() + ".rntc")).string();
  }
  RunRecord r = Finetune(p, base, c.manifest, CorpusDir(), path);
  AppendResult(ResultsPath(), r);
  return r;
}

EvalSummary Experiment::Evaluate(const ModelCheckpoint &ckpt, Split split,
                                 const std::vector<std::string> &conditions) {
  const Corpus &c = LoadCorpus();
  std::set<std::string> speakers;
  for (const auto &s : c.speakers)
    if (conditions.empty() || std::find(conditions.begin(), conditions.end(),
                                        ConditionName(s.condition)) != conditions.end())
      speakers.insert(s.id);
  Manifest m;
  for (const auto &r : c.manifest.records)
    if (r.split == split && speakers.count(r.speaker_id)) m.records.push_back(r);
  if (m.records.empty()) ThrowData("no utterances to evaluate");
  return Summarize(DecodeManifest(ckpt, m, CorpusDir()));
}

ErrorProfile Experiment::ProfileFor(
    const std::vector<std::pair<const ModelCheckpoint *, Manifest>> &jobs) {
  std::vector<EditOps> alignments;
  int oov = 0;
  for (const auto &[ckpt, manifest] : jobs) {
    for (const auto &u : DecodeManifest(*ckpt, manifest, CorpusDir())) {
      auto ref_words = SplitWords(u.reference);
      auto hyp_words = SplitWords(u.hypothesis);
      auto ref = ToPhonemes(ref_words, *lexicon_, &oov);
      auto hyp = ToPhonemes(hyp_words, *lexicon_, &oov);
      if (!ref || !hyp) continue;
      alignments.push_back(Align(*ref, *hyp));
    }
  }
  if (alignments.empty())
    ThrowData("no utterances left for phoneme analysis (" + std::to_string(oov) +
              " out-of-lexicon words excluded their utterances)");
  ErrorProfile p = BuildErrorProfile(alignments, lexicon_->Inventory());
  p.oov_excluded = oov;
  return p;
}

Experiment::AnalysisResult Experiment::Analyze() {
  const Corpus &c = LoadCorpus();
  ModelCheckpoint base = LoadBase();
  const std::string headline = FreezeMask::Parse(config_.headline_mask,
                                                 config_.model.encoder_layers).Label();
  std::map<std::string, std::string> ckpt_for;
  for (const auto &r : DeduplicateResults(ReadResults(ResultsPath())))
    if (r.kind == "finetune" && r.error.empty() && r.mask == headline && r.budget == "all")
      ckpt_for[r.speaker] = r.checkpoint;

  std::vector<std::pair<const ModelCheckpoint *, Manifest>> standard_jobs, base_jobs, ft_jobs;
  Manifest typical_test;
  for (const auto &s : c.speakers)
    if (s.condition == Condition::kTypical) {
      auto m = c.manifest.Filter(s.id, Split::kTest);
      typical_test.records.insert(typical_test.records.end(), m.records.begin(), m.records.end());
    }
  standard_jobs.push_back({&base, typical_test});

  std::vector<ModelCheckpoint> finetuned;
  const auto targets = TargetSpeakers();
  finetuned.reserve(targets.size());
  for (const auto &spk : targets) {
    auto it = ckpt_for.find(spk);
    if (it == ckpt_for.end() || it->second.empty() || !fs::exists(it->second))
      ThrowData("no finetuned checkpoint for " + spk + " with mask " + headline +
                " and budget all (run `sweep` with checkpoints enabled)");
    finetuned.push_back(LoadCheckpoint(it->second));
  }
  for (size_t i = 0; i < targets.size(); ++i) {
    Manifest test = c.manifest.Filter(targets[i], Split::kTest);
    base_jobs.push_back({&base, test});
    ft_jobs.push_back({&finetuned[i], test});
  }

  AnalysisResult out;
  out.standard = ProfileFor(standard_jobs);
  out.base = ProfileFor(base_jobs);
  out.finetuned = ProfileFor(ft_jobs);
  out.comparison = CompareProfiles(out.standard, out.base, out.finetuned);

  const std::string dir = AnalysisDir();
  fs::create_directories(dir);
  auto write = [&](const std::string &name, const std::string &text) {
    internal::WriteTextFile((fs::path(dir) / name).string(), text);
  };
  write("standard.json", ProfileToJson(out.standard));
  write("standard.csv", ProfileToCsv(out.standard));
  write("base.json", ProfileToJson(out.base));
  write("base.csv", ProfileToCsv(out.base));
  write("finetuned.json", ProfileToJson(out.finetuned));
  write("finetuned.csv", ProfileToCsv(out.finetuned));
  write("comparison.json", ComparisonToJson(out.comparison));
  write("miss_rates.csv", ComparisonToCsv(out.comparison));
  return out;
}

}  // namespace perasr
