// core/include/perasr/harness.h

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

#ifndef PERASR_HARNESS_H_
#define PERASR_HARNESS_H_

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "perasr/analysis.h"
#include "perasr/corpus.h"
#include "perasr/model.h"
#include "perasr/train.h"

namespace perasr {

// One rectangular block of the sweep grid: every mask x every budget.
struct SweepGrid {
  std::vector<std::string> masks;    // FreezeMask::Parse specs, or "default"
  std::vector<std::string> budgets;  // ResolveBudget labels
};

// Which speakers are personalized.
struct SpeakerFilter {
  std::vector<std::string> conditions = {"dysarthric"};
  double min_severity = 0.0;
  double max_severity = 1.0;

  bool Matches(const SpeakerProfile &s) const;
};

struct ExperimentConfig {
  std::string name = "experiment";
  uint64_t seed = 42;
  int workers = 1;
  std::string out_dir = "runs/experiment";

  std::string lexicon_path = "assets/lexicon.txt";
  CorpusConfig corpus;
  int stack_factor = 3;
  ModelConfig model;
  HyperParams base_hp;
  HyperParams finetune_hp;
  // Optional existing base checkpoint; otherwise train-base writes one.
  std::string base_checkpoint;

  SpeakerFilter speakers;
  std::vector<SweepGrid> sweep;
  // Finetuned system for tables and analysis.
  std::string headline_mask = "encoder+joint";
  // Masks compared in the layer table (subset vs full).
  std::string subset_mask = "enc.0+joint";
  bool save_checkpoints = true;

  // Parses JSON; absent keys keep their defaults. Relative paths are
  // resolved against `base_dir`. Throws kUsage on bad values.
  static ExperimentConfig FromJson(const std::string &text, const std::string &base_dir = ".");
  std::string ToJson() const;
  void Validate() const;
};

ExperimentConfig LoadExperimentConfig(const std::string &path);

// Flag values win over environment values, which win over the file.
struct ConfigOverrides {
  std::optional<uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> out_dir;
};
// PERASR_SEED, PERASR_WORKERS, PERASR_OUT.
ConfigOverrides OverridesFromEnv(const std::function<const char *(const char *)> &getenv_fn);
void ApplyOverrides(ExperimentConfig *config, const ConfigOverrides &env,
                    const ConfigOverrides &flags);

struct EvalSummary {
  std::vector<UtteranceResult> utterances;
  std::map<std::string, WerStats> per_speaker;
  double macro_wer = 0.0;
  WerStats micro;
};

EvalSummary Summarize(std::vector<UtteranceResult> results);
std::string EvalToJsonLines(const EvalSummary &s);
std::string EvalSummaryToJson(const EvalSummary &s);

// Results log: one RunRecord per line.
std::vector<RunRecord> ReadResults(const std::string &path);
void AppendResult(const std::string &path, const RunRecord &record);
// Records sorted by key with wall_s and checkpoint paths removed, one JSON
// object per line. Two runs are equivalent iff these strings match.
std::string CanonicalResults(std::vector<RunRecord> records);

// Everything produced from one config, laid out under out_dir.
class Experiment {
 public:
  explicit Experiment(ExperimentConfig config);

  const ExperimentConfig &config() const { return config_; }
  std::string CorpusDir() const;
  std::string BasePath() const;
  std::string ResultsPath() const;
  std::string CheckpointDir() const;
  std::string EvalDir() const;
  std::string AnalysisDir() const;
  std::string ReportDir() const;

  // Writes the corpus unless an identical one (same config hash) exists.
  Corpus Synth(bool force = false);
  const Corpus &LoadCorpus();

  RunRecord TrainBase(const std::function<void(const EpochLog &)> &progress = {});
  ModelCheckpoint LoadBase() const;

  // Speakers selected by the filter, in corpus order.
  std::vector<std::string> TargetSpeakers();
  // Union of the configured grids over target speakers, duplicates removed.
  std::vector<FinetunePlan> SweepPlans();
  // Runs every plan whose key is not already in the results log.
  std::vector<RunRecord> Sweep(const std::function<void(const RunRecord &)> &on_done = {});
  RunRecord FinetuneOne(const std::string &speaker, const std::string &mask,
                        const std::string &budget);

  // Decodes `split` of the speakers matching `conditions` (all when empty).
  EvalSummary Evaluate(const ModelCheckpoint &ckpt, Split split,
                       const std::vector<std::string> &conditions);

  struct AnalysisResult {
    ErrorProfile standard, base, finetuned;
    ProfileComparison comparison;
  };
  // Standard = base model on typical test speech; base / finetuned = base and
  // headline-mask full-budget models on the target speakers' test speech.
  AnalysisResult Analyze();

 private:
  ErrorProfile ProfileFor(const std::vector<std::pair<const ModelCheckpoint *, Manifest>> &jobs);

  ExperimentConfig config_;
  std::optional<Corpus> corpus_;
  std::optional<Lexicon> lexicon_;
};

// ---- reports ------------------------------------------------------------------

struct GroupRow {
  std::string group;
  std::string system;  // "base" or "finetuned"
  double mean_wer = 0.0;
  std::map<std::string, double> per_speaker;
  double rel_improvement = 0.0;  // finetuned rows: mean per-speaker relative gain
};

struct LayerRow {
  std::string mask;
  double mean_ft_wer = 0.0;
  double mean_rel_improvement = 0.0;
  int speakers = 0;
};

struct Report {
  std::vector<GroupRow> table;
  std::vector<CurvePoint> curve;
  std::vector<LayerRow> layers;
  // subset-mask gain / full-mask gain, from the layer table.
  double subset_fraction = 0.0;
  std::string best_mask;
};

// Group label per speaker: condition plus severity band for dysarthric
// speakers ("dysarthric-frs3" below severity 0.55, "dysarthric-frs1-2"
// otherwise).
std::string SpeakerGroupLabel(const SpeakerProfile &s);

// Throws kData when two records share a key but disagree on metrics.
std::vector<RunRecord> DeduplicateResults(const std::vector<RunRecord> &records);

Report BuildReport(const std::vector<RunRecord> &records,
                   const std::map<std::string, std::string> &speaker_groups,
                   const std::string &headline_mask, const std::string &subset_mask);

// Files written by WriteReport: groups.csv, budget_curve.csv, layers.csv,
// report.json.
std::map<std::string, std::string> RenderReport(const Report &report);
void WriteReport(const std::string &dir, const Report &report);
// Rebuilds the report from the records and diffs it against `dir`. Returns
// human-readable mismatches; empty means consistent.
std::vector<std::string> VerifyReport(const std::string &dir, const Report &rebuilt,
                                      const std::vector<RunRecord> &records);

}  // namespace perasr

#endif  // PERASR_HARNESS_H_
