// core/include/perasr/train.h

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

#ifndef PERASR_TRAIN_H_
#define PERASR_TRAIN_H_

#include <cstdint>
#include <functional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "perasr/analysis.h"
#include "perasr/backward.h"
#include "perasr/corpus.h"
#include "perasr/model.h"

namespace perasr {

// The set of parameter groups that receive updates.
struct FreezeMask {
  std::set<std::string> trainable;

  static FreezeMask All(int encoder_layers);
  // "enc.0+enc.1+joint"; ',' also accepted as a separator. "all" and
  // "encoder" are shorthands resolved against `encoder_layers`.
  static FreezeMask Parse(const std::string &spec, int encoder_layers);
  // Canonical order (enc.*, dec, joint) joined with '+'.
  std::string Label() const;
  bool Contains(const std::string &group) const { return trainable.count(group) > 0; }
  // Throws kUsage on unknown group names.
  void Validate(int encoder_layers) const;
  // Narrowest backward pass that still yields every trainable gradient.
  BackwardScope Scope(int encoder_layers) const;
};

// {enc.0}, {enc.0, enc.1}, ..., full encoder; each without and with joint.
std::vector<FreezeMask> DefaultMaskFamily(int encoder_layers);

// Zeroes every group not in the mask, frontend included.
template <typename S>
void ApplyFreeze(TransducerParams<S> *grads, const FreezeMask &mask);

struct HyperParams {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 8;
  int max_epochs = 30;
  int patience = 5;
  double clip_norm = 5.0;
  double dev_fraction = 0.1;
  uint64_t seed = 42;

  void Validate() const;
};

// L2 norm over all tensors; rescales to max_norm when above it. Returns the
// norm before clipping.
double ClipGradNorm(TransducerParams<float> *grads, double max_norm);

class Adam {
 public:
  explicit Adam(const TransducerParams<float> &like);
  // Updates only the groups in `mask`; all other bytes stay untouched.
  void Step(TransducerParams<float> *params, const TransducerParams<float> &grads,
            const HyperParams &hp, const FreezeMask &mask);
  int64_t steps() const { return steps_; }

 private:
  TransducerParams<float> m_, v_;
  int64_t steps_ = 0;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double dev_loss = 0.0;
  bool improved = false;
  int64_t steps = 0;
};

struct TrainResult {
  ModelCheckpoint checkpoint;  // parameters with the best dev loss seen
  double initial_dev_loss = 0.0;
  double best_dev_loss = 0.0;
  double train_loss = 0.0;  // mean batch loss in the epoch that produced the best
  int64_t steps = 0;
  int epochs = 0;
};

// Minibatch Adam with early stopping on dev loss. Throws kDivergence on a
// non-finite loss.
TrainResult Train(const ModelCheckpoint &init, std::span<const TrainExample> train,
                  std::span<const TrainExample> dev, const HyperParams &hp,
                  const FreezeMask &mask,
                  const std::function<void(const EpochLog &)> &progress = {});

std::vector<TrainExample> LoadExamples(const Manifest &manifest, const std::string &corpus_dir,
                                       const Vocab &vocab, int stack_factor);

// Seeded split of `records` into (train, dev) with round(fraction * n) dev
// records, at least one when n >= 2. A single record serves as both.
std::pair<Manifest, Manifest> CarveDev(const Manifest &records, double fraction, uint64_t seed);

// Per-dimension mean and 1/std of the super-frames, written into the frontend
// group.
void SetNormalization(std::span<const TrainExample> examples, TransducerParams<float> *params);

// ---- evaluation -----------------------------------------------------------

struct UtteranceResult {
  std::string utterance_id;
  std::string speaker_id;
  std::string reference;
  std::string hypothesis;
  WerStats stats;
};

std::vector<UtteranceResult> DecodeManifest(const ModelCheckpoint &ckpt, const Manifest &manifest,
                                            const std::string &corpus_dir);
WerStats PooledWer(std::span<const UtteranceResult> results);
// Mean of per-speaker pooled WERs.
double MacroWer(std::span<const UtteranceResult> results);

// (base - finetuned) / base; 0 when base is 0.
double RelativeImprovement(double base_wer, double finetuned_wer);

// ---- runs -----------------------------------------------------------------

struct RunRecord {
  std::string key;
  std::string kind;  // "base" or "finetune"
  std::string speaker;
  std::string mask;
  std::string budget;  // label: "all", "300s" or "20%"
  double budget_s = 0.0;  // audio actually selected
  uint64_t seed = 0;
  int train_utterances = 0;
  double train_loss = 0.0;
  double dev_loss = 0.0;
  double base_wer = 0.0;
  double ft_wer = 0.0;
  double rel_improvement = 0.0;
  int64_t steps = 0;
  int epochs = 0;
  double wall_s = 0.0;
  std::string checkpoint;
  std::string error;

  std::string ToJson() const;
  static RunRecord FromJson(const std::string &line);
};

struct FinetunePlan {
  std::string speaker_id;
  std::string budget_label = "all";
  BudgetSpec budget;
  FreezeMask mask;
  HyperParams hp;

  // Stable identity of the cell: speaker, mask, budget, seed and
  // hyperparameters.
  std::string Key() const;
};

struct BaseTrainingResult {
  TrainResult train;
  RunRecord record;
};

// `manifest` holds the base speakers' train records; dev is carved from it.
BaseTrainingResult TrainBase(const Manifest &manifest, const std::string &corpus_dir,
                             const ModelConfig &model, const FeatureConfig &features,
                             int stack_factor, const HyperParams &hp,
                             const std::function<void(const EpochLog &)> &progress = {});

// Trains on the plan's budget subset, evaluates base and finetuned WER on the
// speaker's test split. Saves the checkpoint when `checkpoint_path` is set.
RunRecord Finetune(const FinetunePlan &plan, const ModelCheckpoint &base,
                   const Manifest &manifest, const std::string &corpus_dir,
                   const std::string &checkpoint_path = {}, ModelCheckpoint *out = nullptr);

// Runs every plan on up to `workers` threads. Results are indexed like
// `plans`; `on_done` is called under a lock as cells finish. Cell failures
// are recorded in RunRecord::error.
std::vector<RunRecord> RunPlans(const std::vector<FinetunePlan> &plans, const ModelCheckpoint &base,
                                const Manifest &manifest, const std::string &corpus_dir,
                                int workers,
                                const std::function<void(const RunRecord &)> &on_done = {},
                                const std::string &checkpoint_dir = {});

// One cell per mask; sorted by finetuned WER (ties by mask label).
std::vector<RunRecord> SweepLayers(const ModelCheckpoint &base, const Manifest &manifest,
                                   const std::string &corpus_dir, const std::string &speaker,
                                   const std::vector<FreezeMask> &masks, const HyperParams &hp,
                                   int workers = 1);

struct CurvePoint {
  std::string budget;
  double mean_budget_s = 0.0;
  double mean_rel_improvement = 0.0;  // macro over speakers
  double fraction_of_full = 0.0;      // relative to the "all" point
};

// Budget curve for one mask. Points are ordered by mean budget with "all"
// last.
std::vector<CurvePoint> BudgetCurve(std::span<const RunRecord> records, const std::string &mask);

struct BudgetSweep {
  std::vector<RunRecord> records;
  std::vector<CurvePoint> curve;
};

// Budgets are labels as in ResolveBudget.
BudgetSweep SweepBudget(const ModelCheckpoint &base, const Manifest &manifest,
                        const std::string &corpus_dir, const std::vector<std::string> &speakers,
                        const std::vector<std::string> &budgets, const FreezeMask &mask,
                        const HyperParams &hp, int workers = 1);

// "all", "<seconds>" / "<seconds>s", or "<percent>%" of the speaker's train
// audio. The selection seed derives from (seed, speaker) so that subsets of
// one speaker are nested across budgets.
BudgetSpec ResolveBudget(const std::string &label, const Manifest &manifest,
                         const std::string &speaker, uint64_t seed);

// Sweep CSV: speaker, mask, budget_s, base_wer, ft_wer, rel_improvement,
// wall_s, steps.
std::string RecordsToCsv(std::span<const RunRecord> records);

}  // namespace perasr

#endif  // PERASR_TRAIN_H_
