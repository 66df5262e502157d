// core/include/perasr/corpus.h

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

#ifndef PERASR_CORPUS_H_
#define PERASR_CORPUS_H_

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "perasr/common.h"
#include "perasr/features.h"
#include "perasr/lexicon.h"
#include "perasr/synth.h"

namespace perasr {

enum class Split { kTrain, kTest };

struct ManifestRecord {
  std::string utterance_id;
  std::string speaker_id;
  std::string transcript;  // space-separated words
  Split split = Split::kTrain;
  double duration_s = 0.0;
  std::string path;        // feature file, relative to the corpus directory
  std::vector<std::string> phones;  // realized phonemes (diagnostic)
  bool oov = false;
};

class Manifest {
 public:
  std::vector<ManifestRecord> records;

  static Manifest Load(const std::string &path);
  void Save(const std::string &path) const;
  // Serialized JSON-lines text; Save writes exactly this.
  std::string ToJsonLines() const;

  // Unique ids, disjoint splits, known words (unless flagged OOV).
  void Validate(const Lexicon &lexicon) const;

  Manifest Filter(const std::string &speaker_id, std::optional<Split> split) const;
  std::vector<std::string> Speakers() const;
  double TotalDuration() const;
};

// Seconds of training audio, or the whole train split when `all` is set.
struct BudgetSpec {
  double budget_s = 0.0;
  bool all = true;
  uint64_t selection_seed = 0;

  static BudgetSpec All(uint64_t seed = 0) { return {0.0, true, seed}; }
  static BudgetSpec Seconds(double s, uint64_t seed = 0) { return {s, false, seed}; }
  std::string Label() const;
};

// Greedy prefix of the speaker's train records in a seeded shuffle order;
// stops before the first record that would exceed the budget, always keeping
// at least one.
Manifest MakeBudgetSubset(const Manifest &manifest, const std::string &speaker_id,
                          const BudgetSpec &budget);

struct SpeakerGroup {
  Condition condition = Condition::kTypical;
  int count = 1;
  // Cycled across the group's speakers.
  std::vector<double> severities = {0.0};
  int sentences = 10;
  std::string prefix;  // defaults to the condition name
};

struct CorpusConfig {
  std::vector<SpeakerGroup> groups;
  uint64_t seed = 42;
  double test_fraction = 0.1;
  NoiseConfig noise;  // seed field is ignored; derived per utterance
  FeatureConfig features;
  SynthOptions synth;
};

// Message-bank style sentences over the shipped grammar. With `test_only`, the
// reserved (train-only) words are excluded.
std::vector<std::string> SampleSentence(Rng &rng, bool test_only);
// Every word the grammar can emit, and the reserved subset.
std::set<std::string> GrammarWords();
std::set<std::string> ReservedWords();

struct Corpus {
  Manifest manifest;
  std::vector<SpeakerProfile> speakers;
};

// Synthesizes, featurizes and writes a corpus under `out_dir`:
// manifest.jsonl, speakers.json, feats/<utt>.feat. `workers` only affects
// speed; output is identical for any value.
Corpus BuildCorpus(const CorpusConfig &config, const Lexicon &lexicon,
                   const std::string &out_dir, int workers = 1);

// Speaker profiles as written by BuildCorpus.
std::vector<SpeakerProfile> LoadSpeakers(const std::string &path);
void SaveSpeakers(const std::string &path, const std::vector<SpeakerProfile> &speakers);

std::string SplitName(Split s);

}  // namespace perasr

#endif  // PERASR_CORPUS_H_
