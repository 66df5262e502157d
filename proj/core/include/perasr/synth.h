// core/include/perasr/synth.h

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

#ifndef PERASR_SYNTH_H_
#define PERASR_SYNTH_H_

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "perasr/features.h"
#include "perasr/lexicon.h"

namespace perasr {

enum class Condition { kTypical, kDysarthric, kAccented };

std::string ConditionName(Condition c);
Condition ParseCondition(const std::string &name);

// A categorical distribution over replacement phonemes, self included.
using SubstitutionRow = std::vector<std::pair<std::string, double>>;

// Synthetic speaker. `severity` plays the role of an inverted FRS speech score
// (FRS 4 -> 0.0, FRS 3 -> 0.4, FRS 1-2 -> 0.7..0.9); for accented speakers it
// is accent strength.
struct SpeakerProfile {
  std::string id;
  Condition condition = Condition::kTypical;
  double severity = 0.0;
  std::map<std::string, SubstitutionRow> substitution_map;
  double tempo_factor = 1.0;
  uint64_t template_seed = 0;

  // Throws kData when an invariant is broken.
  void Validate(const Lexicon &lexicon) const;
  // Probability that `from` is realized as `to`.
  double SubstitutionProb(const std::string &from, const std::string &to) const;
};

// Draws a speaker deterministically from (condition, severity, seed).
SpeakerProfile MakeSpeaker(const std::string &id, Condition condition,
                           double severity, uint64_t seed, const Lexicon &lexicon);

struct PhoneSegment {
  std::string intended;
  std::string realized;
  int word_index = 0;
  int64_t start_sample = 0;
  int64_t num_samples = 0;
};

struct SynthesizedUtterance {
  Waveform wave;
  std::vector<PhoneSegment> alignment;

  std::vector<std::string> RealizedPhones() const;
};

struct SynthOptions {
  int sample_rate = 16000;
  double edge_silence_ms = 100.0;
  double rms_level = 0.1;
};

// Renders `words` for `speaker`. Throws kData naming the first OOV word.
SynthesizedUtterance SynthesizeUtterance(const std::vector<std::string> &words,
                                         const SpeakerProfile &speaker,
                                         const Lexicon &lexicon, uint64_t seed,
                                         const SynthOptions &options = {});

// Sum of eight random typical speakers, used as a babble-like noise source.
std::vector<float> MakeBabble(const Lexicon &lexicon, uint64_t seed,
                              double seconds, const SynthOptions &options = {});

// Nominal duration in milliseconds of a phoneme before speaker scaling.
double NominalPhoneDurationMs(const std::string &symbol);

}  // namespace perasr

#endif  // PERASR_SYNTH_H_
