// core/include/perasr/analysis.h

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

#ifndef PERASR_ANALYSIS_H_
#define PERASR_ANALYSIS_H_

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "perasr/lexicon.h"

namespace perasr {

enum class EditType { kMatch, kSubstitute, kDelete, kInsert };

struct EditOp {
  EditType type = EditType::kMatch;
  std::string ref;  // empty for insertions
  std::string hyp;  // empty for deletions
};

struct EditOps {
  std::vector<EditOp> ops;
  int matches = 0;
  int substitutions = 0;
  int deletions = 0;
  int insertions = 0;
  int ref_length = 0;  // N = matches + substitutions + deletions

  int Errors() const { return substitutions + deletions + insertions; }
};

// Minimal unit-cost alignment. On equal cost the traceback prefers
// match, then substitute, then delete, then insert.
EditOps Align(std::span<const std::string> ref, std::span<const std::string> hyp);

// Rebuilds (ref, hyp) from the op list.
std::pair<std::vector<std::string>, std::vector<std::string>> Replay(const EditOps &ops);

struct WerStats {
  int substitutions = 0;
  int deletions = 0;
  int insertions = 0;
  int ref_words = 0;

  double Wer() const {
    return ref_words > 0 ? double(substitutions + deletions + insertions) / ref_words : 0.0;
  }
  WerStats &operator+=(const WerStats &o);
};

// Throws kUsage on an empty reference.
WerStats Wer(std::span<const std::string> ref, std::span<const std::string> hyp);
WerStats Wer(const std::string &ref, const std::string &hyp);

// Lexicon concatenation; nullopt when any word is missing (counted in *oov).
std::optional<std::vector<std::string>> ToPhonemes(std::span<const std::string> words,
                                                   const Lexicon &lexicon, int *oov = nullptr);

struct PhonemeStats {
  int64_t gt_count = 0;  // occurrences in ground truth
  int64_t del = 0;
  int64_t sub_out = 0;   // ground-truth phoneme replaced by another
  int64_t sub_in = 0;    // phoneme produced in place of another
  int64_t ins = 0;

  double MissRate() const { return gt_count > 0 ? double(del + sub_out) / gt_count : 0.0; }
};

struct ErrorProfile {
  std::vector<std::string> inventory;
  std::vector<PhonemeStats> phonemes;  // parallel to inventory
  int64_t utterances = 0;
  int64_t oov_excluded = 0;

  int64_t TotalGroundTruth() const;
  int64_t TotalMisses() const;      // del + sub_out
  int64_t TotalProduced() const;    // ins + sub_in
  // P(q | q inserted or substituted in); all zero when there are no such errors.
  std::vector<double> InsertionDistribution() const;
  // Share of misses per ground-truth phoneme.
  std::vector<double> MissDistribution() const;
};

// Aggregates alignments; order of `alignments` does not matter. Throws kData
// when the alignments contain no ground-truth phonemes or symbols outside the
// inventory.
ErrorProfile BuildErrorProfile(std::span<const EditOps> alignments,
                               const std::vector<std::string> &inventory);

// KL(P || Q) in nats after adding eps to every entry and renormalizing.
double KlDivergence(std::span<const double> p, std::span<const double> q, double eps = 1e-6);

struct Contributor {
  std::string phoneme;
  double value = 0.0;
};

struct ProfileComparison {
  struct Row {
    std::string phoneme;
    double standard = 0.0, base = 0.0, finetuned = 0.0;  // miss rates
  };
  std::vector<Row> miss_rates;
  double kl_base = 0.0;       // insertion distributions, base || standard
  double kl_finetuned = 0.0;  // finetuned || standard
  double kl_miss_base = 0.0;  // same on miss distributions
  double kl_miss_finetuned = 0.0;
  // Largest |base - standard| miss-rate differences, with their share of
  // base misses, and the top produced phonemes with their share.
  std::vector<Contributor> top_miss;
  double top_miss_share = 0.0;
  std::vector<Contributor> top_insert;
  double top_insert_share = 0.0;
};

// Throws kUsage if inventories differ.
ProfileComparison CompareProfiles(const ErrorProfile &standard, const ErrorProfile &base,
                                  const ErrorProfile &finetuned, int top_miss = 5,
                                  int top_insert = 2);

// JSON document and CSV (phoneme, gt_count, del, sub_out, sub_in, ins, miss_rate).
std::string ProfileToJson(const ErrorProfile &profile);
std::string ProfileToCsv(const ErrorProfile &profile);
std::string ComparisonToJson(const ProfileComparison &cmp);
// Per-phoneme miss-rate triples for plotting.
std::string ComparisonToCsv(const ProfileComparison &cmp);

}  // namespace perasr

#endif  // PERASR_ANALYSIS_H_
