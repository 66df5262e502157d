// core/src/analysis.cc

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

#include "perasr/analysis.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "perasr/common.h"

namespace perasr {

EditOps Align(std::span<const std::string> ref, std::span<const std::string> hyp) {
  const size_t n = ref.size(), m = hyp.size();
  // d[i][j]: cost of aligning ref[i:] with hyp[j:], so traceback runs forward.
  std::vector<int> d((n + 1) * (m + 1));
  auto at = [&](size_t i, size_t j) -> int & { return d[i * (m + 1) + j]; };
  for (size_t i = n + 1; i-- > 0;)
    for (size_t j = m + 1; j-- > 0;) {
      if (i == n) {
        at(i, j) = static_cast<int>(m - j);
      } else if (j == m) {
        at(i, j) = static_cast<int>(n - i);
      } else {
        int diag = at(i + 1, j + 1) + (ref[i] == hyp[j] ? 0 : 1);
        at(i, j) = std::min({diag, at(i + 1, j) + 1, at(i, j + 1) + 1});
      }
    }

  EditOps out;
  size_t i = 0, j = 0;
  while (i < n || j < m) {
    const int cur = at(i, j);
    if (i < n && j < m && ref[i] == hyp[j] && at(i + 1, j + 1) == cur) {
      out.ops.push_back({EditType::kMatch, ref[i], hyp[j]});
      ++out.matches, ++i, ++j;
    } else if (i < n && j < m && ref[i] != hyp[j] && at(i + 1, j + 1) + 1 == cur) {
      out.ops.push_back({EditType::kSubstitute, ref[i], hyp[j]});
      ++out.substitutions, ++i, ++j;
    } else if (i < n && at(i + 1, j) + 1 == cur) {
      out.ops.push_back({EditType::kDelete, ref[i], {}});
      ++out.deletions, ++i;
    } else {
      out.ops.push_back({EditType::kInsert, {}, hyp[j]});
      ++out.insertions, ++j;
    }
  }
  out.ref_length = static_cast<int>(n);
  return out;
}

std::pair<std::vector<std::string>, std::vector<std::string>> Replay(const EditOps &ops) {
  std::pair<std::vector<std::string>, std::vector<std::string>> out;
  for (const auto &op : ops.ops) {
    if (op.type != EditType::kInsert) out.first.push_back(op.ref);
    if (op.type != EditType::kDelete) out.second.push_back(op.hyp);
  }
  return out;
}

WerStats &WerStats::operator+=(const WerStats &o) {
  substitutions += o.substitutions;
  deletions += o.deletions;
  insertions += o.insertions;
  ref_words += o.ref_words;
  return *this;
}

WerStats Wer(std::span<const std::string> ref, std::span<const std::string> hyp) {
  if (ref.empty()) ThrowUsage("WER undefined for an empty reference");
  EditOps e = Align(ref, hyp);
  return {e.substitutions, e.deletions, e.insertions, e.ref_length};
}

WerStats Wer(const std::string &ref, const std::string &hyp) {
  auto r = SplitWords(ref);
  auto h = SplitWords(hyp);
  return Wer(std::span<const std::string>(r), std::span<const std::string>(h));
}

std::optional<std::vector<std::string>> ToPhonemes(std::span<const std::string> words,
                                                   const Lexicon &lexicon, int *oov) {
  std::vector<std::string> out;
  bool ok = true;
  for (const auto &w : words) {
    const auto *pron = lexicon.Find(w);
    if (!pron) {
      ok = false;
      continue;
    }
    out.insert(out.end(), pron->begin(), pron->end());
  }
  if (!ok) {
    if (oov) ++*oov;
    return std::nullopt;
  }
  return out;
}

int64_t ErrorProfile::TotalGroundTruth() const {
  int64_t s = 0;
  for (const auto &p : phonemes) s += p.gt_count;
  return s;
}

int64_t ErrorProfile::TotalMisses() const {
  int64_t s = 0;
  for (const auto &p : phonemes) s += p.del + p.sub_out;
  return s;
}

int64_t ErrorProfile::TotalProduced() const {
  int64_t s = 0;
  for (const auto &p : phonemes) s += p.ins + p.sub_in;
  return s;
}

std::vector<double> ErrorProfile::InsertionDistribution() const {
  std::vector<double> d(phonemes.size(), 0.0);
  const double total = static_cast<double>(TotalProduced());
  if (total == 0) return d;
  for (size_t i = 0; i < d.size(); ++i) d[i] = (phonemes[i].ins + phonemes[i].sub_in) / total;
  return d;
}

std::vector<double> ErrorProfile::MissDistribution() const {
  std::vector<double> d(phonemes.size(), 0.0);
  const double total = static_cast<double>(TotalMisses());
  if (total == 0) return d;
  for (size_t i = 0; i < d.size(); ++i) d[i] = (phonemes[i].del + phonemes[i].sub_out) / total;
  return d;
}

ErrorProfile BuildErrorProfile(std::span<const EditOps> alignments,
                               const std::vector<std::string> &inventory) {
  ErrorProfile prof;
  prof.inventory = inventory;
  prof.phonemes.assign(inventory.size(), {});
  std::map<std::string, size_t> index;
  for (size_t i = 0; i < inventory.size(); ++i) index[inventory[i]] = i;
  auto id = [&](const std::string &s) -> PhonemeStats & {
    auto it = index.find(s);
    if (it == index.end()) ThrowData("phoneme '" + s + "' not in inventory");
    return prof.phonemes[it->second];
  };
  for (const auto &a : alignments) {
    ++prof.utterances;
    for (const auto &op : a.ops) {
      switch (op.type) {
        case EditType::kMatch:
          ++id(op.ref).gt_count;
          break;
        case EditType::kSubstitute:
          ++id(op.ref).gt_count;
          ++id(op.ref).sub_out;
          ++id(op.hyp).sub_in;
          break;
        case EditType::kDelete:
          ++id(op.ref).gt_count;
          ++id(op.ref).del;
          break;
        case EditType::kInsert:
          ++id(op.hyp).ins;
          break;
      }
    }
  }
  if (prof.TotalGroundTruth() == 0) ThrowData("error profile has no ground-truth phonemes");
  return prof;
}

double KlDivergence(std::span<const double> p, std::span<const double> q, double eps) {
  if (p.size() != q.size() || p.empty()) ThrowUsage("KL needs distributions on one support");
  double sp = 0.0, sq = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    sp += p[i] + eps;
    sq += q[i] + eps;
  }
  double kl = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    const double pi = (p[i] + eps) / sp, qi = (q[i] + eps) / sq;
    kl += pi * std::log(pi / qi);
  }
  return std::max(kl, 0.0);
}

namespace {

std::vector<Contributor> TopK(const std::vector<std::string> &names, const std::vector<double> &key,
                              int k) {
  std::vector<size_t> order(names.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return key[a] > key[b]; });
  std::vector<Contributor> out;
  for (size_t i = 0; i < order.size() && static_cast<int>(i) < k; ++i)
    out.push_back({names[order[i]], key[order[i]]});
  return out;
}

}  // namespace

ProfileComparison CompareProfiles(const ErrorProfile &standard, const ErrorProfile &base,
                                  const ErrorProfile &finetuned, int top_miss, int top_insert) {
  if (standard.inventory != base.inventory || standard.inventory != finetuned.inventory)
    ThrowUsage("profiles use different phoneme inventories");
  ProfileComparison c;
  const auto &inv = standard.inventory;
  std::vector<double> diff(inv.size());
  for (size_t i = 0; i < inv.size(); ++i) {
    ProfileComparison::Row r{inv[i], standard.phonemes[i].MissRate(), base.phonemes[i].MissRate(),
                             finetuned.phonemes[i].MissRate()};
    diff[i] = std::abs(r.base - r.standard);
    c.miss_rates.push_back(r);
  }
  c.kl_base = KlDivergence(base.InsertionDistribution(), standard.InsertionDistribution());
  c.kl_finetuned = KlDivergence(finetuned.InsertionDistribution(), standard.InsertionDistribution());
  c.kl_miss_base = KlDivergence(base.MissDistribution(), standard.MissDistribution());
  c.kl_miss_finetuned = KlDivergence(finetuned.MissDistribution(), standard.MissDistribution());

  const auto miss_share = base.MissDistribution();
  for (auto &ct : TopK(inv, diff, top_miss)) {
    size_t i = std::find(inv.begin(), inv.end(), ct.phoneme) - inv.begin();
    c.top_miss.push_back({ct.phoneme, miss_share[i]});
    c.top_miss_share += miss_share[i];
  }
  c.top_insert = TopK(inv, base.InsertionDistribution(), top_insert);
  for (const auto &ct : c.top_insert) c.top_insert_share += ct.value;
  return c;
}

std::string ProfileToJson(const ErrorProfile &profile) {
  nlohmann::ordered_json j;
  j["utterances"] = profile.utterances;
  j["oov_excluded"] = profile.oov_excluded;
  j["gt_phonemes"] = profile.TotalGroundTruth();
  j["misses"] = profile.TotalMisses();
  j["produced"] = profile.TotalProduced();
  auto ins = profile.InsertionDistribution();
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (size_t i = 0; i < profile.inventory.size(); ++i) {
    const auto &p = profile.phonemes[i];
    rows.push_back({{"phoneme", profile.inventory[i]},
                    {"gt_count", p.gt_count},
                    {"del", p.del},
                    {"sub_out", p.sub_out},
                    {"sub_in", p.sub_in},
                    {"ins", p.ins},
                    {"miss_rate", p.MissRate()},
                    {"insertion_prob", ins[i]}});
  }
  j["phonemes"] = std::move(rows);
  return j.dump(2);
}

std::string ProfileToCsv(const ErrorProfile &profile) {
  std::ostringstream os;
  os.precision(10);
  os << "phoneme,gt_count,del,sub_out,sub_in,ins,miss_rate\n";
  for (size_t i = 0; i < profile.inventory.size(); ++i) {
    const auto &p = profile.phonemes[i];
    os << profile.inventory[i] << ',' << p.gt_count << ',' << p.del << ',' << p.sub_out << ','
       << p.sub_in << ',' << p.ins << ',' << p.MissRate() << '\n';
  }
  return os.str();
}

std::string ComparisonToJson(const ProfileComparison &cmp) {
  nlohmann::ordered_json j;
  j["kl_base_vs_standard"] = cmp.kl_base;
  j["kl_finetuned_vs_standard"] = cmp.kl_finetuned;
  j["kl_miss_base_vs_standard"] = cmp.kl_miss_base;
  j["kl_miss_finetuned_vs_standard"] = cmp.kl_miss_finetuned;
  auto list = [](const std::vector<Contributor> &v) {
    nlohmann::ordered_json a = nlohmann::ordered_json::array();
    for (const auto &c : v) a.push_back({{"phoneme", c.phoneme}, {"share", c.value}});
    return a;
  };
  j["top_miss"] = list(cmp.top_miss);
  j["top_miss_share"] = cmp.top_miss_share;
  j["top_insert"] = list(cmp.top_insert);
  j["top_insert_share"] = cmp.top_insert_share;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto &r : cmp.miss_rates)
    rows.push_back({{"phoneme", r.phoneme},
                    {"standard", r.standard},
                    {"base", r.base},
                    {"finetuned", r.finetuned}});
  j["miss_rates"] = std::move(rows);
  return j.dump(2);
}

std::string ComparisonToCsv(const ProfileComparison &cmp) {
  std::ostringstream os;
  os.precision(10);
  os << "phoneme,standard,base,finetuned\n";
  for (const auto &r : cmp.miss_rates)
    os << r.phoneme << ',' << r.standard << ',' << r.base << ',' << r.finetuned << '\n';
  return os.str();
}

}  // namespace perasr
