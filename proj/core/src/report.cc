// core/src/report.cc

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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>

#include "json_io.h"
#include "perasr/common.h"
#include "perasr/harness.h"

namespace perasr {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string SpeakerGroupLabel(const SpeakerProfile &s) {
  switch (s.condition) {
    case Condition::kTypical:
      return "typical";
    case Condition::kAccented:
      return "accented";
    case Condition::kDysarthric:
      return s.severity < 0.55 ? "dysarthric-frs3" : "dysarthric-frs1-2";
  }
  return "unknown";
}

namespace {

bool SameMetrics(RunRecord a, RunRecord b) {
  a.wall_s = b.wall_s = 0.0;
  a.checkpoint = b.checkpoint = "";
  return a.ToJson() == b.ToJson();
}

std::string Num(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

}  // namespace

std::vector<RunRecord> DeduplicateResults(const std::vector<RunRecord> &records) {
  std::map<std::string, size_t> first;
  std::vector<RunRecord> out;
  for (const auto &r : records) {
    // Failed cells may be retried; a later success supersedes them.
    auto it = first.find(r.key);
    if (it == first.end()) {
      first[r.key] = out.size();
      out.push_back(r);
      continue;
    }
    RunRecord &prev = out[it->second];
    if (!prev.error.empty()) {
      prev = r;
    } else if (r.error.empty() && !SameMetrics(prev, r)) {
      ThrowData("results log has conflicting records for key " + r.key);
    }
  }
  return out;
}

Report BuildReport(const std::vector<RunRecord> &all_records,
                   const std::map<std::string, std::string> &speaker_groups,
                   const std::string &headline_mask, const std::string &subset_mask) {
  std::vector<RunRecord> records;
  for (auto &r : DeduplicateResults(all_records))
    if (r.kind == "finetune" && r.error.empty()) records.push_back(std::move(r));
  if (records.empty()) ThrowData("results log has no successful finetune records");

  Report rep;
  // Group table: headline mask at the full budget.
  std::map<std::string, std::map<std::string, const RunRecord *>> by_group;
  for (const auto &r : records) {
    if (r.mask != headline_mask || r.budget != "all") continue;
    auto g = speaker_groups.find(r.speaker);
    const std::string group = g == speaker_groups.end() ? "ungrouped" : g->second;
    by_group[group][r.speaker] = &r;
    by_group["all"][r.speaker] = &r;
  }
  for (const auto &[group, speakers] : by_group) {
    GroupRow base, ft;
    base.group = ft.group = group;
    base.system = "base";
    ft.system = "finetuned";
    for (const auto &[spk, r] : speakers) {
      base.per_speaker[spk] = r->base_wer;
      ft.per_speaker[spk] = r->ft_wer;
      base.mean_wer += r->base_wer;
      ft.mean_wer += r->ft_wer;
      ft.rel_improvement += r->rel_improvement;
    }
    const double n = static_cast<double>(speakers.size());
    base.mean_wer /= n;
    ft.mean_wer /= n;
    ft.rel_improvement /= n;
    rep.table.push_back(base);
    rep.table.push_back(ft);
  }

  rep.curve = BudgetCurve(records, headline_mask);

  // Layer table: every mask at the full budget.
  std::map<std::string, LayerRow> layers;
  for (const auto &r : records) {
    if (r.budget != "all") continue;
    LayerRow &row = layers[r.mask];
    row.mask = r.mask;
    row.mean_ft_wer += r.ft_wer;
    row.mean_rel_improvement += r.rel_improvement;
    ++row.speakers;
  }
  double best = std::numeric_limits<double>::infinity();
  for (auto &[mask, row] : layers) {
    row.mean_ft_wer /= row.speakers;
    row.mean_rel_improvement /= row.speakers;
    if (row.mean_ft_wer < best) {
      best = row.mean_ft_wer;
      rep.best_mask = mask;
    }
    rep.layers.push_back(row);
  }
  std::stable_sort(rep.layers.begin(), rep.layers.end(), [](const LayerRow &a, const LayerRow &b) {
    return a.mean_ft_wer < b.mean_ft_wer;
  });
  auto full = layers.find(headline_mask);
  auto subset = layers.find(subset_mask);
  if (full != layers.end() && subset != layers.end() && full->second.mean_rel_improvement != 0.0)
    rep.subset_fraction = subset->second.mean_rel_improvement / full->second.mean_rel_improvement;
  return rep;
}

std::map<std::string, std::string> RenderReport(const Report &report) {
  std::map<std::string, std::string> files;
  {
    std::ostringstream os;
    os << "group,system,mean_wer,rel_improvement,speakers\n";
    for (const auto &r : report.table) {
      os << r.group << ',' << r.system << ',' << Num(r.mean_wer) << ','
         << Num(r.system == "base" ? 0.0 : r.rel_improvement) << ',';
      bool first = true;
      for (const auto &[spk, w] : r.per_speaker) {
        os << (first ? "" : ";") << spk << '=' << Num(w);
        first = false;
      }
      os << '\n';
    }
    files["groups.csv"] = os.str();
  }
  {
    std::ostringstream os;
    os << "budget,mean_budget_s,mean_rel_improvement,fraction_of_full\n";
    for (const auto &p : report.curve)
      os << p.budget << ',' << Num(p.mean_budget_s) << ',' << Num(p.mean_rel_improvement) << ','
         << Num(p.fraction_of_full) << '\n';
    files["budget_curve.csv"] = os.str();
  }
  {
    std::ostringstream os;
    os << "mask,mean_ft_wer,mean_rel_improvement,speakers\n";
    for (const auto &r : report.layers)
      os << r.mask << ',' << Num(r.mean_ft_wer) << ',' << Num(r.mean_rel_improvement) << ','
         << r.speakers << '\n';
    files["layers.csv"] = os.str();
  }
  ordered_json j;
  ordered_json table = ordered_json::array();
  for (const auto &r : report.table)
    table.push_back({{"group", r.group},
                     {"system", r.system},
                     {"mean_wer", r.mean_wer},
                     {"rel_improvement", r.rel_improvement},
                     {"per_speaker", r.per_speaker}});
  j["table"] = table;
  ordered_json curve = ordered_json::array();
  for (const auto &p : report.curve)
    curve.push_back({{"budget", p.budget},
                     {"mean_budget_s", p.mean_budget_s},
                     {"mean_rel_improvement", p.mean_rel_improvement},
                     {"fraction_of_full", p.fraction_of_full}});
  j["budget_curve"] = curve;
  ordered_json layers = ordered_json::array();
  for (const auto &r : report.layers)
    layers.push_back({{"mask", r.mask},
                      {"mean_ft_wer", r.mean_ft_wer},
                      {"mean_rel_improvement", r.mean_rel_improvement},
                      {"speakers", r.speakers}});
  j["layers"] = layers;
  j["best_mask"] = report.best_mask;
  j["subset_fraction"] = report.subset_fraction;
  files["report.json"] = j.dump(2) + "\n";
  return files;
}

void WriteReport(const std::string &dir, const Report &report) {
  fs::create_directories(dir);
  for (const auto &[name, text] : RenderReport(report))
    internal::WriteTextFile((fs::path(dir) / name).string(), text);
}

std::vector<std::string> VerifyReport(const std::string &dir, const Report &rebuilt,
                                      const std::vector<RunRecord> &records) {
  std::vector<std::string> problems;
  for (const auto &r : records) {
    if (!r.error.empty() || r.kind != "finetune") continue;
    double expect = RelativeImprovement(r.base_wer, r.ft_wer);
    if (std::abs(expect - r.rel_improvement) > 1e-12)
      problems.push_back("record " + r.key + ": rel_improvement does not match its WERs");
  }
  for (const auto &[name, text] : RenderReport(rebuilt)) {
    const fs::path p = fs::path(dir) / name;
    if (!fs::exists(p)) {
      problems.push_back(name + ": missing");
      continue;
    }
    if (internal::ReadTextFile(p.string()) != text)
      problems.push_back(name + ": differs from the value recomputed from the results log");
  }
  return problems;
}

}  // namespace perasr
