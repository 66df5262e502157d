// tools/perasr.cc

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

// Command-line front end. Exit codes: 0 success, 1 usage, 2 data, 3 divergence.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "perasr/checkpoint.h"
#include "perasr/common.h"
#include "perasr/harness.h"

namespace fs = std::filesystem;
using namespace perasr;

namespace {

void WriteFile(const fs::path &path, const std::string &text) {
  fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) ThrowData("cannot write " + path.string());
  os << text;
}

void PrintEpoch(const EpochLog &l) {
  std::fprintf(stderr, "epoch %3d  train %.4f  dev %.4f%s\n", l.epoch, l.train_loss, l.dev_loss,
               l.improved ? "  *" : "");
}

void PrintRecord(const RunRecord &r) {
  if (!r.error.empty()) {
    std::fprintf(stderr, "[fail] %s %s %s: %s\n", r.speaker.c_str(), r.mask.c_str(),
                 r.budget.c_str(), r.error.c_str());
    return;
  }
  std::fprintf(stderr, "[done] %-10s %-26s %-5s base %.3f  ft %.3f  rel %+.3f  (%.1fs)\n",
               r.speaker.c_str(), r.mask.c_str(), r.budget.c_str(), r.base_wer, r.ft_wer,
               r.rel_improvement, r.wall_s);
}

std::map<std::string, std::string> SpeakerGroups(Experiment &exp) {
  std::map<std::string, std::string> groups;
  for (const auto &s : exp.LoadCorpus().speakers) groups[s.id] = SpeakerGroupLabel(s);
  return groups;
}

Report MakeReport(Experiment &exp) {
  const int layers = exp.config().model.encoder_layers;
  return BuildReport(ReadResults(exp.ResultsPath()), SpeakerGroups(exp),
                     FreezeMask::Parse(exp.config().headline_mask, layers).Label(),
                     FreezeMask::Parse(exp.config().subset_mask, layers).Label());
}

int Run(int argc, char **argv) {
  CLI::App app{"Desk-scale transducer personalization laboratory"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> out;
  app.add_option("--config", config_path, "Experiment config (JSON)");
  app.add_option("--seed", seed, "Master seed");
  app.add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", out, "Output directory");

  auto *synth = app.add_subcommand("synth", "Synthesize the corpus");
  bool force = false;
  synth->add_flag("--force", force, "Rebuild even if an identical corpus exists");

  auto *train_base = app.add_subcommand("train-base", "Train the base model on typical speakers");

  auto *finetune = app.add_subcommand("finetune", "Finetune for one speaker");
  std::string speaker, mask = "encoder+joint", budget = "all";
  finetune->add_option("--speaker", speaker, "Speaker id")->required();
  finetune->add_option("--mask", mask, "Trainable groups, e.g. enc.0+joint");
  finetune->add_option("--budget", budget, "all, seconds, or percent of train audio");

  auto *eval = app.add_subcommand("eval", "Decode a split and score WER");
  std::string ckpt_path, split_name = "test", label;
  std::vector<std::string> conditions;
  eval->add_option("--checkpoint", ckpt_path, "Checkpoint (default: base)");
  eval->add_option("--split", split_name, "train or test")
      ->check(CLI::IsMember({"train", "test"}));
  eval->add_option("--condition", conditions, "Restrict to speaker conditions");
  eval->add_option("--name", label, "Output label (default: checkpoint stem)");

  auto *sweep = app.add_subcommand("sweep", "Run the configured finetuning grid (resumable)");
  auto *analyze = app.add_subcommand("analyze", "Phoneme error profiles and KL comparison");
  auto *report = app.add_subcommand("report", "Tables and curves from the results log");
  auto *verify = app.add_subcommand("verify", "Recompute the report and diff it");
  std::string against;
  verify->add_option("--against", against,
                     "Other results log that must match this one (wall time and paths ignored)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  if (config_path.empty()) {
    if (const char *v = std::getenv("PERASR_CONFIG"); v && *v) config_path = v;
  }
  if (config_path.empty()) ThrowUsage("--config (or PERASR_CONFIG) is required");
  ExperimentConfig cfg = LoadExperimentConfig(config_path);
  ConfigOverrides flags{seed, workers, out};
  ApplyOverrides(&cfg, OverridesFromEnv([](const char *k) { return std::getenv(k); }), flags);
  Experiment exp(cfg);

  if (synth->parsed()) {
    Corpus c = exp.Synth(force);
    std::printf("corpus: %zu utterances, %zu speakers, %.1f s of audio -> %s\n",
                c.manifest.records.size(), c.speakers.size(), c.manifest.TotalDuration(),
                exp.CorpusDir().c_str());
  } else if (train_base->parsed()) {
    RunRecord r = exp.TrainBase(PrintEpoch);
    std::printf("base: %lld steps, dev loss %.4f, typical test WER %.4f -> %s\n",
                static_cast<long long>(r.steps), r.dev_loss, r.ft_wer, r.checkpoint.c_str());
  } else if (finetune->parsed()) {
    RunRecord r = exp.FinetuneOne(speaker, mask, budget);
    PrintRecord(r);
    std::printf("%s\n", r.ToJson().c_str());
  } else if (eval->parsed()) {
    ModelCheckpoint ckpt = ckpt_path.empty() ? exp.LoadBase() : LoadCheckpoint(ckpt_path);
    const Split split = split_name == "train" ? Split::kTrain : Split::kTest;
    EvalSummary s = exp.Evaluate(ckpt, split, conditions);
    if (label.empty())
      label = (ckpt_path.empty() ? std::string("base") : fs::path(ckpt_path).stem().string()) +
              "-" + split_name;
    WriteFile(fs::path(exp.EvalDir()) / (label + ".jsonl"), EvalToJsonLines(s));
    WriteFile(fs::path(exp.EvalDir()) / (label + ".summary.json"), EvalSummaryToJson(s));
    std::printf("%s: macro WER %.4f, micro WER %.4f over %zu utterances\n", label.c_str(),
                s.macro_wer, s.micro.Wer(), s.utterances.size());
  } else if (sweep->parsed()) {
    auto plans = exp.SweepPlans();
    std::fprintf(stderr, "sweep: %zu cells, %d workers\n", plans.size(), cfg.workers);
    auto recs = exp.Sweep(PrintRecord);
    std::vector<RunRecord> finetunes;
    for (const auto &r : DeduplicateResults(ReadResults(exp.ResultsPath())))
      if (r.kind == "finetune") finetunes.push_back(r);
    WriteFile(fs::path(cfg.out_dir) / "sweep.csv", RecordsToCsv(finetunes));
    int failed = 0;
    for (const auto &r : recs) failed += !r.error.empty();
    std::printf("sweep: ran %zu cells (%d failed); %zu already complete\n", recs.size(), failed,
                plans.size() - recs.size());
    if (failed) return 2;
  } else if (analyze->parsed()) {
    auto a = exp.Analyze();
    std::printf("KL(base || standard) = %.4f\nKL(finetuned || standard) = %.4f\n",
                a.comparison.kl_base, a.comparison.kl_finetuned);
    std::printf("top miss phonemes:");
    for (const auto &c : a.comparison.top_miss) std::printf(" %s", c.phoneme.c_str());
    std::printf(" (%.1f%% of misses)\n", 100 * a.comparison.top_miss_share);
    std::printf("top inserted phonemes:");
    for (const auto &c : a.comparison.top_insert) std::printf(" %s", c.phoneme.c_str());
    std::printf(" (%.1f%% of insertion/substitution mistakes)\n",
                100 * a.comparison.top_insert_share);
  } else if (report->parsed()) {
    Report rep = MakeReport(exp);
    WriteReport(exp.ReportDir(), rep);
    for (const auto &[name, text] : RenderReport(rep))
      if (name != "report.json") std::printf("== %s\n%s", name.c_str(), text.c_str());
  } else if (verify->parsed()) {
    auto records = ReadResults(exp.ResultsPath());
    auto problems = VerifyReport(exp.ReportDir(), MakeReport(exp), records);
    if (!against.empty()) {
      if (CanonicalResults(records) != CanonicalResults(ReadResults(against)))
        problems.push_back("results log differs from " + against);
    }
    for (const auto &p : problems) std::fprintf(stderr, "verify: %s\n", p.c_str());
    if (!problems.empty()) return 2;
    std::printf("verify: ok (%zu records)\n", records.size());
  }
  return 0;
}

}  // namespace

int main(int argc, char **argv) {
  try {
    return Run(argc, argv);
  } catch (const Error &e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(e.kind());
  } catch (const std::exception &e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
