// tests/test_harness.cc

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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "doctest.h"
#include "oracles.h"
#include "perasr/common.h"
#include "perasr/harness.h"

using namespace perasr;
namespace fs = std::filesystem;

namespace {

ErrorKind KindOf(const std::function<void()> &f) {
  try {
    f();
  } catch (const Error &e) {
    return e.kind();
  }
  FAIL("expected perasr::Error");
  return ErrorKind::kUsage;
}

// Small enough that a whole experiment runs in seconds. The high base rate
// gets past the junk-emitting phase so decoded words are analyzable.
std::string MicroConfigJson(const std::string &out) {
  return R"({
  "name": "micro",
  "seed": 5,
  "workers": 1,
  "out": ")" + out + R"(",
  "lexicon": ")" PERASR_SOURCE_DIR R"(/assets/lexicon.txt",
  "corpus": {
    "groups": [
      {"condition": "typical", "count": 2, "sentences": 6, "prefix": "typ"},
      {"condition": "dysarthric", "count": 2, "severities": [0.5, 0.8], "sentences": 6, "prefix": "dys"}
    ],
    "test_fraction": 0.34,
    "noise": {"target_snr_db": 15, "snr_jitter_db": 1, "kind": "white"},
    "features": {"mel_bins": 16, "fft_size": 512}
  },
  "stack_factor": 2,
  "model": {"input_dim": 32, "encoder_layers": 2, "hidden": 8, "joint_hidden": 8},
  "base": {"learning_rate": 0.02, "max_epochs": 15, "batch_size": 2},
  "finetune": {"learning_rate": 1e-3, "max_epochs": 2, "batch_size": 2, "dev_fraction": 0.25},
  "sweep": [{"masks": ["encoder+joint", "enc.0+joint"], "budgets": ["all", "50%"]}],
  "headline_mask": "encoder+joint",
  "subset_mask": "enc.0+joint"
})";
}

RunRecord Rec(const std::string &spk, const std::string &mask, const std::string &budget,
              double budget_s, double base, double ft) {
  RunRecord r;
  r.kind = "finetune";
  r.speaker = spk;
  r.mask = mask;
  r.budget = budget;
  r.budget_s = budget_s;
  r.base_wer = base;
  r.ft_wer = ft;
  r.rel_improvement = RelativeImprovement(base, ft);
  r.key = spk + "|" + mask + "|" + budget;
  return r;
}

std::string Slurp(const fs::path &p) {
  std::ifstream is(p);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config defaults and path resolution") {
  ExperimentConfig c = ExperimentConfig::FromJson(
      R"({"name": "x", "lexicon": "lex.txt", "finetune": {"patience": 7}})", "/data/cfg");
  CHECK(c.out_dir == "/data/cfg/runs/x");
  CHECK(c.lexicon_path == "/data/cfg/lex.txt");
  CHECK(c.finetune_hp.learning_rate == 1e-4);
  CHECK(c.finetune_hp.patience == 7);
  CHECK(c.base_hp.learning_rate == 1e-3);
  CHECK(c.seed == 42);
  CHECK(c.corpus.seed == 42);
  CHECK(c.finetune_hp.seed == 42);
  CHECK(c.speakers.conditions == std::vector<std::string>{"dysarthric"});

  ExperimentConfig s = ExperimentConfig::FromJson(
      R"({"seed": 9, "out": "/abs/o", "corpus": {"noise": {"target_snr_db": "inf"}}})");
  CHECK(s.out_dir == "/abs/o");
  CHECK(s.base_hp.seed == 9);
  CHECK(std::isinf(s.corpus.noise.target_snr_db));

  // ToJson reproduces an equivalent config.
  ExperimentConfig again = ExperimentConfig::FromJson(c.ToJson(), "/elsewhere");
  CHECK(again.ToJson() == c.ToJson());
}

TEST_CASE("config errors are usage errors") {
  CHECK(KindOf([] { ExperimentConfig::FromJson(R"({"nmae": "x"})"); }) == ErrorKind::kUsage);
  CHECK(KindOf([] { ExperimentConfig::FromJson("{not json"); }) == ErrorKind::kUsage);
  CHECK(KindOf([] { ExperimentConfig::FromJson(R"({"seed": "abc"})"); }) == ErrorKind::kUsage);
  CHECK(KindOf([] { ExperimentConfig::FromJson(R"({"base": {"lr": 1}})"); }) ==
        ErrorKind::kUsage);
  CHECK(KindOf([] { ExperimentConfig::FromJson(R"({"corpus": {"noise": {"kind": "pink"}}})"); }) ==
        ErrorKind::kUsage);
  CHECK(KindOf([] { ExperimentConfig::FromJson(R"({"stack_factor": 2})"); }) ==
        ErrorKind::kUsage);
  CHECK(KindOf([] { ExperimentConfig::FromJson(R"({"headline_mask": "enc.7"})"); }) ==
        ErrorKind::kUsage);
  CHECK(KindOf([] {
          ExperimentConfig::FromJson(R"({"sweep": [{"masks": ["all"], "budgets": []}]})");
        }) == ErrorKind::kUsage);
  CHECK(KindOf([] { LoadExperimentConfig("/nonexistent/config.json"); }) == ErrorKind::kUsage);
}

TEST_CASE("flags override the environment, which overrides the file") {
  ExperimentConfig c = ExperimentConfig::FromJson(R"({"seed": 1, "workers": 1, "out": "/f"})");
  std::map<std::string, std::string> env = {{"PERASR_SEED", "2"}, {"PERASR_WORKERS", "3"},
                                            {"PERASR_OUT", "/e"}};
  auto get = [&](const char *k) -> const char * {
    auto it = env.find(k);
    return it == env.end() ? nullptr : it->second.c_str();
  };
  ConfigOverrides from_env = OverridesFromEnv(get);
  ConfigOverrides flags;
  flags.workers = 4;
  ApplyOverrides(&c, from_env, flags);
  CHECK(c.seed == 2);
  CHECK(c.corpus.seed == 2);
  CHECK(c.finetune_hp.seed == 2);
  CHECK(c.workers == 4);
  CHECK(c.out_dir == "/e");

  env["PERASR_SEED"] = "two";
  CHECK(KindOf([&] { OverridesFromEnv(get); }) == ErrorKind::kUsage);
  ConfigOverrides zero;
  zero.workers = 0;
  CHECK(KindOf([&] { ApplyOverrides(&c, {}, zero); }) == ErrorKind::kUsage);
}

TEST_CASE("speaker filter") {
  SpeakerProfile s;
  s.condition = Condition::kDysarthric;
  s.severity = 0.7;
  SpeakerFilter f;
  CHECK(f.Matches(s));
  f.min_severity = 0.75;
  CHECK_FALSE(f.Matches(s));
  f.min_severity = 0.7;
  CHECK(f.Matches(s));
  s.condition = Condition::kTypical;
  CHECK_FALSE(f.Matches(s));
}

TEST_CASE("results log round trip and canonical form") {
  oracle::TempDir dir("results");
  const std::string path = (dir.path() / "sub" / "results.jsonl").string();
  CHECK(ReadResults(path).empty());
  RunRecord a = Rec("s1", "encoder+joint", "all", 100, 0.6, 0.3);
  RunRecord b = Rec("s0", "encoder+joint", "all", 90, 0.5, 0.4);
  a.wall_s = 3.5;
  a.checkpoint = "/x/a.rntc";
  AppendResult(path, a);
  AppendResult(path, b);
  auto back = ReadResults(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].ToJson() == a.ToJson());

  RunRecord a2 = a;
  a2.wall_s = 99;
  a2.checkpoint = "/y/a.rntc";
  // Order, wall time and checkpoint paths do not matter.
  CHECK(CanonicalResults({a, b}) == CanonicalResults({b, a2}));
  RunRecord a3 = a;
  a3.ft_wer = 0.31;
  CHECK(CanonicalResults({a, b}) != CanonicalResults({a3, b}));
}

TEST_CASE("deduplication") {
  RunRecord a = Rec("s1", "encoder+joint", "all", 100, 0.6, 0.3);
  RunRecord dup = a;
  dup.wall_s = 7;
  CHECK(DeduplicateResults({a, dup}).size() == 1);
  RunRecord failed = a;
  failed.error = "diverged";
  failed.ft_wer = 0;
  auto d = DeduplicateResults({failed, a});
  REQUIRE(d.size() == 1);
  CHECK(d[0].error.empty());
  RunRecord conflict = a;
  conflict.ft_wer = 0.2;
  CHECK(KindOf([&] { DeduplicateResults({a, conflict}); }) == ErrorKind::kData);
}

TEST_CASE("speaker group labels") {
  SpeakerProfile s;
  s.condition = Condition::kDysarthric;
  s.severity = 0.4;
  CHECK(SpeakerGroupLabel(s) == "dysarthric-frs3");
  s.severity = 0.8;
  CHECK(SpeakerGroupLabel(s) == "dysarthric-frs1-2");
  s.condition = Condition::kAccented;
  CHECK(SpeakerGroupLabel(s) == "accented");
}

TEST_CASE("report from synthetic records") {
  const std::string full = "encoder+joint", sub = "enc.0+joint";
  std::vector<RunRecord> recs = {
      Rec("d1", full, "all", 100, 0.8, 0.4),  Rec("d2", full, "all", 120, 0.6, 0.45),
      Rec("d1", sub, "all", 100, 0.8, 0.5),   Rec("d2", sub, "all", 120, 0.6, 0.48),
      Rec("d1", full, "20%", 20, 0.8, 0.56),  Rec("d2", full, "20%", 24, 0.6, 0.51),
  };
  RunRecord base;
  base.kind = "base";
  base.key = "base";
  recs.push_back(base);
  std::map<std::string, std::string> groups = {{"d1", "dysarthric-frs1-2"},
                                               {"d2", "dysarthric-frs3"}};
  Report rep = BuildReport(recs, groups, full, sub);

  // Rows: all, frs1-2, frs3; each base then finetuned.
  REQUIRE(rep.table.size() == 6);
  CHECK(rep.table[0].group == "all");
  CHECK(rep.table[0].system == "base");
  CHECK(rep.table[0].mean_wer == doctest::Approx(0.7));
  CHECK(rep.table[1].mean_wer == doctest::Approx(0.425));
  CHECK(rep.table[1].rel_improvement == doctest::Approx((0.5 + 0.25) / 2));

  REQUIRE(rep.curve.size() == 2);
  CHECK(rep.curve[0].budget == "20%");
  CHECK(rep.curve[1].budget == "all");
  CHECK(rep.curve[1].fraction_of_full == doctest::Approx(1.0));
  CHECK(rep.curve[0].fraction_of_full == doctest::Approx((0.3 + 0.15) / (0.5 + 0.25)));

  REQUIRE(rep.layers.size() == 2);
  CHECK(rep.best_mask == full);
  CHECK(rep.layers[0].mask == full);
  CHECK(rep.subset_fraction == doctest::Approx((0.375 + 0.2) / (0.5 + 0.25)));

  auto files = RenderReport(rep);
  CHECK(files.count("groups.csv"));
  CHECK(files.count("budget_curve.csv"));
  CHECK(files.count("layers.csv"));
  CHECK(files.count("report.json"));

  oracle::TempDir dir("report");
  WriteReport(dir.str(), rep);
  CHECK(VerifyReport(dir.str(), rep, recs).empty());

  // A hand-edited table is detected.
  {
    std::ofstream os(dir.path() / "groups.csv", std::ios::app);
    os << "forged,row\n";
  }
  CHECK(VerifyReport(dir.str(), rep, recs).size() == 1);
  // So is a record whose improvement disagrees with its WERs.
  WriteReport(dir.str(), rep);
  auto tampered = recs;
  tampered[0].rel_improvement = 0.9;
  CHECK_FALSE(VerifyReport(dir.str(), rep, tampered).empty());
  fs::remove(dir.path() / "layers.csv");
  CHECK(VerifyReport(dir.str(), rep, recs).size() == 1);

  CHECK(KindOf([&] { BuildReport({base}, groups, full, sub); }) == ErrorKind::kData);
}

TEST_CASE("micro experiment end to end") {
  oracle::TempDir dir("micro");
  const std::string cfg_path = (dir.path() / "micro.json").string();
  {
    std::ofstream os(cfg_path);
    os << MicroConfigJson((dir.path() / "serial").string());
  }
  ExperimentConfig cfg = LoadExperimentConfig(cfg_path);
  Experiment exp(cfg);

  CHECK(KindOf([&] { exp.LoadCorpus(); }) == ErrorKind::kData);
  Corpus c = exp.Synth();
  CHECK(c.manifest.records.size() == 24);
  const auto stamp = fs::last_write_time(fs::path(exp.CorpusDir()) / "manifest.jsonl");
  Corpus again = exp.Synth();  // identical config: reused, not rewritten
  CHECK(fs::last_write_time(fs::path(exp.CorpusDir()) / "manifest.jsonl") == stamp);
  CHECK(again.manifest.records.size() == 24);

  CHECK(KindOf([&] { exp.LoadBase(); }) == ErrorKind::kData);
  RunRecord base = exp.TrainBase();
  CHECK(base.kind == "base");
  CHECK(fs::exists(exp.BasePath()));

  CHECK(exp.TargetSpeakers() == std::vector<std::string>{"dys00", "dys01"});
  auto plans = exp.SweepPlans();
  CHECK(plans.size() == 8);

  auto first = exp.Sweep();
  CHECK(first.size() == 8);
  for (const auto &r : first) {
    CHECK(r.error.empty());
    CHECK(r.rel_improvement == doctest::Approx(RelativeImprovement(r.base_wer, r.ft_wer)));
  }
  // Resumable: nothing left to do.
  CHECK(exp.Sweep().empty());
  CHECK(ReadResults(exp.ResultsPath()).size() == 9);

  // The same experiment on two workers writes an equivalent log.
  ExperimentConfig par = cfg;
  par.workers = 2;
  par.out_dir = (dir.path() / "parallel").string();
  par.base_checkpoint = exp.BasePath();
  Experiment exp2(par);
  fs::create_directories(par.out_dir);
  fs::copy(exp.CorpusDir(), exp2.CorpusDir(), fs::copy_options::recursive);
  exp2.Sweep();
  auto finetunes = [](const std::vector<RunRecord> &rs) {
    std::vector<RunRecord> out;
    for (const auto &r : rs)
      if (r.kind == "finetune") out.push_back(r);
    return out;
  };
  CHECK(CanonicalResults(finetunes(ReadResults(exp.ResultsPath()))) ==
        CanonicalResults(ReadResults(exp2.ResultsPath())));

  auto analysis = exp.Analyze();
  CHECK(analysis.comparison.kl_base >= 0.0);
  CHECK(analysis.comparison.kl_finetuned >= 0.0);
  CHECK(fs::exists(fs::path(exp.AnalysisDir()) / "comparison.json"));

  EvalSummary ev = exp.Evaluate(exp.LoadBase(), Split::kTest, {"typical"});
  CHECK(ev.per_speaker.size() == 2);
  CHECK(KindOf([&] { exp.Evaluate(exp.LoadBase(), Split::kTest, {"accented"}); }) ==
        ErrorKind::kData);

  std::map<std::string, std::string> groups;
  for (const auto &s : exp.LoadCorpus().speakers) groups[s.id] = SpeakerGroupLabel(s);
  Report rep = BuildReport(ReadResults(exp.ResultsPath()), groups, "encoder+joint", "enc.0+joint");
  WriteReport(exp.ReportDir(), rep);
  CHECK(VerifyReport(exp.ReportDir(), rep, ReadResults(exp.ResultsPath())).empty());
}

#ifdef PERASR_CLI_PATH
TEST_CASE("command-line exit codes") {
  oracle::TempDir dir("cli");
  const std::string cli = PERASR_CLI_PATH;
  auto run = [&](const std::string &args) {
    const std::string cmd = cli + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
  };
  const std::string cfg = (dir.path() / "c.json").string();
  {
    std::ofstream os(cfg);
    os << MicroConfigJson((dir.path() / "out").string());
  }
  CHECK(run("--help") == 0);
  CHECK(run("") == 1);
  CHECK(run("frobnicate") == 1);
  CHECK(run("synth --config /nonexistent.json") == 1);
  CHECK(run("--workers 0 synth --config " + cfg) == 1);
  CHECK(run("train-base --config " + cfg) == 2);  // no corpus yet
  CHECK(run("synth --config " + cfg) == 0);
  CHECK(run("verify --config " + cfg) == 2);  // no results yet
  const std::string bad = (dir.path() / "bad.json").string();
  {
    std::ofstream os(bad);
    os << R"({"unknown": 1})";
  }
  CHECK(run("synth --config " + bad) == 1);
}
#endif
