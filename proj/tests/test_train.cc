// tests/test_train.cc

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

#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "oracles.h"
#include "perasr/backward.h"
#include "perasr/checkpoint.h"
#include "perasr/common.h"
#include "perasr/features.h"
#include "perasr/lexicon.h"
#include "perasr/synth.h"
#include "perasr/train.h"

using namespace perasr;

namespace {

ModelConfig Small() {
  ModelConfig c;
  c.input_dim = 6;
  c.encoder_layers = 3;
  c.hidden = 6;
  c.joint_hidden = 5;
  c.vocab_size = 5;
  c.init_scale = 0.3;
  return c;
}

TrainExample RandomExample(uint64_t seed, int frames, std::vector<int> labels, int dim = 6) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> z;
  TrainExample ex;
  ex.utterance_id = "r" + std::to_string(seed);
  ex.x.frames.resize(frames, dim);
  for (int i = 0; i < ex.x.frames.size(); ++i) ex.x.frames.data()[i] = z(rng);
  ex.labels = std::move(labels);
  return ex;
}

std::vector<TrainExample> RandomSet(int n, uint64_t seed) {
  std::vector<TrainExample> out;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> lab(1, 4), len(1, 3), fr(3, 6);
  for (int i = 0; i < n; ++i) {
    std::vector<int> labels(len(rng));
    for (auto &l : labels) l = lab(rng);
    out.push_back(RandomExample(seed * 100 + i, fr(rng), labels));
  }
  return out;
}

ModelCheckpoint SmallCheckpoint(uint64_t seed) {
  ModelCheckpoint c;
  c.config = Small();
  c.vocab = Vocab({"<b>", "a", "b", "c", "d"});
  c.params = TransducerParams<float>::Init(c.config, seed);
  return c;
}

// One synthesized typical utterance, featurized like the corpus.
TrainExample SpokenExample(const std::string &text) {
  const Lexicon lex = Lexicon::Load(PERASR_SOURCE_DIR "/assets/lexicon.txt");
  SpeakerProfile s = MakeSpeaker("t", Condition::kTypical, 0.0, 21, lex);
  auto utt = SynthesizeUtterance(SplitWords(text), s, lex, 4);
  FeatureMatrix f = ComputeLogMel(utt.wave, FeatureConfig{});
  TrainExample ex;
  ex.utterance_id = "spoken";
  ex.x = StackFrames(f, 3);
  ex.labels = Vocab::Graphemes().Encode(text);
  return ex;
}

}  // namespace

TEST_CASE("freeze masks") {
  CHECK(FreezeMask::Parse("enc.0+joint", 3).Label() == "enc.0+joint");
  CHECK(FreezeMask::Parse("joint, enc.0", 3).Label() == "enc.0+joint");
  CHECK(FreezeMask::Parse("encoder+joint", 3).Label() == "enc.0+enc.1+enc.2+joint");
  CHECK(FreezeMask::Parse("all", 2).Label() == "enc.0+enc.1+dec+joint");
  CHECK(FreezeMask::All(2).Label() == "enc.0+enc.1+dec+joint");
  CHECK(FreezeMask{}.Label() == "none");
  CHECK_THROWS_AS(FreezeMask::Parse("enc.3", 3), Error);
  CHECK_THROWS_AS(FreezeMask::Parse("frontend", 3), Error);
  CHECK_THROWS_AS(FreezeMask::Parse("decoder", 3), Error);

  const auto fam = DefaultMaskFamily(3);
  std::vector<std::string> labels;
  for (const auto &m : fam) labels.push_back(m.Label());
  CHECK(labels == std::vector<std::string>{"enc.0", "enc.0+joint", "enc.0+enc.1",
                                           "enc.0+enc.1+joint", "enc.0+enc.1+enc.2",
                                           "enc.0+enc.1+enc.2+joint"});

  BackwardScope s = FreezeMask::Parse("enc.1+joint", 3).Scope(3);
  CHECK(s.lowest_encoder_layer == 1);
  CHECK_FALSE(s.decoder);
  s = FreezeMask::Parse("joint", 3).Scope(3);
  CHECK(s.lowest_encoder_layer == 3);
}

TEST_CASE("full-model BPTT matches finite differences on the micro model") {
  auto p = TransducerParams<double>::Init(oracle::MicroConfig(), 17);
  const TrainExample a = oracle::MicroExample(1), b = oracle::MicroExample(2, 3, {2, 2});
  oracle::GradCheck gc = oracle::CheckModelGradient(p, {&a, &b});
  CHECK(gc.checked == ParameterCount(oracle::MicroConfig()));
  CHECK_MESSAGE(gc.max_rel_error <= 1e-3, gc.worst);
}

TEST_CASE("scoped backward equals the full gradient on trainable groups") {
  auto p = TransducerParams<double>::Init(Small(), 3);
  auto set = RandomSet(3, 5);
  std::vector<const TrainExample *> batch = {&set[0], &set[1], &set[2]};
  TransducerParams<double> full, scoped;
  const double l1 = Backward<double>(p, batch, &full);
  const FreezeMask mask = FreezeMask::Parse("enc.1+enc.2+joint", 3);
  const double l2 = Backward<double>(p, batch, &scoped, mask.Scope(3));
  CHECK(l1 == l2);
  ForEachTensor(scoped, [&](const std::string &group, const std::string &name, const auto &g) {
    Matrix<double> ref;
    ForEachTensor(full, [&](const std::string &, const std::string &n2, const auto &f) {
      if (n2 == name) ref = f;
    });
    if (mask.Contains(group)) {
      CHECK_MESSAGE((g - ref).cwiseAbs().maxCoeff() <= 1e-12, name);
    } else {
      CHECK_MESSAGE(g.isZero(0.0), name);
    }
  });
}

TEST_CASE("duplicating utterances leaves the mean-loss gradient unchanged") {
  auto p = TransducerParams<double>::Init(Small(), 8);
  auto set = RandomSet(2, 9);
  TransducerParams<double> g1, g2;
  const double l1 = Backward<double>(p, std::vector<const TrainExample *>{&set[0], &set[1]}, &g1);
  const double l2 = Backward<double>(
      p, std::vector<const TrainExample *>{&set[0], &set[1], &set[0], &set[1]}, &g2);
  CHECK(l1 == doctest::Approx(l2).epsilon(1e-12));
  ForEachTensor(g1, [&](const std::string &, const std::string &name, const auto &a) {
    ForEachTensor(g2, [&](const std::string &, const std::string &n2, const auto &b) {
      if (n2 == name) CHECK_MESSAGE((a - b).cwiseAbs().maxCoeff() <= 1e-12, name);
    });
  });
}

TEST_CASE("gradient clipping") {
  TransducerParams<float> g = TransducerParams<float>::Zeros(Small());
  g.out_bias(0) = 3.0f;
  g.joint_bias(1) = 4.0f;
  CHECK(ClipGradNorm(&g, 10.0) == doctest::Approx(5.0));
  CHECK(g.out_bias(0) == 3.0f);
  CHECK(ClipGradNorm(&g, 1.0) == doctest::Approx(5.0));
  CHECK(g.out_bias(0) == doctest::Approx(0.6));
  CHECK(g.joint_bias(1) == doctest::Approx(0.8));
}

TEST_CASE("Adam update matches the textbook recurrence") {
  auto p = TransducerParams<float>::Zeros(Small());
  auto g = TransducerParams<float>::Zeros(Small());
  HyperParams hp;
  hp.learning_rate = 0.1;
  Adam adam(p);
  const FreezeMask mask = FreezeMask::Parse("joint", 3);
  double m = 0, v = 0, x = 0;
  for (int step = 1; step <= 3; ++step) {
    const double grad = step == 2 ? -0.5 : 2.0;
    g.out_bias(2) = static_cast<float>(grad);
    adam.Step(&p, g, hp, mask);
    m = 0.9 * m + 0.1 * grad;
    v = 0.999 * v + 0.001 * grad * grad;
    const double mh = m / (1 - std::pow(0.9, step)), vh = v / (1 - std::pow(0.999, step));
    x -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
    CHECK(p.out_bias(2) == doctest::Approx(x).epsilon(1e-5));
  }
  CHECK(adam.steps() == 3);
}

TEST_CASE("frozen groups stay byte-identical") {
  ModelCheckpoint base = SmallCheckpoint(4);
  base.params.feat_mean.setConstant(0.1f);
  auto train = RandomSet(8, 11), dev = RandomSet(2, 12);
  HyperParams hp;
  hp.batch_size = 1;
  hp.max_epochs = 13;  // 8 steps per epoch: > 100 steps
  hp.patience = 100;
  for (const auto &mask : DefaultMaskFamily(3)) {
    TrainResult r = Train(base, train, dev, hp, mask);
    CHECK(r.steps >= 100);
    for (const auto &group : {"frontend", "enc.0", "enc.1", "enc.2", "dec", "joint"}) {
      const bool same = GroupBytes(r.checkpoint.params, group) == GroupBytes(base.params, group);
      if (mask.Contains(group)) {
        CHECK_MESSAGE(!same, mask.Label() << " " << group);
      } else {
        CHECK_MESSAGE(same, mask.Label() << " " << group);
      }
    }
  }
}

TEST_CASE("training is deterministic") {
  ModelCheckpoint base = SmallCheckpoint(6);
  auto train = RandomSet(10, 13), dev = RandomSet(3, 14);
  HyperParams hp;
  hp.batch_size = 3;
  hp.max_epochs = 5;
  TrainResult a = Train(base, train, dev, hp, FreezeMask::All(3));
  TrainResult b = Train(base, train, dev, hp, FreezeMask::All(3));
  CHECK(a.best_dev_loss == b.best_dev_loss);
  CHECK(a.train_loss == b.train_loss);
  CHECK(a.steps == b.steps);
  for (const auto &g : TrainableGroups(3))
    CHECK(GroupBytes(a.checkpoint.params, g) == GroupBytes(b.checkpoint.params, g));
  hp.seed = 43;
  TrainResult c = Train(base, train, dev, hp, FreezeMask::All(3));
  CHECK(c.best_dev_loss != a.best_dev_loss);
}

TEST_CASE("early stopping keeps the best parameters") {
  ModelCheckpoint base = SmallCheckpoint(7);
  auto train = RandomSet(6, 15), dev = RandomSet(2, 16);
  HyperParams hp;
  hp.learning_rate = 0.05;
  hp.max_epochs = 40;
  hp.patience = 2;
  std::vector<EpochLog> logs;
  TrainResult r = Train(base, train, dev, hp, FreezeMask::All(3),
                        [&](const EpochLog &l) { logs.push_back(l); });
  REQUIRE(!logs.empty());
  double best = r.initial_dev_loss;
  for (const auto &l : logs) best = std::min(best, l.dev_loss);
  CHECK(r.best_dev_loss == best);
  CHECK(r.epochs == static_cast<int>(logs.size()));
  std::vector<const TrainExample *> ptrs = {&dev[0], &dev[1]};
  CHECK(BatchLoss<float>(r.checkpoint.params, ptrs) == doctest::Approx(best).epsilon(1e-6));
  if (r.epochs < hp.max_epochs) {
    CHECK(!logs[logs.size() - 1].improved);
    CHECK(!logs[logs.size() - 2].improved);
  }
}

TEST_CASE("a single utterance can be overfit") {
  TrainExample ex = SpokenExample("help me");
  ModelCheckpoint ckpt;
  ckpt.params = TransducerParams<float>::Init(ckpt.config, 1);
  std::vector<TrainExample> one = {ex};
  SetNormalization(one, &ckpt.params);
  HyperParams hp;
  hp.batch_size = 1;
  hp.learning_rate = 3e-2;
  hp.max_epochs = 200;
  hp.patience = 200;
  TrainResult r = Train(ckpt, one, one, hp, FreezeMask::All(3));
  CHECK(r.steps == 200);
  CHECK(r.initial_dev_loss > 10.0);
  CHECK(r.best_dev_loss <= 0.05);
  // Greedy decoding is not checked: a memorized utterance may place the
  // final label at a uniformly uncertain frame, which path-sum loss accepts.
}

TEST_CASE("non-finite loss is a divergence error") {
  ModelCheckpoint base = SmallCheckpoint(2);
  base.params.out_w(0, 0) = std::numeric_limits<float>::quiet_NaN();
  auto train = RandomSet(2, 3);
  try {
    Train(base, train, train, HyperParams{}, FreezeMask::All(3));
    FAIL("expected divergence");
  } catch (const Error &e) {
    CHECK(e.kind() == ErrorKind::kDivergence);
  }
}

TEST_CASE("hyperparameter validation") {
  HyperParams hp;
  CHECK_NOTHROW(hp.Validate());
  for (int which = 0; which < 5; ++which) {
    HyperParams bad;
    if (which == 0) bad.learning_rate = 0;
    if (which == 1) bad.patience = 0;
    if (which == 2) bad.batch_size = 0;
    if (which == 3) bad.beta1 = 1.0;
    if (which == 4) bad.dev_fraction = 1.0;
    CHECK_THROWS_AS(bad.Validate(), Error);
  }
}

TEST_CASE("dev carving") {
  Manifest m;
  for (int i = 0; i < 10; ++i) m.records.push_back({"u" + std::to_string(i), "s", "a"});
  auto [train, dev] = CarveDev(m, 0.1, 5);
  CHECK(train.records.size() == 9);
  CHECK(dev.records.size() == 1);
  auto [t2, d2] = CarveDev(m, 0.01, 5);
  CHECK(d2.records.size() == 1);
  auto [t3, d3] = CarveDev(m, 0.25, 5);
  CHECK(d3.records.size() == 3);  // round(2.5) away from zero
  std::set<std::string> ids;
  for (const auto &r : t3.records) ids.insert(r.utterance_id);
  for (const auto &r : d3.records) CHECK(ids.insert(r.utterance_id).second);
  CHECK(ids.size() == 10);
  Manifest one;
  one.records.push_back(m.records[0]);
  auto [t1, d1] = CarveDev(one, 0.1, 5);
  CHECK(t1.records.size() == 1);
  CHECK(d1.records.size() == 1);
  CHECK_THROWS_AS(CarveDev(Manifest{}, 0.1, 5), Error);
}

TEST_CASE("relative improvement") {
  CHECK(RelativeImprovement(59.7, 20.9) == doctest::Approx(0.650).epsilon(1e-3));
  CHECK(RelativeImprovement(0.5, 0.25) == 0.5);
  CHECK(RelativeImprovement(0.0, 0.3) == 0.0);
  CHECK(RelativeImprovement(0.4, 0.6) == doctest::Approx(-0.5));
}

TEST_CASE("run records round-trip through JSON") {
  RunRecord r;
  r.key = "abc";
  r.kind = "finetune";
  r.speaker = "dys00";
  r.mask = "enc.0+joint";
  r.budget = "20%";
  r.budget_s = 12.5;
  r.seed = 0xFFFFFFFFFFFFFFFFull;
  r.train_utterances = 7;
  r.base_wer = 0.1 + 0.2;
  r.ft_wer = 1.0 / 3.0;
  r.rel_improvement = RelativeImprovement(r.base_wer, r.ft_wer);
  r.steps = 99;
  r.epochs = 3;
  r.wall_s = 1.5;
  r.error = "line\nbreak \"quoted\"";
  RunRecord back = RunRecord::FromJson(r.ToJson());
  CHECK(back.ToJson() == r.ToJson());
  CHECK(back.seed == r.seed);
  CHECK(back.ft_wer == r.ft_wer);
  CHECK(r.ToJson().find('\n') == std::string::npos);
  CHECK_THROWS_AS(RunRecord::FromJson("{not json"), Error);
}

TEST_CASE("plan keys identify the cell") {
  FinetunePlan a;
  a.speaker_id = "dys00";
  a.mask = FreezeMask::Parse("enc.0+joint", 3);
  FinetunePlan b = a;
  CHECK(a.Key() == b.Key());
  CHECK(a.Key().size() == 16);
  b.mask = FreezeMask::Parse("joint+enc.0", 3);
  CHECK(a.Key() == b.Key());
  for (int which = 0; which < 4; ++which) {
    FinetunePlan c = a;
    if (which == 0) c.speaker_id = "dys01";
    if (which == 1) c.budget_label = "20%";
    if (which == 2) c.hp.seed = 7;
    if (which == 3) c.hp.learning_rate = 2e-4;
    CHECK(c.Key() != a.Key());
  }
}

TEST_CASE("budget labels") {
  Manifest m;
  for (int i = 0; i < 10; ++i) {
    ManifestRecord r{"s-" + std::to_string(i), "s", "a"};
    r.duration_s = 10.0;
    m.records.push_back(r);
  }
  CHECK(ResolveBudget("all", m, "s", 1).all);
  CHECK(ResolveBudget("100%", m, "s", 1).all);
  CHECK(ResolveBudget("300", m, "s", 1).budget_s == 300.0);
  CHECK(ResolveBudget("300s", m, "s", 1).budget_s == 300.0);
  CHECK(ResolveBudget("20%", m, "s", 1).budget_s == doctest::Approx(20.0));
  CHECK(ResolveBudget("20%", m, "s", 1).selection_seed ==
        ResolveBudget("50%", m, "s", 1).selection_seed);
  for (const char *bad : {"", "abc", "-5", "0", "0%", "150%", "12x"})
    CHECK_THROWS_AS(ResolveBudget(bad, m, "s", 1), Error);
}

TEST_CASE("budget curve normalization") {
  std::vector<RunRecord> recs;
  auto add = [&](const std::string &spk, const std::string &budget, double bs, double rel) {
    RunRecord r;
    r.kind = "finetune";
    r.speaker = spk;
    r.mask = "m";
    r.budget = budget;
    r.budget_s = bs;
    r.rel_improvement = rel;
    recs.push_back(r);
  };
  add("a", "20%", 10, 0.2);
  add("b", "20%", 14, 0.4);
  add("a", "all", 50, 0.5);
  add("b", "all", 70, 0.7);
  add("a", "50%", 25, 0.4);
  add("b", "50%", 35, 0.5);
  auto curve = BudgetCurve(recs, "m");
  REQUIRE(curve.size() == 3);
  CHECK(curve[0].budget == "20%");
  CHECK(curve[0].mean_budget_s == 12.0);
  CHECK(curve[0].fraction_of_full == doctest::Approx(0.3 / 0.6));
  CHECK(curve[1].budget == "50%");
  CHECK(curve[2].budget == "all");
  CHECK(curve[2].fraction_of_full == 1.0);
}

TEST_CASE("WER summaries") {
  std::vector<UtteranceResult> rs(3);
  rs[0].speaker_id = "a";
  rs[0].stats = Wer("a b c d", "a b c");
  rs[1].speaker_id = "a";
  rs[1].stats = Wer("a b", "a b");
  rs[2].speaker_id = "b";
  rs[2].stats = Wer("x y", "z");
  CHECK(PooledWer(rs).Wer() == doctest::Approx(3.0 / 8.0));
  CHECK(MacroWer(rs) == doctest::Approx((1.0 / 6.0 + 1.0) / 2.0));
}
