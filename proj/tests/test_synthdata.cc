// tests/test_synthdata.cc

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
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "oracles.h"
#include "perasr/common.h"
#include "perasr/corpus.h"
#include "perasr/lexicon.h"
#include "perasr/synth.h"

using namespace perasr;

namespace {

const Lexicon &ShippedLexicon() {
  static const Lexicon lex = Lexicon::Load(PERASR_SOURCE_DIR "/assets/lexicon.txt");
  return lex;
}

std::vector<std::string> Concat(const Lexicon &lex, const std::vector<std::string> &words) {
  std::vector<std::string> out;
  for (const auto &w : words)
    for (const auto &p : *lex.Find(w)) out.push_back(p);
  return out;
}

CorpusConfig SmallConfig() {
  CorpusConfig c;
  c.groups.push_back({Condition::kTypical, 2, {0.0}, 5, ""});
  c.groups.push_back({Condition::kDysarthric, 2, {0.4, 0.8}, 5, "dys"});
  c.groups.push_back({Condition::kAccented, 1, {0.6}, 4, ""});
  c.test_fraction = 0.2;
  return c;
}

std::string Slurp(const std::filesystem::path &p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("shipped lexicon covers the grammar") {
  const Lexicon &lex = ShippedLexicon();
  CHECK(lex.Size() >= 180);
  CHECK(lex.Size() <= 260);
  CHECK(lex.Inventory().size() >= 25);
  CHECK(lex.Inventory().size() <= 45);
  for (const auto &w : GrammarWords()) CHECK_MESSAGE(lex.Contains(w), w);
  for (const auto &w : ReservedWords()) CHECK(GrammarWords().count(w) == 1);
}

TEST_CASE("lexicon parsing") {
  std::istringstream ok("# comment\n\nhello\th @ l @U\nworld\tw @ l d  # trailing\n");
  Lexicon lex = Lexicon::Parse(ok);
  CHECK(lex.Size() == 2);
  CHECK(*lex.Find("hello") == std::vector<std::string>{"h", "@", "l", "@U"});
  CHECK(lex.Find("nope") == nullptr);
  std::istringstream bad_phone("cat\tk { t XX\n");
  CHECK_THROWS_AS(Lexicon::Parse(bad_phone), Error);
  std::istringstream bad_word("Cat\tk { t\n");
  CHECK_THROWS_AS(Lexicon::Parse(bad_word), Error);
  CHECK(lex.PhonemeId("@") >= 0);
  CHECK(lex.PhonemeId("XX") == -1);
}

TEST_CASE("severity-0 speech realizes the dictionary pronunciation") {
  const Lexicon &lex = ShippedLexicon();
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    SpeakerProfile s = MakeSpeaker("t", Condition::kTypical, 0.0, 100 + i, lex);
    CHECK(s.tempo_factor == 1.0);
    auto words = SampleSentence(rng, false);
    auto utt = SynthesizeUtterance(words, s, lex, 900 + i);
    CHECK(utt.RealizedPhones() == Concat(lex, words));
    for (const auto &seg : utt.alignment) CHECK(seg.intended == seg.realized);
  }
}

TEST_CASE("substitution draws follow the map") {
  const Lexicon &lex = ShippedLexicon();
  SpeakerProfile s = MakeSpeaker("d", Condition::kDysarthric, 0.7, 3, lex);
  for (auto &[phone, row] : s.substitution_map) row = {{phone, 1.0}};
  s.substitution_map["p"] = {{"p", 0.5}, {"b", 0.5}};
  REQUIRE_NOTHROW(s.Validate(lex));
  CHECK(s.SubstitutionProb("p", "b") == 0.5);

  int total = 0, to_b = 0;
  for (uint64_t seed = 0; seed < 1000; ++seed) {
    auto utt = SynthesizeUtterance({"pick"}, s, lex, seed);
    for (const auto &seg : utt.alignment) {
      if (seg.intended != "p") {
        CHECK(seg.realized == seg.intended);
        continue;
      }
      ++total;
      to_b += seg.realized == "b";
    }
  }
  REQUIRE(total == 1000);
  CHECK(std::abs(double(to_b) / total - 0.5) <= 0.04);
}

TEST_CASE("tempo scales utterance duration") {
  const Lexicon &lex = ShippedLexicon();
  SpeakerProfile s = MakeSpeaker("d", Condition::kDysarthric, 0.4, 9, lex);
  s.tempo_factor = 1.0;
  SpeakerProfile slow = s;
  slow.tempo_factor = 2.0;
  const std::vector<std::string> words = {"please", "bring", "my", "phone"};
  for (uint64_t seed : {1, 2, 3}) {
    const double d1 = SynthesizeUtterance(words, s, lex, seed).wave.DurationSeconds();
    const double d2 = SynthesizeUtterance(words, slow, lex, seed).wave.DurationSeconds();
    CHECK(std::abs(d2 / (2 * d1) - 1.0) <= 0.01);
  }
}

TEST_CASE("dysarthric speech is slower than typical speech") {
  const Lexicon &lex = ShippedLexicon();
  SpeakerProfile t = MakeSpeaker("t", Condition::kTypical, 0.0, 1, lex);
  SpeakerProfile d = MakeSpeaker("d", Condition::kDysarthric, 0.8, 1, lex);
  d.tempo_factor = 1.0;
  const std::vector<std::string> words = {"i", "am", "busy"};
  const double dt = SynthesizeUtterance(words, t, lex, 4).wave.DurationSeconds();
  const double dd = SynthesizeUtterance(words, d, lex, 4).wave.DurationSeconds();
  // Phones stretch by 1 + severity; edge silence does not.
  CHECK(dd > 1.5 * dt);
}

TEST_CASE("speaker profiles") {
  const Lexicon &lex = ShippedLexicon();
  SUBCASE("deterministic per seed") {
    SpeakerProfile a = MakeSpeaker("x", Condition::kDysarthric, 0.8, 77, lex);
    SpeakerProfile b = MakeSpeaker("x", Condition::kDysarthric, 0.8, 77, lex);
    CHECK(a.substitution_map == b.substitution_map);
    CHECK(a.tempo_factor == b.tempo_factor);
    CHECK(a.template_seed == b.template_seed);
  }
  SUBCASE("rows are distributions") {
    for (double sev : {0.0, 0.4, 0.9}) {
      Condition c = sev == 0.0 ? Condition::kTypical : Condition::kDysarthric;
      SpeakerProfile s = MakeSpeaker("x", c, sev, 5, lex);
      for (const auto &[phone, row] : s.substitution_map) {
        double sum = 0.0;
        for (const auto &[to, p] : row) {
          CHECK(p >= 0.0);
          sum += p;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-9);
      }
    }
  }
  SUBCASE("severity 0 must be the identity") {
    SpeakerProfile s = MakeSpeaker("t", Condition::kTypical, 0.0, 5, lex);
    s.substitution_map["p"] = {{"p", 0.9}, {"b", 0.1}};
    CHECK_THROWS_AS(s.Validate(lex), Error);
    CHECK_THROWS_AS(MakeSpeaker("t", Condition::kTypical, 0.3, 5, lex), Error);
  }
  SUBCASE("severity outside [0, 1]") {
    SpeakerProfile s = MakeSpeaker("d", Condition::kDysarthric, 0.5, 5, lex);
    s.severity = 1.5;
    CHECK_THROWS_AS(s.Validate(lex), Error);
  }
}

TEST_CASE("out-of-lexicon words are reported") {
  const Lexicon &lex = ShippedLexicon();
  SpeakerProfile s = MakeSpeaker("t", Condition::kTypical, 0.0, 5, lex);
  CHECK_THROWS_WITH_AS(SynthesizeUtterance({"i", "zyzzyva"}, s, lex, 1),
                       doctest::Contains("zyzzyva"), Error);
}

TEST_CASE("budget subsets") {
  Manifest m;
  for (int i = 0; i < 6; ++i) {
    ManifestRecord r;
    r.utterance_id = "s-" + std::to_string(i);
    r.speaker_id = "s";
    r.transcript = "i";
    r.duration_s = 30.0;
    m.records.push_back(r);
  }
  SUBCASE("100 s over 30 s utterances selects three") {
    Manifest sub = MakeBudgetSubset(m, "s", BudgetSpec::Seconds(100.0, 4));
    CHECK(sub.records.size() == 3);
    CHECK(sub.TotalDuration() == 90.0);
  }
  SUBCASE("at least one utterance is kept") {
    CHECK(MakeBudgetSubset(m, "s", BudgetSpec::Seconds(1.0, 4)).records.size() == 1);
  }
  SUBCASE("all") { CHECK(MakeBudgetSubset(m, "s", BudgetSpec::All()).records.size() == 6); }
  SUBCASE("nested and monotone across budgets") {
    for (int i = 0; i < 6; ++i) m.records[i].duration_s = 5.0 + 7.0 * i;
    size_t prev = 0;
    std::vector<std::string> prev_ids;
    for (double b : {10.0, 40.0, 60.0, 90.0, 200.0}) {
      Manifest sub = MakeBudgetSubset(m, "s", BudgetSpec::Seconds(b, 8));
      CHECK(sub.records.size() >= prev);
      CHECK(sub.TotalDuration() <= std::max(b, sub.records.front().duration_s));
      for (size_t i = 0; i < prev_ids.size(); ++i) CHECK(sub.records[i].utterance_id == prev_ids[i]);
      prev = sub.records.size();
      prev_ids.clear();
      for (const auto &r : sub.records) prev_ids.push_back(r.utterance_id);
    }
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(MakeBudgetSubset(m, "nobody", BudgetSpec::All()), Error);
    CHECK_THROWS_AS(MakeBudgetSubset(m, "s", BudgetSpec::Seconds(0.0)), Error);
  }
}

TEST_CASE("corpus synthesis") {
  const Lexicon &lex = ShippedLexicon();
  oracle::TempDir a("corpus-a"), b("corpus-b");
  CorpusConfig cfg = SmallConfig();
  Corpus ca = BuildCorpus(cfg, lex, a.str(), 1);
  Corpus cb = BuildCorpus(cfg, lex, b.str(), 3);

  SUBCASE("record count is speakers x sentences") {
    CHECK(ca.speakers.size() == 5);
    CHECK(ca.manifest.records.size() == 2 * 5 + 2 * 5 + 4);
  }
  SUBCASE("identical for any worker count") {
    CHECK(ca.manifest.ToJsonLines() == cb.manifest.ToJsonLines());
    for (const auto &r : ca.manifest.records)
      CHECK(Slurp(a.path() / r.path) == Slurp(b.path() / r.path));
  }
  SUBCASE("manifest round trip and duration sum") {
    Manifest loaded = Manifest::Load((a.path() / "manifest.jsonl").string());
    CHECK(loaded.ToJsonLines() == ca.manifest.ToJsonLines());
    double sum = 0.0;
    for (const auto &r : loaded.records) {
      RowMatrixF f = ReadFeatureFile((a.path() / r.path).string());
      const int n = static_cast<int>(std::lround(r.duration_s * 16000));
      CHECK(f.rows() == (n - 400) / 160 + 1);
      sum += r.duration_s;
    }
    CHECK(loaded.TotalDuration() == doctest::Approx(sum).epsilon(1e-12));
  }
  SUBCASE("splits, speakers and pronunciations") {
    std::set<std::string> reserved = ReservedWords();
    int test = 0;
    for (const auto &r : ca.manifest.records) {
      if (r.split == Split::kTest) {
        ++test;
        for (const auto &w : SplitWords(r.transcript)) CHECK(reserved.count(w) == 0);
      }
      if (r.speaker_id.rfind("typical", 0) == 0)
        CHECK(r.phones == Concat(lex, SplitWords(r.transcript)));
    }
    CHECK(test == 2 * 1 + 2 * 1 + 1);
    auto loaded = LoadSpeakers((a.path() / "speakers.json").string());
    REQUIRE(loaded.size() == ca.speakers.size());
    CHECK(loaded[2].id == "dys00");
    CHECK(loaded[2].severity == 0.4);
    CHECK(loaded[3].severity == 0.8);
    CHECK(loaded[4].condition == Condition::kAccented);
    CHECK(loaded[3].substitution_map == ca.speakers[3].substitution_map);
  }
}

TEST_CASE("corpus config errors") {
  const Lexicon &lex = ShippedLexicon();
  oracle::TempDir d("corpus-bad");
  CorpusConfig c;
  CHECK_THROWS_AS(BuildCorpus(c, lex, d.str()), Error);
  c.groups.push_back({Condition::kTypical, 1, {0.0}, 0, ""});
  CHECK_THROWS_AS(BuildCorpus(c, lex, d.str()), Error);
  CHECK_THROWS_AS(Manifest::Load((d.path() / "none.jsonl").string()), Error);
}
