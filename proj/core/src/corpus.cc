// core/src/corpus.cc

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

#include "perasr/corpus.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "perasr/common.h"

namespace perasr {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

const std::map<std::string, std::vector<std::string>> &WordClasses() {
  static const std::map<std::string, std::vector<std::string>> kClasses = {
      {"pron", {"i", "you", "we", "he", "she", "they"}},
      {"det", {"the", "a", "my", "your", "this", "that", "some"}},
      {"noun",
       {"door", "window", "light", "book", "phone", "cup", "bed", "food", "water",
        "coffee", "bag", "box", "car", "key", "dog", "bottle", "pillow", "blanket",
        "table", "music", "radio", "television", "garage", "medicine", "doctor",
        "paper", "pen", "shoes", "towel", "soup", "milk", "apple", "bread", "plate",
        "fork", "spoon", "sofa", "lamp", "fan", "heater", "blinds", "house", "room",
        "garden", "massage"}},
      {"device", {"light", "television", "radio", "heater", "fan", "lamp", "music", "phone"}},
      {"place",
       {"store", "park", "office", "hospital", "school", "bank", "market", "library",
        "pool", "garden", "garage", "house"}},
      {"adj",
       {"big", "small", "red", "blue", "green", "old", "new", "good", "cold", "warm",
        "hot", "clean", "empty", "full", "soft", "heavy", "little", "black", "white",
        "yellow", "happy", "tired", "busy", "ready", "nice", "late", "beige", "usual"}},
      {"verb",
       {"open", "close", "bring", "call", "find", "play", "stop", "start", "move",
        "wash", "clean", "fix", "cook", "make", "take", "give", "show", "help", "read",
        "send", "buy", "pick", "push", "pull", "hold", "keep", "visit", "feed", "fold",
        "lift", "get"}},
      {"past",
       {"opened", "closed", "found", "played", "moved", "washed", "cleaned", "fixed",
        "cooked", "made", "took", "gave", "sent", "bought", "picked", "pushed", "kept",
        "visited"}},
      {"time",
       {"today", "tomorrow", "tonight", "later", "soon", "now", "monday", "friday",
        "sunday", "in the morning", "in the evening"}},
      {"num", {"one", "two", "four", "five", "six", "seven", "nine", "ten"}},
      {"name",
       {"anna", "mary", "paul", "susan", "david", "linda", "peter", "helen", "frank",
        "nora", "simon", "laura", "oscar", "emma", "victor", "olivia", "daniel", "rosa",
        "leo", "nina", "sam", "ben", "kate", "maria"}},
      {"want", {"want", "need", "like", "have"}},
      {"reply", {"yes", "no", "okay", "sorry"}},
      {"onoff", {"on", "off"}},
      {"greet", {"hello", "bye", "good morning", "good night"}},
  };
  return kClasses;
}

// {class} is a required slot, {class?} is dropped half of the time.
const std::vector<std::string> &Templates() {
  static const std::vector<std::string> kTemplates = {
      "i want {det} {adj?} {noun}",
      "i need {det} {adj?} {noun}",
      "i would like {det} {noun}",
      "please {verb} the {noun}",
      "please {verb} my {noun} {time?}",
      "can you {verb} the {noun}",
      "could you {verb} {det} {noun} for me",
      "{pron} {past} the {noun} {time?}",
      "{name} {past} my {noun}",
      "{name} is at the {place}",
      "the {noun} is {adj}",
      "the {noun} is very {adj}",
      "where is my {noun}",
      "where is {name}",
      "{greet} {name}",
      "turn {onoff} the {device}",
      "do you {want} {det} {noun}",
      "i am {adj}",
      "i am not {adj} {time?}",
      "we are going to the {place} {time}",
      "i will {verb} the {noun} at the {place}",
      "i have {num} {noun}",
      "call {name} {time}",
      "{pron} will {verb} the {noun} {time?}",
      "how are you {time?}",
      "what is in the {noun}",
      "{reply} i {want} {det} {noun}",
      "it is too {adj}",
      "there is {det} {noun} in the {noun}",
      "here is {det} {adj?} {noun}",
      "when will {pron} {verb} the {noun}",
      "go to the {place} with {name}",
      "{pron} was {adj} {time?}",
      "{name} and {name} are {adj}",
      "get the {noun} out of the {noun}",
      "i want to {verb} the {noun} now",
      "{pron} can be {adj}",
      "his {noun} is {adj}",
      "{pron} will be here {time}",
      "the {noun} is down there",
      "pick up the {noun} with {det} {noun}",
      "you and {name} are off {time}",
      "what is that",
      "how is {name}",
      "all of the {noun} is {adj}",
      "it is on the {noun} too",
      "hello how are you",
  };
  return kTemplates;
}

std::vector<std::string> Expand(const std::string &tmpl, Rng &rng) {
  std::vector<std::string> words;
  for (const auto &tok : SplitWords(tmpl)) {
    if (tok.front() != '{') {
      words.push_back(tok);
      continue;
    }
    std::string cls = tok.substr(1, tok.size() - 2);
    bool optional = !cls.empty() && cls.back() == '?';
    if (optional) {
      cls.pop_back();
      if (rng.Uniform() < 0.5) continue;
    }
    const auto &options = WordClasses().at(cls);
    for (const auto &w : SplitWords(options[rng.Below(options.size())])) words.push_back(w);
  }
  return words;
}

ordered_json RecordToJson(const ManifestRecord &r) {
  ordered_json j;
  j["utterance_id"] = r.utterance_id;
  j["speaker_id"] = r.speaker_id;
  j["transcript"] = r.transcript;
  j["split"] = SplitName(r.split);
  j["duration_s"] = r.duration_s;
  j["path"] = r.path;
  if (!r.phones.empty()) j["phones"] = JoinWords(r.phones);
  if (r.oov) j["oov"] = true;
  return j;
}

ManifestRecord RecordFromJson(const ordered_json &j) {
  ManifestRecord r;
  r.utterance_id = j.at("utterance_id").get<std::string>();
  r.speaker_id = j.at("speaker_id").get<std::string>();
  r.transcript = j.at("transcript").get<std::string>();
  std::string split = j.at("split").get<std::string>();
  if (split == "train") {
    r.split = Split::kTrain;
  } else if (split == "test") {
    r.split = Split::kTest;
  } else {
    ThrowData("unknown split '" + split + "'");
  }
  r.duration_s = j.at("duration_s").get<double>();
  r.path = j.value("path", "");
  if (j.contains("phones")) r.phones = SplitWords(j["phones"].get<std::string>());
  r.oov = j.value("oov", false);
  return r;
}

template <typename Fn>
void ParallelFor(size_t n, int workers, Fn &&fn) {
  workers = std::max(1, std::min<int>(workers, static_cast<int>(n)));
  if (workers == 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!error) error = std::current_exception();
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace

std::string SplitName(Split s) { return s == Split::kTrain ? "train" : "test"; }

std::set<std::string> GrammarWords() {
  std::set<std::string> words;
  for (const auto &[cls, options] : WordClasses())
    for (const auto &o : options)
      for (const auto &w : SplitWords(o)) words.insert(w);
  for (const auto &t : Templates())
    for (const auto &tok : SplitWords(t))
      if (tok.front() != '{') words.insert(tok);
  return words;
}

std::set<std::string> ReservedWords() {
  const auto &names = WordClasses().at("name");
  return {names.begin(), names.end()};
}

std::vector<std::string> SampleSentence(Rng &rng, bool test_only) {
  const auto &templates = Templates();
  const auto reserved = ReservedWords();
  for (;;) {
    auto words = Expand(templates[rng.Below(templates.size())], rng);
    if (!test_only) return words;
    bool ok = std::none_of(words.begin(), words.end(),
                           [&](const std::string &w) { return reserved.count(w) > 0; });
    if (ok) return words;
  }
}

std::string BudgetSpec::Label() const {
  if (all) return "all";
  std::ostringstream os;
  os << budget_s << "s";
  return os.str();
}

std::string Manifest::ToJsonLines() const {
  std::string out;
  for (const auto &r : records) {
    out += RecordToJson(r).dump();
    out += '\n';
  }
  return out;
}

void Manifest::Save(const std::string &path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) ThrowData("cannot open for writing: " + path);
  os << ToJsonLines();
  if (!os) ThrowData("write failed: " + path);
}

Manifest Manifest::Load(const std::string &path) {
  std::ifstream is(path);
  if (!is) ThrowData("cannot open manifest: " + path);
  Manifest m;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      m.records.push_back(RecordFromJson(ordered_json::parse(line)));
    } catch (const nlohmann::json::exception &e) {
      ThrowData(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return m;
}

void Manifest::Validate(const Lexicon &lexicon) const {
  std::set<std::string> ids;
  for (const auto &r : records) {
    if (!ids.insert(r.utterance_id).second)
      ThrowData("duplicate utterance id " + r.utterance_id);
    if (!r.oov) {
      for (const auto &w : SplitWords(r.transcript))
        if (!lexicon.Contains(w))
          ThrowData("utterance " + r.utterance_id + ": word '" + w +
                    "' not in lexicon and not flagged oov");
    }
  }
}

Manifest Manifest::Filter(const std::string &speaker_id, std::optional<Split> split) const {
  Manifest out;
  for (const auto &r : records)
    if ((speaker_id.empty() || r.speaker_id == speaker_id) && (!split || r.split == *split))
      out.records.push_back(r);
  return out;
}

std::vector<std::string> Manifest::Speakers() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto &r : records)
    if (seen.insert(r.speaker_id).second) out.push_back(r.speaker_id);
  return out;
}

double Manifest::TotalDuration() const {
  double total = 0.0;
  for (const auto &r : records) total += r.duration_s;
  return total;
}

Manifest MakeBudgetSubset(const Manifest &manifest, const std::string &speaker_id,
                          const BudgetSpec &budget) {
  if (!budget.all && !(budget.budget_s > 0)) ThrowUsage("budget must be positive or 'all'");
  Manifest train = manifest.Filter(speaker_id, Split::kTrain);
  if (train.records.empty()) {
    if (manifest.Filter(speaker_id, std::nullopt).records.empty())
      ThrowData("unknown speaker '" + speaker_id + "'");
    ThrowData("speaker '" + speaker_id + "' has no train records");
  }
  if (budget.all) return train;
  std::vector<size_t> order(train.records.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(DeriveSeed(budget.selection_seed, "budget:" + speaker_id));
  rng.Shuffle(order.begin(), order.end());
  Manifest out;
  double used = 0.0;
  for (size_t idx : order) {
    const auto &r = train.records[idx];
    if (!out.records.empty() && used + r.duration_s > budget.budget_s) break;
    out.records.push_back(r);
    used += r.duration_s;
  }
  return out;
}

void SaveSpeakers(const std::string &path, const std::vector<SpeakerProfile> &speakers) {
  ordered_json arr = ordered_json::array();
  for (const auto &s : speakers) {
    ordered_json j;
    j["id"] = s.id;
    j["condition"] = ConditionName(s.condition);
    j["severity"] = s.severity;
    j["tempo_factor"] = s.tempo_factor;
    j["template_seed"] = s.template_seed;
    ordered_json subs = ordered_json::object();
    for (const auto &[from, row] : s.substitution_map) {
      ordered_json r = ordered_json::array();
      for (const auto &[to, p] : row) r.push_back({to, p});
      subs[from] = r;
    }
    j["substitution_map"] = subs;
    arr.push_back(j);
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) ThrowData("cannot open for writing: " + path);
  os << arr.dump(1) << '\n';
}

std::vector<SpeakerProfile> LoadSpeakers(const std::string &path) {
  std::ifstream is(path);
  if (!is) ThrowData("cannot open speaker file: " + path);
  std::vector<SpeakerProfile> out;
  try {
    ordered_json arr = ordered_json::parse(is);
    for (const auto &j : arr) {
      SpeakerProfile s;
      s.id = j.at("id").get<std::string>();
      s.condition = ParseCondition(j.at("condition").get<std::string>());
      s.severity = j.at("severity").get<double>();
      s.tempo_factor = j.at("tempo_factor").get<double>();
      s.template_seed = j.at("template_seed").get<uint64_t>();
      for (const auto &[from, row] : j.at("substitution_map").items()) {
        SubstitutionRow r;
        for (const auto &e : row) r.emplace_back(e[0].get<std::string>(), e[1].get<double>());
        s.substitution_map[from] = std::move(r);
      }
      out.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception &e) {
    ThrowData(path + ": " + e.what());
  }
  return out;
}

Corpus BuildCorpus(const CorpusConfig &config, const Lexicon &lexicon,
                   const std::string &out_dir, int workers) {
  if (lexicon.Empty()) ThrowData("empty lexicon");
  if (config.groups.empty()) ThrowUsage("corpus config has no speaker groups");
  for (const auto &w : GrammarWords())
    if (!lexicon.Contains(w)) ThrowData("grammar word '" + w + "' missing from lexicon");
  config.features.Validate(config.synth.sample_rate);

  Corpus corpus;
  std::set<std::string> ids;
  struct Job {
    size_t speaker;
    ManifestRecord record;
  };
  std::vector<Job> jobs;
  for (const auto &g : config.groups) {
    if (g.count < 1 || g.sentences < 1) ThrowUsage("speaker and sentence counts must be >= 1");
    if (g.severities.empty()) ThrowUsage("speaker group needs at least one severity");
    std::string prefix = g.prefix.empty() ? ConditionName(g.condition) : g.prefix;
    for (int i = 0; i < g.count; ++i) {
      char buf[16];
      std::snprintf(buf, sizeof(buf), "%02d", i);
      std::string id = prefix + buf;
      if (!ids.insert(id).second) ThrowUsage("duplicate speaker id " + id);
      double severity = g.severities[i % g.severities.size()];
      corpus.speakers.push_back(MakeSpeaker(id, g.condition, severity,
                                            DeriveSeed(config.seed, "speaker:" + id), lexicon));
      const size_t spk = corpus.speakers.size() - 1;

      const int n_test = static_cast<int>(std::lround(config.test_fraction * g.sentences));
      Rng text_rng(DeriveSeed(config.seed, "text:" + id));
      for (int s = 0; s < g.sentences; ++s) {
        bool is_test = s >= g.sentences - n_test;
        char ubuf[16];
        std::snprintf(ubuf, sizeof(ubuf), "-%04d", s);
        ManifestRecord r;
        r.utterance_id = id + ubuf;
        r.speaker_id = id;
        r.transcript = JoinWords(SampleSentence(text_rng, is_test));
        r.split = is_test ? Split::kTest : Split::kTrain;
        r.path = "feats/" + r.utterance_id + ".feat";
        jobs.push_back({spk, std::move(r)});
      }
    }
  }

  fs::create_directories(fs::path(out_dir) / "feats");
  std::vector<float> babble;
  if (config.noise.kind == NoiseKind::kBabble)
    babble = MakeBabble(lexicon, DeriveSeed(config.seed, "babble"), 10.0, config.synth);

  ParallelFor(jobs.size(), workers, [&](size_t i) {
    Job &job = jobs[i];
    ManifestRecord &r = job.record;
    const uint64_t useed = DeriveSeed(config.seed, "utt:" + r.utterance_id);
    auto utt = SynthesizeUtterance(SplitWords(r.transcript), corpus.speakers[job.speaker],
                                   lexicon, useed, config.synth);
    NoiseConfig nc = config.noise;
    nc.seed = DeriveSeed(useed, "noise");
    Waveform noisy = AddNoise(utt.wave, nc, babble);
    FeatureMatrix feats = ComputeLogMel(noisy, config.features);
    WriteFeatureFile((fs::path(out_dir) / r.path).string(), feats.frames);
    r.duration_s = noisy.DurationSeconds();
    r.phones = utt.RealizedPhones();
  });

  for (auto &job : jobs) corpus.manifest.records.push_back(std::move(job.record));
  corpus.manifest.Validate(lexicon);
  corpus.manifest.Save((fs::path(out_dir) / "manifest.jsonl").string());
  SaveSpeakers((fs::path(out_dir) / "speakers.json").string(), corpus.speakers);
  lexicon.Save((fs::path(out_dir) / "lexicon.txt").string());
  return corpus;
}

}  // namespace perasr
