// core/src/synth.cc

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

#include "perasr/synth.h"

#include <algorithm>
#include <cmath>
#include <complex>

#include "fft.h"
#include "perasr/common.h"

namespace perasr {

namespace {

enum class Manner { kVowel, kDiphthong, kNasal, kStop, kFricative, kApproximant, kSilence };

struct Resonance {
  double freq;
  double bandwidth;
  double gain;
};

struct Keyframe {
  std::vector<Resonance> peaks;
  double notch_hz = 0.0;
  double voicing = 1.0;
  double level_db = 0.0;
};

// Two keyframes per phone. Diphthongs glide from `a` to `b`; stops hold `a`
// (closure) until `split` and then switch to `b` (burst). Everything else
// uses `a` throughout.
struct PhoneSpec {
  Manner manner;
  double duration_ms;
  Keyframe a;
  Keyframe b;
  double split = 1.0;
};

Keyframe Formants(double f1, double f2, double f3, double level_db = 0.0) {
  return {{{f1, 90, 1.0}, {f2, 110, 0.55}, {f3, 160, 0.3}}, 0.0, 1.0, level_db};
}

PhoneSpec Vowel(double f1, double f2, double f3) {
  Keyframe k = Formants(f1, f2, f3);
  return {Manner::kVowel, 85.0, k, k};
}

PhoneSpec Diphthong(double f1a, double f2a, double f1b, double f2b) {
  return {Manner::kDiphthong, 120.0, Formants(f1a, f2a, 2500), Formants(f1b, f2b, 2600)};
}

PhoneSpec Approximant(double f1, double f2, double f3) {
  Keyframe k = Formants(f1, f2, f3, -4.0);
  return {Manner::kApproximant, 60.0, k, k};
}

PhoneSpec Nasal(double antiformant, double f2) {
  Keyframe k{{{260, 100, 1.0}, {f2, 200, 0.15}, {2600, 250, 0.08}}, antiformant, 1.0, -6.0};
  return {Manner::kNasal, 65.0, k, k};
}

PhoneSpec Stop(double burst_hz, double burst_bw, bool voiced) {
  Keyframe closure;
  if (voiced) {
    closure = {{{180, 80, 1.0}}, 0.0, 1.0, -18.0};
  } else {
    closure = {{{500, 2000, 1.0}}, 0.0, 0.0, -45.0};
  }
  Keyframe burst{{{burst_hz, burst_bw, 1.0}}, 0.0, voiced ? 0.35 : 0.0,
                 voiced ? -8.0 : -4.0};
  if (voiced) burst.peaks.push_back({200, 100, 0.6});
  return {Manner::kStop, 60.0, closure, burst, 0.55};
}

PhoneSpec Fricative(double peak_hz, double bw, double level_db, bool voiced) {
  Keyframe k{{{peak_hz, bw, 1.0}}, 0.0, voiced ? 0.45 : 0.0, level_db};
  if (voiced) k.peaks.push_back({200, 120, 0.5});
  return {Manner::kFricative, 85.0, k, k};
}

const std::map<std::string, PhoneSpec> &PhoneTable() {
  static const std::map<std::string, PhoneSpec> kTable = [] {
    std::map<std::string, PhoneSpec> t;
    t["p"] = Stop(900, 600, false);
    t["b"] = Stop(900, 600, true);
    t["t"] = Stop(4300, 1400, false);
    t["d"] = Stop(4300, 1400, true);
    t["k"] = Stop(2000, 600, false);
    t["g"] = Stop(2000, 600, true);
    t["f"] = Fricative(4500, 4000, -16, false);
    t["v"] = Fricative(4500, 4000, -16, true);
    t["D"] = Fricative(3300, 2500, -18, true);
    t["s"] = Fricative(6000, 1300, -2, false);
    t["z"] = Fricative(6000, 1300, -5, true);
    t["S"] = Fricative(3000, 700, -2, false);
    t["Z"] = Fricative(3000, 700, -5, true);
    {
      Keyframe h = Formants(500, 1500, 2500, -12);
      h.voicing = 0.0;
      t["h"] = {Manner::kFricative, 60.0, h, h};
    }
    t["m"] = Nasal(1000, 1100);
    t["n"] = Nasal(1800, 1500);
    t["N"] = Nasal(3000, 2100);
    t["l"] = Approximant(360, 1300, 2700);
    t["r"] = Approximant(420, 1250, 1600);
    t["w"] = Approximant(300, 650, 2200);
    t["j"] = Approximant(270, 2250, 3000);
    t["i:"] = Vowel(280, 2250, 2900);
    t["I"] = Vowel(400, 1920, 2560);
    t["e"] = Vowel(550, 1770, 2490);
    t["{"] = Vowel(690, 1660, 2410);
    t["A:"] = Vowel(730, 1090, 2440);
    t["O:"] = Vowel(500, 800, 2550);
    t["U"] = Vowel(440, 1020, 2240);
    t["u:"] = Vowel(300, 870, 2240);
    t["V"] = Vowel(640, 1190, 2390);
    t["@"] = Vowel(500, 1500, 2500);
    t["eI"] = Diphthong(550, 1770, 330, 2200);
    t["aI"] = Diphthong(750, 1150, 400, 1950);
    t["@U"] = Diphthong(520, 1200, 330, 880);
    t["aU"] = Diphthong(750, 1150, 430, 950);
    return t;
  }();
  return kTable;
}

const PhoneSpec &Spec(const std::string &symbol) {
  auto it = PhoneTable().find(symbol);
  if (it == PhoneTable().end()) ThrowData("no acoustic prototype for phoneme '" + symbol + "'");
  return it->second;
}

// Phonemes a speaker is likely to produce instead of the intended one.
const std::map<std::string, std::vector<std::string>> &Confusables() {
  static const std::map<std::string, std::vector<std::string>> kMap = {
      {"p", {"b", "t", "k"}},    {"b", {"p", "d", "m"}},   {"t", {"d", "k", "p"}},
      {"d", {"t", "n", "g"}},    {"k", {"g", "t", "p"}},   {"g", {"k", "d", "N"}},
      {"f", {"v", "p", "h"}},    {"v", {"f", "b", "w"}},   {"D", {"d", "v", "z"}},
      {"s", {"z", "S", "f"}},    {"z", {"s", "Z", "D"}},   {"S", {"s", "Z"}},
      {"Z", {"S", "z"}},         {"h", {"f", "k"}},        {"m", {"n", "b"}},
      {"n", {"m", "N", "d"}},    {"N", {"n", "g"}},        {"l", {"r", "w", "n"}},
      {"r", {"w", "l"}},         {"w", {"r", "v", "U"}},   {"j", {"i:", "I"}},
      {"i:", {"I", "e"}},        {"I", {"i:", "e", "@"}},  {"e", {"I", "{"}},
      {"{", {"e", "A:"}},        {"A:", {"O:", "V"}},      {"O:", {"A:", "@U"}},
      {"U", {"u:", "@"}},        {"u:", {"U", "@U"}},      {"V", {"@", "A:"}},
      {"@", {"V", "I"}},         {"eI", {"e", "aI"}},      {"aI", {"A:", "eI"}},
      {"@U", {"O:", "u:"}},      {"aU", {"A:", "@U"}},
  };
  return kMap;
}

// Per-speaker acoustic realization of every phoneme, as linear magnitudes
// over the synthesis FFT bins.
struct VoiceFrame {
  std::vector<float> magnitude;
  double voicing = 0.0;
};

struct PhoneVoice {
  Manner manner;
  double split;
  VoiceFrame a;
  VoiceFrame b;
};

constexpr int kSynthFft = 512;
constexpr int kSynthHop = kSynthFft / 4;

struct Voice {
  std::map<std::string, PhoneVoice> phones;
  VoiceFrame silence;
  double f0 = 120.0;
  double breathiness = 0.0;
};

double ResonanceDb(const Keyframe &k, double hz) {
  double lin = 1e-3;
  for (const auto &r : k.peaks) {
    double d = hz - r.freq;
    lin += r.gain * r.bandwidth * r.bandwidth / (d * d + r.bandwidth * r.bandwidth);
  }
  if (k.notch_hz > 0) {
    constexpr double bw = 180.0;
    double d = hz - k.notch_hz;
    lin *= 1.0 - 0.85 * bw * bw / (d * d + bw * bw);
  }
  return 20.0 * std::log10(lin) + k.level_db;
}

struct VoiceParams {
  double warp = 1.0;       // vocal-tract length scaling of all resonances
  double tilt_db = 0.0;    // dB per octave relative to 1 kHz
  double drift_sd = 0.02;  // per-phone, per-resonance relative jitter
  double contrast = 1.0;   // 1 = unchanged, smaller flattens templates
  double f0 = 120.0;
  double breathiness = 0.0;
};

VoiceParams DrawVoiceParams(const SpeakerProfile &s) {
  Rng rng(DeriveSeed(s.template_seed, "voice"));
  VoiceParams p;
  p.warp = rng.Uniform(0.9, 1.1);
  p.tilt_db = rng.Uniform(-2.0, 2.0);
  p.f0 = rng.Uniform(95.0, 230.0);
  if (s.condition == Condition::kDysarthric) {
    p.drift_sd = 0.02 + 0.2 * s.severity;
    p.contrast = 1.0 - 0.5 * s.severity;
    p.breathiness = 0.4 * s.severity;
  }
  return p;
}

// The 80 mel-bin centers used by the default front end. Templates live on this
// grid and are interpolated onto the synthesis FFT bins.
const std::vector<double> &TemplateGridHz() {
  static const std::vector<double> kGrid = [] {
    FeatureConfig cfg;
    MelFilterbank bank(cfg, 16000);
    std::vector<double> g(bank.NumBins());
    for (int i = 0; i < bank.NumBins(); ++i) g[i] = bank.CenterHz(i);
    return g;
  }();
  return kGrid;
}

VoiceFrame RenderKeyframe(const Keyframe &k, const VoiceParams &vp,
                          const std::vector<double> &jitter, int sample_rate) {
  const auto &grid = TemplateGridHz();
  Keyframe warped = k;
  for (size_t i = 0; i < warped.peaks.size(); ++i)
    warped.peaks[i].freq *= vp.warp * (1.0 + jitter[i % jitter.size()]);
  if (warped.notch_hz > 0) warped.notch_hz *= vp.warp;

  // 80-dim template in dB.
  std::vector<double> tmpl(grid.size());
  double mean = 0.0;
  for (size_t i = 0; i < grid.size(); ++i) {
    tmpl[i] = ResonanceDb(warped, grid[i]) + vp.tilt_db * std::log2(grid[i] / 1000.0);
    mean += tmpl[i];
  }
  mean /= static_cast<double>(grid.size());
  for (auto &v : tmpl) v = mean + vp.contrast * (v - mean);

  VoiceFrame out;
  out.voicing = k.voicing;
  out.magnitude.resize(kSynthFft / 2 + 1);
  const double bin_hz = static_cast<double>(sample_rate) / kSynthFft;
  size_t g = 0;
  for (int b = 0; b <= kSynthFft / 2; ++b) {
    double hz = b * bin_hz;
    double db;
    if (hz <= grid.front()) {
      db = tmpl.front();
    } else if (hz >= grid.back()) {
      db = tmpl.back();
    } else {
      while (grid[g + 1] < hz) ++g;
      double w = (hz - grid[g]) / (grid[g + 1] - grid[g]);
      db = (1 - w) * tmpl[g] + w * tmpl[g + 1];
    }
    out.magnitude[b] = static_cast<float>(std::pow(10.0, db / 20.0));
  }
  return out;
}

Voice BuildVoice(const SpeakerProfile &speaker, int sample_rate) {
  VoiceParams vp = DrawVoiceParams(speaker);
  Voice v;
  v.f0 = vp.f0;
  v.breathiness = vp.breathiness;
  for (const auto &[sym, spec] : PhoneTable()) {
    Rng rng(DeriveSeed(speaker.template_seed, "phone:" + sym));
    std::vector<double> jitter(3);
    for (auto &j : jitter) j = std::clamp(vp.drift_sd * rng.Normal(), -0.45, 0.45);
    PhoneVoice pv{spec.manner, spec.split, RenderKeyframe(spec.a, vp, jitter, sample_rate),
                  RenderKeyframe(spec.b, vp, jitter, sample_rate)};
    v.phones.emplace(sym, std::move(pv));
  }
  v.silence.voicing = 0.0;
  v.silence.magnitude.assign(kSynthFft / 2 + 1, static_cast<float>(std::pow(10.0, -70.0 / 20.0)));
  return v;
}

std::string DrawRealization(const SpeakerProfile &speaker, const std::string &phone,
                            Rng &rng) {
  auto it = speaker.substitution_map.find(phone);
  double u = rng.Uniform();
  if (it == speaker.substitution_map.end()) return phone;
  double acc = 0.0;
  for (const auto &[target, p] : it->second) {
    acc += p;
    if (u < acc) return target;
  }
  return it->second.back().first;
}

}  // namespace

std::string ConditionName(Condition c) {
  switch (c) {
    case Condition::kTypical: return "typical";
    case Condition::kDysarthric: return "dysarthric";
    case Condition::kAccented: return "accented";
  }
  return "typical";
}

Condition ParseCondition(const std::string &name) {
  if (name == "typical") return Condition::kTypical;
  if (name == "dysarthric") return Condition::kDysarthric;
  if (name == "accented") return Condition::kAccented;
  ThrowUsage("unknown speaker condition '" + name + "'");
}

double NominalPhoneDurationMs(const std::string &symbol) {
  return Spec(symbol).duration_ms;
}

double SpeakerProfile::SubstitutionProb(const std::string &from,
                                        const std::string &to) const {
  auto it = substitution_map.find(from);
  if (it == substitution_map.end()) return from == to ? 1.0 : 0.0;
  for (const auto &[target, p] : it->second)
    if (target == to) return p;
  return 0.0;
}

void SpeakerProfile::Validate(const Lexicon &lexicon) const {
  if (id.empty()) ThrowData("speaker id must not be empty");
  if (!(severity >= 0.0 && severity <= 1.0))
    ThrowData("speaker " + id + ": severity outside [0, 1]");
  if (!(tempo_factor > 0.0)) ThrowData("speaker " + id + ": tempo_factor must be positive");
  if (severity == 0.0 && tempo_factor != 1.0)
    ThrowData("speaker " + id + ": severity 0 requires tempo_factor 1");
  for (const auto &[from, row] : substitution_map) {
    if (lexicon.PhonemeId(from) < 0) ThrowData("speaker " + id + ": unknown phoneme " + from);
    double sum = 0.0;
    for (const auto &[to, p] : row) {
      if (lexicon.PhonemeId(to) < 0) ThrowData("speaker " + id + ": unknown phoneme " + to);
      if (p < 0) ThrowData("speaker " + id + ": negative substitution probability");
      sum += p;
      if (severity == 0.0 && to != from && p > 0)
        ThrowData("speaker " + id + ": severity 0 requires identity substitutions");
    }
    if (std::abs(sum - 1.0) > 1e-9)
      ThrowData("speaker " + id + ": substitution row for " + from + " does not sum to 1");
  }
}

SpeakerProfile MakeSpeaker(const std::string &id, Condition condition,
                           double severity, uint64_t seed, const Lexicon &lexicon) {
  if (condition == Condition::kTypical && severity != 0.0)
    ThrowUsage("typical speakers must have severity 0");
  SpeakerProfile s;
  s.id = id;
  s.condition = condition;
  s.severity = severity;
  s.template_seed = DeriveSeed(seed, "template");
  Rng rng(DeriveSeed(seed, "profile"));

  if (severity > 0.0) s.tempo_factor = rng.Uniform(0.9, 1.1);
  for (const auto &phone : lexicon.Inventory()) {
    SubstitutionRow row;
    auto conf = Confusables().find(phone);
    double mass = 0.0;
    std::vector<double> weights;
    if (severity > 0.0 && conf != Confusables().end()) {
      const auto &targets = conf->second;
      weights.resize(targets.size());
      if (condition == Condition::kDysarthric) {
        if (rng.Uniform() < 0.4 + 0.4 * severity) mass = severity * rng.Uniform(0.15, 0.5);
        for (auto &w : weights) w = rng.Uniform(0.1, 1.0);
      } else {
        // Accents substitute a few phonemes consistently, mostly toward one
        // L1 category.
        if (rng.Uniform() < 0.3) mass = severity * rng.Uniform(0.5, 1.0);
        size_t main = rng.Below(weights.size());
        for (size_t i = 0; i < weights.size(); ++i) weights[i] = i == main ? 1.0 : 0.15;
      }
      double total = 0.0;
      for (double w : weights) total += w;
      for (auto &w : weights) w = mass * w / total;
    }
    row.emplace_back(phone, 1.0 - mass);
    if (mass > 0.0) {
      for (size_t i = 0; i < weights.size(); ++i) row.emplace_back(conf->second[i], weights[i]);
    }
    s.substitution_map.emplace(phone, std::move(row));
  }
  s.Validate(lexicon);
  return s;
}

std::vector<std::string> SynthesizedUtterance::RealizedPhones() const {
  std::vector<std::string> out;
  out.reserve(alignment.size());
  for (const auto &seg : alignment) out.push_back(seg.realized);
  return out;
}

SynthesizedUtterance SynthesizeUtterance(const std::vector<std::string> &words,
                                         const SpeakerProfile &speaker,
                                         const Lexicon &lexicon, uint64_t seed,
                                         const SynthOptions &options) {
  for (const auto &w : words)
    if (!lexicon.Contains(w)) ThrowData("word not in lexicon: '" + w + "'");
  const int sr = options.sample_rate;
  Rng rng(seed);
  const double stretch =
      speaker.tempo_factor *
      (speaker.condition == Condition::kDysarthric ? 1.0 + speaker.severity : 1.0);

  SynthesizedUtterance out;
  out.wave.sample_rate = sr;
  const int64_t edge =
      std::llround(options.edge_silence_ms * speaker.tempo_factor * 1e-3 * sr);
  int64_t cursor = edge;
  for (size_t wi = 0; wi < words.size(); ++wi) {
    for (const auto &phone : *lexicon.Find(words[wi])) {
      PhoneSegment seg;
      seg.intended = phone;
      seg.realized = DrawRealization(speaker, phone, rng);
      seg.word_index = static_cast<int>(wi);
      double ms = NominalPhoneDurationMs(seg.realized) * stretch * rng.Uniform(0.85, 1.15);
      seg.start_sample = cursor;
      seg.num_samples = std::max<int64_t>(1, std::llround(ms * 1e-3 * sr));
      cursor += seg.num_samples;
      out.alignment.push_back(std::move(seg));
    }
  }
  const int64_t total = cursor + edge;

  Voice voice = BuildVoice(speaker, sr);

  // Excitation: a pulse train following a gently falling f0 contour, and
  // white noise.
  std::vector<float> pulses(total, 0.0f);
  {
    double phase = rng.Uniform();
    for (int64_t n = 0; n < total; ++n) {
      double f0 = voice.f0 * (1.05 - 0.15 * static_cast<double>(n) / total);
      phase += f0 / sr;
      if (phase >= 1.0) {
        phase -= 1.0;
        pulses[n] = static_cast<float>(std::sqrt(sr / f0));
      }
    }
  }
  std::vector<float> noise(total);
  for (auto &v : noise) v = static_cast<float>(rng.Normal());

  internal::RealFft fft(kSynthFft);
  std::vector<float> hann(kSynthFft);
  for (int i = 0; i < kSynthFft; ++i)
    hann[i] = static_cast<float>(0.5 - 0.5 * std::cos(2.0 * M_PI * i / kSynthFft));

  std::vector<double> acc(total + kSynthFft, 0.0);
  std::vector<float> frame(kSynthFft);
  std::vector<std::complex<float>> spec(kSynthFft / 2 + 1);
  std::vector<float> mag(kSynthFft / 2 + 1);
  size_t seg_idx = 0;
  for (int64_t start = -kSynthFft / 2; start < total; start += kSynthHop) {
    const int64_t center = start + kSynthFft / 2;
    // Spectral state at the frame center.
    const VoiceFrame *fa = &voice.silence;
    const VoiceFrame *fb = nullptr;
    double mix = 0.0;
    double voicing = 0.0;
    while (seg_idx + 1 < out.alignment.size() &&
           center >= out.alignment[seg_idx + 1].start_sample)
      ++seg_idx;
    if (!out.alignment.empty()) {
      const PhoneSegment &seg = out.alignment[seg_idx];
      if (center >= seg.start_sample && center < seg.start_sample + seg.num_samples) {
        const PhoneVoice &pv = voice.phones.at(seg.realized);
        double frac = static_cast<double>(center - seg.start_sample) / seg.num_samples;
        if (pv.manner == Manner::kDiphthong) {
          fa = &pv.a;
          fb = &pv.b;
          mix = frac;
        } else if (pv.manner == Manner::kStop) {
          fa = frac < pv.split ? &pv.a : &pv.b;
        } else {
          fa = &pv.a;
        }
        voicing = fb ? (1 - mix) * fa->voicing + mix * fb->voicing : fa->voicing;
      }
    }
    for (size_t k = 0; k < mag.size(); ++k)
      mag[k] = fb ? static_cast<float>((1 - mix) * fa->magnitude[k] + mix * fb->magnitude[k])
                  : fa->magnitude[k];

    const double noise_gain = (1.0 - voicing) + voicing * (0.05 + voice.breathiness);
    for (int i = 0; i < kSynthFft; ++i) {
      int64_t n = start + i;
      float e = 0.0f;
      if (n >= 0 && n < total)
        e = static_cast<float>(voicing * pulses[n] + noise_gain * noise[n]);
      frame[i] = e * hann[i];
    }
    fft.Forward(frame, spec);
    for (size_t k = 0; k < spec.size(); ++k) spec[k] *= mag[k];
    fft.Inverse(spec, frame);
    for (int i = 0; i < kSynthFft; ++i) {
      int64_t n = start + i;
      if (n >= 0 && n < total) acc[n] += frame[i];
    }
  }

  double power = 0.0;
  for (int64_t n = 0; n < total; ++n) power += acc[n] * acc[n];
  power /= static_cast<double>(std::max<int64_t>(total, 1));
  const double gain = power > 0 ? options.rms_level / std::sqrt(power) : 0.0;
  out.wave.samples.resize(total);
  for (int64_t n = 0; n < total; ++n)
    out.wave.samples[n] = static_cast<float>(std::clamp(acc[n] * gain, -1.0, 1.0));
  return out;
}

std::vector<float> MakeBabble(const Lexicon &lexicon, uint64_t seed, double seconds,
                              const SynthOptions &options) {
  if (lexicon.Empty()) ThrowData("cannot synthesize babble from an empty lexicon");
  std::vector<std::string> words;
  for (const auto &[w, _] : lexicon.Entries()) words.push_back(w);
  const size_t length = static_cast<size_t>(seconds * options.sample_rate);
  std::vector<float> sum(length, 0.0f);
  for (int talker = 0; talker < 8; ++talker) {
    uint64_t tseed = DeriveSeed(seed, "babble:" + std::to_string(talker));
    SpeakerProfile s = MakeSpeaker("babble" + std::to_string(talker), Condition::kTypical,
                                   0.0, tseed, lexicon);
    Rng rng(tseed);
    size_t pos = 0;
    int utt = 0;
    while (pos < length) {
      std::vector<std::string> sentence;
      for (int i = 0; i < 6; ++i) sentence.push_back(words[rng.Below(words.size())]);
      auto u = SynthesizeUtterance(sentence, s, lexicon,
                                   DeriveSeed(tseed, std::to_string(utt++)), options);
      for (size_t i = 0; i < u.wave.samples.size() && pos < length; ++i, ++pos)
        sum[pos] += u.wave.samples[i];
    }
  }
  return sum;
}

}  // namespace perasr
