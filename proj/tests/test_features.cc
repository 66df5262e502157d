// tests/test_features.cc

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
#include <vector>

#include "doctest.h"
#include "oracles.h"
#include "perasr/common.h"
#include "perasr/features.h"

using namespace perasr;

namespace {

Waveform Sine(double hz, double seconds, double amplitude = 1.0, int rate = 16000) {
  Waveform w;
  w.sample_rate = rate;
  w.samples.resize(static_cast<size_t>(seconds * rate));
  for (size_t i = 0; i < w.samples.size(); ++i)
    w.samples[i] = static_cast<float>(amplitude * std::sin(2 * M_PI * hz * i / rate));
  return w;
}

// Mel centers computed from the HTK formula, independent of MelFilterbank.
std::vector<double> OracleCentersMel(int bins, double lo_hz, double hi_hz) {
  auto mel = [](double f) { return 2595.0 * std::log10(1.0 + f / 700.0); };
  const double lo = mel(lo_hz), hi = mel(hi_hz), step = (hi - lo) / (bins + 1);
  std::vector<double> c(bins);
  for (int m = 0; m < bins; ++m) c[m] = lo + (m + 1) * step;
  return c;
}

double Power(std::span<const float> x) {
  double s = 0.0;
  for (float v : x) s += double(v) * v;
  return s / x.size();
}

}  // namespace

TEST_CASE("frame count follows floor((n - win) / hop) + 1") {
  FeatureConfig cfg;
  FeatureMatrix f = ComputeLogMel(Sine(440, 1.0), cfg);
  CHECK(f.NumFrames() == (16000 - 400) / 160 + 1);
  CHECK(f.NumFrames() == 98);
  CHECK(f.frames.cols() == 80);
  for (int n : {400, 401, 559, 560, 12345}) {
    Waveform w = Sine(300, 1.0);
    w.samples.resize(n);
    CHECK(ComputeLogMel(w, cfg).NumFrames() == (n - 400) / 160 + 1);
  }
}

TEST_CASE("a window's worth of samples is required") {
  Waveform w = Sine(300, 1.0);
  w.samples.resize(399);
  CHECK_THROWS_AS(ComputeLogMel(w, FeatureConfig{}), Error);
}

TEST_CASE("sine argmax lands on the mel bin with the nearest center") {
  FeatureConfig cfg;
  const auto centers = OracleCentersMel(cfg.mel_bins, cfg.low_freq, 8000.0);
  const double step = centers[1] - centers[0];
  auto mel = [](double f) { return 2595.0 * std::log10(1.0 + f / 700.0); };
  MelFilterbank bank(cfg, 16000);
  for (int m = 0; m < cfg.mel_bins; ++m)
    CHECK(mel(bank.CenterHz(m)) == doctest::Approx(centers[m]).epsilon(1e-9));

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> pick(300.0, 7600.0);
  int tested = 0;
  while (tested < 60) {
    const double f = pick(rng);
    // Nearest center in the mel domain, where the triangles are linear.
    int nearest = 0;
    for (int m = 1; m < cfg.mel_bins; ++m)
      if (std::abs(centers[m] - mel(f)) < std::abs(centers[nearest] - mel(f))) nearest = m;
    // Within a quarter step of a midpoint the FFT grid, not the filter shape,
    // decides; those frequencies carry no information about the filterbank.
    if (std::abs(std::abs(centers[nearest] - mel(f)) - step / 2) < step / 4) continue;
    ++tested;
    FeatureMatrix feats = ComputeLogMel(Sine(f, 1.0), cfg);
    for (int r = 0; r < feats.NumFrames(); r += 17) {
      Eigen::Index arg;
      feats.frames.row(r).maxCoeff(&arg);
      CHECK_MESSAGE(arg == nearest, "f=" << f << " row " << r);
    }
  }
}

TEST_CASE("stacking pads the last super-frame with the final row") {
  FeatureMatrix f;
  f.frames.resize(7, 2);
  for (int r = 0; r < 7; ++r) f.frames.row(r) << r, 10 * r;
  SuperFrameMatrix s = StackFrames(f, 3);
  REQUIRE(s.NumFrames() == 3);
  REQUIRE(s.Dim() == 6);
  // Oracle: explicit row list with positions 7 and 8 replaced by row 6.
  const int rows[9] = {0, 1, 2, 3, 4, 5, 6, 6, 6};
  for (int g = 0; g < 3; ++g)
    for (int j = 0; j < 3; ++j) {
      CHECK(s.frames(g, 2 * j) == rows[3 * g + j]);
      CHECK(s.frames(g, 2 * j + 1) == 10 * rows[3 * g + j]);
    }
}

TEST_CASE("stacked width is mel_bins * k") {
  FeatureMatrix f = ComputeLogMel(Sine(1000, 0.5), FeatureConfig{});
  SuperFrameMatrix s = StackFrames(f, 3);
  CHECK(s.Dim() == 240);
  CHECK(s.NumFrames() == (f.NumFrames() + 2) / 3);
  CHECK(StackFrames(f, 1).frames == f.frames);
  CHECK_THROWS_AS(StackFrames(f, 0), Error);
}

TEST_CASE("noise hits the target SNR") {
  // Quiet inputs: no peak rescaling, so y - x is exactly the added noise.
  SUBCASE("6 dB on a quiet sine") {
    Waveform w = Sine(440, 1.0, 0.2);
    CHECK(Power(w.samples) == doctest::Approx(0.02).epsilon(1e-3));
    NoiseConfig n;
    n.target_snr_db = 6.0;
    n.seed = 3;
    Waveform y = AddNoise(w, n);
    REQUIRE(y.samples.size() == w.samples.size());
    std::vector<float> noise(w.samples.size());
    for (size_t i = 0; i < noise.size(); ++i) noise[i] = y.samples[i] - w.samples[i];
    const double p_noise = Power(noise);
    const double expect = Power(w.samples) / std::pow(10.0, 0.6);
    CHECK(std::abs(10 * std::log10(p_noise / expect)) <= 0.5);
  }
  SUBCASE("jittered targets stay within the jitter band") {
    Waveform w = Sine(700, 0.5, 0.3);
    for (uint64_t seed = 0; seed < 20; ++seed) {
      NoiseConfig n;
      n.target_snr_db = 12.0;
      n.snr_jitter_db = 3.0;
      n.seed = seed;
      Waveform y = AddNoise(w, n);
      std::vector<float> noise(w.samples.size());
      for (size_t i = 0; i < noise.size(); ++i) noise[i] = y.samples[i] - w.samples[i];
      const double snr = MeasureSnrDb(w.samples, noise);
      CHECK(snr >= 9.0 - 0.5);
      CHECK(snr <= 15.0 + 0.5);
    }
  }
  SUBCASE("babble source") {
    Waveform w = Sine(300, 0.5, 0.3);
    std::vector<float> babble = Sine(170, 2.0, 0.2).samples;
    NoiseConfig n;
    n.kind = NoiseKind::kBabble;
    n.target_snr_db = 10.0;
    Waveform y = AddNoise(w, n, babble);
    std::vector<float> noise(w.samples.size());
    for (size_t i = 0; i < noise.size(); ++i) noise[i] = y.samples[i] - w.samples[i];
    CHECK(std::abs(MeasureSnrDb(w.samples, noise) - 10.0) <= 0.5);
    CHECK_THROWS_AS(AddNoise(w, n), Error);
  }
}

TEST_CASE("infinite SNR is the identity") {
  Waveform w = Sine(440, 0.2);
  NoiseConfig n;
  n.target_snr_db = NoiseConfig::kDisabled;
  CHECK(AddNoise(w, n).samples == w.samples);
}

TEST_CASE("noise on silence is rejected") {
  Waveform w;
  w.samples.assign(1600, 0.0f);
  CHECK_THROWS_AS(AddNoise(w, NoiseConfig{}), Error);
}

TEST_CASE("noise is deterministic per seed") {
  Waveform w = Sine(440, 0.2);
  NoiseConfig a;
  a.seed = 11;
  NoiseConfig b = a;
  b.seed = 12;
  CHECK(AddNoise(w, a).samples == AddNoise(w, a).samples);
  CHECK(AddNoise(w, a).samples != AddNoise(w, b).samples);
}

TEST_CASE("the default noise target is 12 dB") { CHECK(NoiseConfig{}.target_snr_db == 12.0); }

TEST_CASE("feature files round-trip bit-exactly") {
  oracle::TempDir dir("feat");
  FeatureMatrix f = ComputeLogMel(Sine(900, 0.3), FeatureConfig{});
  const std::string path = (dir.path() / "x.feat").string();
  WriteFeatureFile(path, f.frames);
  CHECK(ReadFeatureFile(path) == f.frames);
  CHECK_THROWS_AS(ReadFeatureFile((dir.path() / "missing.feat").string()), Error);
}

TEST_CASE("feature config validation") {
  FeatureConfig c;
  c.hop_ms = 30;
  CHECK_THROWS_AS(c.Validate(16000), Error);
  c = FeatureConfig{};
  c.fft_size = 256;
  CHECK_THROWS_AS(c.Validate(16000), Error);
  CHECK_NOTHROW(FeatureConfig{}.Validate(16000));
}
