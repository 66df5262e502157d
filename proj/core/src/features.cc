// core/src/features.cc

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

#include "perasr/features.h"

#include <bit>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>

#include <fftw3.h>

#include "fft.h"
#include "perasr/common.h"

namespace perasr {

namespace internal {

namespace {

struct PlanPair {
  fftwf_plan forward = nullptr;
  fftwf_plan inverse = nullptr;
};

std::mutex &PlanMutex() {
  static std::mutex m;
  return m;
}

PlanPair GetPlans(int n) {
  static std::map<int, PlanPair> plans;
  std::lock_guard<std::mutex> lock(PlanMutex());
  auto it = plans.find(n);
  if (it != plans.end()) return it->second;
  // Plans are made on scratch buffers and executed later via the new-array
  // interface, so FFTW_UNALIGNED is required.
  std::vector<float> real(n);
  std::vector<fftwf_complex> spec(n / 2 + 1);
  PlanPair p;
  p.forward = fftwf_plan_dft_r2c_1d(n, real.data(), spec.data(),
                                    FFTW_ESTIMATE | FFTW_UNALIGNED);
  p.inverse = fftwf_plan_dft_c2r_1d(n, spec.data(), real.data(),
                                    FFTW_ESTIMATE | FFTW_UNALIGNED);
  plans.emplace(n, p);
  return p;
}

}  // namespace

RealFft::RealFft(int size) : size_(size) {
  if (size < 2) ThrowUsage("fft size must be >= 2");
  PlanPair p = GetPlans(size);
  forward_plan_ = p.forward;
  inverse_plan_ = p.inverse;
}

void RealFft::Forward(std::span<const float> in,
                      std::span<std::complex<float>> out) const {
  // c2r destroys its input, r2c does not, but FFTW's signature is non-const.
  fftwf_execute_dft_r2c(static_cast<fftwf_plan>(forward_plan_),
                        const_cast<float *>(in.data()),
                        reinterpret_cast<fftwf_complex *>(out.data()));
}

void RealFft::Inverse(std::span<const std::complex<float>> in,
                      std::span<float> out) const {
  std::vector<std::complex<float>> scratch(in.begin(), in.end());
  fftwf_execute_dft_c2r(static_cast<fftwf_plan>(inverse_plan_),
                        reinterpret_cast<fftwf_complex *>(scratch.data()),
                        out.data());
}

}  // namespace internal

int FeatureConfig::WindowSamples(int sample_rate) const {
  return static_cast<int>(std::lround(window_ms * 1e-3 * sample_rate));
}

int FeatureConfig::HopSamples(int sample_rate) const {
  return static_cast<int>(std::lround(hop_ms * 1e-3 * sample_rate));
}

void FeatureConfig::Validate(int sample_rate) const {
  if (sample_rate < 8000) ThrowUsage("sample rate must be >= 8000 Hz");
  if (mel_bins < 1) ThrowUsage("mel_bins must be >= 1");
  if (hop_ms <= 0 || window_ms <= 0) ThrowUsage("window and hop must be positive");
  if (hop_ms > window_ms) ThrowUsage("hop_ms must not exceed window_ms");
  if (!(log_floor > 0)) ThrowUsage("log_floor must be positive");
  if (fft_size < 2 || !std::has_single_bit(static_cast<unsigned>(fft_size)))
    ThrowUsage("fft_size must be a power of two");
  if (fft_size < WindowSamples(sample_rate))
    ThrowUsage("fft_size must be >= window length in samples");
  double hi = high_freq > 0 ? high_freq : sample_rate / 2.0;
  if (low_freq < 0 || low_freq >= hi || hi > sample_rate / 2.0)
    ThrowUsage("invalid mel frequency range");
}

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double MelToHz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterbank::MelFilterbank(const FeatureConfig &config, int sample_rate) {
  const int num_fft_bins = config.fft_size / 2 + 1;
  const double hi = config.high_freq > 0 ? config.high_freq : sample_rate / 2.0;
  const double mel_lo = HzToMel(config.low_freq);
  const double mel_hi = HzToMel(hi);
  const double step = (mel_hi - mel_lo) / (config.mel_bins + 1);
  const double bin_hz = static_cast<double>(sample_rate) / config.fft_size;

  filters_.resize(config.mel_bins);
  centers_hz_.resize(config.mel_bins);
  for (int m = 0; m < config.mel_bins; ++m) {
    double left = mel_lo + m * step;
    double center = left + step;
    double right = center + step;
    centers_hz_[m] = MelToHz(center);
    Filter &f = filters_[m];
    f.first_fft_bin = -1;
    for (int k = 0; k < num_fft_bins; ++k) {
      double mel = HzToMel(k * bin_hz);
      double w = 0.0;
      if (mel > left && mel <= center) {
        w = (mel - left) / (center - left);
      } else if (mel > center && mel < right) {
        w = (right - mel) / (right - center);
      }
      if (w > 0.0) {
        if (f.first_fft_bin < 0) f.first_fft_bin = k;
        // Bins inside the support are contiguous.
        f.weights.resize(k - f.first_fft_bin + 1, 0.0f);
        f.weights.back() = static_cast<float>(w);
      }
    }
    if (f.first_fft_bin < 0) f.first_fft_bin = 0;
  }
}

void MelFilterbank::Apply(std::span<const float> magnitude,
                          std::span<float> out) const {
  for (size_t m = 0; m < filters_.size(); ++m) {
    const Filter &f = filters_[m];
    float acc = 0.0f;
    for (size_t i = 0; i < f.weights.size(); ++i)
      acc += f.weights[i] * magnitude[f.first_fft_bin + i];
    out[m] = acc;
  }
}

FeatureMatrix ComputeLogMel(const Waveform &wave, const FeatureConfig &config) {
  config.Validate(wave.sample_rate);
  const int win = config.WindowSamples(wave.sample_rate);
  const int hop = config.HopSamples(wave.sample_rate);
  const int n = static_cast<int>(wave.samples.size());
  if (n < win) ThrowData("utterance too short: fewer samples than one window");
  for (float s : wave.samples)
    if (!std::isfinite(s)) ThrowData("waveform contains non-finite samples");

  const int num_frames = (n - win) / hop + 1;
  const int nfft = config.fft_size;
  MelFilterbank bank(config, wave.sample_rate);
  internal::RealFft fft(nfft);

  std::vector<float> window(win);
  for (int i = 0; i < win; ++i)
    window[i] = static_cast<float>(0.5 - 0.5 * std::cos(2.0 * M_PI * i / (win - 1)));

  FeatureMatrix out;
  out.hop_ms = config.hop_ms;
  out.frames.resize(num_frames, config.mel_bins);
  std::vector<float> frame(nfft, 0.0f);
  std::vector<std::complex<float>> spec(nfft / 2 + 1);
  std::vector<float> mag(nfft / 2 + 1);
  std::vector<float> mel(config.mel_bins);
  const float floor = static_cast<float>(config.log_floor);
  for (int t = 0; t < num_frames; ++t) {
    const float *src = wave.samples.data() + static_cast<size_t>(t) * hop;
    for (int i = 0; i < win; ++i) frame[i] = src[i] * window[i];
    std::fill(frame.begin() + win, frame.end(), 0.0f);
    fft.Forward(frame, spec);
    for (size_t k = 0; k < mag.size(); ++k) mag[k] = std::abs(spec[k]);
    bank.Apply(mag, mel);
    for (int m = 0; m < config.mel_bins; ++m)
      out.frames(t, m) = std::log(std::max(mel[m], floor));
  }
  return out;
}

SuperFrameMatrix StackFrames(const FeatureMatrix &feats, int stack_factor) {
  if (stack_factor <= 0) ThrowUsage("stack factor must be positive");
  const int t_in = feats.NumFrames();
  if (t_in < 1) ThrowData("cannot stack an empty feature matrix");
  const int dim = static_cast<int>(feats.frames.cols());
  const int t_out = (t_in + stack_factor - 1) / stack_factor;
  SuperFrameMatrix out;
  out.stack_factor = stack_factor;
  out.frames.resize(t_out, static_cast<Eigen::Index>(dim) * stack_factor);
  for (int i = 0; i < t_out; ++i) {
    for (int j = 0; j < stack_factor; ++j) {
      int src = std::min(i * stack_factor + j, t_in - 1);
      out.frames.block(i, static_cast<Eigen::Index>(j) * dim, 1, dim) =
          feats.frames.row(src);
    }
  }
  return out;
}

double MeasureSnrDb(std::span<const float> signal, std::span<const float> noise) {
  double ps = 0.0, pn = 0.0;
  for (float s : signal) ps += static_cast<double>(s) * s;
  for (float v : noise) pn += static_cast<double>(v) * v;
  return 10.0 * std::log10(ps / pn);
}

Waveform AddNoise(const Waveform &wave, const NoiseConfig &config,
                  std::span<const float> babble) {
  if (std::isinf(config.target_snr_db) && config.target_snr_db > 0) return wave;
  const size_t n = wave.samples.size();
  double ps = 0.0;
  for (float s : wave.samples) ps += static_cast<double>(s) * s;
  ps /= std::max<size_t>(n, 1);
  if (!(ps > 0.0)) ThrowData("cannot set SNR on silence");

  Rng rng(config.seed);
  double snr = config.target_snr_db;
  if (config.snr_jitter_db > 0)
    snr += rng.Uniform(-config.snr_jitter_db, config.snr_jitter_db);

  std::vector<double> noise(n);
  if (config.kind == NoiseKind::kWhite) {
    for (auto &v : noise) v = rng.Normal();
  } else {
    if (babble.empty()) ThrowUsage("babble noise requested without a babble source");
    size_t offset = rng.Below(babble.size());
    for (size_t i = 0; i < n; ++i) noise[i] = babble[(offset + i) % babble.size()];
  }
  double pn = 0.0;
  for (double v : noise) pn += v * v;
  pn /= std::max<size_t>(n, 1);
  if (!(pn > 0.0)) ThrowData("noise source has zero power");
  const double gain = std::sqrt(ps / (pn * std::pow(10.0, snr / 10.0)));

  Waveform out;
  out.sample_rate = wave.sample_rate;
  out.samples.resize(n);
  double peak = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double v = wave.samples[i] + gain * noise[i];
    peak = std::max(peak, std::abs(v));
    out.samples[i] = static_cast<float>(v);
  }
  // Keep samples in [-1, 1]; a global gain leaves the SNR unchanged.
  if (peak > 1.0) {
    const float scale = static_cast<float>(0.999 / peak);
    for (auto &s : out.samples) s *= scale;
  }
  return out;
}

namespace {
static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");
constexpr char kFeatMagic[4] = {'F', 'E', 'A', 'T'};
}  // namespace

void WriteFeatureFile(const std::string &path, const RowMatrixF &m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) ThrowData("cannot open for writing: " + path);
  uint32_t header[3] = {static_cast<uint32_t>(m.rows()),
                        static_cast<uint32_t>(m.cols()), 0u};
  os.write(kFeatMagic, 4);
  os.write(reinterpret_cast<const char *>(header), sizeof(header));
  os.write(reinterpret_cast<const char *>(m.data()),
           static_cast<std::streamsize>(m.size() * sizeof(float)));
  if (!os) ThrowData("write failed: " + path);
}

RowMatrixF ReadFeatureFile(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) ThrowData("cannot open feature file: " + path);
  char magic[4];
  uint32_t header[3];
  is.read(magic, 4);
  is.read(reinterpret_cast<char *>(header), sizeof(header));
  if (!is || std::memcmp(magic, kFeatMagic, 4) != 0)
    ThrowData("not a feature file: " + path);
  RowMatrixF m(header[0], header[1]);
  is.read(reinterpret_cast<char *>(m.data()),
          static_cast<std::streamsize>(m.size() * sizeof(float)));
  if (!is) ThrowData("truncated feature file: " + path);
  return m;
}

}  // namespace perasr
