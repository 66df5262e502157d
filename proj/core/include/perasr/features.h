// core/include/perasr/features.h

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

#ifndef PERASR_FEATURES_H_
#define PERASR_FEATURES_H_

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace perasr {

using RowMatrixF =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Waveform {
  std::vector<float> samples;
  int sample_rate = 16000;

  double DurationSeconds() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

struct FeatureConfig {
  double window_ms = 25.0;
  double hop_ms = 10.0;
  int mel_bins = 80;
  double log_floor = 1e-10;
  int fft_size = 1024;
  double low_freq = 20.0;
  double high_freq = 0.0;  // <= 0 means Nyquist

  int WindowSamples(int sample_rate) const;
  int HopSamples(int sample_rate) const;
  // Throws kUsage on inconsistent settings.
  void Validate(int sample_rate) const;
};

// T x mel_bins natural-log mel magnitudes.
struct FeatureMatrix {
  RowMatrixF frames;
  double hop_ms = 10.0;
  std::string source;

  int NumFrames() const { return static_cast<int>(frames.rows()); }
};

// T' x (mel_bins * stack) rows. Row-major storage makes the buffer identical
// to a column-major (mel_bins * stack) x T' matrix, which is what the encoder
// consumes.
struct SuperFrameMatrix {
  RowMatrixF frames;
  int stack_factor = 3;

  int NumFrames() const { return static_cast<int>(frames.rows()); }
  int Dim() const { return static_cast<int>(frames.cols()); }
};

enum class NoiseKind { kWhite, kBabble };

struct NoiseConfig {
  // +infinity disables noise.
  double target_snr_db = 12.0;
  double snr_jitter_db = 0.0;
  NoiseKind kind = NoiseKind::kWhite;
  uint64_t seed = 0;

  static constexpr double kDisabled = std::numeric_limits<double>::infinity();
};

// HTK mel scale.
double HzToMel(double hz);
double MelToHz(double mel);

// Triangular filters over FFT magnitude bins. Filter m spans mel centers
// m-1 .. m+1 of mel_bins+2 equally spaced points between low and high freq.
class MelFilterbank {
 public:
  MelFilterbank(const FeatureConfig &config, int sample_rate);

  int NumBins() const { return static_cast<int>(filters_.size()); }
  double CenterHz(int bin) const { return centers_hz_[bin]; }
  // `magnitude` has fft_size/2+1 entries.
  void Apply(std::span<const float> magnitude, std::span<float> out) const;

 private:
  struct Filter {
    int first_fft_bin = 0;
    std::vector<float> weights;
  };
  std::vector<Filter> filters_;
  std::vector<double> centers_hz_;
};

FeatureMatrix ComputeLogMel(const Waveform &wave, const FeatureConfig &config);

// Groups of k consecutive frames are concatenated; the final group is padded
// by repeating the last frame.
SuperFrameMatrix StackFrames(const FeatureMatrix &feats, int stack_factor);

// Adds noise scaled so the measured SNR equals a target drawn uniformly from
// target +- jitter. kBabble draws from `babble`, which must be non-empty.
Waveform AddNoise(const Waveform &wave, const NoiseConfig &config,
                  std::span<const float> babble = {});

// Measured 10*log10(P_signal / P_noise) for equal-length buffers.
double MeasureSnrDb(std::span<const float> signal, std::span<const float> noise);

// Feature dumps: "FEAT", u32 rows, u32 cols, u32 reserved, then row-major
// little-endian float32.
void WriteFeatureFile(const std::string &path, const RowMatrixF &m);
RowMatrixF ReadFeatureFile(const std::string &path);

}  // namespace perasr

#endif  // PERASR_FEATURES_H_
