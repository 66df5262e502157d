// benchmarks/bench_main.cc

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

#include <benchmark/benchmark.h>

#include <cmath>
#include <random>
#include <vector>

#include "perasr/backward.h"
#include "perasr/features.h"
#include "perasr/loss.h"
#include "perasr/model.h"

using namespace perasr;

namespace {

LossInput Lattice(int frames, int labels, int vocab) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> lab(1, vocab - 1);
  std::normal_distribution<double> z;
  std::vector<int> y(labels);
  for (auto &l : y) l = lab(rng);
  LossInput in(frames, vocab, y);
  for (size_t c = 0; c < in.log_probs.size(); c += vocab) {
    double mx = -1e300, s = 0;
    for (int k = 0; k < vocab; ++k) mx = std::max(mx, in.log_probs[c + k] = z(rng));
    for (int k = 0; k < vocab; ++k) s += std::exp(in.log_probs[c + k] - mx);
    for (int k = 0; k < vocab; ++k) in.log_probs[c + k] -= mx + std::log(s);
  }
  return in;
}

TrainExample Utterance(int frames, int labels, int input_dim) {
  std::mt19937_64 rng(2);
  std::normal_distribution<float> z;
  TrainExample ex;
  ex.x.frames.resize(frames, input_dim);
  for (Eigen::Index i = 0; i < ex.x.frames.size(); ++i) ex.x.frames.data()[i] = z(rng);
  for (int i = 0; i < labels; ++i) ex.labels.push_back(1 + i % 28);
  return ex;
}

Waveform Noise(double seconds) {
  std::mt19937_64 rng(3);
  std::normal_distribution<float> z(0.0f, 0.1f);
  Waveform w;
  w.sample_rate = 16000;
  w.samples.resize(static_cast<size_t>(seconds * w.sample_rate));
  for (auto &s : w.samples) s = z(rng);
  return w;
}

// Args: T' frames, U labels (V = 29).
void BM_RnntLossAndGrad(benchmark::State &state) {
  const LossInput in = Lattice(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)), 29);
  std::vector<double> g;
  for (auto _ : state) benchmark::DoNotOptimize(RnntLossAndGrad(in, &g));
  state.SetItemsProcessed(state.iterations() * state.range(0) * (state.range(1) + 1));
}
BENCHMARK(BM_RnntLossAndGrad)->Args({50, 20})->Args({100, 40})->Args({200, 60});

// Default model, one utterance of T' super-frames.
void BM_EncoderForward(benchmark::State &state) {
  ModelConfig c;
  auto p = TransducerParams<float>::Init(c, 1);
  TrainExample ex = Utterance(static_cast<int>(state.range(0)), 20, c.input_dim);
  EncoderCache<float> cache;
  for (auto _ : state) {
    Encode(p, ex.x, &cache);
    benchmark::DoNotOptimize(cache.Output().data());
  }
}
BENCHMARK(BM_EncoderForward)->Arg(50)->Arg(100)->Arg(200);

// Full forward + backward through the transducer (loss included).
void BM_TransducerBackward(benchmark::State &state) {
  ModelConfig c;
  auto p = TransducerParams<float>::Init(c, 1);
  TrainExample ex = Utterance(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)),
                              c.input_dim);
  std::vector<const TrainExample *> batch = {&ex};
  TransducerParams<float> grads;
  for (auto _ : state)
    benchmark::DoNotOptimize(Backward(p, std::span<const TrainExample *const>(batch), &grads));
}
BENCHMARK(BM_TransducerBackward)->Args({50, 20})->Args({100, 40});

// Seconds of audio -> 80-bin log-mel.
void BM_LogMel(benchmark::State &state) {
  const Waveform w = Noise(static_cast<double>(state.range(0)));
  FeatureConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(ComputeLogMel(w, cfg).frames.data());
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(w.samples.size()));
}
BENCHMARK(BM_LogMel)->Arg(1)->Arg(10);

}  // namespace

BENCHMARK_MAIN();
