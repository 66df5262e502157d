// core/src/fft.h

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

#ifndef PERASR_SRC_FFT_H_
#define PERASR_SRC_FFT_H_

#include <complex>
#include <span>

namespace perasr::internal {

// Real-input FFT of a fixed size backed by FFTW. Plans are created once per
// size under a lock; execution is thread-safe.
class RealFft {
 public:
  explicit RealFft(int size);

  int Size() const { return size_; }
  // in: size samples, out: size/2+1 bins.
  void Forward(std::span<const float> in, std::span<std::complex<float>> out) const;
  // Unnormalized inverse: Inverse(Forward(x)) == size * x.
  void Inverse(std::span<const std::complex<float>> in, std::span<float> out) const;

 private:
  int size_;
  void *forward_plan_;
  void *inverse_plan_;
};

}  // namespace perasr::internal

#endif  // PERASR_SRC_FFT_H_
