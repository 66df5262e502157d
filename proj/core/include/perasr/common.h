// core/include/perasr/common.h

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

#ifndef PERASR_COMMON_H_
#define PERASR_COMMON_H_

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace perasr {

// Categories map one-to-one onto CLI exit codes (see tools/perasr.cc).
enum class ErrorKind {
  kUsage = 1,       // bad config, bad arguments
  kData = 2,        // missing or malformed data, I/O failures
  kDivergence = 3,  // training produced non-finite loss
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string &what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void ThrowUsage(const std::string &what);
[[noreturn]] void ThrowData(const std::string &what);

// Stable 64-bit hash (FNV-1a) so derived seeds do not depend on std::hash.
uint64_t HashString(std::string_view s);

// splitmix64 finalizer, used to decorrelate combined seeds.
uint64_t MixSeed(uint64_t x);

// Derive an independent stream seed from a parent seed and a key.
uint64_t DeriveSeed(uint64_t parent, std::string_view key);

// Thin wrapper over mt19937_64 with distribution code that is identical on
// every standard library (std::normal_distribution is not).
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t Next() { return engine_(); }
  // Uniform in [0, 1).
  double Uniform() { return (engine_() >> 11) * 0x1.0p-53; }
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }
  // Uniform integer in [0, n).
  uint64_t Below(uint64_t n) { return n == 0 ? 0 : engine_() % n; }
  double Normal();

  template <typename It>
  void Shuffle(It first, It last) {
    auto n = last - first;
    for (auto i = n - 1; i > 0; --i) {
      auto j = static_cast<decltype(i)>(Below(static_cast<uint64_t>(i) + 1));
      std::swap(first[i], first[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace perasr

#endif  // PERASR_COMMON_H_
