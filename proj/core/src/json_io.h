// core/src/json_io.h

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

#ifndef PERASR_SRC_JSON_IO_H_
#define PERASR_SRC_JSON_IO_H_

#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "perasr/common.h"
#include "perasr/features.h"
#include "perasr/model.h"

namespace perasr {

// Missing keys keep their defaults.
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(FeatureConfig, window_ms, hop_ms, mel_bins,
                                                log_floor, fft_size, low_freq, high_freq)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ModelConfig, input_dim, encoder_layers, hidden,
                                                joint_hidden, vocab_size, init_scale)

namespace internal {

inline nlohmann::json ReadJsonFile(const std::string &path) {
  std::ifstream is(path);
  if (!is) ThrowData("cannot open " + path);
  try {
    return nlohmann::json::parse(is, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::exception &e) {
    ThrowData(path + ": " + e.what());
  }
}

inline void WriteTextFile(const std::string &path, const std::string &text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) ThrowData("cannot write " + path);
  os << text;
  if (!os) ThrowData("write failed: " + path);
}

inline std::string ReadTextFile(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) ThrowData("cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace internal
}  // namespace perasr

#endif  // PERASR_SRC_JSON_IO_H_
