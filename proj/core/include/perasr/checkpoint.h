// core/include/perasr/checkpoint.h

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

#ifndef PERASR_CHECKPOINT_H_
#define PERASR_CHECKPOINT_H_

#include <string>

#include "perasr/model.h"

namespace perasr {

// File layout: "RNTC", u32 format version, u32 manifest length, manifest JSON
// ({config, vocab, features, stack_factor, step, tensors: [{name, group,
// shape, offset}]}), then raw little-endian float32 tensor data. Offsets are
// relative to the start of the data block. Tensors are column-major.
inline constexpr uint32_t kCheckpointVersion = 1;

void SaveCheckpoint(const std::string &path, const ModelCheckpoint &ckpt);
ModelCheckpoint LoadCheckpoint(const std::string &path);

// Serialized bytes of one parameter group, for byte-level comparisons.
std::string GroupBytes(const TransducerParams<float> &params, const std::string &group);

}  // namespace perasr

#endif  // PERASR_CHECKPOINT_H_
