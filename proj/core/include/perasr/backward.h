// core/include/perasr/backward.h

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

#ifndef PERASR_BACKWARD_H_
#define PERASR_BACKWARD_H_

#include <span>
#include <string>
#include <vector>

#include "perasr/model.h"

namespace perasr {

struct TrainExample {
  std::string utterance_id;
  SuperFrameMatrix x;
  std::vector<int> labels;
};

// Parts of the model whose gradients are needed. Encoder layers below
// `lowest_encoder_layer` get no gradient and are not backpropagated through;
// a value equal to the layer count skips the encoder entirely.
struct BackwardScope {
  int lowest_encoder_layer = 0;
  bool decoder = true;
};

// Mean RNN-T loss over the batch and its gradient, written into `grads`
// (resized to the parameter shapes; groups outside the scope are zero).
// Utterances are processed in batch order, so the result is deterministic.
template <typename S>
double Backward(const TransducerParams<S> &p, std::span<const TrainExample *const> batch,
                TransducerParams<S> *grads, const BackwardScope &scope = {});

// Mean loss only.
template <typename S>
double BatchLoss(const TransducerParams<S> &p, std::span<const TrainExample *const> batch);

// Gradient of a single LSTM layer given dL/dhidden for every step. Adds to
// `grad`; writes dL/dinput when `d_input` is non-null.
template <typename S>
void LstmBackward(const LstmWeights<S> &w, const LstmCache<S> &cache, const Matrix<S> &d_hidden,
                  LstmWeights<S> *grad, Matrix<S> *d_input);

}  // namespace perasr

#endif  // PERASR_BACKWARD_H_
