// core/src/loss.cc

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

#include "perasr/loss.h"

#include <cmath>

#include "perasr/common.h"

namespace perasr {

LossInput::LossInput(int frames_in, int vocab_in, std::vector<int> labels_in)
    : frames(frames_in), vocab(vocab_in), labels(std::move(labels_in)) {
  log_probs.assign(size_t(std::max(frames, 0)) * Positions() * std::max(vocab, 0), 0.0);
}

void LossInput::Validate(double tolerance) const {
  if (frames < 1) ThrowData("empty lattice (T' = 0)");
  if (vocab < 2) ThrowData("lattice vocabulary must include blank and one label");
  for (int y : labels)
    if (y <= 0 || y >= vocab) ThrowData("label " + std::to_string(y) + " invalid for lattice");
  if (log_probs.size() != size_t(frames) * Positions() * vocab)
    ThrowData("lattice size does not match T' x (U+1) x V");
  for (double v : log_probs)
    if (std::isnan(v)) ThrowData("lattice contains NaN");
  if (tolerance <= 0.0) return;
  for (int t = 0; t < frames; ++t)
    for (int u = 0; u < Positions(); ++u) {
      double s = kLogZero;
      for (int k = 0; k < vocab; ++k) s = LogAdd(s, At(t, u, k));
      if (std::abs(s) > tolerance) ThrowData("lattice row does not normalize");
    }
}

double LogAdd(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b <= kLogZero) return a;
  return a + std::log1p(std::exp(b - a));
}

AlphaBeta RnntAlphaBeta(const LossInput &in) {
  in.Validate();
  const int T = in.frames, U = static_cast<int>(in.labels.size());
  AlphaBeta ab;
  ab.alpha.setConstant(T, U + 1, kLogZero);
  ab.beta.setConstant(T, U + 1, kLogZero);
  auto &alpha = ab.alpha;
  auto &beta = ab.beta;
  for (int t = 0; t < T; ++t)
    for (int u = 0; u <= U; ++u) {
      if (t == 0 && u == 0) {
        alpha(0, 0) = 0.0;
        continue;
      }
      double a = kLogZero;
      if (t > 0) a = alpha(t - 1, u) + in.At(t - 1, u, 0);
      if (u > 0) a = LogAdd(a, alpha(t, u - 1) + in.At(t, u - 1, in.labels[u - 1]));
      alpha(t, u) = a;
    }
  for (int t = T - 1; t >= 0; --t)
    for (int u = U; u >= 0; --u) {
      if (t == T - 1 && u == U) {
        beta(t, u) = in.At(t, u, 0);
        continue;
      }
      double b = kLogZero;
      if (t < T - 1) b = beta(t + 1, u) + in.At(t, u, 0);
      if (u < U) b = LogAdd(b, beta(t, u + 1) + in.At(t, u, in.labels[u]));
      beta(t, u) = b;
    }
  ab.total_log_prob = alpha(T - 1, U) + in.At(T - 1, U, 0);
  ab.total_log_prob_beta = beta(0, 0);
  return ab;
}

double RnntLoss(const LossInput &in) { return -RnntAlphaBeta(in).total_log_prob; }

double RnntLossAndGrad(const LossInput &in, std::vector<double> *grad) {
  AlphaBeta ab = RnntAlphaBeta(in);
  const int T = in.frames, U = static_cast<int>(in.labels.size());
  const double log_p = ab.total_log_prob;
  grad->assign(in.log_probs.size(), 0.0);
  auto g = [&](int t, int u, int k) -> double & {
    return (*grad)[(size_t(t) * (U + 1) + u) * in.vocab + k];
  };
  for (int t = 0; t < T; ++t)
    for (int u = 0; u <= U; ++u) {
      const double a = ab.alpha(t, u);
      if (t < T - 1)
        g(t, u, 0) = -std::exp(a + in.At(t, u, 0) + ab.beta(t + 1, u) - log_p);
      else if (u == U)
        g(t, u, 0) = -std::exp(a + in.At(t, u, 0) - log_p);
      if (u < U) {
        const int y = in.labels[u];
        g(t, u, y) = -std::exp(a + in.At(t, u, y) + ab.beta(t, u + 1) - log_p);
      }
    }
  return -log_p;
}

std::vector<double> RnntGrad(const LossInput &in) {
  std::vector<double> grad;
  RnntLossAndGrad(in, &grad);
  return grad;
}

}  // namespace perasr
