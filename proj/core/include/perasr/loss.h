// core/include/perasr/loss.h

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

#ifndef PERASR_LOSS_H_
#define PERASR_LOSS_H_

#include <span>
#include <vector>

#include <Eigen/Core>

namespace perasr {

// T' x (U+1) x V lattice of joint log-probabilities, flattened as
// [(t * (U+1) + u) * V + k]. This is the column layout of JointCache::log_probs.
struct LossInput {
  int frames = 0;  // T'
  int vocab = 0;   // V
  std::vector<int> labels;       // length U, non-blank
  std::vector<double> log_probs;

  LossInput() = default;
  LossInput(int frames, int vocab, std::vector<int> labels);

  int Positions() const { return static_cast<int>(labels.size()) + 1; }
  double &At(int t, int u, int k) { return log_probs[(size_t(t) * Positions() + u) * vocab + k]; }
  double At(int t, int u, int k) const {
    return log_probs[(size_t(t) * Positions() + u) * vocab + k];
  }

  // Structural checks (throws kData). With tolerance > 0 also requires every
  // (t, u) row to logsumexp to 0 within it.
  void Validate(double tolerance = 0.0) const;
};

using LatticeMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct AlphaBeta {
  LatticeMatrix alpha;  // T' x (U+1)
  LatticeMatrix beta;
  double total_log_prob = 0.0;       // from alpha
  double total_log_prob_beta = 0.0;  // beta(0, 0)
};

// log(exp(a) + exp(b)); the most negative finite double is the empty sum.
double LogAdd(double a, double b);
inline constexpr double kLogZero = -1.7976931348623157e308;

AlphaBeta RnntAlphaBeta(const LossInput &in);
// -log P(labels | lattice).
double RnntLoss(const LossInput &in);
// d loss / d log_probs, same layout as in.log_probs. Nonzero only at blank
// and next-label entries.
std::vector<double> RnntGrad(const LossInput &in);
// Both at once from a single forward-backward pass.
double RnntLossAndGrad(const LossInput &in, std::vector<double> *grad);

}  // namespace perasr

#endif  // PERASR_LOSS_H_
