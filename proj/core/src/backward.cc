// core/src/backward.cc

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

#include "perasr/backward.h"

#include <cmath>
#include <limits>

#include "perasr/common.h"
#include "perasr/loss.h"

namespace perasr {

template <typename S>
void LstmBackward(const LstmWeights<S> &w, const LstmCache<S> &cache, const Matrix<S> &d_hidden,
                  LstmWeights<S> *grad, Matrix<S> *d_input) {
  const int hid = w.Hidden();
  const Eigen::Index steps = cache.hidden.cols();
  Matrix<S> dz(4 * hid, steps);
  Vector<S> dh_next = Vector<S>::Zero(hid);
  Vector<S> dc_next = Vector<S>::Zero(hid);
  for (Eigen::Index t = steps - 1; t >= 0; --t) {
    for (int j = 0; j < hid; ++j) {
      const S i = cache.gates(j, t), f = cache.gates(hid + j, t);
      const S g = cache.gates(2 * hid + j, t), o = cache.gates(3 * hid + j, t);
      const S tc = cache.tanh_cell(j, t);
      const S c_prev = t > 0 ? cache.cell(j, t - 1) : S(0);
      const S dh = d_hidden(j, t) + dh_next(j);
      const S dc = dh * o * (S(1) - tc * tc) + dc_next(j);
      dz(j, t) = dc * g * i * (S(1) - i);
      dz(hid + j, t) = dc * c_prev * f * (S(1) - f);
      dz(2 * hid + j, t) = dc * i * (S(1) - g * g);
      dz(3 * hid + j, t) = dh * tc * o * (S(1) - o);
      dc_next(j) = dc * f;
    }
    dh_next.noalias() = w.w_rec.transpose() * dz.col(t);
  }
  grad->w_in.noalias() += dz * cache.input.transpose();
  if (steps > 1)
    grad->w_rec.noalias() +=
        dz.rightCols(steps - 1) * cache.hidden.leftCols(steps - 1).transpose();
  grad->bias += dz.rowwise().sum();
  if (d_input) d_input->noalias() = w.w_in.transpose() * dz;
}

namespace {

// Non-finite weights poison the lattice; report that as a NaN loss so the
// trainer can call it divergence instead of a malformed input.
bool HasNaN(const LossInput &in) {
  for (double v : in.log_probs)
    if (std::isnan(v)) return true;
  return false;
}

template <typename S>
double AccumulateOne(const TransducerParams<S> &p, const TrainExample &ex, S scale,
                     TransducerParams<S> *grads, const BackwardScope &scope) {
  EncoderCache<S> enc;
  Encode(p, ex.x, &enc);
  PredictionCache<S> pred;
  Predict(p, ex.labels, &pred);
  JointCache<S> jc;
  Joint(p, enc.Output(), pred.Output(), &jc);

  const int vocab = static_cast<int>(jc.log_probs.rows());
  LossInput lattice(jc.frames, vocab, ex.labels);
  for (size_t i = 0; i < lattice.log_probs.size(); ++i)
    lattice.log_probs[i] = static_cast<double>(jc.log_probs.data()[i]);
  if (HasNaN(lattice)) return std::numeric_limits<double>::quiet_NaN();
  std::vector<double> g;
  const double loss = RnntLossAndGrad(lattice, &g);
  if (!std::isfinite(loss)) return loss;

  // d loss / d logits = g - softmax * sum(g), column by column.
  Matrix<S> d_logits(vocab, jc.log_probs.cols());
  for (Eigen::Index c = 0; c < d_logits.cols(); ++c) {
    double gsum = 0.0;
    for (int k = 0; k < vocab; ++k) gsum += g[c * vocab + k];
    for (int k = 0; k < vocab; ++k)
      d_logits(k, c) = static_cast<S>(
          scale * (g[c * vocab + k] - std::exp(static_cast<double>(jc.log_probs(k, c))) * gsum));
  }

  grads->out_w.noalias() += d_logits * jc.hidden.transpose();
  grads->out_bias += d_logits.rowwise().sum();
  Matrix<S> d_pre = p.out_w.transpose() * d_logits;
  d_pre.array() *= (S(1) - jc.hidden.array().square());
  grads->joint_bias += d_pre.rowwise().sum();

  const int T = jc.frames, U1 = jc.positions;
  Matrix<S> d_enc_proj = Matrix<S>::Zero(d_pre.rows(), T);
  Matrix<S> d_dec_proj = Matrix<S>::Zero(d_pre.rows(), U1);
  for (int t = 0; t < T; ++t) {
    auto block = d_pre.middleCols(static_cast<Eigen::Index>(t) * U1, U1);
    d_enc_proj.col(t) = block.rowwise().sum();
    d_dec_proj += block;
  }
  grads->joint_enc.noalias() += d_enc_proj * enc.Output().transpose();
  grads->joint_dec.noalias() += d_dec_proj * pred.Output().transpose();

  if (scope.decoder) {
    Matrix<S> d_pred = p.joint_dec.transpose() * d_dec_proj;
    Matrix<S> d_emb;
    LstmBackward(p.decoder, pred.lstm, d_pred, &grads->decoder, &d_emb);
    for (size_t u = 0; u < pred.inputs.size(); ++u)
      grads->embedding.col(pred.inputs[u]) += d_emb.col(u);
  }

  const int layers = static_cast<int>(p.encoder.size());
  if (scope.lowest_encoder_layer < layers) {
    Matrix<S> d_h = p.joint_enc.transpose() * d_enc_proj;
    for (int l = layers - 1; l >= scope.lowest_encoder_layer; --l) {
      Matrix<S> d_in;
      bool need_input = l > scope.lowest_encoder_layer;
      LstmBackward(p.encoder[l], enc.layers[l], d_h, &grads->encoder[l],
                   need_input ? &d_in : nullptr);
      if (need_input) d_h = std::move(d_in);
    }
  }
  return loss;
}

template <typename S>
double ExampleLoss(const TransducerParams<S> &p, const TrainExample &ex) {
  EncoderCache<S> enc;
  Encode(p, ex.x, &enc);
  PredictionCache<S> pred;
  Predict(p, ex.labels, &pred);
  JointCache<S> jc;
  Joint(p, enc.Output(), pred.Output(), &jc);
  LossInput lattice(jc.frames, static_cast<int>(jc.log_probs.rows()), ex.labels);
  for (size_t i = 0; i < lattice.log_probs.size(); ++i)
    lattice.log_probs[i] = static_cast<double>(jc.log_probs.data()[i]);
  if (HasNaN(lattice)) return std::numeric_limits<double>::quiet_NaN();
  return RnntLoss(lattice);
}

}  // namespace

template <typename S>
double Backward(const TransducerParams<S> &p, std::span<const TrainExample *const> batch,
                TransducerParams<S> *grads, const BackwardScope &scope) {
  if (batch.empty()) ThrowUsage("empty batch");
  ModelConfig shape;
  shape.input_dim = static_cast<int>(p.feat_mean.size());
  shape.encoder_layers = static_cast<int>(p.encoder.size());
  shape.hidden = p.decoder.Hidden();
  shape.joint_hidden = static_cast<int>(p.joint_bias.size());
  shape.vocab_size = static_cast<int>(p.out_bias.size());
  *grads = TransducerParams<S>::Zeros(shape);
  grads->feat_inv_std.setZero();

  const S scale = S(1) / static_cast<S>(batch.size());
  double total = 0.0;
  for (const TrainExample *ex : batch) {
    double loss = AccumulateOne(p, *ex, scale, grads, scope);
    if (!std::isfinite(loss)) return loss;
    total += loss;
  }
  return total / static_cast<double>(batch.size());
}

template <typename S>
double BatchLoss(const TransducerParams<S> &p, std::span<const TrainExample *const> batch) {
  if (batch.empty()) ThrowUsage("empty batch");
  double total = 0.0;
  for (const TrainExample *ex : batch) total += ExampleLoss(p, *ex);
  return total / static_cast<double>(batch.size());
}

#define PERASR_INSTANTIATE(S)                                                                \
  template void LstmBackward(const LstmWeights<S> &, const LstmCache<S> &, const Matrix<S> &, \
                             LstmWeights<S> *, Matrix<S> *);                                 \
  template double Backward(const TransducerParams<S> &, std::span<const TrainExample *const>, \
                           TransducerParams<S> *, const BackwardScope &);                    \
  template double BatchLoss(const TransducerParams<S> &, std::span<const TrainExample *const>);

PERASR_INSTANTIATE(float)
PERASR_INSTANTIATE(double)

}  // namespace perasr
