// core/include/perasr/model.h

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

#ifndef PERASR_MODEL_H_
#define PERASR_MODEL_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "perasr/features.h"

namespace perasr {

template <typename S>
using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using Vector = Eigen::Matrix<S, Eigen::Dynamic, 1>;

// Output graphemes. Index 0 is the blank.
class Vocab {
 public:
  static constexpr int kBlank = 0;

  Vocab() = default;
  explicit Vocab(std::vector<std::string> symbols);
  // blank, space, apostrophe, a..z
  static Vocab Graphemes();

  int Size() const { return static_cast<int>(symbols_.size()); }
  const std::vector<std::string> &Symbols() const { return symbols_; }
  // Throws kData on characters outside the vocabulary.
  std::vector<int> Encode(const std::string &text) const;
  std::string Decode(std::span<const int> ids) const;
  bool Covers(const std::string &text) const;

 private:
  std::vector<std::string> symbols_;
  int char_to_id_[256] = {};
};

struct ModelConfig {
  int input_dim = 240;
  int encoder_layers = 3;
  int hidden = 64;
  int joint_hidden = 64;
  int vocab_size = 29;
  double init_scale = 0.05;

  void Validate() const;
};

template <typename S>
struct LstmWeights {
  Matrix<S> w_in;   // 4H x in, gate order i, f, g, o
  Matrix<S> w_rec;  // 4H x H
  Vector<S> bias;   // 4H

  int Hidden() const { return static_cast<int>(w_rec.cols()); }
  int InputDim() const { return static_cast<int>(w_in.cols()); }
};

template <typename S>
struct TransducerParams {
  // Input normalization; part of the model but never trained.
  Vector<S> feat_mean;
  Vector<S> feat_inv_std;

  std::vector<LstmWeights<S>> encoder;
  Matrix<S> embedding;  // H x V
  LstmWeights<S> decoder;
  Matrix<S> joint_enc;  // Hj x H
  Matrix<S> joint_dec;  // Hj x H
  Vector<S> joint_bias;
  Matrix<S> out_w;      // V x Hj
  Vector<S> out_bias;

  // Uniform(-scale, scale) weights, identity normalization.
  static TransducerParams Init(const ModelConfig &config, uint64_t seed);
  // Same shapes, all zero.
  static TransducerParams Zeros(const ModelConfig &config);

  template <typename T>
  TransducerParams<T> Cast() const;
};

// Visits every tensor as fn(group, name, Eigen object). Group names are
// "frontend", "enc.<i>", "dec", "joint"; only the last three kinds train.
template <typename P, typename Fn>
void ForEachTensor(P &&p, Fn &&fn) {
  fn(std::string("frontend"), std::string("frontend.mean"), p.feat_mean);
  fn(std::string("frontend"), std::string("frontend.inv_std"), p.feat_inv_std);
  for (size_t i = 0; i < p.encoder.size(); ++i) {
    std::string g = "enc." + std::to_string(i);
    fn(g, g + ".w_in", p.encoder[i].w_in);
    fn(g, g + ".w_rec", p.encoder[i].w_rec);
    fn(g, g + ".bias", p.encoder[i].bias);
  }
  fn(std::string("dec"), std::string("dec.embedding"), p.embedding);
  fn(std::string("dec"), std::string("dec.w_in"), p.decoder.w_in);
  fn(std::string("dec"), std::string("dec.w_rec"), p.decoder.w_rec);
  fn(std::string("dec"), std::string("dec.bias"), p.decoder.bias);
  fn(std::string("joint"), std::string("joint.w_enc"), p.joint_enc);
  fn(std::string("joint"), std::string("joint.w_dec"), p.joint_dec);
  fn(std::string("joint"), std::string("joint.bias"), p.joint_bias);
  fn(std::string("joint"), std::string("joint.w_out"), p.out_w);
  fn(std::string("joint"), std::string("joint.b_out"), p.out_bias);
}

template <typename S>
template <typename T>
TransducerParams<T> TransducerParams<S>::Cast() const {
  TransducerParams<T> out;
  out.encoder.resize(encoder.size());
  auto copy = [](const auto &src, auto &dst) { dst = src.template cast<T>(); };
  copy(feat_mean, out.feat_mean);
  copy(feat_inv_std, out.feat_inv_std);
  for (size_t i = 0; i < encoder.size(); ++i) {
    copy(encoder[i].w_in, out.encoder[i].w_in);
    copy(encoder[i].w_rec, out.encoder[i].w_rec);
    copy(encoder[i].bias, out.encoder[i].bias);
  }
  copy(embedding, out.embedding);
  copy(decoder.w_in, out.decoder.w_in);
  copy(decoder.w_rec, out.decoder.w_rec);
  copy(decoder.bias, out.decoder.bias);
  copy(joint_enc, out.joint_enc);
  copy(joint_dec, out.joint_dec);
  copy(joint_bias, out.joint_bias);
  copy(out_w, out.out_w);
  copy(out_bias, out.out_bias);
  return out;
}

// Trainable group names in canonical order: enc.0 .. enc.L-1, dec, joint.
std::vector<std::string> TrainableGroups(int encoder_layers);

// Analytic trainable-parameter count for (L, H, Hj, V, input_dim).
int64_t ParameterCount(const ModelConfig &config);
template <typename S>
int64_t CountTrainable(const TransducerParams<S> &p);

// ---- forward passes -------------------------------------------------------

template <typename S>
struct LstmCache {
  Matrix<S> input;      // in x T
  Matrix<S> gates;      // 4H x T, post-activation
  Matrix<S> cell;       // H x T
  Matrix<S> tanh_cell;  // H x T
  Matrix<S> hidden;     // H x T
};

// Runs a single-direction LSTM from zero state over the columns of `input`.
template <typename S>
void LstmForward(const LstmWeights<S> &w, const Matrix<S> &input, LstmCache<S> *cache);

// One step; h and c are updated in place.
template <typename S>
void LstmStep(const LstmWeights<S> &w, const Vector<S> &x, Vector<S> *h, Vector<S> *c);

template <typename S>
struct EncoderCache {
  std::vector<LstmCache<S>> layers;
  const Matrix<S> &Output() const { return layers.back().hidden; }
};

// x is T' x input_dim (row per super-frame). Output H x T'.
template <typename S>
void Encode(const TransducerParams<S> &p, const SuperFrameMatrix &x, EncoderCache<S> *cache);

template <typename S>
struct PredictionCache {
  std::vector<int> inputs;  // blank followed by the labels
  LstmCache<S> lstm;
  const Matrix<S> &Output() const { return lstm.hidden; }
};

// Column u of the output is the state after the first u labels; column 0 is
// the blank-history start state. Throws kData if labels contain blank.
template <typename S>
void Predict(const TransducerParams<S> &p, std::span<const int> labels,
             PredictionCache<S> *cache);

template <typename S>
struct JointCache {
  int frames = 0;
  int positions = 0;  // U + 1
  Matrix<S> enc_proj;   // Hj x T
  Matrix<S> dec_proj;   // Hj x (U+1)
  Matrix<S> hidden;     // Hj x T(U+1), tanh output; column t*(U+1)+u
  Matrix<S> log_probs;  // V x T(U+1)

  S LogProb(int t, int u, int k) const { return log_probs(k, t * positions + u); }
};

template <typename S>
void Joint(const TransducerParams<S> &p, const Matrix<S> &enc, const Matrix<S> &pred,
           JointCache<S> *cache);

// Unit of persistence for base and personalized models.
struct ModelCheckpoint {
  ModelConfig config;
  Vocab vocab = Vocab::Graphemes();
  FeatureConfig features;
  int stack_factor = 3;
  int64_t step = 0;
  TransducerParams<float> params;
};

// Greedy transducer decoding; at most `max_symbols_per_frame` labels per
// frame. Returns the decoded grapheme string (possibly empty).
std::string GreedyDecode(const ModelCheckpoint &ckpt, const SuperFrameMatrix &x,
                         int max_symbols_per_frame = 4);

// Shared with the trainer: loads a feature file and stacks it.
SuperFrameMatrix LoadSuperFrames(const std::string &path, int stack_factor);

}  // namespace perasr

#endif  // PERASR_MODEL_H_
