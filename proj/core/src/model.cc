// core/src/model.cc

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

#include "perasr/model.h"

#include <cmath>

#include "perasr/common.h"

namespace perasr {

Vocab::Vocab(std::vector<std::string> symbols) : symbols_(std::move(symbols)) {
  if (symbols_.size() < 2) ThrowUsage("vocabulary needs blank plus at least one symbol");
  for (auto &v : char_to_id_) v = -1;
  for (size_t i = 1; i < symbols_.size(); ++i) {
    if (symbols_[i].size() != 1) ThrowUsage("vocabulary symbols must be single characters");
    auto c = static_cast<unsigned char>(symbols_[i][0]);
    if (char_to_id_[c] >= 0) ThrowUsage("duplicate vocabulary symbol '" + symbols_[i] + "'");
    char_to_id_[c] = static_cast<int>(i);
  }
}

Vocab Vocab::Graphemes() {
  std::vector<std::string> s = {"<blank>", " ", "'"};
  for (char c = 'a'; c <= 'z'; ++c) s.emplace_back(1, c);
  return Vocab(std::move(s));
}

std::vector<int> Vocab::Encode(const std::string &text) const {
  std::vector<int> ids;
  ids.reserve(text.size());
  for (char ch : text) {
    int id = char_to_id_[static_cast<unsigned char>(ch)];
    if (id < 0) ThrowData(std::string("character '") + ch + "' not in vocabulary");
    ids.push_back(id);
  }
  return ids;
}

bool Vocab::Covers(const std::string &text) const {
  for (char ch : text)
    if (char_to_id_[static_cast<unsigned char>(ch)] < 0) return false;
  return true;
}

std::string Vocab::Decode(std::span<const int> ids) const {
  std::string out;
  for (int id : ids)
    if (id > 0 && id < Size()) out += symbols_[id];
  return out;
}

void ModelConfig::Validate() const {
  if (encoder_layers < 2) ThrowUsage("encoder needs at least 2 layers");
  if (hidden < 1 || joint_hidden < 1 || input_dim < 1) ThrowUsage("layer widths must be positive");
  if (vocab_size < 2) ThrowUsage("vocabulary size must be >= 2");
}

std::vector<std::string> TrainableGroups(int encoder_layers) {
  std::vector<std::string> g;
  for (int i = 0; i < encoder_layers; ++i) g.push_back("enc." + std::to_string(i));
  g.push_back("dec");
  g.push_back("joint");
  return g;
}

int64_t ParameterCount(const ModelConfig &c) {
  const int64_t h = c.hidden, hj = c.joint_hidden, v = c.vocab_size;
  auto lstm = [](int64_t in, int64_t hid) { return 4 * hid * (in + hid) + 4 * hid; };
  int64_t n = lstm(c.input_dim, h);
  for (int l = 1; l < c.encoder_layers; ++l) n += lstm(h, h);
  n += v * h + lstm(h, h);
  n += hj * 2 * h + hj + v * hj + v;
  return n;
}

template <typename S>
int64_t CountTrainable(const TransducerParams<S> &p) {
  int64_t n = 0;
  ForEachTensor(p, [&](const std::string &group, const std::string &, const auto &t) {
    if (group != "frontend") n += t.size();
  });
  return n;
}

namespace {

template <typename S>
void InitLstm(LstmWeights<S> *w, int in, int hidden) {
  w->w_in = Matrix<S>::Zero(4 * hidden, in);
  w->w_rec = Matrix<S>::Zero(4 * hidden, hidden);
  w->bias = Vector<S>::Zero(4 * hidden);
}

template <typename S>
S Sigmoid(S x) {
  return S(1) / (S(1) + std::exp(-x));
}

}  // namespace

template <typename S>
TransducerParams<S> TransducerParams<S>::Zeros(const ModelConfig &c) {
  c.Validate();
  TransducerParams<S> p;
  p.feat_mean = Vector<S>::Zero(c.input_dim);
  p.feat_inv_std = Vector<S>::Ones(c.input_dim);
  p.encoder.resize(c.encoder_layers);
  for (int l = 0; l < c.encoder_layers; ++l)
    InitLstm(&p.encoder[l], l == 0 ? c.input_dim : c.hidden, c.hidden);
  p.embedding = Matrix<S>::Zero(c.hidden, c.vocab_size);
  InitLstm(&p.decoder, c.hidden, c.hidden);
  p.joint_enc = Matrix<S>::Zero(c.joint_hidden, c.hidden);
  p.joint_dec = Matrix<S>::Zero(c.joint_hidden, c.hidden);
  p.joint_bias = Vector<S>::Zero(c.joint_hidden);
  p.out_w = Matrix<S>::Zero(c.vocab_size, c.joint_hidden);
  p.out_bias = Vector<S>::Zero(c.vocab_size);
  return p;
}

template <typename S>
TransducerParams<S> TransducerParams<S>::Init(const ModelConfig &c, uint64_t seed) {
  TransducerParams<S> p = Zeros(c);
  ForEachTensor(p, [&](const std::string &group, const std::string &name, auto &t) {
    if (group == "frontend") return;
    Rng rng(DeriveSeed(seed, name));
    for (Eigen::Index i = 0; i < t.size(); ++i)
      t.data()[i] = static_cast<S>(rng.Uniform(-c.init_scale, c.init_scale));
  });
  return p;
}

template <typename S>
void LstmForward(const LstmWeights<S> &w, const Matrix<S> &input, LstmCache<S> *cache) {
  const int hid = w.Hidden();
  const Eigen::Index steps = input.cols();
  cache->input = input;
  cache->gates.resize(4 * hid, steps);
  cache->gates.noalias() = w.w_in * input;
  cache->gates.colwise() += w.bias;
  cache->cell.resize(hid, steps);
  cache->tanh_cell.resize(hid, steps);
  cache->hidden.resize(hid, steps);
  Vector<S> h_prev = Vector<S>::Zero(hid);
  Vector<S> c_prev = Vector<S>::Zero(hid);
  for (Eigen::Index t = 0; t < steps; ++t) {
    auto z = cache->gates.col(t);
    z.noalias() += w.w_rec * h_prev;
    for (int j = 0; j < hid; ++j) {
      S i = Sigmoid(z(j));
      S f = Sigmoid(z(hid + j));
      S g = std::tanh(z(2 * hid + j));
      S o = Sigmoid(z(3 * hid + j));
      z(j) = i;
      z(hid + j) = f;
      z(2 * hid + j) = g;
      z(3 * hid + j) = o;
      S c = f * c_prev(j) + i * g;
      S tc = std::tanh(c);
      cache->cell(j, t) = c;
      cache->tanh_cell(j, t) = tc;
      cache->hidden(j, t) = o * tc;
    }
    h_prev = cache->hidden.col(t);
    c_prev = cache->cell.col(t);
  }
}

template <typename S>
void LstmStep(const LstmWeights<S> &w, const Vector<S> &x, Vector<S> *h, Vector<S> *c) {
  const int hid = w.Hidden();
  Vector<S> z = w.bias;
  z.noalias() += w.w_in * x;
  z.noalias() += w.w_rec * (*h);
  for (int j = 0; j < hid; ++j) {
    S i = Sigmoid(z(j));
    S f = Sigmoid(z(hid + j));
    S g = std::tanh(z(2 * hid + j));
    S o = Sigmoid(z(3 * hid + j));
    (*c)(j) = f * (*c)(j) + i * g;
    (*h)(j) = o * std::tanh((*c)(j));
  }
}

template <typename S>
void Encode(const TransducerParams<S> &p, const SuperFrameMatrix &x, EncoderCache<S> *cache) {
  const Eigen::Index dim = p.feat_mean.size();
  if (x.frames.cols() != dim)
    ThrowData("encoder input width " + std::to_string(x.frames.cols()) + " != expected " +
              std::to_string(dim));
  // Row-major T' x D is bit-identical to column-major D x T'.
  Eigen::Map<const Matrix<float>> cols(x.frames.data(), dim, x.frames.rows());
  Matrix<S> input = cols.template cast<S>();
  input.colwise() -= p.feat_mean;
  input.array().colwise() *= p.feat_inv_std.array();
  cache->layers.resize(p.encoder.size());
  for (size_t l = 0; l < p.encoder.size(); ++l)
    LstmForward(p.encoder[l], l == 0 ? input : cache->layers[l - 1].hidden, &cache->layers[l]);
}

template <typename S>
void Predict(const TransducerParams<S> &p, std::span<const int> labels,
             PredictionCache<S> *cache) {
  const int vocab = static_cast<int>(p.embedding.cols());
  cache->inputs.assign(1, Vocab::kBlank);
  for (int y : labels) {
    if (y == Vocab::kBlank) ThrowData("label sequence contains blank");
    if (y < 0 || y >= vocab) ThrowData("label index out of range");
    cache->inputs.push_back(y);
  }
  Matrix<S> emb(p.embedding.rows(), static_cast<Eigen::Index>(cache->inputs.size()));
  for (size_t u = 0; u < cache->inputs.size(); ++u) emb.col(u) = p.embedding.col(cache->inputs[u]);
  LstmForward(p.decoder, emb, &cache->lstm);
}

template <typename S>
void Joint(const TransducerParams<S> &p, const Matrix<S> &enc, const Matrix<S> &pred,
           JointCache<S> *cache) {
  if (enc.rows() != p.joint_enc.cols() || pred.rows() != p.joint_dec.cols())
    ThrowData("joint input dimension mismatch");
  const int frames = static_cast<int>(enc.cols());
  const int positions = static_cast<int>(pred.cols());
  const Eigen::Index hj = p.joint_bias.size();
  cache->frames = frames;
  cache->positions = positions;
  cache->enc_proj.noalias() = p.joint_enc * enc;
  cache->dec_proj.noalias() = p.joint_dec * pred;
  cache->dec_proj.colwise() += p.joint_bias;
  cache->hidden.resize(hj, static_cast<Eigen::Index>(frames) * positions);
  for (int t = 0; t < frames; ++t)
    for (int u = 0; u < positions; ++u)
      cache->hidden.col(t * positions + u) =
          (cache->enc_proj.col(t) + cache->dec_proj.col(u)).array().tanh();
  cache->log_probs.noalias() = p.out_w * cache->hidden;
  cache->log_probs.colwise() += p.out_bias;
  for (Eigen::Index c = 0; c < cache->log_probs.cols(); ++c) {
    auto col = cache->log_probs.col(c);
    S mx = col.maxCoeff();
    S lse = mx + std::log((col.array() - mx).exp().sum());
    col.array() -= lse;
  }
}

std::string GreedyDecode(const ModelCheckpoint &ckpt, const SuperFrameMatrix &x,
                         int max_symbols_per_frame) {
  if (max_symbols_per_frame < 1) ThrowUsage("max_symbols_per_frame must be >= 1");
  const auto &p = ckpt.params;
  EncoderCache<float> enc;
  Encode(p, x, &enc);
  Matrix<float> enc_proj = p.joint_enc * enc.Output();

  const int hid = p.decoder.Hidden();
  Vector<float> h = Vector<float>::Zero(hid);
  Vector<float> c = Vector<float>::Zero(hid);
  LstmStep(p.decoder, Vector<float>(p.embedding.col(Vocab::kBlank)), &h, &c);
  Vector<float> dec_proj = p.joint_dec * h + p.joint_bias;

  std::vector<int> out;
  Vector<float> z(p.joint_bias.size());
  Vector<float> logits(p.out_bias.size());
  for (Eigen::Index t = 0; t < enc_proj.cols(); ++t) {
    for (int emitted = 0; emitted < max_symbols_per_frame; ++emitted) {
      z = (enc_proj.col(t) + dec_proj).array().tanh();
      logits.noalias() = p.out_w * z;
      logits += p.out_bias;
      Eigen::Index best;
      logits.maxCoeff(&best);
      if (best == Vocab::kBlank) break;
      out.push_back(static_cast<int>(best));
      LstmStep(p.decoder, Vector<float>(p.embedding.col(best)), &h, &c);
      dec_proj.noalias() = p.joint_dec * h;
      dec_proj += p.joint_bias;
    }
  }
  return ckpt.vocab.Decode(out);
}

SuperFrameMatrix LoadSuperFrames(const std::string &path, int stack_factor) {
  FeatureMatrix f;
  f.frames = ReadFeatureFile(path);
  f.source = path;
  return StackFrames(f, stack_factor);
}

#define PERASR_INSTANTIATE(S)                                                          \
  template struct TransducerParams<S>;                                                 \
  template int64_t CountTrainable(const TransducerParams<S> &);                        \
  template void LstmForward(const LstmWeights<S> &, const Matrix<S> &, LstmCache<S> *); \
  template void LstmStep(const LstmWeights<S> &, const Vector<S> &, Vector<S> *,       \
                         Vector<S> *);                                                 \
  template void Encode(const TransducerParams<S> &, const SuperFrameMatrix &,          \
                       EncoderCache<S> *);                                             \
  template void Predict(const TransducerParams<S> &, std::span<const int>,             \
                        PredictionCache<S> *);                                         \
  template void Joint(const TransducerParams<S> &, const Matrix<S> &, const Matrix<S> &, \
                      JointCache<S> *);

PERASR_INSTANTIATE(float)
PERASR_INSTANTIATE(double)

}  // namespace perasr
