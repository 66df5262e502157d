// core/src/train.cc

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

#include "perasr/train.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "json_io.h"
#include "perasr/checkpoint.h"
#include "perasr/common.h"

namespace perasr {

namespace fs = std::filesystem;

// ---- freeze masks -----------------------------------------------------------

FreezeMask FreezeMask::All(int encoder_layers) {
  FreezeMask m;
  for (const auto &g : TrainableGroups(encoder_layers)) m.trainable.insert(g);
  return m;
}

FreezeMask FreezeMask::Parse(const std::string &spec, int encoder_layers) {
  if (spec == "all") return All(encoder_layers);
  FreezeMask m;
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    if (token == "encoder") {
      for (int i = 0; i < encoder_layers; ++i) m.trainable.insert("enc." + std::to_string(i));
    } else {
      m.trainable.insert(token);
    }
    token.clear();
  };
  for (char c : spec) {
    if (c == '+' || c == ',') {
      flush();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      token += c;
    }
  }
  flush();
  m.Validate(encoder_layers);
  return m;
}

std::string FreezeMask::Label() const {
  std::string out;
  for (const auto &g : TrainableGroups(1024)) {
    if (!trainable.count(g)) continue;
    if (!out.empty()) out += '+';
    out += g;
  }
  return out.empty() ? "none" : out;
}

void FreezeMask::Validate(int encoder_layers) const {
  auto groups = TrainableGroups(encoder_layers);
  for (const auto &g : trainable)
    if (std::find(groups.begin(), groups.end(), g) == groups.end())
      ThrowUsage("unknown parameter group '" + g + "'");
}

BackwardScope FreezeMask::Scope(int encoder_layers) const {
  BackwardScope s;
  s.lowest_encoder_layer = encoder_layers;
  for (int i = encoder_layers - 1; i >= 0; --i)
    if (Contains("enc." + std::to_string(i))) s.lowest_encoder_layer = i;
  s.decoder = Contains("dec");
  return s;
}

std::vector<FreezeMask> DefaultMaskFamily(int encoder_layers) {
  std::vector<FreezeMask> out;
  for (int top = 0; top < encoder_layers; ++top)
    for (bool joint : {false, true}) {
      FreezeMask m;
      for (int i = 0; i <= top; ++i) m.trainable.insert("enc." + std::to_string(i));
      if (joint) m.trainable.insert("joint");
      out.push_back(std::move(m));
    }
  return out;
}

template <typename S>
void ApplyFreeze(TransducerParams<S> *grads, const FreezeMask &mask) {
  mask.Validate(static_cast<int>(grads->encoder.size()));
  ForEachTensor(*grads, [&](const std::string &group, const std::string &, auto &t) {
    if (!mask.Contains(group)) t.setZero();
  });
}

template void ApplyFreeze(TransducerParams<float> *, const FreezeMask &);
template void ApplyFreeze(TransducerParams<double> *, const FreezeMask &);

// ---- optimizer ----------------------------------------------------------------

void HyperParams::Validate() const {
  if (!(learning_rate > 0) || !(epsilon > 0) || !(clip_norm > 0))
    ThrowUsage("learning_rate, epsilon and clip_norm must be positive");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1))
    ThrowUsage("Adam betas must lie in [0, 1)");
  if (batch_size < 1 || max_epochs < 1 || patience < 1)
    ThrowUsage("batch_size, max_epochs and patience must be >= 1");
  if (!(dev_fraction >= 0 && dev_fraction < 1)) ThrowUsage("dev_fraction must lie in [0, 1)");
}

double ClipGradNorm(TransducerParams<float> *grads, double max_norm) {
  double sq = 0.0;
  // The frontend is fixed statistics, never a gradient.
  ForEachTensor(*grads, [&](const std::string &group, const std::string &, const auto &t) {
    if (group != "frontend") sq += t.template cast<double>().squaredNorm();
  });
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const float s = static_cast<float>(max_norm / norm);
    ForEachTensor(*grads, [&](const std::string &group, const std::string &, auto &t) {
      if (group != "frontend") t *= s;
    });
  }
  return norm;
}

Adam::Adam(const TransducerParams<float> &like) : m_(like), v_(like) {
  ForEachTensor(m_, [](const std::string &, const std::string &, auto &t) { t.setZero(); });
  ForEachTensor(v_, [](const std::string &, const std::string &, auto &t) { t.setZero(); });
}

void Adam::Step(TransducerParams<float> *params, const TransducerParams<float> &grads,
                const HyperParams &hp, const FreezeMask &mask) {
  ++steps_;
  const double c1 = 1.0 - std::pow(hp.beta1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(hp.beta2, static_cast<double>(steps_));
  const float b1 = static_cast<float>(hp.beta1), b2 = static_cast<float>(hp.beta2);
  const float step = static_cast<float>(hp.learning_rate / c1);
  const float inv_c2 = static_cast<float>(1.0 / c2);
  const float eps = static_cast<float>(hp.epsilon);

  // Walk the four structures in lockstep; ForEachTensor order is fixed.
  std::vector<float *> p_ptrs, m_ptrs, v_ptrs;
  std::vector<const float *> g_ptrs;
  std::vector<Eigen::Index> sizes;
  std::vector<bool> active;
  ForEachTensor(*params, [&](const std::string &group, const std::string &, auto &t) {
    p_ptrs.push_back(t.data());
    sizes.push_back(t.size());
    active.push_back(mask.Contains(group));
  });
  ForEachTensor(m_, [&](const std::string &, const std::string &, auto &t) {
    m_ptrs.push_back(t.data());
  });
  ForEachTensor(v_, [&](const std::string &, const std::string &, auto &t) {
    v_ptrs.push_back(t.data());
  });
  ForEachTensor(grads, [&](const std::string &, const std::string &, const auto &t) {
    g_ptrs.push_back(t.data());
  });
  for (size_t i = 0; i < p_ptrs.size(); ++i) {
    if (!active[i]) continue;
    for (Eigen::Index j = 0; j < sizes[i]; ++j) {
      const float g = g_ptrs[i][j];
      float &m = m_ptrs[i][j];
      float &v = v_ptrs[i][j];
      m = b1 * m + (1 - b1) * g;
      v = b2 * v + (1 - b2) * g * g;
      p_ptrs[i][j] -= step * m / (std::sqrt(v * inv_c2) + eps);
    }
  }
}

// ---- training loop ----------------------------------------------------------

namespace {

double MeanLoss(const TransducerParams<float> &p, std::span<const TrainExample> examples) {
  std::vector<const TrainExample *> ptrs;
  for (const auto &e : examples) ptrs.push_back(&e);
  return BatchLoss(p, std::span<const TrainExample *const>(ptrs));
}

[[noreturn]] void ThrowDivergence(const std::string &what) {
  throw Error(ErrorKind::kDivergence, what);
}

}  // namespace

TrainResult Train(const ModelCheckpoint &init, std::span<const TrainExample> train,
                  std::span<const TrainExample> dev, const HyperParams &hp,
                  const FreezeMask &mask, const std::function<void(const EpochLog &)> &progress) {
  hp.Validate();
  const int layers = init.config.encoder_layers;
  mask.Validate(layers);
  if (train.empty()) ThrowData("no training examples");
  if (dev.empty()) ThrowData("no dev examples");

  TrainResult res;
  res.checkpoint = init;
  TransducerParams<float> params = init.params;
  res.initial_dev_loss = MeanLoss(params, dev);
  if (!std::isfinite(res.initial_dev_loss)) ThrowDivergence("initial dev loss is not finite");
  res.best_dev_loss = res.initial_dev_loss;
  res.train_loss = MeanLoss(params, train);

  const BackwardScope scope = mask.Scope(layers);
  Adam adam(params);
  TransducerParams<float> grads;
  std::vector<size_t> order(train.size());
  int since_best = 0;
  for (int epoch = 1; epoch <= hp.max_epochs; ++epoch) {
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(DeriveSeed(hp.seed, "epoch:" + std::to_string(epoch)));
    rng.Shuffle(order.begin(), order.end());
    double loss_sum = 0.0;
    int batches = 0;
    for (size_t start = 0; start < order.size(); start += hp.batch_size) {
      std::vector<const TrainExample *> batch;
      for (size_t i = start; i < std::min(order.size(), start + hp.batch_size); ++i)
        batch.push_back(&train[order[i]]);
      double loss = Backward(params, std::span<const TrainExample *const>(batch), &grads, scope);
      if (!std::isfinite(loss))
        ThrowDivergence("non-finite training loss at epoch " + std::to_string(epoch) +
                        ", step " + std::to_string(adam.steps() + 1));
      ApplyFreeze(&grads, mask);
      ClipGradNorm(&grads, hp.clip_norm);
      adam.Step(&params, grads, hp, mask);
      loss_sum += loss;
      ++batches;
    }
    EpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_sum / batches;
    log.dev_loss = MeanLoss(params, dev);
    log.steps = adam.steps();
    if (!std::isfinite(log.dev_loss))
      ThrowDivergence("non-finite dev loss at epoch " + std::to_string(epoch));
    res.epochs = epoch;
    if (log.dev_loss < res.best_dev_loss) {
      log.improved = true;
      res.best_dev_loss = log.dev_loss;
      res.train_loss = log.train_loss;
      res.checkpoint.params = params;
      res.checkpoint.step = init.step + adam.steps();
      since_best = 0;
    } else {
      ++since_best;
    }
    if (progress) progress(log);
    if (since_best >= hp.patience) break;
  }
  res.steps = adam.steps();
  return res;
}

std::vector<TrainExample> LoadExamples(const Manifest &manifest, const std::string &corpus_dir,
                                       const Vocab &vocab, int stack_factor) {
  std::vector<TrainExample> out;
  out.reserve(manifest.records.size());
  for (const auto &r : manifest.records) {
    TrainExample ex;
    ex.utterance_id = r.utterance_id;
    ex.x = LoadSuperFrames((fs::path(corpus_dir) / r.path).string(), stack_factor);
    ex.labels = vocab.Encode(r.transcript);
    out.push_back(std::move(ex));
  }
  return out;
}

std::pair<Manifest, Manifest> CarveDev(const Manifest &records, double fraction, uint64_t seed) {
  const size_t n = records.records.size();
  if (n == 0) ThrowData("cannot carve a dev set from no records");
  if (n == 1) return {records, records};
  size_t n_dev = static_cast<size_t>(std::llround(fraction * static_cast<double>(n)));
  n_dev = std::clamp<size_t>(n_dev, 1, n - 1);
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(DeriveSeed(seed, "dev-split"));
  rng.Shuffle(order.begin(), order.end());
  std::vector<bool> is_dev(n, false);
  for (size_t i = 0; i < n_dev; ++i) is_dev[order[i]] = true;
  std::pair<Manifest, Manifest> out;
  for (size_t i = 0; i < n; ++i)
    (is_dev[i] ? out.second : out.first).records.push_back(records.records[i]);
  return out;
}

void SetNormalization(std::span<const TrainExample> examples, TransducerParams<float> *params) {
  if (examples.empty()) ThrowData("no examples for feature statistics");
  const Eigen::Index dim = examples[0].x.frames.cols();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim), sq = Eigen::VectorXd::Zero(dim);
  double count = 0;
  for (const auto &e : examples) {
    if (e.x.frames.cols() != dim) ThrowData("inconsistent feature widths");
    Eigen::MatrixXd f = e.x.frames.cast<double>();
    sum += f.colwise().sum().transpose();
    sq += f.array().square().colwise().sum().matrix().transpose();
    count += static_cast<double>(f.rows());
  }
  Eigen::VectorXd mean = sum / count;
  Eigen::VectorXd var = (sq / count - mean.array().square().matrix()).cwiseMax(1e-8);
  params->feat_mean = mean.cast<float>();
  params->feat_inv_std = var.cwiseSqrt().cwiseInverse().cast<float>();
}

// ---- evaluation -------------------------------------------------------------

std::vector<UtteranceResult> DecodeManifest(const ModelCheckpoint &ckpt, const Manifest &manifest,
                                            const std::string &corpus_dir) {
  std::vector<UtteranceResult> out;
  for (const auto &r : manifest.records) {
    if (!ckpt.vocab.Covers(r.transcript))
      ThrowData("transcript of " + r.utterance_id + " has characters outside the vocabulary");
    auto x = LoadSuperFrames((fs::path(corpus_dir) / r.path).string(), ckpt.stack_factor);
    UtteranceResult u;
    u.utterance_id = r.utterance_id;
    u.speaker_id = r.speaker_id;
    u.reference = r.transcript;
    u.hypothesis = JoinWords(SplitWords(GreedyDecode(ckpt, x)));
    u.stats = Wer(u.reference, u.hypothesis);
    out.push_back(std::move(u));
  }
  return out;
}

WerStats PooledWer(std::span<const UtteranceResult> results) {
  WerStats s;
  for (const auto &r : results) s += r.stats;
  return s;
}

double MacroWer(std::span<const UtteranceResult> results) {
  std::map<std::string, WerStats> per;
  for (const auto &r : results) per[r.speaker_id] += r.stats;
  if (per.empty()) return 0.0;
  double s = 0.0;
  for (const auto &[spk, st] : per) s += st.Wer();
  return s / static_cast<double>(per.size());
}

double RelativeImprovement(double base_wer, double finetuned_wer) {
  return base_wer > 0 ? (base_wer - finetuned_wer) / base_wer : 0.0;
}

// ---- run records ------------------------------------------------------------

std::string RunRecord::ToJson() const {
  nlohmann::ordered_json j;
  j["key"] = key;
  j["kind"] = kind;
  j["speaker"] = speaker;
  j["mask"] = mask;
  j["budget"] = budget;
  j["budget_s"] = budget_s;
  j["seed"] = seed;
  j["train_utterances"] = train_utterances;
  j["train_loss"] = train_loss;
  j["dev_loss"] = dev_loss;
  j["base_wer"] = base_wer;
  j["ft_wer"] = ft_wer;
  j["rel_improvement"] = rel_improvement;
  j["steps"] = steps;
  j["epochs"] = epochs;
  j["wall_s"] = wall_s;
  j["checkpoint"] = checkpoint;
  if (!error.empty()) j["error"] = error;
  return j.dump();
}

RunRecord RunRecord::FromJson(const std::string &line) {
  RunRecord r;
  try {
    auto j = nlohmann::json::parse(line);
    r.key = j.at("key").get<std::string>();
    r.kind = j.value("kind", "finetune");
    r.speaker = j.value("speaker", "");
    r.mask = j.value("mask", "");
    r.budget = j.value("budget", "");
    r.budget_s = j.value("budget_s", 0.0);
    r.seed = j.value("seed", uint64_t{0});
    r.train_utterances = j.value("train_utterances", 0);
    r.train_loss = j.value("train_loss", 0.0);
    r.dev_loss = j.value("dev_loss", 0.0);
    r.base_wer = j.value("base_wer", 0.0);
    r.ft_wer = j.value("ft_wer", 0.0);
    r.rel_improvement = j.value("rel_improvement", 0.0);
    r.steps = j.value("steps", int64_t{0});
    r.epochs = j.value("epochs", 0);
    r.wall_s = j.value("wall_s", 0.0);
    r.checkpoint = j.value("checkpoint", "");
    r.error = j.value("error", "");
  } catch (const nlohmann::json::exception &e) {
    ThrowData(std::string("bad run record: ") + e.what());
  }
  return r;
}

std::string FinetunePlan::Key() const {
  std::ostringstream os;
  os.precision(17);
  os << speaker_id << '|' << mask.Label() << '|' << budget_label << '|' << hp.seed << '|'
     << hp.learning_rate << '|' << hp.batch_size << '|' << hp.max_epochs << '|' << hp.patience
     << '|' << hp.clip_norm << '|' << hp.dev_fraction << '|' << hp.beta1 << '|' << hp.beta2
     << '|' << hp.epsilon;
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(MixSeed(HashString(os.str()))));
  return buf;
}

namespace {

double Seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

BaseTrainingResult TrainBase(const Manifest &manifest, const std::string &corpus_dir,
                             const ModelConfig &model, const FeatureConfig &features,
                             int stack_factor, const HyperParams &hp,
                             const std::function<void(const EpochLog &)> &progress) {
  auto t0 = std::chrono::steady_clock::now();
  Manifest train_split;
  for (const auto &r : manifest.records)
    if (r.split == Split::kTrain) train_split.records.push_back(r);
  if (train_split.records.empty()) ThrowData("no base training records");

  ModelCheckpoint init;
  init.config = model;
  init.features = features;
  init.stack_factor = stack_factor;
  if (init.vocab.Size() != model.vocab_size)
    ThrowUsage("model vocab_size must be " + std::to_string(init.vocab.Size()));
  init.params = TransducerParams<float>::Init(model, DeriveSeed(hp.seed, "init"));

  auto [train_m, dev_m] = CarveDev(train_split, hp.dev_fraction, DeriveSeed(hp.seed, "base"));
  auto train = LoadExamples(train_m, corpus_dir, init.vocab, stack_factor);
  auto dev = LoadExamples(dev_m, corpus_dir, init.vocab, stack_factor);
  if (!train.empty() && train[0].x.Dim() != model.input_dim)
    ThrowUsage("model input_dim " + std::to_string(model.input_dim) + " != feature width " +
               std::to_string(train[0].x.Dim()));
  SetNormalization(train, &init.params);

  HyperParams base_hp = hp;
  base_hp.seed = DeriveSeed(hp.seed, "base-train");
  BaseTrainingResult out;
  out.train = Train(init, train, dev, base_hp, FreezeMask::All(model.encoder_layers), progress);

  RunRecord &rec = out.record;
  rec.kind = "base";
  rec.mask = FreezeMask::All(model.encoder_layers).Label();
  rec.budget = "all";
  rec.budget_s = train_m.TotalDuration();
  rec.seed = hp.seed;
  rec.train_utterances = static_cast<int>(train.size());
  rec.train_loss = out.train.train_loss;
  rec.dev_loss = out.train.best_dev_loss;
  rec.steps = out.train.steps;
  rec.epochs = out.train.epochs;
  rec.key = "base-" + std::to_string(hp.seed);
  rec.wall_s = Seconds(t0);
  return out;
}

RunRecord Finetune(const FinetunePlan &plan, const ModelCheckpoint &base, const Manifest &manifest,
                   const std::string &corpus_dir, const std::string &checkpoint_path,
                   ModelCheckpoint *out) {
  auto t0 = std::chrono::steady_clock::now();
  if (plan.mask.trainable.empty()) ThrowUsage("finetune mask must name at least one group");
  plan.mask.Validate(base.config.encoder_layers);

  RunRecord rec;
  rec.key = plan.Key();
  rec.kind = "finetune";
  rec.speaker = plan.speaker_id;
  rec.mask = plan.mask.Label();
  rec.budget = plan.budget_label;
  const uint64_t cell_seed = DeriveSeed(plan.hp.seed, rec.key);
  rec.seed = plan.hp.seed;

  Manifest subset = MakeBudgetSubset(manifest, plan.speaker_id, plan.budget);
  rec.budget_s = subset.TotalDuration();
  Manifest test = manifest.Filter(plan.speaker_id, Split::kTest);
  if (test.records.empty()) ThrowData("speaker '" + plan.speaker_id + "' has no test records");

  auto [train_m, dev_m] = CarveDev(subset, plan.hp.dev_fraction, DeriveSeed(cell_seed, "dev"));
  auto train = LoadExamples(train_m, corpus_dir, base.vocab, base.stack_factor);
  auto dev = LoadExamples(dev_m, corpus_dir, base.vocab, base.stack_factor);
  rec.train_utterances = static_cast<int>(train.size());

  HyperParams hp = plan.hp;
  hp.seed = cell_seed;
  TrainResult tr = Train(base, train, dev, hp, plan.mask);
  rec.train_loss = tr.train_loss;
  rec.dev_loss = tr.best_dev_loss;
  rec.steps = tr.steps;
  rec.epochs = tr.epochs;

  auto base_results = DecodeManifest(base, test, corpus_dir);
  auto ft_results = DecodeManifest(tr.checkpoint, test, corpus_dir);
  rec.base_wer = PooledWer(base_results).Wer();
  rec.ft_wer = PooledWer(ft_results).Wer();
  rec.rel_improvement = RelativeImprovement(rec.base_wer, rec.ft_wer);

  if (!checkpoint_path.empty()) {
    SaveCheckpoint(checkpoint_path, tr.checkpoint);
    rec.checkpoint = checkpoint_path;
  }
  if (out) *out = std::move(tr.checkpoint);
  rec.wall_s = Seconds(t0);
  return rec;
}

std::vector<RunRecord> RunPlans(const std::vector<FinetunePlan> &plans, const ModelCheckpoint &base,
                                const Manifest &manifest, const std::string &corpus_dir,
                                int workers, const std::function<void(const RunRecord &)> &on_done,
                                const std::string &checkpoint_dir) {
  std::vector<RunRecord> results(plans.size());
  std::atomic<size_t> next{0};
  std::mutex mu;
  auto worker = [&] {
    for (size_t i = next++; i < plans.size(); i = next++) {
      const auto &plan = plans[i];
      RunRecord rec;
      std::string path;
      if (!checkpoint_dir.empty())
        path = (fs::path(checkpoint_dir) / (plan.Key() + ".rntc")).string();
      try {
        rec = Finetune(plan, base, manifest, corpus_dir, path);
      } catch (const std::exception &e) {
        rec = RunRecord{};
        rec.key = plan.Key();
        rec.kind = "finetune";
        rec.speaker = plan.speaker_id;
        rec.mask = plan.mask.Label();
        rec.budget = plan.budget_label;
        rec.seed = plan.hp.seed;
        rec.error = e.what();
      }
      std::lock_guard<std::mutex> lock(mu);
      results[i] = rec;
      if (on_done) on_done(rec);
    }
  };
  workers = std::max(1, std::min<int>(workers, static_cast<int>(plans.size())));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  return results;
}

std::vector<RunRecord> SweepLayers(const ModelCheckpoint &base, const Manifest &manifest,
                                   const std::string &corpus_dir, const std::string &speaker,
                                   const std::vector<FreezeMask> &masks, const HyperParams &hp,
                                   int workers) {
  if (masks.empty()) ThrowUsage("layer sweep needs at least one mask");
  std::vector<FinetunePlan> plans;
  for (const auto &m : masks) {
    FinetunePlan p;
    p.speaker_id = speaker;
    p.budget = BudgetSpec::All(hp.seed);
    p.mask = m;
    p.hp = hp;
    plans.push_back(std::move(p));
  }
  auto recs = RunPlans(plans, base, manifest, corpus_dir, workers);
  std::stable_sort(recs.begin(), recs.end(), [](const RunRecord &a, const RunRecord &b) {
    if (a.error.empty() != b.error.empty()) return a.error.empty();
    if (a.ft_wer != b.ft_wer) return a.ft_wer < b.ft_wer;
    return a.mask < b.mask;
  });
  return recs;
}

BudgetSpec ResolveBudget(const std::string &label, const Manifest &manifest,
                         const std::string &speaker, uint64_t seed) {
  const uint64_t sel = DeriveSeed(seed, "budget-select:" + speaker);
  if (label == "all") return BudgetSpec::All(sel);
  if (label.empty()) ThrowUsage("empty budget label");
  std::string num = label;
  const bool percent = num.back() == '%';
  if (percent || num.back() == 's') num.pop_back();
  double v = 0.0;
  try {
    size_t used = 0;
    v = std::stod(num, &used);
    if (used != num.size()) throw std::invalid_argument(label);
  } catch (const std::exception &) {
    ThrowUsage("bad budget '" + label + "'");
  }
  if (!(v > 0)) ThrowUsage("budget must be positive: '" + label + "'");
  if (!percent) return BudgetSpec::Seconds(v, sel);
  double total = manifest.Filter(speaker, Split::kTrain).TotalDuration();
  if (total <= 0) ThrowData("speaker '" + speaker + "' has no train audio");
  if (v > 100.0) ThrowUsage("budget above 100%: '" + label + "'");
  if (v == 100.0) return BudgetSpec::All(sel);
  return BudgetSpec::Seconds(total * v / 100.0, sel);
}

std::vector<CurvePoint> BudgetCurve(std::span<const RunRecord> records, const std::string &mask) {
  struct Acc {
    double budget_s = 0.0;
    std::map<std::string, double> rel;  // per speaker
  };
  std::map<std::string, Acc> by_budget;
  for (const auto &r : records) {
    if (r.kind != "finetune" || r.mask != mask || !r.error.empty()) continue;
    auto &a = by_budget[r.budget];
    a.budget_s += r.budget_s;
    a.rel[r.speaker] = r.rel_improvement;
  }
  std::vector<CurvePoint> out;
  for (const auto &[label, a] : by_budget) {
    if (a.rel.empty()) continue;
    CurvePoint p;
    p.budget = label;
    p.mean_budget_s = a.budget_s / static_cast<double>(a.rel.size());
    for (const auto &[spk, v] : a.rel) p.mean_rel_improvement += v;
    p.mean_rel_improvement /= static_cast<double>(a.rel.size());
    out.push_back(p);
  }
  std::stable_sort(out.begin(), out.end(), [](const CurvePoint &a, const CurvePoint &b) {
    if ((a.budget == "all") != (b.budget == "all")) return b.budget == "all";
    return a.mean_budget_s < b.mean_budget_s;
  });
  double full = 0.0;
  for (const auto &p : out)
    if (p.budget == "all") full = p.mean_rel_improvement;
  for (auto &p : out) p.fraction_of_full = full != 0.0 ? p.mean_rel_improvement / full : 0.0;
  return out;
}

BudgetSweep SweepBudget(const ModelCheckpoint &base, const Manifest &manifest,
                        const std::string &corpus_dir, const std::vector<std::string> &speakers,
                        const std::vector<std::string> &budgets, const FreezeMask &mask,
                        const HyperParams &hp, int workers) {
  if (budgets.empty()) ThrowUsage("budget sweep needs at least one budget");
  std::vector<FinetunePlan> plans;
  for (const auto &spk : speakers)
    for (const auto &b : budgets) {
      FinetunePlan p;
      p.speaker_id = spk;
      p.budget_label = b;
      p.budget = ResolveBudget(b, manifest, spk, hp.seed);
      p.mask = mask;
      p.hp = hp;
      plans.push_back(std::move(p));
    }
  BudgetSweep out;
  out.records = RunPlans(plans, base, manifest, corpus_dir, workers);
  out.curve = BudgetCurve(out.records, mask.Label());
  return out;
}

std::string RecordsToCsv(std::span<const RunRecord> records) {
  std::ostringstream os;
  os.precision(10);
  os << "speaker,mask,budget_s,base_wer,ft_wer,rel_improvement,wall_s,steps\n";
  for (const auto &r : records)
    os << r.speaker << ',' << r.mask << ',' << r.budget_s << ',' << r.base_wer << ',' << r.ft_wer
       << ',' << r.rel_improvement << ',' << r.wall_s << ',' << r.steps << '\n';
  return os.str();
}

}  // namespace perasr
