// core/src/checkpoint.cc

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

#include "perasr/checkpoint.h"

#include <cstring>
#include <filesystem>
#include <map>

#include "json_io.h"

namespace perasr {

namespace {

constexpr char kMagic[4] = {'R', 'N', 'T', 'C'};

void AppendU32(std::string *out, uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out->append(b, 4);
}

uint32_t ReadU32(const std::string &buf, size_t pos) {
  uint32_t v;
  std::memcpy(&v, buf.data() + pos, 4);
  return v;
}

template <typename T>
void AppendTensor(std::string *out, const T &t) {
  out->append(reinterpret_cast<const char *>(t.data()), sizeof(float) * t.size());
}

}  // namespace

void SaveCheckpoint(const std::string &path, const ModelCheckpoint &ckpt) {
  nlohmann::json m;
  m["config"] = ckpt.config;
  m["vocab"] = ckpt.vocab.Symbols();
  m["features"] = ckpt.features;
  m["stack_factor"] = ckpt.stack_factor;
  m["step"] = ckpt.step;
  nlohmann::json tensors = nlohmann::json::array();
  std::string data;
  ForEachTensor(ckpt.params, [&](const std::string &group, const std::string &name,
                                 const auto &t) {
    tensors.push_back({{"name", name},
                       {"group", group},
                       {"shape", {t.rows(), t.cols()}},
                       {"offset", data.size()}});
    AppendTensor(&data, t);
  });
  m["tensors"] = std::move(tensors);
  std::string manifest = m.dump();

  std::string out(kMagic, 4);
  AppendU32(&out, kCheckpointVersion);
  AppendU32(&out, static_cast<uint32_t>(manifest.size()));
  out += manifest;
  out += data;

  // Readers never observe a partially written file.
  std::string tmp = path + ".tmp";
  internal::WriteTextFile(tmp, out);
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) ThrowData("cannot rename " + tmp + ": " + ec.message());
}

ModelCheckpoint LoadCheckpoint(const std::string &path) {
  std::string buf = internal::ReadTextFile(path);
  if (buf.size() < 12 || std::memcmp(buf.data(), kMagic, 4) != 0)
    ThrowData(path + ": not a checkpoint file");
  uint32_t version = ReadU32(buf, 4);
  if (version != kCheckpointVersion)
    ThrowData(path + ": unsupported checkpoint version " + std::to_string(version));
  uint32_t mlen = ReadU32(buf, 8);
  if (12 + static_cast<size_t>(mlen) > buf.size()) ThrowData(path + ": truncated manifest");
  const size_t data_start = 12 + mlen;

  ModelCheckpoint ckpt;
  std::map<std::string, nlohmann::json> entries;
  try {
    auto m = nlohmann::json::parse(buf.substr(12, mlen));
    ckpt.config = m.at("config").get<ModelConfig>();
    ckpt.vocab = Vocab(m.at("vocab").get<std::vector<std::string>>());
    ckpt.features = m.at("features").get<FeatureConfig>();
    ckpt.stack_factor = m.at("stack_factor").get<int>();
    ckpt.step = m.at("step").get<int64_t>();
    for (const auto &t : m.at("tensors")) {
      auto name = t.at("name").get<std::string>();
      if (!entries.emplace(name, t).second) ThrowData(path + ": duplicate tensor " + name);
    }
  } catch (const nlohmann::json::exception &e) {
    ThrowData(path + ": bad manifest: " + e.what());
  }
  if (ckpt.vocab.Size() != ckpt.config.vocab_size)
    ThrowData(path + ": vocabulary size disagrees with model config");

  ckpt.params = TransducerParams<float>::Zeros(ckpt.config);
  size_t seen = 0;
  ForEachTensor(ckpt.params, [&](const std::string &, const std::string &name, auto &t) {
    auto it = entries.find(name);
    if (it == entries.end()) ThrowData(path + ": missing tensor " + name);
    const auto &e = it->second;
    auto shape = e.at("shape").get<std::vector<int64_t>>();
    if (shape.size() != 2 || shape[0] != t.rows() || shape[1] != t.cols())
      ThrowData(path + ": shape mismatch for " + name);
    size_t offset = e.at("offset").get<size_t>();
    size_t bytes = sizeof(float) * t.size();
    if (data_start + offset + bytes > buf.size()) ThrowData(path + ": truncated tensor " + name);
    std::memcpy(t.data(), buf.data() + data_start + offset, bytes);
    ++seen;
  });
  if (seen != entries.size()) ThrowData(path + ": unexpected extra tensors");
  return ckpt;
}

std::string GroupBytes(const TransducerParams<float> &params, const std::string &group) {
  std::string out;
  bool found = false;
  ForEachTensor(params, [&](const std::string &g, const std::string &, const auto &t) {
    if (g != group) return;
    found = true;
    AppendTensor(&out, t);
  });
  if (!found) ThrowUsage("unknown parameter group '" + group + "'");
  return out;
}

}  // namespace perasr
