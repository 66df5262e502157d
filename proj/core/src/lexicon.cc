// core/src/lexicon.cc

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

#include "perasr/lexicon.h"

#include <fstream>
#include <sstream>

#include "perasr/common.h"

namespace perasr {

const std::vector<std::string> &DefaultInventory() {
  static const std::vector<std::string> kInventory = {
      // plosives
      "p", "b", "t", "d", "k", "g",
      // fricatives
      "f", "v", "D", "s", "z", "S", "Z", "h",
      // nasals
      "m", "n", "N",
      // approximants
      "l", "r", "w", "j",
      // monophthongs
      "i:", "I", "e", "{", "A:", "O:", "U", "u:", "V", "@",
      // diphthongs
      "eI", "aI", "@U", "aU"};
  return kInventory;
}

bool IsValidWord(const std::string &word) {
  if (word.empty()) return false;
  for (char c : word)
    if (!((c >= 'a' && c <= 'z') || c == '\'')) return false;
  return true;
}

std::vector<std::string> SplitWords(const std::string &text) {
  std::istringstream is(text);
  std::vector<std::string> words;
  std::string w;
  while (is >> w) words.push_back(w);
  return words;
}

std::string JoinWords(const std::vector<std::string> &words) {
  std::string out;
  for (size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  return out;
}

Lexicon::Lexicon(std::vector<std::string> inventory)
    : inventory_(std::move(inventory)) {
  for (size_t i = 0; i < inventory_.size(); ++i) {
    if (!phoneme_ids_.emplace(inventory_[i], static_cast<int>(i)).second)
      ThrowUsage("duplicate phoneme in inventory: " + inventory_[i]);
  }
}

int Lexicon::PhonemeId(const std::string &symbol) const {
  auto it = phoneme_ids_.find(symbol);
  return it == phoneme_ids_.end() ? -1 : it->second;
}

void Lexicon::Add(const std::string &word, std::vector<std::string> pronunciation) {
  if (!IsValidWord(word)) ThrowData("invalid lexicon word '" + word + "'");
  if (pronunciation.empty()) ThrowData("empty pronunciation for '" + word + "'");
  for (const auto &p : pronunciation)
    if (PhonemeId(p) < 0)
      ThrowData("word '" + word + "' uses unknown phoneme '" + p + "'");
  entries_[word] = std::move(pronunciation);
}

const std::vector<std::string> *Lexicon::Find(const std::string &word) const {
  auto it = entries_.find(word);
  return it == entries_.end() ? nullptr : &it->second;
}

Lexicon Lexicon::Parse(std::istream &is, const std::string &origin) {
  Lexicon lex;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto tab = line.find('\t');
    std::string word;
    std::string rest;
    if (tab == std::string::npos) {
      if (SplitWords(line).empty()) continue;
      ThrowData(origin + ":" + std::to_string(line_no) + ": expected word<TAB>phonemes");
    }
    word = line.substr(0, tab);
    rest = line.substr(tab + 1);
    try {
      lex.Add(word, SplitWords(rest));
    } catch (const Error &e) {
      ThrowData(origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return lex;
}

Lexicon Lexicon::Load(const std::string &path) {
  std::ifstream is(path);
  if (!is) ThrowData("cannot open lexicon: " + path);
  return Parse(is, path);
}

void Lexicon::Save(const std::string &path) const {
  std::ofstream os(path);
  if (!os) ThrowData("cannot open for writing: " + path);
  for (const auto &[word, pron] : entries_) os << word << '\t' << JoinWords(pron) << '\n';
}

}  // namespace perasr
