// core/include/perasr/lexicon.h

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

#ifndef PERASR_LEXICON_H_
#define PERASR_LEXICON_H_

#include <istream>
#include <map>
#include <string>
#include <vector>

namespace perasr {

// The SAMPA symbols the synthesizer has acoustic prototypes for, in a fixed
// order. Phoneme ids everywhere are indices into this list.
const std::vector<std::string> &DefaultInventory();

// word -> SAMPA pronunciation. Text format: `word<TAB>ph ph ph`, '#' starts a
// comment, blank lines ignored.
class Lexicon {
 public:
  Lexicon() : Lexicon(DefaultInventory()) {}
  explicit Lexicon(std::vector<std::string> inventory);

  static Lexicon Load(const std::string &path);
  static Lexicon Parse(std::istream &is, const std::string &origin = "<stream>");
  void Save(const std::string &path) const;

  // Throws kData if the word is malformed or uses an unknown phoneme.
  void Add(const std::string &word, std::vector<std::string> pronunciation);

  const std::vector<std::string> *Find(const std::string &word) const;
  bool Contains(const std::string &word) const { return Find(word) != nullptr; }
  size_t Size() const { return entries_.size(); }
  bool Empty() const { return entries_.empty(); }

  const std::vector<std::string> &Inventory() const { return inventory_; }
  // -1 if absent.
  int PhonemeId(const std::string &symbol) const;

  const std::map<std::string, std::vector<std::string>> &Entries() const {
    return entries_;
  }

 private:
  std::vector<std::string> inventory_;
  std::map<std::string, int> phoneme_ids_;
  std::map<std::string, std::vector<std::string>> entries_;
};

// Lowercase letters and apostrophes only.
bool IsValidWord(const std::string &word);

std::vector<std::string> SplitWords(const std::string &text);
std::string JoinWords(const std::vector<std::string> &words);

}  // namespace perasr

#endif  // PERASR_LEXICON_H_
