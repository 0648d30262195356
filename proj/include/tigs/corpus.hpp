// Copyright 2026 The tigs-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tigs {

// Reserved indices; always the first five entries of every vocabulary.
inline constexpr int kPad = 0;
inline constexpr int kBos = 1;
inline constexpr int kEos = 2;
inline constexpr int kUnk = 3;
inline constexpr int kBlank = 4;
inline constexpr int kNumSpecials = 5;

inline constexpr std::string_view kBlankToken = "__BLANK__";
inline constexpr std::string_view kSpaceToken = "<sp>";

class Vocab {
 public:
  Vocab();
  /// Rebuilds a vocabulary from its full token list (specials included).
  static Vocab from_tokens(const std::vector<std::string>& tokens);

  std::size_t size() const { return tokens_.size(); }
  /// Number of tokens that may fill a blank (everything but the specials).
  std::size_t fillable() const { return tokens_.size() - kNumSpecials; }
  static bool is_fillable(int id) { return id >= kNumSpecials; }

  std::optional<int> find(std::string_view token) const;
  int index(std::string_view token) const;  // UNK when absent
  const std::string& token(int id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  int add(const std::string& token);
  std::vector<int> encode(const std::vector<std::string>& tokens) const;
  std::vector<std::string> decode(std::span<const int> ids) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

enum class CorpusFormat { kPairs, kMono };
enum class Tokenizer { kChar, kWord };

CorpusFormat parse_format(std::string_view s);
Tokenizer parse_tokenizer(std::string_view s);

struct TextPair {
  std::vector<std::string> x;  // empty for unconditional tasks
  std::vector<std::string> y;
};

struct SequencePair {
  std::vector<int> x;
  std::vector<int> y;
};

std::vector<std::string> tokenize(std::string_view line, Tokenizer tok);
std::string detokenize(const std::vector<std::string>& tokens, Tokenizer tok);

/// Pairs format: "x<TAB>y" per line. Mono format: one y per line.
/// Throws with the 1-based line number on a malformed line.
std::vector<TextPair> load_text_corpus(const std::string& path, CorpusFormat format,
                                       Tokenizer tok);
void save_text_corpus(const std::string& path, const std::vector<TextPair>& corpus,
                      CorpusFormat format, Tokenizer tok);

std::vector<SequencePair> encode_corpus(const std::vector<TextPair>& corpus, const Vocab& vocab);
std::vector<SequencePair> load_corpus(const std::string& path, CorpusFormat format,
                                      Tokenizer tok, const Vocab& vocab);

/// Frequency-ranked vocabulary (ties broken lexicographically) over both
/// sides of the corpus, truncated to max_size entries including specials.
Vocab build_vocab(const std::vector<TextPair>& corpus, std::size_t max_size,
                  std::size_t min_count = 1);

void save_vocab(const std::string& path, const Vocab& vocab);
Vocab load_vocab(const std::string& path);

}  // namespace tigs
