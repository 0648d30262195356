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

#include "tigs/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include "tigs/io.hpp"

namespace tigs {

namespace {

const std::vector<std::string>& special_tokens() {
  static const std::vector<std::string> s = {"<pad>", "<s>", "</s>", "<unk>",
                                             std::string(kBlankToken)};
  return s;
}

}  // namespace

Vocab::Vocab() {
  for (const auto& s : special_tokens()) add(s);
}

Vocab Vocab::from_tokens(const std::vector<std::string>& tokens) {
  const auto& specials = special_tokens();
  if (tokens.size() < specials.size() ||
      !std::equal(specials.begin(), specials.end(), tokens.begin())) {
    throw std::invalid_argument("vocab: token list must start with the five specials");
  }
  Vocab v;
  for (std::size_t i = specials.size(); i < tokens.size(); ++i) {
    if (v.find(tokens[i])) throw std::invalid_argument("vocab: duplicate token '" + tokens[i] + "'");
    v.add(tokens[i]);
  }
  return v;
}

std::optional<int> Vocab::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int Vocab::index(std::string_view token) const { return find(token).value_or(kUnk); }

const std::string& Vocab::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw std::out_of_range("vocab: index " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

int Vocab::add(const std::string& token) {
  if (auto existing = find(token)) return *existing;
  const int id = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
  index_.emplace(token, id);
  return id;
}

std::vector<int> Vocab::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(index(t));
  return ids;
}

std::vector<std::string> Vocab::decode(std::span<const int> ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(token(id));
  return out;
}

CorpusFormat parse_format(std::string_view s) {
  if (s == "pairs") return CorpusFormat::kPairs;
  if (s == "mono") return CorpusFormat::kMono;
  throw std::invalid_argument("unknown corpus format '" + std::string(s) + "' (pairs|mono)");
}

Tokenizer parse_tokenizer(std::string_view s) {
  if (s == "char") return Tokenizer::kChar;
  if (s == "word") return Tokenizer::kWord;
  throw std::invalid_argument("unknown tokenizer '" + std::string(s) + "' (char|word)");
}

std::vector<std::string> tokenize(std::string_view line, Tokenizer tok) {
  if (tok == Tokenizer::kWord) return split_ws(line);
  // One token per UTF-8 code point; spaces become an explicit token.
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    const auto lead = static_cast<unsigned char>(line[i]);
    std::size_t len = 1;
    if (lead >= 0xF0) len = 4;
    else if (lead >= 0xE0) len = 3;
    else if (lead >= 0xC0) len = 2;
    len = std::min(len, line.size() - i);
    std::string cp(line.substr(i, len));
    out.push_back(cp == " " ? std::string(kSpaceToken) : cp);
    i += len;
  }
  return out;
}

std::string detokenize(const std::vector<std::string>& tokens, Tokenizer tok) {
  if (tok == Tokenizer::kWord) return join(tokens, " ");
  std::string out;
  for (const auto& t : tokens) out += (t == kSpaceToken ? std::string(" ") : t);
  return out;
}

std::vector<TextPair> load_text_corpus(const std::string& path, CorpusFormat format,
                                       Tokenizer tok) {
  const auto lines = read_lines(path);
  std::vector<TextPair> corpus;
  corpus.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    const std::string where = path + ":" + std::to_string(i + 1);
    if (line.empty()) continue;
    TextPair p;
    if (format == CorpusFormat::kPairs) {
      const auto fields = split(line, '\t');
      if (fields.size() != 2) {
        throw std::runtime_error(where + ": expected 2 tab-separated fields, found " +
                                 std::to_string(fields.size()));
      }
      p.x = tokenize(fields[0], tok);
      p.y = tokenize(fields[1], tok);
      if (p.x.empty()) throw std::runtime_error(where + ": empty source side");
    } else {
      if (line.find('\t') != std::string::npos) {
        throw std::runtime_error(where + ": tab in mono-format line");
      }
      p.y = tokenize(line, tok);
    }
    if (p.y.empty()) throw std::runtime_error(where + ": empty target side");
    corpus.push_back(std::move(p));
  }
  if (corpus.empty()) throw std::runtime_error(path + ": corpus is empty");
  return corpus;
}

void save_text_corpus(const std::string& path, const std::vector<TextPair>& corpus,
                      CorpusFormat format, Tokenizer tok) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& p : corpus) {
    if (format == CorpusFormat::kPairs) out << detokenize(p.x, tok) << '\t';
    out << detokenize(p.y, tok) << '\n';
  }
}

std::vector<SequencePair> encode_corpus(const std::vector<TextPair>& corpus, const Vocab& vocab) {
  std::vector<SequencePair> out;
  out.reserve(corpus.size());
  for (const auto& p : corpus) out.push_back({vocab.encode(p.x), vocab.encode(p.y)});
  return out;
}

std::vector<SequencePair> load_corpus(const std::string& path, CorpusFormat format,
                                      Tokenizer tok, const Vocab& vocab) {
  return encode_corpus(load_text_corpus(path, format, tok), vocab);
}

Vocab build_vocab(const std::vector<TextPair>& corpus, std::size_t max_size,
                  std::size_t min_count) {
  if (corpus.empty()) throw std::invalid_argument("build_vocab: empty corpus");
  if (max_size < kNumSpecials + 1) {
    throw std::invalid_argument("build_vocab: max_size " + std::to_string(max_size) +
                                " cannot hold the specials plus one token");
  }
  std::map<std::string, std::size_t> counts;
  for (const auto& p : corpus) {
    for (const auto& t : p.x) ++counts[t];
    for (const auto& t : p.y) ++counts[t];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocab v;
  for (const auto& [tok, n] : ranked) {
    if (v.size() >= max_size) break;
    if (n < min_count) continue;
    if (v.find(tok)) continue;  // literal special spellings stay special
    v.add(tok);
  }
  return v;
}

void save_vocab(const std::string& path, const Vocab& vocab) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& t : vocab.tokens()) out << t << '\n';
}

Vocab load_vocab(const std::string& path) { return Vocab::from_tokens(read_lines(path)); }

}  // namespace tigs
