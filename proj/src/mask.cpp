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

#include "tigs/mask.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

#include "tigs/io.hpp"

namespace tigs {

Template Template::from_tokens(std::vector<int> tokens) {
  Template t;
  t.tokens = std::move(tokens);
  for (std::size_t i = 0; i < t.tokens.size(); ++i)
    if (t.tokens[i] == kBlank) t.blanks.push_back(i);
  return t;
}

void Template::validate() const {
  if (tokens.empty()) throw std::invalid_argument("template: empty");
  std::size_t j = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const bool is_blank = tokens[i] == kBlank;
    const bool listed = j < blanks.size() && blanks[j] == i;
    if (is_blank != listed) {
      throw std::invalid_argument("template: blank set disagrees with tokens at position " +
                                  std::to_string(i));
    }
    if (listed) ++j;
  }
  if (j != blanks.size()) throw std::invalid_argument("template: blank index out of range");
}

std::vector<int> Template::filled(std::span<const int> fill) const {
  if (fill.size() != blanks.size()) {
    throw std::invalid_argument("template: " + std::to_string(fill.size()) + " fills for " +
                                std::to_string(blanks.size()) + " blanks");
  }
  std::vector<int> out = tokens;
  for (std::size_t j = 0; j < blanks.size(); ++j) out[blanks[j]] = fill[j];
  return out;
}

std::vector<int> Template::fill_of(std::span<const int> sequence) const {
  std::vector<int> out;
  out.reserve(blanks.size());
  for (std::size_t b : blanks) out.push_back(sequence[b]);
  return out;
}

bool Template::preserved_by(std::span<const int> sequence) const {
  if (sequence.size() != tokens.size()) return false;
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (tokens[i] != kBlank && tokens[i] != sequence[i]) return false;
  return true;
}

Template Template::reversed() const {
  Template t;
  t.tokens.assign(tokens.rbegin(), tokens.rend());
  for (auto it = blanks.rbegin(); it != blanks.rend(); ++it)
    t.blanks.push_back(tokens.size() - 1 - *it);
  return t;
}

MaskStrategy parse_strategy(std::string_view s) {
  if (s == "middle") return MaskStrategy::kMiddle;
  if (s == "random") return MaskStrategy::kRandom;
  throw std::invalid_argument("unknown mask strategy '" + std::string(s) + "' (middle|random)");
}

const char* strategy_name(MaskStrategy s) {
  return s == MaskStrategy::kMiddle ? "middle" : "random";
}

std::size_t blank_count(std::size_t m, double ratio) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw std::invalid_argument("mask: ratio must lie in (0, 1), got " + std::to_string(ratio));
  }
  if (m < 2) throw std::invalid_argument("mask: sequence needs at least 2 tokens");
  auto k = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(m) + 0.5));
  return std::clamp<std::size_t>(k, 1, m - 1);
}

Template mask_middle(std::span<const int> y, double ratio) {
  const std::size_t m = y.size();
  const std::size_t k = blank_count(m, ratio);
  const std::size_t start = (m - k) / 2;
  std::vector<int> tokens(y.begin(), y.end());
  for (std::size_t i = start; i < start + k; ++i) tokens[i] = kBlank;
  return Template::from_tokens(std::move(tokens));
}

Template mask_random(std::span<const int> y, double ratio, std::uint64_t seed) {
  const std::size_t m = y.size();
  const std::size_t k = blank_count(m, ratio);
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first k entries are a uniform k-subset.
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, m - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  std::vector<int> tokens(y.begin(), y.end());
  for (std::size_t i = 0; i < k; ++i) tokens[order[i]] = kBlank;
  return Template::from_tokens(std::move(tokens));
}

Template make_mask(std::span<const int> y, MaskStrategy strategy, double ratio,
                   std::uint64_t seed) {
  return strategy == MaskStrategy::kMiddle ? mask_middle(y, ratio) : mask_random(y, ratio, seed);
}

void write_templates(const std::string& path, const std::vector<Template>& templates,
                     const Vocab& vocab, const std::string& header) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  if (!header.empty()) out << header << '\n';
  for (const auto& t : templates) out << join(vocab.decode(t.tokens), " ") << '\n';
}

std::vector<Template> read_templates(const std::string& path, const Vocab& vocab) {
  std::vector<Template> out;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto toks = split_ws(lines[i]);
    if (toks.empty()) {
      throw std::runtime_error(path + ":" + std::to_string(i + 1) + ": empty template");
    }
    out.push_back(Template::from_tokens(vocab.encode(toks)));
  }
  return out;
}

}  // namespace tigs
