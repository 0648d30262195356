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

#include "tigs/bleu.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <random>
#include <stdexcept>
#include <unordered_map>

namespace tigs {

namespace {

std::map<std::vector<int>, std::size_t> ngram_counts(const std::vector<int>& s, std::size_t n) {
  std::map<std::vector<int>, std::size_t> c;
  for (std::size_t i = 0; i + n <= s.size(); ++i) ++c[std::vector<int>(s.begin() + static_cast<std::ptrdiff_t>(i), s.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return c;
}

}  // namespace

BleuReferences::BleuReferences(const std::vector<std::vector<int>>& refs) {
  if (refs.empty()) throw std::invalid_argument("bleu: at least one reference is required");
  for (const auto& r : refs) {
    lengths_.push_back(r.size());
    for (std::size_t n = 1; n <= 4; ++n)
      for (const auto& [g, c] : ngram_counts(r, n)) {
        auto& slot = max_counts_[g];
        slot = std::max(slot, c);
      }
  }
  std::sort(lengths_.begin(), lengths_.end());
}

std::size_t BleuReferences::closest_length(std::size_t c) const {
  std::size_t best = lengths_.front();
  for (std::size_t r : lengths_) {
    const auto d = [&](std::size_t x) { return x > c ? x - c : c - x; };
    if (d(r) < d(best)) best = r;
  }
  return best;
}

std::size_t BleuReferences::max_count(const std::vector<int>& ngram) const {
  auto it = max_counts_.find(ngram);
  return it == max_counts_.end() ? 0 : it->second;
}

double bleu4(const std::vector<int>& hyp, const BleuReferences& refs, double epsilon) {
  if (hyp.empty()) {
    std::cerr << "warning: empty hypothesis scores 0 BLEU\n";
    return 0.0;
  }
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    std::size_t matches = 0, total = 0;
    for (const auto& [g, c] : ngram_counts(hyp, n)) {
      matches += std::min(c, refs.max_count(g));
      total += c;
    }
    const double p = (matches == 0 ? epsilon : static_cast<double>(matches)) /
                     static_cast<double>(std::max<std::size_t>(total, 1));
    log_sum += 0.25 * std::log(p);
  }
  const double c = static_cast<double>(hyp.size());
  const double r = static_cast<double>(refs.closest_length(hyp.size()));
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return std::clamp(bp * std::exp(log_sum), 0.0, 1.0);
}

double bleu4(const std::vector<int>& hyp, const std::vector<std::vector<int>>& refs, double epsilon) {
  return bleu4(hyp, BleuReferences(refs), epsilon);
}

double bleu4(const std::vector<std::string>& hyp,
             const std::vector<std::vector<std::string>>& refs, double epsilon) {
  std::unordered_map<std::string, int> ids;
  auto intern = [&](const std::vector<std::string>& s) {
    std::vector<int> out;
    for (const auto& t : s) out.push_back(ids.emplace(t, static_cast<int>(ids.size())).first->second);
    return out;
  };
  const std::vector<int> h = intern(hyp);
  std::vector<std::vector<int>> r;
  for (const auto& ref : refs) r.push_back(intern(ref));
  return bleu4(h, r, epsilon);
}

double bleu_sampled_refs(const std::vector<std::vector<int>>& hyps,
                         std::vector<std::vector<int>> pool, std::size_t pool_size,
                         std::uint64_t seed) {
  if (pool.empty()) throw std::invalid_argument("bleu_sampled_refs: empty reference pool");
  if (pool_size < 1 || pool_size > pool.size()) {
    throw std::invalid_argument("bleu_sampled_refs: pool_size " + std::to_string(pool_size) +
                                " outside [1, " + std::to_string(pool.size()) + "]");
  }
  if (hyps.empty()) return 0.0;
  std::sort(pool.begin(), pool.end());
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < pool_size; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(pool_size);
  const BleuReferences refs(pool);
  double total = 0.0;
  for (const auto& h : hyps) total += bleu4(h, refs);
  return total / static_cast<double>(hyps.size());
}

}  // namespace tigs
