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

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace tigs {

inline constexpr double kBleuEpsilon = 1e-9;

/// Reference statistics shared by many hypotheses: per n-gram the maximum
/// count over references, and the sorted reference lengths.
class BleuReferences {
 public:
  explicit BleuReferences(const std::vector<std::vector<int>>& refs);
  std::size_t size() const { return lengths_.size(); }
  /// Closest reference length to c; ties go to the shorter one.
  std::size_t closest_length(std::size_t c) const;
  std::size_t max_count(const std::vector<int>& ngram) const;

 private:
  std::map<std::vector<int>, std::size_t> max_counts_;
  std::vector<std::size_t> lengths_;
};

/// Sentence BLEU-4: uniform geometric mean of clipped n-gram precisions
/// (n = 1..4) times the brevity penalty. A zero match count at any order is
/// replaced by epsilon before taking logs. An empty hypothesis scores 0.
double bleu4(const std::vector<int>& hyp, const BleuReferences& refs,
             double epsilon = kBleuEpsilon);
double bleu4(const std::vector<int>& hyp, const std::vector<std::vector<int>>& refs,
             double epsilon = kBleuEpsilon);
double bleu4(const std::vector<std::string>& hyp,
             const std::vector<std::vector<std::string>>& refs, double epsilon = kBleuEpsilon);

/// Sorts the pool, draws pool_size references without replacement from a
/// generator seeded with `seed`, and returns the mean bleu4 of the
/// hypotheses against that shared reference set.
double bleu_sampled_refs(const std::vector<std::vector<int>>& hyps,
                         std::vector<std::vector<int>> pool, std::size_t pool_size,
                         std::uint64_t seed);

}  // namespace tigs
