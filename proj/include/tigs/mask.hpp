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
#include <span>
#include <string>
#include <vector>

#include "tigs/corpus.hpp"

namespace tigs {

/// A target sequence with blank slots. `blanks` holds the sorted positions
/// whose token is kBlank, and nothing else.
struct Template {
  std::vector<int> tokens;
  std::vector<std::size_t> blanks;

  static Template from_tokens(std::vector<int> tokens);

  std::size_t length() const { return tokens.size(); }
  std::size_t num_blanks() const { return blanks.size(); }
  void validate() const;

  /// The complete sequence with blanks[j] replaced by fill[j].
  std::vector<int> filled(std::span<const int> fill) const;
  /// The tokens currently occupying the blank slots of `sequence`.
  std::vector<int> fill_of(std::span<const int> sequence) const;
  /// True when `sequence` agrees with every non-blank position.
  bool preserved_by(std::span<const int> sequence) const;
  /// Mirror image; blank i maps to length-1-i.
  Template reversed() const;

  bool operator==(const Template&) const = default;
};

enum class MaskStrategy { kMiddle, kRandom };
MaskStrategy parse_strategy(std::string_view s);
const char* strategy_name(MaskStrategy s);

/// Blank count for ratio r over m tokens: round-half-up, clamped to [1, m-1].
std::size_t blank_count(std::size_t m, double ratio);

Template mask_middle(std::span<const int> y, double ratio);
Template mask_random(std::span<const int> y, double ratio, std::uint64_t seed);
Template make_mask(std::span<const int> y, MaskStrategy strategy, double ratio,
                   std::uint64_t seed);

void write_templates(const std::string& path, const std::vector<Template>& templates,
                     const Vocab& vocab, const std::string& header);
std::vector<Template> read_templates(const std::string& path, const Vocab& vocab);

}  // namespace tigs
