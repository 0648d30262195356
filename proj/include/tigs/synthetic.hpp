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
#include <vector>

#include "tigs/corpus.hpp"

namespace tigs {

/// Question/answer pairs from a small topical grammar. Each reply reuses the
/// question's topic and mirrors its pronoun, so y depends on x. Replies are
/// 6 to 11 words long.
std::vector<TextPair> generate_dialog_corpus(std::size_t pairs, std::uint64_t seed);

}  // namespace tigs
