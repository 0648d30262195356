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

#include <functional>
#include <random>
#include <vector>

#include "tigs/corpus.hpp"
#include "tigs/mask.hpp"
#include "tigs/model.hpp"

namespace tigs::testing {

inline ModelConfig tiny_config(DecoderKind dec, std::size_t vocab, bool conditional = true,
                               std::size_t emb = 4, std::size_t hidden = 6) {
  ModelConfig c;
  c.src_vocab = conditional ? vocab : 0;
  c.tgt_vocab = vocab;
  c.emb_dim = emb;
  c.hidden_dim = hidden;
  c.decoder = dec;
  c.attention = conditional ? AttentionKind::kBilinear : AttentionKind::kNone;
  return c;
}

// Large init scale so the distributions are sharply non-uniform.
inline ModelParams sharp_model(const ModelConfig& c, std::uint64_t seed) {
  return ModelParams::init(c, seed, 1.0);
}

inline std::vector<int> random_tokens(std::size_t len, std::size_t vocab, std::mt19937_64& rng) {
  std::vector<int> y(len);
  for (int& t : y) t = static_cast<int>(kNumSpecials + rng() % (vocab - kNumSpecials));
  return y;
}

// Calls f on every assignment of fillable tokens to the template's blanks.
inline void for_each_fill(const Template& t, std::size_t vocab,
                          const std::function<void(const std::vector<int>&)>& f) {
  std::vector<int> fill(t.num_blanks(), kNumSpecials);
  while (true) {
    f(t.filled(fill));
    std::size_t j = 0;
    while (j < fill.size() && ++fill[j] == static_cast<int>(vocab)) fill[j++] = kNumSpecials;
    if (j == fill.size()) return;
  }
}

}  // namespace tigs::testing
