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

#include "tigs/synthetic.hpp"

#include <array>
#include <random>
#include <string>

namespace tigs {

namespace {

struct Topic {
  std::array<const char*, 6> nouns;
  std::array<const char*, 4> verbs;
  std::array<const char*, 4> adjs;
};

constexpr std::array<Topic, 10> kTopics = {{
    {{"pizza", "pasta", "soup", "salad", "bread", "cake"},
     {"cook", "eat", "bake", "order"},
     {"hot", "tasty", "fresh", "sweet"}},
    {{"car", "bike", "bus", "train", "truck", "taxi"},
     {"drive", "ride", "fix", "park"},
     {"fast", "old", "red", "cheap"}},
    {{"song", "guitar", "piano", "band", "album", "concert"},
     {"play", "hear", "sing", "record"},
     {"loud", "new", "quiet", "famous"}},
    {{"movie", "show", "film", "series", "actor", "ticket"},
     {"watch", "see", "like", "review"},
     {"funny", "long", "scary", "boring"}},
    {{"book", "novel", "poem", "story", "letter", "page"},
     {"read", "write", "finish", "borrow"},
     {"short", "sad", "strange", "good"}},
    {{"dog", "cat", "bird", "horse", "puppy", "fish"},
     {"feed", "walk", "pet", "adopt"},
     {"small", "cute", "lazy", "wild"}},
    {{"game", "match", "team", "ball", "goal", "coach"},
     {"win", "lose", "join", "throw"},
     {"great", "close", "tough", "easy"}},
    {{"garden", "flower", "tree", "plant", "seed", "lawn"},
     {"grow", "water", "cut", "plant"},
     {"green", "tall", "pretty", "dry"}},
    {{"phone", "laptop", "screen", "camera", "printer", "app"},
     {"buy", "charge", "use", "update"},
     {"smart", "broken", "slow", "shiny"}},
    {{"trip", "beach", "hotel", "flight", "island", "map"},
     {"visit", "book", "plan", "miss"},
     {"sunny", "busy", "nice", "far"}},
}};

constexpr std::array<const char*, 5> kQwords = {"what", "where", "when", "why", "how"};
constexpr std::array<const char*, 4> kAux = {"do", "did", "will", "can"};
constexpr std::array<const char*, 4> kPronouns = {"you", "i", "we", "they"};
constexpr std::array<const char*, 4> kReplyPronouns = {"i", "you", "we", "they"};
constexpr std::array<const char*, 4> kDets = {"the", "a", "my", "your"};
constexpr std::array<const char*, 4> kPreps = {"with", "for", "near", "after"};
constexpr std::array<const char*, 6> kOpeners = {"yes", "no", "well", "sure", "maybe", "oh"};
constexpr std::array<const char*, 6> kAdverbs = {"today", "tomorrow", "again", "soon", "later",
                                                 "often"};
constexpr std::array<const char*, 2> kEnds = {".", "!"};

template <class A>
const char* pick(const A& arr, std::mt19937_64& rng) {
  return arr[rng() % arr.size()];
}

}  // namespace

std::vector<TextPair> generate_dialog_corpus(std::size_t pairs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  std::bernoulli_distribution mostly(0.75);
  std::vector<TextPair> out;
  out.reserve(pairs);
  for (std::size_t i = 0; i < pairs; ++i) {
    const std::size_t topic = rng() % kTopics.size();
    const Topic& tp = kTopics[topic];
    const std::size_t pron = rng() % kPronouns.size();
    const char* verb = pick(tp.verbs, rng);
    const char* noun = pick(tp.nouns, rng);

    TextPair p;
    p.x = {pick(kQwords, rng), pick(kAux, rng), kPronouns[pron], verb, pick(kDets, rng)};
    if (coin(rng)) p.x.push_back(pick(tp.adjs, rng));
    p.x.push_back(noun);
    p.x.push_back("?");

    p.y = {pick(kOpeners, rng), kReplyPronouns[pron]};
    p.y.push_back(mostly(rng) ? verb : pick(tp.verbs, rng));
    p.y.push_back(pick(kDets, rng));
    if (coin(rng)) p.y.push_back(pick(tp.adjs, rng));
    p.y.push_back(mostly(rng) ? noun : pick(tp.nouns, rng));
    if (coin(rng)) {
      const Topic& other = mostly(rng) ? tp : kTopics[rng() % kTopics.size()];
      p.y.push_back(pick(kPreps, rng));
      p.y.push_back(pick(kDets, rng));
      p.y.push_back(pick(other.nouns, rng));
    }
    if (coin(rng)) p.y.push_back(pick(kAdverbs, rng));
    p.y.push_back(pick(kEnds, rng));
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace tigs
