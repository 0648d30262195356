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

#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "tigs/tigs.hpp"
#include "tigs/trainer.hpp"

using namespace tigs;
using namespace tigs::testing;

namespace {

TigsConfig full_k(std::size_t vocab) {
  TigsConfig c;
  c.k = vocab;
  return c;
}

double nll(const BoundModel& m, std::span<const int> y) {
  return sequence_nll(*m.params, m.encoding(), y).total;
}

}  // namespace

TEST(Tigs, DefaultKIsOnePercentOfVocabulary) {
  TigsConfig c;
  EXPECT_EQ(c.effective_k(250), 3u);
  EXPECT_EQ(c.effective_k(100), 1u);
  c.k = 500;
  EXPECT_THROW(c.validate(250), std::invalid_argument);
  c.k = 250;
  EXPECT_EQ(c.effective_k(250), 245u);
  c.lambda = -1.0;
  EXPECT_THROW(c.validate(250), std::invalid_argument);
}

TEST(Tigs, InitializationStrategies) {
  std::mt19937_64 rng(1);
  const auto p = sharp_model(tiny_config(DecoderKind::kForward, 12), 3);
  const auto x = random_tokens(3, 12, rng);
  const BoundModel m(p, x);
  const Template t = mask_middle(random_tokens(7, 12, rng), 0.5);
  TigsConfig c;
  const InfillState g = initialize_fill(m, t, c);
  EXPECT_EQ(g.sequence, beam_fill_forward(m, t, 1).sequence);
  for (std::size_t j = 0; j < t.num_blanks(); ++j)
    for (std::size_t k = 0; k < p.config.emb_dim; ++k)
      EXPECT_EQ(g.fill_emb[j][k], p.target_embeddings().at(static_cast<std::size_t>(g.fill[j]), k));
  EXPECT_NEAR(g.nll, nll(m, g.sequence), 1e-12);

  c.init = InitStrategy::kRandom;
  c.seed = 17;
  const InfillState r1 = initialize_fill(m, t, c), r2 = initialize_fill(m, t, c);
  EXPECT_EQ(r1.fill, r2.fill);
  for (int v : r1.fill) EXPECT_TRUE(Vocab::is_fillable(v));
  EXPECT_THROW(initialize_fill(m, Template::from_tokens({5, 6}), c), std::invalid_argument);
}

TEST(Tigs, ZeroStepSizeLeavesEmbeddingUnchanged) {
  std::mt19937_64 rng(2);
  const auto p = sharp_model(tiny_config(DecoderKind::kForward, 12), 4);
  const BoundModel m(p, random_tokens(3, 12, rng));
  const Template t = mask_middle(random_tokens(6, 12, rng), 0.5);
  TigsConfig c;
  c.alpha = 0.0;
  InfillState st = initialize_fill(m, t, c);
  const Tensor before = st.fill_emb[0];
  ASSERT_TRUE(o_step(m, t, st, 0, c));
  EXPECT_EQ(st.fill_emb[0], before);
}

TEST(Tigs, PenaltyAloneShrinksTheNorm) {
  std::mt19937_64 rng(3);
  const auto p = sharp_model(tiny_config(DecoderKind::kForward, 12), 5);
  const BoundModel m(p, random_tokens(3, 12, rng));
  // A blank in the last slot is never fed to the decoder, so only the
  // penalty has gradient.
  auto y = random_tokens(5, 12, rng);
  y.back() = kBlank;
  const Template t = Template::from_tokens(y);
  TigsConfig c;
  c.lambda = 1.0;
  c.alpha = 0.01;
  InfillState st = initialize_fill(m, t, c);
  double prev = std::sqrt(kernels::dot(st.fill_emb[0].data(), st.fill_emb[0].data()));
  for (int i = 0; i < 10; ++i) {
    ASSERT_TRUE(o_step(m, t, st, 0, c));
    const double norm = std::sqrt(kernels::dot(st.fill_emb[0].data(), st.fill_emb[0].data()));
    EXPECT_LT(norm, prev);
    prev = norm;
  }
}

TEST(Tigs, SmallStepDescendsThePenalizedLoss) {
  std::mt19937_64 rng(4);
  int checked = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = sharp_model(tiny_config(DecoderKind::kForward, 12), 40 + trial);
    const BoundModel m(p, random_tokens(3, 12, rng));
    const Template t = mask_middle(random_tokens(6, 12, rng), 0.5);
    TigsConfig c;
    c.alpha = 1e-4;
    c.lambda = 0.1;
    InfillState st = initialize_fill(m, t, c);
    const FillLoss before = fill_loss_and_grads(p, m.encoding(), t, st.fill, st.fill_emb, c.lambda);
    if (kernels::dot(before.grads[0].data(), before.grads[0].data()) < 1e-12) continue;
    ASSERT_TRUE(o_step(m, t, st, 0, c));
    const FillLoss after = fill_loss_and_grads(p, m.encoding(), t, st.fill, st.fill_emb, c.lambda);
    EXPECT_LT(after.loss, before.loss);
    ++checked;
  }
  EXPECT_GT(checked, 10);
}

TEST(Tigs, NearestTokens) {
  Tensor emb(Shape{8, 2}, {0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 1, 2, 2});
  EXPECT_EQ(nearest_tokens(emb, Tensor::vector({1, 0}), 1, Distance::kEuclidean), (std::vector<int>{5}));
  EXPECT_EQ(nearest_tokens(emb, Tensor::vector({0.5, 0.5}), 2, Distance::kEuclidean), (std::vector<int>{5, 6}));
  EXPECT_EQ(nearest_tokens(emb, Tensor::vector({3, 3}), 1, Distance::kCosine), (std::vector<int>{7}));
  EXPECT_EQ(nearest_tokens(emb, Tensor::vector({0, 0}), 9, Distance::kEuclidean).size(), 3u);
}

TEST(Tigs, PStepCandidateSetAndMonotonicity) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t V = 12;
    const auto p = sharp_model(tiny_config(DecoderKind::kForward, V), 60 + trial);
    const BoundModel m(p, random_tokens(3, V, rng));
    const Template t = mask_random(random_tokens(6, V, rng), 0.5, trial);
    TigsConfig c;
    c.k = 1;
    c.init = InitStrategy::kRandom;
    c.seed = trial;
    InfillState st = initialize_fill(m, t, c);
    // Embedding on its own row: S = {incumbent, incumbent}.
    DecodeStats stats;
    const double before = st.nll;
    const int inc = st.fill[0];
    p_step(m, t, st, 0, c, &stats);
    EXPECT_EQ(stats.candidate_evals, 2u);
    EXPECT_EQ(st.fill[0], inc);
    EXPECT_EQ(st.nll, before);

    // Full K: global per-position argmin.
    const TigsConfig full = full_k(V);
    const std::size_t j = t.num_blanks() - 1;
    double best = INFINITY;
    int best_tok = -1;
    for (int v = kNumSpecials; v < static_cast<int>(V); ++v) {
      auto y = st.sequence;
      y[t.blanks[j]] = v;
      const double n = nll(m, y);
      if (n < best) best = n, best_tok = v;
    }
    o_step(m, t, st, j, full);
    const double pre = st.nll;
    p_step(m, t, st, j, full);
    EXPECT_EQ(st.fill[j], best_tok);
    EXPECT_LE(st.nll, pre);
    EXPECT_NEAR(st.nll, nll(m, st.sequence), 1e-12);
  }
}

TEST(Tigs, SingleBlankFullKFindsExhaustiveArgminInRoundOne) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t V = 15;
    const auto p = sharp_model(tiny_config(DecoderKind::kForward, V, trial % 2 == 0), 80 + trial);
    const BoundModel m(p, random_tokens(3, V, rng));
    auto y = random_tokens(5, V, rng);
    y[rng() % y.size()] = kBlank;
    const Template t = Template::from_tokens(y);
    std::vector<int> best;
    double bn = INFINITY;
    for_each_fill(t, V, [&](const std::vector<int>& c) {
      const double n = nll(m, c);
      if (n < bn) bn = n, best = c;
    });
    const TigsResult r = tigs_infill(m, t, full_k(V));
    EXPECT_EQ(r.sequence, best);
    EXPECT_EQ(r.trace.front().token, best[t.blanks[0]]);
    EXPECT_LE(r.rounds, 2u);
  }
}

TEST(Tigs, RunInvariants) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t V = 20;
    const auto p = sharp_model(tiny_config(DecoderKind::kForward, V, trial % 2 == 1), 120 + trial);
    const BoundModel m(p, random_tokens(4, V, rng));
    const Template t = mask_random(random_tokens(4 + rng() % 6, V, rng), 0.5, trial);
    TigsConfig c;
    c.k = 1 + trial % 5;
    c.o_steps = 1 + trial % 2;
    c.init = trial % 3 == 0 ? InitStrategy::kRandom : InitStrategy::kGreedy;
    c.seed = trial;
    const TigsResult r = tigs_infill(m, t, c);
    EXPECT_TRUE(t.preserved_by(r.sequence));
    EXPECT_NEAR(r.nll, nll(m, r.sequence), 1e-4);
    for (std::size_t i = 1; i < r.round_nll.size(); ++i) EXPECT_LE(r.round_nll[i], r.round_nll[i - 1]);
    const std::size_t B = t.num_blanks(), K = c.effective_k(V), len = t.length();
    for (const auto& s : r.round_stats) {
      EXPECT_EQ(s.candidate_evals, B * (K + 1));
      EXPECT_EQ(s.decoder_steps, len * B * (K + 1) + c.o_steps * len * B);
    }
    EXPECT_EQ(r.round_stats.size(), r.rounds);
    const TigsResult again = tigs_infill(m, t, c);
    EXPECT_EQ(again.sequence, r.sequence);
    EXPECT_EQ(again.round_nll, r.round_nll);
  }
}

TEST(Tigs, FixedPointIsCoordinatewiseOptimal) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 15; ++trial) {
    const std::size_t V = 16;
    const auto p = sharp_model(tiny_config(DecoderKind::kForward, V), 160 + trial);
    const BoundModel m(p, random_tokens(3, V, rng));
    const Template t = mask_random(random_tokens(5, V, rng), 0.5, trial);
    const TigsResult r = tigs_infill(m, t, full_k(V));
    ASSERT_TRUE(r.converged);
    for (std::size_t pos : t.blanks) {
      for (int v = kNumSpecials; v < static_cast<int>(V); ++v) {
        auto y = r.sequence;
        y[pos] = v;
        EXPECT_GE(nll(m, y), r.nll);
      }
    }
  }
}

TEST(Tigs, ZeroChangeRoundTerminatesWithInit) {
  std::mt19937_64 rng(9);
  const std::size_t V = 12;
  const auto p = sharp_model(tiny_config(DecoderKind::kForward, V), 9);
  const BoundModel m(p, random_tokens(3, V, rng));
  const Template t = mask_middle(random_tokens(6, V, rng), 0.5);
  // With no movement and K = 1 the only candidate is the incumbent.
  TigsConfig c;
  c.alpha = 0.0;
  c.k = 1;
  const TigsResult r = tigs_infill(m, t, c);
  EXPECT_EQ(r.rounds, 1u);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.sequence, beam_fill_forward(m, t, 1).sequence);
}

TEST(Tigs, UnknownLength) {
  std::mt19937_64 rng(10);
  const std::size_t V = 12;
  const auto p = sharp_model(tiny_config(DecoderKind::kForward, V), 10);
  const BoundModel m(p, random_tokens(3, V, rng));
  const Template gapped = Template::from_tokens({5, 6, kBlank, 7});
  const std::size_t one[] = {2};
  const auto single = tigs_unknown_length(m, gapped, one, TigsConfig{});
  EXPECT_EQ(single.best.sequence,
            tigs_infill(m, Template::from_tokens({5, 6, kBlank, kBlank, 7}), TigsConfig{}).sequence);
  const std::size_t range[] = {1, 2, 3, 4};
  const auto r = tigs_unknown_length(m, gapped, range, TigsConfig{});
  for (const auto& [len, score] : r.ranking) EXPECT_GE(score, r.ranking[r.length - 1].second);
  EXPECT_THROW(tigs_unknown_length(m, gapped, std::span<const std::size_t>{}, TigsConfig{}),
               std::invalid_argument);
}

TEST(Tigs, UnknownLengthRecoversMemorizedLength) {
  // Three sentences of different lengths keyed by their source token.
  std::vector<SequencePair> corpus = {{{5}, {6, 7, 8, 9, 10, 11}},
                                      {{6}, {12, 13, 14, 15}},
                                      {{7}, {16, 17, 18, 19, 20, 21, 22}}};
  ModelConfig mc = tiny_config(DecoderKind::kForward, 25, true, 8, 24);
  TrainConfig tc;
  tc.learning_rate = 0.5;
  tc.batch_size = 1;
  tc.epochs = 400;
  tc.valid_fraction = 0.0;
  const TrainResult tr = train(tc, corpus, mc);
  ASSERT_LT(corpus_nll(tr.params, corpus), 0.1);
  for (const auto& s : corpus) {
    const BoundModel m(tr.params, s.x);
    std::vector<int> g = {s.y.front(), kBlank, s.y.back()};
    const std::size_t range[] = {1, 2, 3, 4, 5, 6};
    const auto r = tigs_unknown_length(m, Template::from_tokens(g), range, TigsConfig{});
    EXPECT_EQ(r.length, s.y.size() - 2);
    EXPECT_EQ(r.best.sequence, s.y);
  }
}
