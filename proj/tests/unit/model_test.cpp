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
#include <random>

#include "tigs/corpus.hpp"
#include "tigs/model.hpp"
#include "tigs/optim.hpp"

using namespace tigs;

namespace {

ModelConfig small_config(DecoderKind dec, bool conditional, std::size_t vocab = 12) {
  ModelConfig c;
  c.src_vocab = conditional ? vocab : 0;
  c.tgt_vocab = vocab;
  c.emb_dim = 4;
  c.hidden_dim = 5;
  c.decoder = dec;
  c.attention = conditional ? AttentionKind::kBilinear : AttentionKind::kNone;
  return c;
}

// Random weights at a scale that makes the distributions far from uniform.
ModelParams random_model(const ModelConfig& c, std::uint64_t seed) {
  return ModelParams::init(c, seed, 0.8);
}

std::vector<int> random_seq(std::size_t len, std::size_t vocab, std::mt19937_64& rng) {
  std::vector<int> y(len);
  for (int& t : y) t = static_cast<int>(kNumSpecials + rng() % (vocab - kNumSpecials));
  return y;
}

std::vector<Tensor> embedding_rows(const ModelParams& p, std::span<const int> fill) {
  std::vector<Tensor> out;
  const Tensor& e = p.target_embeddings();
  for (int id : fill) {
    Tensor r(Shape{e.cols()});
    for (std::size_t k = 0; k < e.cols(); ++k) r[k] = e.at(static_cast<std::size_t>(id), k);
    out.push_back(r);
  }
  return out;
}

double out_eos_log_prob(const ModelParams& p, const EncoderOutput* enc, const std::vector<int>& y) {
  auto st = initial_state(p, enc);
  st = decoder_step(p, st, kBos, enc).next;
  DecoderStepOutput out;
  for (int tok : y) {
    out = decoder_step(p, st, tok, enc);
    st = out.next;
  }
  return out.log_probs[kEos];
}

}  // namespace

TEST(Model, ConfigJsonRoundTrip) {
  for (auto dec : {DecoderKind::kForward, DecoderKind::kBackward, DecoderKind::kBiRnn}) {
    for (bool cond : {false, true}) {
      const auto c = small_config(dec, cond);
      EXPECT_EQ(ModelConfig::from_json(c.to_json()), c);
      const auto p = ModelParams::init(c, 1);
      EXPECT_NO_THROW(p.validate());
    }
  }
}

TEST(Model, EncoderShapes) {
  auto c = small_config(DecoderKind::kForward, true);
  auto p = random_model(c, 3);
  const std::vector<int> x1 = {7};
  const auto e1 = encode(p, x1);
  EXPECT_EQ(e1.size(), 1u);
  EXPECT_EQ(e1.states[0].size(), 2 * c.hidden_dim);
  const std::vector<int> x = {5, 6, 7, 8};
  const auto a = encode(p, x), b = encode(p, x);
  EXPECT_EQ(a.size(), 4u);
  EXPECT_EQ(a.memory, b.memory);
  const std::vector<int> bad = {99};
  EXPECT_THROW(encode(p, bad), std::out_of_range);

  c.bidirectional_encoder = false;
  p = random_model(c, 3);
  EXPECT_EQ(encode(p, x).states[0].size(), c.hidden_dim);
}

TEST(Model, AttentionOverSingleStateIsIdentity) {
  const auto p = random_model(small_config(DecoderKind::kForward, true), 4);
  const std::vector<int> x = {9};
  const auto enc = encode(p, x);
  const auto out = decoder_step(p, initial_state(p, &enc), kBos, &enc);
  ASSERT_EQ(out.attention.size(), 1u);
  EXPECT_DOUBLE_EQ(out.attention[0], 1.0);
  for (std::size_t k = 0; k < out.context.size(); ++k) EXPECT_DOUBLE_EQ(out.context[k], enc.states[0][k]);
}

TEST(Model, DistributionsAreValid) {
  std::mt19937_64 rng(1);
  const auto p = random_model(small_config(DecoderKind::kForward, true), 5);
  const auto x = random_seq(5, 12, rng);
  const auto enc = encode(p, x);
  auto st = initial_state(p, &enc);
  for (int tok : random_seq(6, 12, rng)) {
    const auto out = decoder_step(p, st, tok, &enc);
    double sp = 0.0, sa = 0.0;
    for (double v : out.probs.data()) {
      EXPECT_GT(v, 0.0);
      sp += v;
    }
    for (double v : out.attention.data()) sa += v;
    EXPECT_NEAR(sp, 1.0, 1e-6);
    EXPECT_NEAR(sa, 1.0, 1e-6);
    st = out.next;
  }
}

TEST(Model, ZeroProjectionGivesUniformNll) {
  auto p = ModelParams::init(small_config(DecoderKind::kForward, false, 10), 2);
  p.get("out_W").fill(0.0);
  p.get("out_b").fill(0.0);
  const std::vector<int> y = {5, 6, 7, 8};
  const Nll nll = sequence_nll(p, nullptr, y);
  EXPECT_NEAR(nll.total, 4.0 * std::log(10.0), 1e-12);
  EXPECT_NEAR(nll.per_token, std::log(10.0), 1e-12);
}

TEST(Model, SequenceNllRejectsBlank) {
  const auto p = random_model(small_config(DecoderKind::kForward, false), 2);
  const std::vector<int> y = {5, kBlank, 7};
  EXPECT_THROW(sequence_nll(p, nullptr, y), std::invalid_argument);
}

TEST(Model, SequenceNllMatchesStepAccumulationAndGraph) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const bool cond = trial % 2 == 0;
    const auto p = random_model(small_config(DecoderKind::kForward, cond), 100 + trial);
    const auto x = random_seq(1 + rng() % 6, 12, rng);
    const auto y = random_seq(1 + rng() % 8, 12, rng);
    auto enc = maybe_encode(p, x);
    const Nll nll = sequence_nll(p, enc_ptr(enc), y);
    EXPECT_GE(nll.total, 0.0);

    auto st = initial_state(p, enc_ptr(enc));
    double acc = 0.0;
    int prev = kBos;
    for (int tok : y) {
      const auto out = decoder_step(p, st, prev, enc_ptr(enc));
      acc -= out.log_probs[static_cast<std::size_t>(tok)];
      st = out.next;
      prev = tok;
    }
    EXPECT_EQ(acc, nll.total);

    Tape tape;
    ParamBinding b(tape, p, false);
    const Nll term = terminated_nll(p, enc_ptr(enc), y);
    EXPECT_NEAR(term.total - nll.total, -out_eos_log_prob(p, enc_ptr(enc), y), 1e-12);
    EXPECT_NEAR(record_training_loss(b, x, y).value().item(), term.total, 1e-10);
  }
}

TEST(Model, FillLossAtTrueRowsEqualsSequenceNll) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const bool cond = trial % 2 == 1;
    const auto p = random_model(small_config(DecoderKind::kForward, cond), 200 + trial);
    const auto x = random_seq(3, 12, rng);
    const auto y = random_seq(2 + rng() % 6, 12, rng);
    const Template t = mask_random(y, 0.5, trial);
    const auto fill = t.fill_of(y);
    const auto embs = embedding_rows(p, fill);
    const FillLoss fl = fill_loss_and_grads(p, x, t, fill, embs, 0.0);
    const Nll nll = sequence_nll(p, x, y);
    EXPECT_NEAR(fl.loss, nll.total, 1e-6);
    EXPECT_NEAR(fl.nll, nll.total, 1e-6);
  }
}

TEST(Model, FillLossPenaltyGradient) {
  // Only the penalty depends on an embedding fed after the final position,
  // so its gradient is exactly lambda * v / |v|.
  const auto p = random_model(small_config(DecoderKind::kForward, false), 3);
  const Template t = Template::from_tokens({5, 6, kBlank});
  const std::vector<int> fill = {7};
  const std::vector<Tensor> embs = {Tensor::vector({0.3, -0.4, 1.2, 0.0})};
  const double lambda = 0.7;
  const FillLoss fl = fill_loss_and_grads(p, nullptr, t, fill, embs, lambda);
  const double norm = std::sqrt(0.09 + 0.16 + 1.44);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(fl.grads[0][k], lambda * embs[0][k] / norm, 1e-14);
  EXPECT_THROW(fill_loss_and_grads(p, nullptr, t, fill, embs, -1.0), std::invalid_argument);
}

TEST(Model, FillLossGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> nd(0.0, 0.5);
  for (int trial = 0; trial < 12; ++trial) {
    const bool cond = trial % 3 != 0;
    const auto p = random_model(small_config(DecoderKind::kForward, cond), 300 + trial);
    const auto x = random_seq(4, 12, rng);
    const auto y = random_seq(4 + rng() % 4, 12, rng);
    const Template t = mask_random(y, 0.5, trial);
    const auto fill = t.fill_of(y);
    auto embs = embedding_rows(p, fill);
    for (auto& e : embs)
      for (double& v : e.data()) v += nd(rng);
    const double lambda = 0.05 * trial;
    const FillLoss fl = fill_loss_and_grads(p, x, t, fill, embs, lambda);
    for (std::size_t j = 0; j < embs.size(); ++j) {
      auto f = [&](const Tensor& v) {
        auto e2 = embs;
        e2[j] = v;
        return fill_loss_and_grads(p, x, t, fill, e2, lambda).loss;
      };
      const Tensor num = finite_diff_grad(f, embs[j], 1e-5);
      for (std::size_t k = 0; k < num.size(); ++k) {
        const double rel = std::abs(fl.grads[j][k] - num[k]) / std::max(1.0, std::abs(fl.grads[j][k]));
        EXPECT_LT(rel, 1e-4) << "trial " << trial << " blank " << j;
      }
    }
  }
}

TEST(Model, TrainingLossGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(12);
  for (auto dec : {DecoderKind::kForward, DecoderKind::kBiRnn}) {
    const auto p = random_model(small_config(dec, true, 8), 17);
    const auto x = random_seq(3, 8, rng);
    const auto y = random_seq(4, 8, rng);
    for (const char* name : {"tgt_emb", "out_W", "enc_f_W", "attn_W"}) {
      Tape tape;
      ParamBinding b(tape, p, true);
      Var loss = record_training_loss(b, x, y);
      const Var wrt[] = {b(name)};
      const Tensor g = tape.grad(loss, wrt)[0];
      auto f = [&](const Tensor& v) {
        ModelParams q = p;
        q.get(name) = v;
        Tape t2;
        ParamBinding b2(t2, q, false);
        return record_training_loss(b2, x, y).value().item();
      };
      const Tensor num = finite_diff_grad(f, p.get(name), 1e-5);
      for (std::size_t k = 0; k < num.size(); ++k)
        EXPECT_LT(std::abs(g[k] - num[k]) / std::max(1.0, std::abs(g[k])), 1e-4) << name;
    }
  }
}

TEST(Model, BirnnConditionalIsValidAndMatchesTrainingLoss) {
  std::mt19937_64 rng(13);
  for (bool cond : {false, true}) {
    const auto p = random_model(small_config(DecoderKind::kBiRnn, cond), 21);
    const auto x = random_seq(3, 12, rng);
    auto y = random_seq(6, 12, rng);
    double total = 0.0;
    for (std::size_t t = 0; t < y.size(); ++t) {
      const Tensor d = birnn_conditional(p, x, y, t);
      double s = 0.0;
      for (double v : d.data()) s += v;
      EXPECT_NEAR(s, 1.0, 1e-6);
      EXPECT_EQ(d, birnn_conditional(p, x, y, t));
      total -= std::log(d[static_cast<std::size_t>(y[t])]);
      // The token at t does not influence its own conditional.
      auto y2 = y;
      y2[t] = kUnk;
      EXPECT_EQ(d, birnn_conditional(p, x, y2, t));
    }
    Tape tape;
    ParamBinding b(tape, p, false);
    EXPECT_NEAR(record_training_loss(b, x, y).value().item(), total, 1e-9);
    EXPECT_THROW(birnn_conditional(p, x, y, y.size()), std::out_of_range);
  }
}

TEST(Model, DirectionalProbMatchesIndependentScoring) {
  std::mt19937_64 rng(14);
  const auto f = random_model(small_config(DecoderKind::kForward, true), 31);
  const auto b = random_model(small_config(DecoderKind::kBackward, true), 32);
  const auto x = random_seq(4, 12, rng);
  const auto y = random_seq(5, 12, rng);
  double lf = 0.0, lb = 0.0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    const auto d = directional_prob(f, b, x, y, t);
    EXPECT_GT(d.fwd, 0.0);
    EXPECT_LE(d.fwd, 1.0);
    EXPECT_GT(d.bwd, 0.0);
    EXPECT_LE(d.bwd, 1.0);
    lf += std::log(d.fwd);
    lb += std::log(d.bwd);
  }
  EXPECT_NEAR(-lf, sequence_nll(f, x, y).total, 1e-9);
  EXPECT_NEAR(-lb, sequence_nll(b, x, reverse_sequence(y)).total, 1e-9);

  // First position conditions only on BOS.
  const auto enc = encode(f, x);
  const auto out = decoder_step(f, initial_state(f, &enc), kBos, &enc);
  EXPECT_DOUBLE_EQ(directional_prob(f, b, x, y, 0).fwd, out.probs[static_cast<std::size_t>(y[0])]);

  const auto other = random_model(small_config(DecoderKind::kBackward, true, 13), 1);
  EXPECT_THROW(directional_prob(f, other, x, y, 0), std::invalid_argument);
}

TEST(Model, ReverseSequence) {
  const std::vector<int> y = {5, 6, 7};
  EXPECT_EQ(reverse_sequence(y), (std::vector<int>{7, 6, 5}));
  EXPECT_EQ(reverse_sequence(reverse_sequence(y)), y);
}
