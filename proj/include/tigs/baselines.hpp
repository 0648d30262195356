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
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "tigs/mask.hpp"
#include "tigs/model.hpp"

namespace tigs {

/// A model together with the encoding of one source sequence.
struct BoundModel {
  const ModelParams* params = nullptr;
  std::optional<EncoderOutput> enc;

  BoundModel(const ModelParams& p, std::span<const int> x) : params(&p), enc(maybe_encode(p, x)) {}
  const EncoderOutput* encoding() const { return enc_ptr(enc); }
  std::size_t vocab() const { return params->config.tgt_vocab; }
};

struct DecodeStats {
  std::size_t decoder_steps = 0;
  std::size_t candidate_evals = 0;
};

struct FillResult {
  std::vector<int> sequence;
  double log_prob = 0.0;  // score under the algorithm's own model(s)
  DecodeStats stats;
};

/// log P(y | x) under a uni-directional model, fed y as given.
double sequence_log_prob(const BoundModel& m, std::span<const int> y, DecodeStats* stats = nullptr);

/// Left-to-right beam search that forces the template's tokens and branches
/// over the top `width` fillable tokens at blanks.
FillResult beam_fill_forward(const BoundModel& fwd, const Template& tmpl, std::size_t width);

/// Right-to-left: the forward search on the reversed template under a model
/// trained on reversed targets. The result is un-reversed.
FillResult beam_fill_backward(const BoundModel& bwd, const Template& tmpl, std::size_t width);

/// Mean of the two models' length-normalized log-probabilities.
double combined_score(const BoundModel& fwd, const BoundModel& bwd, std::span<const int> y,
                      DecodeStats* stats = nullptr);

/// Runs both directional searches and keeps the candidate with the higher
/// combined score; ties go to the forward candidate.
FillResult beam_fill_both(const BoundModel& fwd, const BoundModel& bwd, const Template& tmpl,
                          std::size_t width);

/// log P_fwd(y) + log P_bwd(reverse(y)).
double product_score(const BoundModel& fwd, const BoundModel& bwd, std::span<const int> y,
                     DecodeStats* stats = nullptr);

inline constexpr std::uint64_t kOracleMaxEvaluations = 1000000;

/// Number of complete sequences an exhaustive search over the template
/// visits: fillable^blanks, saturating at UINT64_MAX.
std::uint64_t oracle_evaluations(const Template& tmpl, std::size_t vocab);

/// Exhaustive argmax of log P(y | x) over every fillable assignment to the
/// blanks; ties keep the lexicographically smallest fill. Throws when the
/// search would exceed max_evaluations.
FillResult oracle_fill(const BoundModel& model, const Template& tmpl,
                       std::uint64_t max_evaluations = kOracleMaxEvaluations);

struct BibsResult : FillResult {
  std::size_t rounds = 0;
};

/// Alternating left-to-right and right-to-left sweeps over the blanks of a
/// beam of complete assignments, starting from `init`. At each blank every
/// hypothesis proposes its top `width` tokens under p_fwd * p_bwd in the
/// current context plus its own token; proposals are ranked by the exact
/// product score and the best `width` distinct assignments survive. Stops
/// after a round that leaves the beam unchanged, or after max_rounds.
BibsResult bibs_fill(const BoundModel& fwd, const BoundModel& bwd, const Template& tmpl,
                     std::span<const int> init, std::size_t width, std::size_t max_rounds);

/// P(y_t | y_!=t, x) restricted to fillable tokens and renormalized.
std::vector<double> fillable_conditional(const BoundModel& birnn, std::span<const int> y,
                                         std::size_t t);

int gsn_resample(const BoundModel& birnn, std::span<const int> y, std::size_t t,
                 std::mt19937_64& rng);

/// Starting from `init`, resamples every blank in order for `rounds` rounds,
/// then replaces each blank with its conditional argmax in one final pass.
FillResult gsn_fill(const BoundModel& birnn, const Template& tmpl, std::span<const int> init,
                    std::size_t rounds, std::uint64_t seed);

}  // namespace tigs
