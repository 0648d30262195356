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

#include "json.hpp"
#include "tigs/baselines.hpp"
#include "tigs/optim.hpp"

namespace tigs {

enum class Distance { kEuclidean, kCosine };
enum class InitStrategy { kGreedy, kRandom };

Distance parse_distance(std::string_view s);
InitStrategy parse_init(std::string_view s);

struct TigsConfig {
  std::size_t k = 0;  // candidate-set size; 0 means ceil(1% of the vocabulary)
  std::size_t max_rounds = 50;
  double lambda = 0.01;
  double alpha = 1.0;
  double momentum = 0.9;
  std::size_t o_steps = 1;  // gradient updates per blank per round
  Distance distance = Distance::kEuclidean;
  InitStrategy init = InitStrategy::kGreedy;
  std::uint64_t seed = 0;  // random init only
  std::string convergence = "no-change";

  /// K actually used: the configured or default value, capped at the number
  /// of fillable tokens.
  std::size_t effective_k(std::size_t vocab_size) const;
  void validate(std::size_t vocab_size) const;
  nlohmann::json to_json() const;
  static TigsConfig from_json(const nlohmann::json& j);
};

struct InfillState {
  std::vector<int> fill;             // one token per blank
  std::vector<Tensor> fill_emb;      // one continuous vector per blank
  std::vector<NesterovState> optim;  // one per blank
  std::vector<int> sequence;         // template with the fill substituted
  double nll = 0.0;                  // sequence NLL of `sequence`
  std::size_t round = 0;
};

struct TraceEntry {
  std::size_t round = 0;
  std::size_t blank = 0;
  int token = 0;
  double nll = 0.0;  // after the P-step
};

struct TigsResult {
  std::vector<int> sequence;
  double nll = 0.0;
  std::vector<double> round_nll;  // [0] is the initial fill
  std::size_t rounds = 0;
  bool converged = false;
  std::vector<TraceEntry> trace;
  std::vector<DecodeStats> round_stats;  // per executed round
  DecodeStats total;                     // rounds only; excludes initialization
  DecodeStats init_stats;
  std::size_t skipped_updates = 0;  // O-steps dropped on a non-finite gradient
};

/// Greedy: the width-1 forward beam fill. Random: uniform fillable tokens
/// drawn from config.seed. Embeddings start on their tokens' rows.
InfillState initialize_fill(const BoundModel& model, const Template& tmpl, const TigsConfig& config,
                            DecodeStats* stats = nullptr);

/// Nesterov updates of blank j's embedding against the penalized infill loss,
/// all other blanks held fixed. Returns false when a non-finite gradient
/// caused the update to be skipped.
bool o_step(const BoundModel& model, const Template& tmpl, InfillState& state, std::size_t j,
            const TigsConfig& config, DecodeStats* stats = nullptr);

/// Evaluates the K nearest tokens to blank j's embedding plus the incumbent,
/// keeps the NLL argmin (ties to the lower index) and snaps the embedding to
/// its row with zero velocity.
void p_step(const BoundModel& model, const Template& tmpl, InfillState& state, std::size_t j,
            const TigsConfig& config, DecodeStats* stats = nullptr);

/// The K nearest fillable tokens to `query`, nearest first, ties to the lower index.
std::vector<int> nearest_tokens(const Tensor& embeddings, const Tensor& query, std::size_t k,
                                Distance distance);

TigsResult tigs_infill(const BoundModel& model, const Template& tmpl, const TigsConfig& config);

struct UnknownLengthResult {
  TigsResult best;
  std::size_t length = 0;
  std::vector<std::pair<std::size_t, double>> ranking;  // (length, mean per-token NLL)
};

/// `gapped` holds exactly one blank marking a gap of unknown length. The gap
/// is expanded to each length in `lengths`, filled, and candidates ranked by
/// mean per-token terminated NLL (ties to the shorter length), so that the
/// end-of-sequence prediction takes part in the comparison.
UnknownLengthResult tigs_unknown_length(const BoundModel& model, const Template& gapped,
                                        std::span<const std::size_t> lengths,
                                        const TigsConfig& config);

void write_trace(const std::string& path, const TigsResult& result, const std::string& header);

}  // namespace tigs
