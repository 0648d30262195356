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
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "tigs/corpus.hpp"
#include "tigs/model.hpp"

namespace tigs {

enum class Optimizer { kSgd, kNesterov };
Optimizer parse_optimizer(std::string_view s);
const char* optimizer_name(Optimizer o);

/// Which of the four checkpoints a training run produces.
enum class Role { kForward, kBackward, kBiRnn, kEvalLm };
Role parse_role(std::string_view s);
const char* role_name(Role r);

struct TrainConfig {
  double learning_rate = 0.5;
  std::size_t batch_size = 16;
  std::size_t epochs = 10;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;
  Optimizer optimizer = Optimizer::kSgd;
  double momentum = 0.9;
  double valid_fraction = 0.1;
  bool halve_on_plateau = false;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct EpochStats {
  std::size_t epoch = 0;
  double train_nll = 0.0;  // mean per-token
  double valid_nll = 0.0;  // mean per-token; equals train_nll when there is no split
};

struct TrainResult {
  ModelParams params;  // best by validation NLL
  std::vector<EpochStats> history;
  std::size_t best_epoch = 0;
  bool diverged = false;
};

/// Decoder kind a role trains; the eval LM is a forward model.
DecoderKind decoder_for_role(Role role);

/// Backward models see reversed targets; every other role sees the corpus as is.
std::vector<SequencePair> corpus_for_role(const std::vector<SequencePair>& corpus, Role role);

using EpochCallback = std::function<void(const EpochStats&)>;

/// Teacher-forced MLE. Epoch 0 holds the loss of the freshly initialized
/// model. Returns the best-validation parameters; on a non-finite loss or
/// gradient training stops and the last finite best is returned with
/// `diverged` set.
TrainResult train(const TrainConfig& config, const std::vector<SequencePair>& corpus,
                  const ModelConfig& model_config, const EpochCallback& on_epoch = {});

/// Mean per-token training objective over the corpus: terminated NLL for
/// uni-directional decoders, pseudo-likelihood for BiRNN decoders.
double corpus_nll(const ModelParams& params, const std::vector<SequencePair>& corpus);

/// Scales every gradient so the global L2 norm is at most max_norm. Returns
/// the norm before clipping.
double clip_global_norm(std::map<std::string, Tensor>& grads, double max_norm);

void write_loss_history(const std::string& path, const std::vector<EpochStats>& history,
                        const std::string& header);

}  // namespace tigs
