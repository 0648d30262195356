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
#include <string>
#include <vector>

#include "json.hpp"
#include "tigs/baselines.hpp"
#include "tigs/bleu.hpp"
#include "tigs/corpus.hpp"
#include "tigs/tigs.hpp"

namespace tigs {

enum class Algorithm { kTigs, kBeamForward, kBeamBackward, kBeamBoth, kBibs, kGsn };

Algorithm parse_algorithm(std::string_view s);
const char* algorithm_name(Algorithm a);     // flag spelling: tigs, bs-f, ...
const char* algorithm_display(Algorithm a);  // table row label
std::vector<Algorithm> all_algorithms();

/// Checkpoints an inference run may draw on. Which ones must be present
/// depends on the algorithm; the forward model is always required because
/// it supplies greedy initializations and the inference-model NLL.
struct InferenceModels {
  const ModelParams* forward = nullptr;
  const ModelParams* backward = nullptr;
  const ModelParams* birnn = nullptr;

  void require(Algorithm a) const;
};

struct InferenceConfig {
  TigsConfig tigs;
  std::size_t beam_width = 5;
  std::size_t max_rounds = 50;  // BiBS and GSN
  std::uint64_t seed = 1;       // GSN draws use derive_seed(seed, "gsn", instance)

  nlohmann::json to_json() const;
  static InferenceConfig from_json(const nlohmann::json& j);
};

struct InstanceResult {
  std::size_t id = 0;
  Algorithm algorithm = Algorithm::kTigs;
  bool ok = false;
  std::string error;
  std::vector<int> sequence;
  double nll = 0.0;  // inference (forward) model, per token
  double ms = 0.0;
  DecodeStats stats;
  std::vector<double> round_nll;  // TIGS only: [0] is the initial fill
  std::size_t rounds = 0;         // TIGS, BiBS
};

InstanceResult infill_instance(const InferenceModels& models, Algorithm algorithm,
                               const InferenceConfig& config, std::size_t id,
                               std::span<const int> x, const Template& tmpl);

/// Runs every instance, optionally on `workers` threads; results come back in
/// instance order regardless of completion order.
std::vector<InstanceResult> infill_all(const InferenceModels& models, Algorithm algorithm,
                                       const InferenceConfig& config,
                                       const std::vector<std::vector<int>>& sources,
                                       const std::vector<Template>& templates,
                                       std::size_t workers = 1);

/// Mean over instances of per-token sequence NLL under the evaluation LM.
double eval_nll(const ModelParams& lm, const std::vector<SequencePair>& instances,
                const Vocab* vocab = nullptr);

struct CellReport {
  Algorithm algorithm = Algorithm::kTigs;
  MaskStrategy strategy = MaskStrategy::kMiddle;
  double ratio = 0.0;
  std::size_t instances = 0;
  std::size_t failures = 0;
  double inference_nll = 0.0;  // mean per-token NLL under the forward model
  double inference_nll_std = 0.0;
  std::optional<double> eval_nll;  // mean per-token NLL under the eval LM
  double bleu = 0.0;               // against the ground-truth target
  std::optional<double> sampled_bleu;
  double preservation = 0.0;  // fraction of outputs that keep every template token
  double mean_ms = 0.0;
};

struct EvalReport {
  std::vector<CellReport> cells;
  std::size_t sampled_pool_size = 0;
  double bleu_epsilon = kBleuEpsilon;

  const CellReport& cell(Algorithm a, MaskStrategy s, double ratio) const;
};

struct GridInstance {
  std::size_t id = 0;
  MaskStrategy strategy = MaskStrategy::kMiddle;
  double ratio = 0.0;
  Template tmpl;
  InstanceResult result;
};

struct GridOptions {
  std::vector<Algorithm> algorithms = all_algorithms();
  std::vector<MaskStrategy> strategies = {MaskStrategy::kMiddle, MaskStrategy::kRandom};
  std::vector<double> ratios = {0.25, 0.5, 0.75};
  std::uint64_t mask_seed = 1;
  std::size_t sampled_pool_size = 0;  // 0 disables sampled-reference BLEU
  std::size_t workers = 1;
};

/// Masks every test target once per cell (seed derived from the instance
/// id), fills the identical templates with every algorithm and aggregates.
/// Failed instances are excluded from the means and counted.
EvalReport run_grid(const InferenceModels& models, const ModelParams* eval_lm,
                    const std::vector<SequencePair>& test_set, const GridOptions& options,
                    const InferenceConfig& config, std::vector<GridInstance>* per_instance = nullptr);

/// Aggregates one cell from its instance results; results[i] fills
/// templates[i], whose ground truth is truth[i].
CellReport aggregate_cell(Algorithm algorithm, MaskStrategy strategy, double ratio,
                          const std::vector<InstanceResult>& results,
                          const std::vector<Template>& templates,
                          const std::vector<SequencePair>& truth, const ModelParams* eval_lm,
                          std::size_t sampled_pool_size, std::uint64_t seed);

void write_report_tsv(const std::string& path, const EvalReport& report, const std::string& header);
/// Algorithms as rows; per strategy and ratio an NLL and a BLEU column.
std::string render_table(const EvalReport& report);
void write_fills_tsv(const std::string& path, const std::vector<InstanceResult>& results,
                     const Vocab& vocab, const std::string& header, bool timing = true);
std::vector<InstanceResult> read_fills_tsv(const std::string& path, const Vocab& vocab);
void write_instances_tsv(const std::string& path, const std::vector<GridInstance>& rows,
                         const Vocab& vocab, const std::string& header, bool timing = true);

}  // namespace tigs
