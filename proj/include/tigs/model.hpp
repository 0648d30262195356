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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tigs/mask.hpp"
#include "tigs/tape.hpp"
#include "tigs/tensor.hpp"

namespace tigs {

enum class DecoderKind { kForward, kBackward, kBiRnn };
enum class AttentionKind { kBilinear, kNone };

const char* decoder_kind_name(DecoderKind k);
DecoderKind parse_decoder_kind(std::string_view s);

/// Shape of an LSTM attention seq2seq model. Unconditional models (plain
/// LMs over y) have no encoder and no attention.
struct ModelConfig {
  std::size_t src_vocab = 0;
  std::size_t tgt_vocab = 0;
  std::size_t emb_dim = 64;
  std::size_t hidden_dim = 128;
  bool bidirectional_encoder = true;
  DecoderKind decoder = DecoderKind::kForward;
  AttentionKind attention = AttentionKind::kBilinear;

  bool conditional() const { return attention != AttentionKind::kNone; }
  std::size_t enc_dim() const { return bidirectional_encoder ? 2 * hidden_dim : hidden_dim; }
  void validate() const;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
  bool operator==(const ModelConfig&) const = default;
};

/// Every trainable array, by name. See docs/checkpoint_format.md for the
/// names and shapes each configuration carries.
struct ModelParams {
  ModelConfig config;
  std::map<std::string, Tensor> arrays;

  static ModelParams init(const ModelConfig& config, std::uint64_t seed, double scale = 0.1);
  static std::map<std::string, Shape> expected_shapes(const ModelConfig& config);

  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);
  /// Target-side embedding table, the candidate space for blank fills.
  const Tensor& target_embeddings() const { return get("tgt_emb"); }
  std::size_t num_parameters() const;
  /// Shapes match the config and every value is finite.
  void validate() const;
};

struct EncoderOutput {
  std::vector<Tensor> states;  // one per source token, enc_dim wide
  Tensor memory;               // states stacked, n x enc_dim
  Tensor final;                // [last forward state; first backward state]
  std::size_t size() const { return states.size(); }
};

struct DecoderState {
  Tensor h;
  Tensor c;
};

struct DecoderStepOutput {
  Tensor probs;      // P(. | prefix, x) over the target vocabulary
  Tensor log_probs;
  Tensor attention;  // empty for unconditional models
  Tensor context;
  DecoderState next;
};

EncoderOutput encode(const ModelParams& params, std::span<const int> x);

DecoderState initial_state(const ModelParams& params, const EncoderOutput* enc);

/// Feeds y_t (or an explicit input embedding) and returns the distribution
/// of the next token. `enc` must be given iff the model is conditional.
DecoderStepOutput decoder_step(const ModelParams& params, const DecoderState& state, int y_t,
                               const EncoderOutput* enc);
DecoderStepOutput decoder_step_embedded(const ModelParams& params, const DecoderState& state,
                                        std::span<const double> input_emb,
                                        const EncoderOutput* enc);

/// Cheaper step for scoring: updates `state` in place and writes the
/// next-token log-probabilities.
void advance(const ModelParams& params, DecoderState& state, int y_t, const EncoderOutput* enc,
             std::span<double> log_probs);

struct Nll {
  double total = 0.0;
  double per_token = 0.0;
};

/// -sum_t log P(y_t | y_<t, x) over the m target tokens (no end-of-sequence term).
Nll sequence_nll(const ModelParams& params, std::span<const int> x, std::span<const int> y);
Nll sequence_nll(const ModelParams& params, const EncoderOutput* enc, std::span<const int> y);

/// sequence_nll plus the end-of-sequence term; per_token divides by m + 1.
/// This is the quantity uni-directional decoders are trained on.
Nll terminated_nll(const ModelParams& params, const EncoderOutput* enc, std::span<const int> y);

/// Encodes x when the model is conditional; nullptr-equivalent otherwise.
std::optional<EncoderOutput> maybe_encode(const ModelParams& params, std::span<const int> x);
inline const EncoderOutput* enc_ptr(const std::optional<EncoderOutput>& e) {
  return e ? &*e : nullptr;
}

struct FillLoss {
  double loss = 0.0;  // nll + lambda * sum_j ||emb_j||
  double nll = 0.0;
  std::vector<Tensor> grads;  // d loss / d emb_j
};

/// Infill objective with L2 penalty. The decoder input at each blank slot is
/// blank_embs[j] in place of the embedding lookup; the cross-entropy target
/// there is the current discrete fill[j].
FillLoss fill_loss_and_grads(const ModelParams& params, const EncoderOutput* enc,
                             const Template& tmpl, std::span<const int> fill,
                             std::span<const Tensor> blank_embs, double lambda);
FillLoss fill_loss_and_grads(const ModelParams& params, std::span<const int> x,
                             const Template& tmpl, std::span<const int> fill,
                             std::span<const Tensor> blank_embs, double lambda);

/// P(y_t | y_{!=t}, x) from a BiRNN-decoder model. y[t] itself is ignored.
Tensor birnn_conditional(const ModelParams& params, const EncoderOutput* enc,
                         std::span<const int> y, std::size_t t);
Tensor birnn_conditional(const ModelParams& params, std::span<const int> x,
                         std::span<const int> y, std::size_t t);

struct DirectionalProb {
  double fwd = 0.0;  // forward model P(y_t | y_<t, x)
  double bwd = 0.0;  // backward model P(y_t | y_>t, x), fed the reversed sequence
};

DirectionalProb directional_prob(const ModelParams& fwd, const ModelParams& bwd,
                                 std::span<const int> x, std::span<const int> y, std::size_t t);

std::vector<int> reverse_sequence(std::span<const int> y);

/// Parameters bound onto a tape, either watched (training) or as constants.
class ParamBinding {
 public:
  ParamBinding(Tape& tape, const ModelParams& params, bool trainable)
      : tape_(tape), params_(params), trainable_(trainable) {}

  Var operator()(const std::string& name);
  const std::map<std::string, Var>& bound() const { return bound_; }
  Tape& tape() { return tape_; }
  const ModelParams& params() const { return params_; }

 private:
  Tape& tape_;
  const ModelParams& params_;
  bool trainable_;
  std::map<std::string, Var> bound_;
};

/// Teacher-forced training loss of one pair recorded on the binding's tape:
/// terminated NLL for uni-directional decoders, the sum of per-position
/// conditionals for BiRNN decoders. Returns the total (not averaged).
Var record_training_loss(ParamBinding& binding, const std::vector<int>& x,
                         const std::vector<int>& y);

}  // namespace tigs
