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

#include "tigs/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

namespace tigs {

Optimizer parse_optimizer(std::string_view s) {
  if (s == "sgd") return Optimizer::kSgd;
  if (s == "nesterov") return Optimizer::kNesterov;
  throw std::invalid_argument("unknown optimizer '" + std::string(s) + "'");
}

const char* optimizer_name(Optimizer o) { return o == Optimizer::kSgd ? "sgd" : "nesterov"; }

Role parse_role(std::string_view s) {
  if (s == "forward") return Role::kForward;
  if (s == "backward") return Role::kBackward;
  if (s == "birnn") return Role::kBiRnn;
  if (s == "eval-lm") return Role::kEvalLm;
  throw std::invalid_argument("unknown role '" + std::string(s) +
                              "' (expected forward, backward, birnn or eval-lm)");
}

const char* role_name(Role r) {
  switch (r) {
    case Role::kForward: return "forward";
    case Role::kBackward: return "backward";
    case Role::kBiRnn: return "birnn";
    case Role::kEvalLm: return "eval-lm";
  }
  return "?";
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("train: learning_rate must be > 0");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (!(clip_norm > 0.0)) throw std::invalid_argument("train: clip_norm must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("train: momentum must be in [0, 1)");
  if (!(valid_fraction >= 0.0 && valid_fraction < 1.0)) {
    throw std::invalid_argument("train: valid_fraction must be in [0, 1)");
  }
}

nlohmann::json TrainConfig::to_json() const {
  return {{"learning_rate", learning_rate}, {"batch_size", batch_size},
          {"epochs", epochs},               {"clip_norm", clip_norm},
          {"seed", seed},                   {"optimizer", optimizer_name(optimizer)},
          {"momentum", momentum},           {"valid_fraction", valid_fraction},
          {"halve_on_plateau", halve_on_plateau}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.seed = j.at("seed").get<std::uint64_t>();
  c.optimizer = parse_optimizer(j.value("optimizer", std::string("sgd")));
  c.momentum = j.value("momentum", c.momentum);
  c.valid_fraction = j.value("valid_fraction", c.valid_fraction);
  c.halve_on_plateau = j.value("halve_on_plateau", c.halve_on_plateau);
  c.validate();
  return c;
}

DecoderKind decoder_for_role(Role role) {
  switch (role) {
    case Role::kBackward: return DecoderKind::kBackward;
    case Role::kBiRnn: return DecoderKind::kBiRnn;
    default: return DecoderKind::kForward;
  }
}

std::vector<SequencePair> corpus_for_role(const std::vector<SequencePair>& corpus, Role role) {
  if (role != Role::kBackward) return corpus;
  std::vector<SequencePair> out = corpus;
  for (auto& p : out) std::reverse(p.y.begin(), p.y.end());
  return out;
}

double clip_global_norm(std::map<std::string, Tensor>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& [_, g] : grads)
    for (double v : g.data()) sq += v * v;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double k = max_norm / norm;
    for (auto& [_, g] : grads)
      for (double& v : g.data()) v *= k;
  }
  return norm;
}

namespace {

double pair_loss(const ModelParams& p, const SequencePair& s) {
  if (p.config.decoder == DecoderKind::kBiRnn) {
    Tape tape;
    ParamBinding b(tape, p, false);
    return record_training_loss(b, s.x, s.y).value().item();
  }
  auto enc = maybe_encode(p, s.x);
  return terminated_nll(p, enc_ptr(enc), s.y).total;
}

// Scored positions per pair: uni-directional decoders also predict the end.
std::size_t scored_tokens(const ModelConfig& c, const SequencePair& s) {
  return s.y.size() + (c.decoder == DecoderKind::kBiRnn ? 0 : 1);
}

}  // namespace

double corpus_nll(const ModelParams& params, const std::vector<SequencePair>& corpus) {
  if (corpus.empty()) throw std::invalid_argument("corpus_nll: empty corpus");
  double total = 0.0;
  std::size_t tokens = 0;
  for (const auto& s : corpus) {
    total += pair_loss(params, s);
    tokens += scored_tokens(params.config, s);
  }
  return total / static_cast<double>(tokens);
}

TrainResult train(const TrainConfig& config, const std::vector<SequencePair>& corpus,
                  const ModelConfig& model_config, const EpochCallback& on_epoch) {
  config.validate();
  model_config.validate();
  if (corpus.empty()) throw std::invalid_argument("train: empty corpus");
  for (const auto& s : corpus) {
    if (s.y.empty()) throw std::invalid_argument("train: pair with empty target");
    if (model_config.conditional() && s.x.empty()) {
      throw std::invalid_argument("train: conditional model needs a non-empty source");
    }
  }

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_valid = static_cast<std::size_t>(config.valid_fraction * static_cast<double>(corpus.size()));
  std::vector<SequencePair> valid, train_set;
  for (std::size_t i = 0; i < order.size(); ++i)
    (i < n_valid ? valid : train_set).push_back(corpus[order[i]]);

  ModelParams params = ModelParams::init(model_config, config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::map<std::string, Tensor> velocity;
  if (config.optimizer == Optimizer::kNesterov)
    for (const auto& [name, t] : params.arrays) velocity.emplace(name, Tensor(t.shape()));

  TrainResult result;
  auto record_epoch = [&](std::size_t epoch, double train_nll) {
    EpochStats st{epoch, train_nll, valid.empty() ? train_nll : corpus_nll(params, valid)};
    result.history.push_back(st);
    if (on_epoch) on_epoch(st);
    return st;
  };
  EpochStats first = record_epoch(0, corpus_nll(params, train_set));
  result.params = params;
  double best = first.valid_nll;
  double lr = config.learning_rate;

  std::vector<std::size_t> idx(train_set.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(idx.begin(), idx.end(), rng);
    double epoch_loss = 0.0;
    std::size_t epoch_tokens = 0;
    for (std::size_t start = 0; start < idx.size(); start += config.batch_size) {
      const std::size_t end = std::min(idx.size(), start + config.batch_size);
      std::size_t tokens = 0;
      for (std::size_t i = start; i < end; ++i) tokens += scored_tokens(model_config, train_set[idx[i]]);
      const double inv = 1.0 / static_cast<double>(tokens);

      // Nesterov gradients are taken at the look-ahead point.
      ModelParams lookahead;
      const ModelParams* at = &params;
      if (config.optimizer == Optimizer::kNesterov) {
        lookahead = params;
        for (auto& [name, t] : lookahead.arrays) {
          const Tensor& v = velocity.at(name);
          for (std::size_t k = 0; k < t.size(); ++k) t[k] += config.momentum * v[k];
        }
        at = &lookahead;
      }

      std::map<std::string, Tensor> grads;
      double batch_loss = 0.0;
      try {
        for (std::size_t i = start; i < end; ++i) {
          const SequencePair& s = train_set[idx[i]];
          Tape tape;
          ParamBinding b(tape, *at, true);
          Var loss = record_training_loss(b, s.x, s.y);
          batch_loss += loss.value().item();
          std::vector<std::string> names;
          std::vector<Var> vars;
          for (const auto& [name, v] : b.bound()) {
            names.push_back(name);
            vars.push_back(v);
          }
          auto g = tape.grad(loss, vars);
          for (std::size_t k = 0; k < names.size(); ++k) {
            auto it = grads.find(names[k]);
            if (it == grads.end()) {
              grads.emplace(names[k], std::move(g[k]));
            } else {
              auto dst = it->second.data();
              const auto src = g[k].data();
              for (std::size_t q = 0; q < dst.size(); ++q) dst[q] += src[q];
            }
          }
        }
      } catch (const NumericError&) {
        result.diverged = true;
        return result;
      }
      if (!std::isfinite(batch_loss)) {
        result.diverged = true;
        return result;
      }
      for (auto& [_, g] : grads)
        for (double& v : g.data()) v *= inv;
      clip_global_norm(grads, config.clip_norm);

      for (auto& [name, g] : grads) {
        Tensor& p = params.get(name);
        if (config.optimizer == Optimizer::kNesterov) {
          Tensor& v = velocity.at(name);
          for (std::size_t k = 0; k < p.size(); ++k) {
            v[k] = config.momentum * v[k] - lr * g[k];
            p[k] += v[k];
          }
        } else {
          for (std::size_t k = 0; k < p.size(); ++k) p[k] -= lr * g[k];
        }
      }
      epoch_loss += batch_loss;
      epoch_tokens += tokens;
    }

    bool finite = true;
    for (const auto& [_, t] : params.arrays) finite = finite && t.all_finite();
    if (!finite) {
      result.diverged = true;
      return result;
    }
    const EpochStats st = record_epoch(epoch, epoch_loss / static_cast<double>(epoch_tokens));
    if (!std::isfinite(st.valid_nll)) {
      result.diverged = true;
      return result;
    }
    if (st.valid_nll < best) {
      best = st.valid_nll;
      result.params = params;
      result.best_epoch = epoch;
    } else if (config.halve_on_plateau) {
      lr *= 0.5;
    }
  }
  return result;
}

void write_loss_history(const std::string& path, const std::vector<EpochStats>& history,
                        const std::string& header) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write loss history to " + path);
  out.precision(17);
  if (!header.empty()) out << header << '\n';
  out << "epoch,train_nll,valid_nll\n";
  for (const auto& e : history) out << e.epoch << ',' << e.train_nll << ',' << e.valid_nll << '\n';
}

}  // namespace tigs
