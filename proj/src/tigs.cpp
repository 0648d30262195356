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

#include "tigs/tigs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

#include "tigs/corpus.hpp"

namespace tigs {

Distance parse_distance(std::string_view s) {
  if (s == "euclidean") return Distance::kEuclidean;
  if (s == "cosine") return Distance::kCosine;
  throw std::invalid_argument("unknown distance '" + std::string(s) + "'");
}

InitStrategy parse_init(std::string_view s) {
  if (s == "greedy") return InitStrategy::kGreedy;
  if (s == "random") return InitStrategy::kRandom;
  throw std::invalid_argument("unknown init strategy '" + std::string(s) + "'");
}

std::size_t TigsConfig::effective_k(std::size_t vocab_size) const {
  const std::size_t fillable = vocab_size - kNumSpecials;
  const std::size_t want = k > 0 ? k : static_cast<std::size_t>(std::ceil(0.01 * static_cast<double>(vocab_size)));
  return std::clamp<std::size_t>(want, 1, fillable);
}

void TigsConfig::validate(std::size_t vocab_size) const {
  if (vocab_size <= static_cast<std::size_t>(kNumSpecials)) {
    throw std::invalid_argument("tigs: vocabulary has no fillable tokens");
  }
  if (k > vocab_size) throw std::invalid_argument("tigs: K exceeds the vocabulary size");
  if (max_rounds < 1) throw std::invalid_argument("tigs: T must be >= 1");
  if (!(lambda >= 0.0)) throw std::invalid_argument("tigs: lambda must be >= 0");
  if (!(alpha >= 0.0)) throw std::invalid_argument("tigs: alpha must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("tigs: momentum must be in [0, 1)");
  if (convergence != "no-change") {
    throw std::invalid_argument("tigs: unknown convergence rule '" + convergence + "'");
  }
}

nlohmann::json TigsConfig::to_json() const {
  return {{"k", k},
          {"max_rounds", max_rounds},
          {"lambda", lambda},
          {"alpha", alpha},
          {"momentum", momentum},
          {"o_steps", o_steps},
          {"distance", distance == Distance::kEuclidean ? "euclidean" : "cosine"},
          {"init", init == InitStrategy::kGreedy ? "greedy" : "random"},
          {"seed", seed},
          {"convergence", convergence}};
}

TigsConfig TigsConfig::from_json(const nlohmann::json& j) {
  TigsConfig c;
  c.k = j.value("k", c.k);
  c.max_rounds = j.value("max_rounds", c.max_rounds);
  c.lambda = j.value("lambda", c.lambda);
  c.alpha = j.value("alpha", c.alpha);
  c.momentum = j.value("momentum", c.momentum);
  c.o_steps = j.value("o_steps", c.o_steps);
  c.distance = parse_distance(j.value("distance", std::string("euclidean")));
  c.init = parse_init(j.value("init", std::string("greedy")));
  c.seed = j.value("seed", c.seed);
  c.convergence = j.value("convergence", c.convergence);
  return c;
}

namespace {

Tensor embedding_row(const Tensor& table, int id) {
  const std::size_t cols = table.cols();
  const auto row = table.data().subspan(static_cast<std::size_t>(id) * cols, cols);
  return Tensor(Shape{cols}, std::vector<double>(row.begin(), row.end()));
}

double nll_of(const BoundModel& m, std::span<const int> y, DecodeStats* stats) {
  if (stats) {
    stats->decoder_steps += y.size();
    ++stats->candidate_evals;
  }
  return sequence_nll(*m.params, m.encoding(), y).total;
}

}  // namespace

std::vector<int> nearest_tokens(const Tensor& emb, const Tensor& query, std::size_t k,
                                Distance distance) {
  const std::size_t V = emb.rows(), E = emb.cols();
  if (query.size() != E) throw ShapeError("nearest_tokens: query vs embedding width");
  std::vector<double> d(V, 0.0);
  const double qn = std::sqrt(kernels::dot(query.data(), query.data()));
  for (std::size_t v = kNumSpecials; v < V; ++v) {
    const auto row = emb.data().subspan(v * E, E);
    if (distance == Distance::kEuclidean) {
      double s = 0.0;
      for (std::size_t c = 0; c < E; ++c) s += (row[c] - query[c]) * (row[c] - query[c]);
      d[v] = s;
    } else {
      const double rn = std::sqrt(kernels::dot(row, row));
      const double denom = rn * qn;
      d[v] = 1.0 - (denom > 0.0 ? kernels::dot(row, query.data()) / denom : 0.0);
    }
  }
  std::vector<int> ids(V - kNumSpecials);
  std::iota(ids.begin(), ids.end(), kNumSpecials);
  const std::size_t n = std::min(k, ids.size());
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n), ids.end(),
                    [&](int a, int b) {
                      const double da = d[static_cast<std::size_t>(a)];
                      const double db = d[static_cast<std::size_t>(b)];
                      return da != db ? da < db : a < b;
                    });
  ids.resize(n);
  return ids;
}

InfillState initialize_fill(const BoundModel& model, const Template& tmpl, const TigsConfig& config,
                            DecodeStats* stats) {
  tmpl.validate();
  if (tmpl.num_blanks() == 0) throw std::invalid_argument("tigs: template has no blanks");
  config.validate(model.vocab());
  InfillState st;
  if (config.init == InitStrategy::kGreedy) {
    FillResult g = beam_fill_forward(model, tmpl, 1);
    if (stats) stats->decoder_steps += g.stats.decoder_steps;
    st.fill = tmpl.fill_of(g.sequence);
  } else {
    std::mt19937_64 rng(config.seed);
    std::uniform_int_distribution<int> pick(kNumSpecials, static_cast<int>(model.vocab()) - 1);
    for (std::size_t j = 0; j < tmpl.num_blanks(); ++j) st.fill.push_back(pick(rng));
  }
  const Tensor& emb = model.params->target_embeddings();
  for (int tok : st.fill) {
    st.fill_emb.push_back(embedding_row(emb, tok));
    st.optim.emplace_back(Shape{emb.cols()}, config.momentum, config.alpha);
  }
  st.sequence = tmpl.filled(st.fill);
  st.nll = nll_of(model, st.sequence, stats);
  return st;
}

bool o_step(const BoundModel& model, const Template& tmpl, InfillState& st, std::size_t j,
            const TigsConfig& config, DecodeStats* stats) {
  if (j >= tmpl.num_blanks()) throw std::out_of_range("o_step: blank index out of range");
  for (std::size_t s = 0; s < config.o_steps; ++s) {
    auto gradient = [&](const Tensor& at) {
      std::vector<Tensor> embs = st.fill_emb;
      embs[j] = at;
      if (stats) stats->decoder_steps += tmpl.length();
      return fill_loss_and_grads(*model.params, model.encoding(), tmpl, st.fill, embs,
                                 config.lambda).grads[j];
    };
    try {
      st.fill_emb[j] = nesterov_step(st.optim[j], st.fill_emb[j], gradient);
    } catch (const NumericError&) {
      return false;
    }
  }
  return true;
}

void p_step(const BoundModel& model, const Template& tmpl, InfillState& st, std::size_t j,
            const TigsConfig& config, DecodeStats* stats) {
  if (j >= tmpl.num_blanks()) throw std::out_of_range("p_step: blank index out of range");
  if (!st.fill_emb[j].all_finite()) throw NumericError("p_step: blank embedding is not finite");
  const Tensor& emb = model.params->target_embeddings();
  std::vector<int> cands = nearest_tokens(emb, st.fill_emb[j], config.effective_k(model.vocab()),
                                          config.distance);
  cands.push_back(st.fill[j]);

  const std::size_t pos = tmpl.blanks[j];
  std::vector<int> y = st.sequence;
  int best_tok = -1;
  double best_nll = 0.0;
  for (int v : cands) {
    y[pos] = v;
    const double nll = nll_of(model, y, stats);
    if (best_tok < 0 || nll < best_nll || (nll == best_nll && v < best_tok)) {
      best_tok = v;
      best_nll = nll;
    }
  }
  st.fill[j] = best_tok;
  st.sequence[pos] = best_tok;
  st.nll = best_nll;
  st.fill_emb[j] = embedding_row(emb, best_tok);
  st.optim[j].velocity.fill(0.0);
}

TigsResult tigs_infill(const BoundModel& model, const Template& tmpl, const TigsConfig& config) {
  TigsResult r;
  InfillState st = initialize_fill(model, tmpl, config, &r.init_stats);
  r.round_nll.push_back(st.nll);
  for (std::size_t round = 1; round <= config.max_rounds; ++round) {
    st.round = round;
    const std::vector<int> before = st.fill;
    DecodeStats rs;
    for (std::size_t j = 0; j < tmpl.num_blanks(); ++j) {
      if (!o_step(model, tmpl, st, j, config, &rs)) ++r.skipped_updates;
      p_step(model, tmpl, st, j, config, &rs);
      r.trace.push_back({round, j, st.fill[j], st.nll});
    }
    r.round_stats.push_back(rs);
    r.total.decoder_steps += rs.decoder_steps;
    r.total.candidate_evals += rs.candidate_evals;
    r.round_nll.push_back(st.nll);
    r.rounds = round;
    if (st.fill == before) {
      r.converged = true;
      break;
    }
  }
  r.sequence = st.sequence;
  r.nll = st.nll;
  return r;
}

UnknownLengthResult tigs_unknown_length(const BoundModel& model, const Template& gapped,
                                        std::span<const std::size_t> lengths,
                                        const TigsConfig& config) {
  if (lengths.empty()) throw std::invalid_argument("tigs_unknown_length: empty length range");
  gapped.validate();
  if (gapped.num_blanks() != 1) {
    throw std::invalid_argument("tigs_unknown_length: template must mark exactly one gap");
  }
  UnknownLengthResult out;
  double best = 0.0;
  bool have = false;
  const std::size_t gap = gapped.blanks[0];
  for (std::size_t len : lengths) {
    if (len < 1) throw std::invalid_argument("tigs_unknown_length: gap length must be >= 1");
    std::vector<int> tokens(gapped.tokens.begin(), gapped.tokens.begin() + static_cast<std::ptrdiff_t>(gap));
    tokens.insert(tokens.end(), len, kBlank);
    tokens.insert(tokens.end(), gapped.tokens.begin() + static_cast<std::ptrdiff_t>(gap) + 1, gapped.tokens.end());
    TigsResult r = tigs_infill(model, Template::from_tokens(std::move(tokens)), config);
    const double per_token = terminated_nll(*model.params, model.encoding(), r.sequence).per_token;
    out.ranking.emplace_back(len, per_token);
    if (!have || per_token < best || (per_token == best && len < out.length)) {
      have = true;
      best = per_token;
      out.best = std::move(r);
      out.length = len;
    }
  }
  return out;
}

void write_trace(const std::string& path, const TigsResult& result, const std::string& header) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trace to " + path);
  out.precision(17);
  if (!header.empty()) out << header << '\n';
  out << "round\tblank\ttoken\tnll\n";
  out << 0 << '\t' << '-' << '\t' << '-' << '\t' << result.round_nll.front() << '\n';
  for (const auto& e : result.trace)
    out << e.round << '\t' << e.blank << '\t' << e.token << '\t' << e.nll << '\n';
}

}  // namespace tigs
