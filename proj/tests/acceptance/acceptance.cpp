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

// Acceptance suite: one PASS/FAIL line per criterion. Usage:
//   acceptance [CACHE_DIR] [--only N[,N...]]
// Trained models for the ordering experiment are cached in CACHE_DIR.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "tigs/baselines.hpp"
#include "tigs/bleu.hpp"
#include "tigs/checkpoint.hpp"
#include "tigs/corpus.hpp"
#include "tigs/eval.hpp"
#include "tigs/io.hpp"
#include "tigs/mask.hpp"
#include "tigs/model.hpp"
#include "tigs/synthetic.hpp"
#include "tigs/tigs.hpp"
#include "tigs/trainer.hpp"

namespace fs = std::filesystem;
using namespace tigs;

namespace {

// Tolerances and sizes.
constexpr double kFdStep = 1e-5;
constexpr double kFdMaxRelError = 1e-4;
constexpr double kFdRelFloor = 1e-6;  // smaller denominators are raised to this
constexpr std::size_t kFdConfigs = 60;
constexpr std::size_t kOracleInstances = 200;
constexpr std::size_t kOracleMaxVocab = 200;
constexpr std::size_t kFixedPointInstances = 50;
constexpr std::size_t kFixedPointMaxVocab = 64;
constexpr double kMonotoneSlack = 0.0;
constexpr std::size_t kCorpusPairs = 11000;
constexpr std::size_t kTrainPairs = 10000;
constexpr std::size_t kGridInstances = 500;
constexpr double kOrderingMargin = -0.01;  // nats per token
constexpr std::size_t kBibsInstances = 50;
constexpr std::size_t kGsnDraws = 10000;
constexpr double kGsnMaxTv = 0.05;
constexpr double kBleuTolerance = 5e-7;  // six decimal places

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

ModelConfig small_config(DecoderKind dec, std::size_t vocab, bool conditional, std::size_t emb,
                         std::size_t hidden, bool bi_enc = true) {
  ModelConfig c;
  c.src_vocab = conditional ? vocab : 0;
  c.tgt_vocab = vocab;
  c.emb_dim = emb;
  c.hidden_dim = hidden;
  c.bidirectional_encoder = bi_enc;
  c.decoder = dec;
  c.attention = conditional ? AttentionKind::kBilinear : AttentionKind::kNone;
  return c;
}

std::vector<int> random_tokens(std::size_t len, std::size_t vocab, std::mt19937_64& rng) {
  std::vector<int> y(len);
  for (int& t : y) t = static_cast<int>(kNumSpecials + rng() % (vocab - kNumSpecials));
  return y;
}

Template random_template(const std::vector<int>& y, std::size_t blanks, std::mt19937_64& rng) {
  std::vector<std::size_t> pos(y.size());
  for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = i;
  std::shuffle(pos.begin(), pos.end(), rng);
  std::vector<int> tokens = y;
  for (std::size_t i = 0; i < blanks; ++i) tokens[pos[i]] = kBlank;
  return Template::from_tokens(tokens);
}

// Every TIGS run of every experiment is recorded here for the monotonicity
// and cost-accounting criteria, and every algorithm output for template
// preservation.
struct Audit {
  std::size_t runs = 0, non_monotone = 0;
  std::size_t cost_runs = 0, cost_rounds = 0, cost_mismatches = 0;
  std::size_t outputs = 0, not_preserved = 0;
  std::map<int, std::string> problems;  // criterion -> first problem

  void note(int criterion, const std::string& s) { problems.emplace(criterion, s); }

  void preserved(const Template& t, const std::vector<int>& y, const std::string& where) {
    ++outputs;
    if (!t.preserved_by(y)) {
      ++not_preserved;
      note(6, where);
    }
  }

  void monotone(const std::vector<double>& round_nll, const std::string& where) {
    ++runs;
    for (std::size_t i = 1; i < round_nll.size(); ++i) {
      if (round_nll[i] > round_nll[i - 1] + kMonotoneSlack) {
        ++non_monotone;
        note(4, where + ": round " + std::to_string(i) + " NLL " + fmt(round_nll[i - 1], 17) + " -> " +
                    fmt(round_nll[i], 17));
        return;
      }
    }
  }

  // Documented cost of one round: |B|(K+1) candidate evaluations of m
  // decoder steps each, plus o_steps gradient evaluations of m steps per blank.
  static DecodeStats round_cost(std::size_t m, std::size_t blanks, std::size_t k, std::size_t o_steps) {
    return {m * blanks * (k + 1) + o_steps * m * blanks, blanks * (k + 1)};
  }

  void cost(const DecodeStats& got, const DecodeStats& want, const std::string& where) {
    ++cost_rounds;
    if (got.candidate_evals != want.candidate_evals || got.decoder_steps != want.decoder_steps) {
      ++cost_mismatches;
      note(9, where + ": got " + std::to_string(got.candidate_evals) + " evals / " +
                  std::to_string(got.decoder_steps) + " steps, expected " +
                  std::to_string(want.candidate_evals) + " / " + std::to_string(want.decoder_steps));
    }
  }

  void tigs_run(const TigsResult& r, const Template& t, const TigsConfig& c, std::size_t vocab,
                const std::string& where) {
    monotone(r.round_nll, where);
    for (std::size_t i = 1; i < r.trace.size(); ++i) {
      if (r.trace[i].nll > r.trace[i - 1].nll + kMonotoneSlack) {
        ++non_monotone;
        note(4, where + ": NLL rose within round " + std::to_string(r.trace[i].round));
        break;
      }
    }
    preserved(t, r.sequence, where);
    ++cost_runs;
    const DecodeStats want = round_cost(t.length(), t.num_blanks(), c.effective_k(vocab), c.o_steps);
    for (std::size_t i = 0; i < r.round_stats.size(); ++i)
      cost(r.round_stats[i], want, where + " round " + std::to_string(i + 1));
  }
};

Audit audit;

// ------------------------------------------------------------ 1. gradients

Outcome gradient_check() {
  std::mt19937_64 rng(101);
  std::normal_distribution<double> nd(0.0, 0.4);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double worst = 0.0;
  std::size_t components = 0;
  for (std::size_t cfg = 0; cfg < kFdConfigs; ++cfg) {
    const std::size_t V = 8 + rng() % 24;
    const bool cond = cfg % 4 != 0;
    const ModelConfig mc = small_config(DecoderKind::kForward, V, cond, 3 + rng() % 4, 4 + rng() % 4, cfg % 3 != 0);
    const ModelParams p = ModelParams::init(mc, 1000 + cfg, 0.3 + 0.7 * unif(rng));
    const auto x = random_tokens(2 + rng() % 5, V, rng);
    const auto y = random_tokens(3 + rng() % 6, V, rng);
    const Template t = random_template(y, 1 + rng() % (y.size() - 1), rng);
    const double lambda = cfg % 5 == 0 ? 0.0 : 0.5 * unif(rng);
    const auto fill = t.fill_of(random_tokens(y.size(), V, rng));
    std::vector<Tensor> embs;
    const Tensor& E = p.target_embeddings();
    for (int tok : fill) {
      Tensor row(Shape{E.cols()});
      for (std::size_t k = 0; k < E.cols(); ++k) row[k] = E.at(static_cast<std::size_t>(tok), k) + nd(rng);
      embs.push_back(row);
    }
    const FillLoss analytic = fill_loss_and_grads(p, x, t, fill, embs, lambda);
    for (std::size_t j = 0; j < embs.size(); ++j) {
      for (std::size_t k = 0; k < embs[j].size(); ++k) {
        auto plus = embs, minus = embs;
        plus[j][k] += kFdStep;
        minus[j][k] -= kFdStep;
        const double num = (fill_loss_and_grads(p, x, t, fill, plus, lambda).loss -
                            fill_loss_and_grads(p, x, t, fill, minus, lambda).loss) /
                           (2.0 * kFdStep);
        const double a = analytic.grads[j][k];
        const double rel = std::abs(a - num) / std::max({std::abs(a), std::abs(num), kFdRelFloor});
        worst = std::max(worst, rel);
        ++components;
      }
    }
  }
  return {worst < kFdMaxRelError, "max relative error " + fmt(worst, 3) + " over " + std::to_string(kFdConfigs) +
                                      " configurations, " + std::to_string(components) + " components"};
}

// ------------------------------------------------------------ shared helpers

// Independent brute force: argmin of sequence NLL over all single-token
// assignments to blank `b`, holding the rest of `y` fixed.
std::pair<int, double> best_substitution(const ModelParams& p, const EncoderOutput* enc, std::vector<int> y,
                                         std::size_t pos) {
  int best_tok = -1;
  double best = std::numeric_limits<double>::infinity();
  for (int v = kNumSpecials; v < static_cast<int>(p.config.tgt_vocab); ++v) {
    y[pos] = v;
    const double nll = sequence_nll(p, enc, y).total;
    if (nll < best) best = nll, best_tok = v;
  }
  return {best_tok, best};
}

// ------------------------------------------------------------ 2. oracle

Outcome single_blank_oracle(const ModelParams* trained, const std::vector<SequencePair>* test) {
  std::mt19937_64 rng(202);
  std::size_t agree = 0, total = 0;
  std::string first;
  for (std::size_t i = 0; i < kOracleInstances; ++i) {
    // Half on small random models of varied vocabulary, half on the trained
    // ordering-experiment model when it is available.
    std::optional<ModelParams> local;
    const ModelParams* p = nullptr;
    std::vector<int> x, y;
    if (trained && test && i % 2 == 1 && trained->config.tgt_vocab <= kOracleMaxVocab) {
      p = trained;
      const auto& s = (*test)[(i * 7) % test->size()];
      x = s.x, y = s.y;
    } else {
      const std::size_t V = 10 + rng() % (kOracleMaxVocab - 9);
      local = ModelParams::init(small_config(DecoderKind::kForward, V, i % 3 != 0, 6, 8), 2000 + i, 0.8);
      p = &*local;
      x = random_tokens(3, V, rng);
      y = random_tokens(3 + rng() % 6, V, rng);
    }
    const Template t = random_template(y, 1, rng);
    const BoundModel m(*p, x);
    TigsConfig c;
    c.k = p->config.tgt_vocab;
    c.max_rounds = 20;
    const TigsResult r = tigs_infill(m, t, c);
    audit.tigs_run(r, t, c, p->config.tgt_vocab, "oracle instance " + std::to_string(i));
    const FillResult o = oracle_fill(m, t);
    const auto [tok, nll] = best_substitution(*p, m.encoding(), y, t.blanks[0]);
    ++total;
    if (r.sequence == o.sequence && o.sequence[t.blanks[0]] == tok) {
      ++agree;
    } else if (first.empty()) {
      first = "; first mismatch at instance " + std::to_string(i) + " (tigs " +
              std::to_string(r.sequence[t.blanks[0]]) + ", oracle " + std::to_string(o.sequence[t.blanks[0]]) +
              ", brute force " + std::to_string(tok) + ")";
    }
  }
  return {agree == total, std::to_string(agree) + "/" + std::to_string(total) + " instances agree" + first};
}

// ------------------------------------------------------------ 3. fixed point

Outcome fixed_point() {
  std::mt19937_64 rng(303);
  std::size_t ok = 0, unconverged = 0;
  std::string first;
  for (std::size_t i = 0; i < kFixedPointInstances; ++i) {
    const std::size_t V = 12 + rng() % (kFixedPointMaxVocab - 11);
    const auto p = ModelParams::init(small_config(DecoderKind::kForward, V, i % 2 == 0, 6, 8), 3000 + i, 0.8);
    const auto x = random_tokens(3, V, rng);
    const auto y = random_tokens(4 + rng() % 5, V, rng);
    const Template t = random_template(y, 1 + rng() % 3, rng);
    const BoundModel m(p, x);
    TigsConfig c;
    c.k = V;
    c.max_rounds = 500;
    c.init = i % 2 == 0 ? InitStrategy::kGreedy : InitStrategy::kRandom;
    c.seed = i;
    const TigsResult r = tigs_infill(m, t, c);
    audit.tigs_run(r, t, c, V, "fixed-point instance " + std::to_string(i));
    if (!r.converged) ++unconverged;
    bool improvable = false;
    for (std::size_t b : t.blanks) {
      const auto [tok, nll] = best_substitution(p, m.encoding(), r.sequence, b);
      if (nll < r.nll) {
        improvable = true;
        if (first.empty()) {
          first = "; instance " + std::to_string(i) + " blank " + std::to_string(b) + " improves " +
                  fmt(r.nll, 12) + " -> " + fmt(nll, 12);
        }
      }
    }
    ok += r.converged && !improvable ? 1 : 0;
  }
  return {ok == kFixedPointInstances, std::to_string(ok) + "/" + std::to_string(kFixedPointInstances) +
                                          " converged fills admit no improving single-token change" +
                                          (unconverged ? " (" + std::to_string(unconverged) + " unconverged)" : "") +
                                          first};
}

// ------------------------------------------------------------ 5. ordering

struct TrainedSet {
  Vocab vocab;
  std::vector<SequencePair> test;
  ModelParams forward, backward, birnn, eval_lm;
};

ModelParams train_cached(const fs::path& cache, const std::string& role_label, Role role, const ModelConfig& base,
                         const TrainConfig& tc, const std::vector<SequencePair>& train_set, std::uint64_t data_hash) {
  ModelConfig mc = base;
  mc.decoder = decoder_for_role(role);
  const nlohmann::json key = {{"model", mc.to_json()}, {"train", tc.to_json()}, {"data", data_hash}};
  std::ostringstream name;
  name << role_label << '-' << std::hex << fnv1a64(key.dump()) << ".ckpt";
  const fs::path path = cache / name.str();
  if (fs::exists(path)) {
    try {
      Checkpoint ck = load_checkpoint(path.string());
      if (ck.params.config == mc) {
        std::cerr << "  reusing " << path.string() << '\n';
        return std::move(ck.params);
      }
    } catch (const std::exception& e) {
      std::cerr << "  ignoring unreadable cache " << path.string() << ": " << e.what() << '\n';
    }
  }
  std::cerr << "  training " << role_label << " (" << train_set.size() << " pairs, " << tc.epochs << " epochs)\n";
  const auto t0 = Clock::now();
  TrainResult r = train(tc, corpus_for_role(train_set, role), mc, [&](const EpochStats& s) {
    std::cerr << "    epoch " << s.epoch << " train " << fmt(s.train_nll) << " valid " << fmt(s.valid_nll) << " ("
              << fmt(seconds_since(t0), 3) << " s)\n";
  });
  if (r.diverged) throw std::runtime_error(role_label + " training diverged");
  fs::create_directories(cache);
  save_checkpoint(path.string(), r.params, {{"role", role_label}, {"best_epoch", r.best_epoch}});
  return std::move(r.params);
}

TrainedSet build_trained_set(const fs::path& cache) {
  constexpr std::uint64_t kCorpusSeed = 2026;
  auto pairs = generate_dialog_corpus(kCorpusPairs, kCorpusSeed);
  const std::vector<TextPair> train_text(pairs.begin(), pairs.begin() + kTrainPairs);
  const std::vector<TextPair> test_text(pairs.begin() + kTrainPairs, pairs.end());
  TrainedSet s;
  s.vocab = build_vocab(train_text, 2000);
  const auto train_set = encode_corpus(train_text, s.vocab);
  s.test = encode_corpus(test_text, s.vocab);
  s.test.resize(kGridInstances);
  const std::uint64_t data_hash = derive_seed(kCorpusSeed, "pairs", kCorpusPairs) ^ s.vocab.size();

  ModelConfig mc = small_config(DecoderKind::kForward, s.vocab.size(), true, 32, 64);
  TrainConfig tc;
  tc.learning_rate = 0.5;
  tc.batch_size = 16;
  tc.epochs = 16;
  tc.seed = 11;
  s.forward = train_cached(cache, "forward", Role::kForward, mc, tc, train_set, data_hash);
  s.backward = train_cached(cache, "backward", Role::kBackward, mc, tc, train_set, data_hash);
  s.birnn = train_cached(cache, "birnn", Role::kBiRnn, mc, tc, train_set, data_hash);
  // Separately trained evaluation LM: its own seed and width.
  ModelConfig ec = small_config(DecoderKind::kForward, s.vocab.size(), true, 24, 48);
  TrainConfig etc = tc;
  etc.seed = 29;
  etc.epochs = 10;
  s.eval_lm = train_cached(cache, "eval-lm", Role::kEvalLm, ec, etc, train_set, data_hash);
  return s;
}

InferenceConfig grid_inference_config() {
  InferenceConfig c;
  c.tigs.k = 20;
  c.tigs.max_rounds = 50;
  c.beam_width = 5;
  c.max_rounds = 50;
  c.seed = 5;
  return c;
}

Outcome ordering(const TrainedSet& s, std::string* table) {
  const InferenceModels models{&s.forward, &s.backward, &s.birnn};
  GridOptions g;
  g.mask_seed = 77;
  g.sampled_pool_size = kGridInstances;
  const InferenceConfig cfg = grid_inference_config();
  std::vector<GridInstance> rows;
  const auto t0 = Clock::now();
  const EvalReport report = run_grid(models, &s.eval_lm, s.test, g, cfg, &rows);
  const double secs = seconds_since(t0);
  *table = render_table(report);

  std::size_t failures = 0;
  for (const auto& row : rows) {
    const std::string where = std::string(algorithm_name(row.result.algorithm)) + " " +
                              strategy_name(row.strategy) + " " + fmt(row.ratio) + " #" + std::to_string(row.id);
    if (!row.result.ok) {
      ++failures;
      continue;
    }
    audit.preserved(row.tmpl, row.result.sequence, where);
    if (row.result.algorithm == Algorithm::kTigs) {
      audit.monotone(row.result.round_nll, where);
      ++audit.cost_runs;
      const DecodeStats per = Audit::round_cost(row.tmpl.length(), row.tmpl.num_blanks(),
                                                cfg.tigs.effective_k(s.vocab.size()), cfg.tigs.o_steps);
      audit.cost(row.result.stats,
                 {per.decoder_steps * row.result.rounds, per.candidate_evals * row.result.rounds}, where);
    }
  }

  bool pass = failures == 0;
  double worst_margin = std::numeric_limits<double>::infinity();
  std::string worst_cell;
  for (MaskStrategy st : g.strategies) {
    for (double r : g.ratios) {
      const CellReport& t = report.cell(Algorithm::kTigs, st, r);
      pass = pass && t.instances >= kGridInstances;
      for (Algorithm a : g.algorithms) {
        if (a == Algorithm::kTigs) continue;
        const double margin = report.cell(a, st, r).inference_nll - t.inference_nll;
        if (margin < worst_margin) {
          worst_margin = margin;
          worst_cell = std::string(algorithm_display(a)) + " at " + strategy_name(st) + " " + fmt(r);
        }
        pass = pass && margin >= kOrderingMargin;
      }
    }
  }
  return {pass, "6 cells x " + std::to_string(kGridInstances) + " instances, |V| " + std::to_string(s.vocab.size()) +
                    "; smallest baseline-minus-TIGS NLL margin " + fmt(worst_margin, 4) + " (" + worst_cell +
                    "); " + std::to_string(failures) + " failures; grid " + fmt(secs, 4) + " s"};
}

// ------------------------------------------------------------ 7. BiBS

Outcome bibs_exhaustive() {
  std::mt19937_64 rng(707);
  std::size_t ok = 0;
  std::string first;
  for (std::size_t i = 0; i < kBibsInstances; ++i) {
    const std::size_t V = 6 + rng() % 3;  // at most 8
    const auto fp = ModelParams::init(small_config(DecoderKind::kForward, V, true, 4, 6), 7000 + i, 0.9);
    const auto bp = ModelParams::init(small_config(DecoderKind::kBackward, V, true, 4, 6), 7500 + i, 0.9);
    const auto x = random_tokens(3, V, rng);
    const auto y = random_tokens(2 + rng() % 3, V, rng);  // m <= 4
    const Template t = random_template(y, 1 + rng() % (y.size() - 1), rng);
    const BoundModel f(fp, x), b(bp, x);
    const std::size_t width = V;  // full width: every token is proposed at every blank
    // Independent exhaustive argmax of log P_f(y) + log P_b(rev y).
    double best = -std::numeric_limits<double>::infinity();
    std::vector<int> arg;
    std::vector<int> fill(t.num_blanks(), kNumSpecials);
    while (true) {
      const auto cand = t.filled(fill);
      const double s = -sequence_nll(fp, f.encoding(), cand).total -
                       sequence_nll(bp, b.encoding(), reverse_sequence(cand)).total;
      if (s > best) best = s, arg = cand;
      std::size_t j = fill.size();
      while (j > 0 && ++fill[j - 1] == static_cast<int>(V)) fill[--j] = kNumSpecials;
      if (j == 0) break;
    }
    const auto init = t.fill_of(beam_fill_forward(f, t, 1).sequence);
    const BibsResult r = bibs_fill(f, b, t, init, width, 50);
    audit.preserved(t, r.sequence, "bibs instance " + std::to_string(i));
    if (r.sequence == arg) {
      ++ok;
    } else if (first.empty()) {
      first = "; first mismatch at instance " + std::to_string(i);
    }
  }
  return {ok == kBibsInstances, std::to_string(ok) + "/" + std::to_string(kBibsInstances) +
                                    " equal the exhaustive product-score argmax" + first};
}

// ------------------------------------------------------------ 8. GSN

Outcome gsn_fidelity() {
  constexpr std::size_t V = 10;
  const auto p = ModelParams::init(small_config(DecoderKind::kBiRnn, V, true, 5, 7), 808, 1.0);
  const std::vector<int> x = {5, 8, 6};
  const std::vector<int> y = {7, 5, 9, 6, 8};
  const std::size_t t = 2;
  const BoundModel m(p, x);
  // Target: the model's full conditional, restricted to fillable tokens.
  const Tensor full = birnn_conditional(p, x, y, t);
  std::vector<double> target(V, 0.0);
  double z = 0.0;
  for (std::size_t v = kNumSpecials; v < V; ++v) z += full[v];
  for (std::size_t v = kNumSpecials; v < V; ++v) target[v] = full[v] / z;
  std::mt19937_64 rng(809);
  std::vector<double> counts(V, 0.0);
  for (std::size_t i = 0; i < kGsnDraws; ++i) counts[static_cast<std::size_t>(gsn_resample(m, y, t, rng))] += 1.0;
  double tv = 0.0;
  for (std::size_t v = 0; v < V; ++v) tv += std::abs(counts[v] / kGsnDraws - target[v]);
  tv *= 0.5;
  return {tv < kGsnMaxTv, "total variation " + fmt(tv, 3) + " over " + std::to_string(kGsnDraws) + " draws, |V| = 10"};
}

// ------------------------------------------------------------ 9. cost

Outcome cost_accounting() {
  // Dedicated runs across K and o_steps on top of every run audited so far.
  std::mt19937_64 rng(909);
  for (std::size_t i = 0; i < 40; ++i) {
    const std::size_t V = 20 + rng() % 40;
    const auto p = ModelParams::init(small_config(DecoderKind::kForward, V, i % 2 == 0, 5, 7), 9000 + i, 0.6);
    const auto x = random_tokens(3, V, rng);
    const auto y = random_tokens(4 + rng() % 6, V, rng);
    const Template t = random_template(y, 1 + rng() % 3, rng);
    TigsConfig c;
    c.k = i % 4 == 0 ? 0 : 1 + rng() % 10;
    c.o_steps = 1 + i % 3;
    c.max_rounds = 10;
    const TigsResult r = tigs_infill(BoundModel(p, x), t, c);
    audit.tigs_run(r, t, c, V, "cost instance " + std::to_string(i));
  }
  const auto it = audit.problems.find(9);
  return {audit.cost_mismatches == 0 && audit.cost_rounds > 0,
          std::to_string(audit.cost_rounds - audit.cost_mismatches) + "/" + std::to_string(audit.cost_rounds) +
              " audited rounds or totals match over " + std::to_string(audit.cost_runs) + " runs" +
              (it != audit.problems.end() ? "; " + it->second : "")};
}

// ------------------------------------------------------------ 10. BLEU

Outcome bleu_cases() {
  const double eps = kBleuEpsilon;
  auto w = [](const std::string& s) { return split_ws(s); };
  struct Case {
    std::string hyp;
    std::vector<std::string> refs;
    double expected;  // closed form worked out by hand
  };
  const std::vector<Case> cases = {
      {"the cat sat on the mat", {"the cat sat on the mat"}, 1.0},
      // p1..p3 = 1, no 4-grams, brevity 3 vs 4.
      {"a b c", {"a b c d"}, std::exp(1.0 - 4.0 / 3.0) * std::pow(eps, 0.25)},
      // Clipped unigrams 1/4, no higher-order matches over 3, 2, 1 n-grams.
      {"the the the the", {"the cat"}, std::pow(0.25 * (eps / 3) * (eps / 2) * eps, 0.25)},
      // 5/6, 3/5, 2/4, 1/3, equal lengths.
      {"the cat sat on a mat", {"the cat sat on the mat"}, std::pow(1.0 / 12.0, 0.25)},
      // Closest reference length 4; p = 1, 1/2, eps, eps.
      {"cat on mat", {"the cat is on the mat", "cat on the mat"},
       std::exp(1.0 - 4.0 / 3.0) * std::pow(0.5 * eps * eps, 0.25)},
  };
  std::size_t ok = 0;
  double worst = 0.0;
  for (const auto& c : cases) {
    std::vector<std::vector<std::string>> refs;
    for (const auto& r : c.refs) refs.push_back(w(r));
    const double got = bleu4(w(c.hyp), refs);
    worst = std::max(worst, std::abs(got - c.expected));
    ok += std::abs(got - c.expected) < kBleuTolerance ? 1 : 0;
  }
  return {ok == cases.size(), std::to_string(ok) + "/" + std::to_string(cases.size()) +
                                  " hand cases within 6 decimals (max abs error " + fmt(worst, 3) + ")"};
}

// ------------------------------------------------------------ 11. checkpoints

Outcome checkpoint_integrity(const fs::path& cache, const TrainedSet* trained) {
  std::vector<ModelParams> models;
  models.push_back(ModelParams::init(small_config(DecoderKind::kForward, 15, true, 4, 6), 1101, 0.7));
  models.push_back(ModelParams::init(small_config(DecoderKind::kBackward, 12, false, 3, 5), 1102, 0.7));
  models.push_back(ModelParams::init(small_config(DecoderKind::kBiRnn, 14, true, 4, 5, false), 1103, 0.7));
  if (trained) models.push_back(trained->forward);
  fs::create_directories(cache);
  std::mt19937_64 rng(1104);
  std::size_t arrays = 0, bad_arrays = 0, nll_checks = 0, bad_nll = 0;
  for (std::size_t i = 0; i < models.size(); ++i) {
    const fs::path path = cache / ("roundtrip-" + std::to_string(i) + ".ckpt");
    save_checkpoint(path.string(), models[i], {{"index", i}});
    const Checkpoint back = load_checkpoint(path.string());
    fs::remove(path);
    bad_arrays += back.params.config == models[i].config ? 0 : 1;
    for (const auto& [name, t] : models[i].arrays) {
      ++arrays;
      const auto it = back.params.arrays.find(name);
      const bool same = it != back.params.arrays.end() && it->second.shape() == t.shape() &&
                        std::memcmp(it->second.data().data(), t.data().data(), t.size() * sizeof(double)) == 0;
      bad_arrays += same ? 0 : 1;
    }
    bad_arrays += back.params.arrays.size() == models[i].arrays.size() ? 0 : 1;
    const std::size_t V = models[i].config.tgt_vocab;
    for (int k = 0; k < 10; ++k) {
      const auto x = random_tokens(3, V, rng);
      const auto y = random_tokens(5, V, rng);
      if (models[i].config.decoder == DecoderKind::kBiRnn) {
        const Tensor a = birnn_conditional(models[i], x, y, 2), b = birnn_conditional(back.params, x, y, 2);
        bad_nll += std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0 ? 0 : 1;
      } else {
        const double a = sequence_nll(models[i], x, y).total, b = sequence_nll(back.params, x, y).total;
        bad_nll += std::memcmp(&a, &b, sizeof a) == 0 ? 0 : 1;
      }
      ++nll_checks;
    }
  }
  return {bad_arrays == 0 && bad_nll == 0,
          std::to_string(arrays) + " arrays over " + std::to_string(models.size()) + " checkpoints, " +
              std::to_string(bad_arrays) + " differ; " + std::to_string(nll_checks - bad_nll) + "/" +
              std::to_string(nll_checks) + " scores bit-identical"};
}

}  // namespace

int main(int argc, char** argv) {
  fs::path cache = "acceptance-cache";
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--only" && i + 1 < argc) {
      for (const auto& n : split(argv[++i], ',')) only.insert(std::stoi(n));
    } else {
      cache = a;
    }
  }
  auto wanted = [&](int n) { return only.empty() || only.contains(n); };

  std::map<int, std::pair<std::string, Outcome>> results;
  auto run = [&](int n, const std::string& name, const std::function<Outcome()>& f) {
    if (!wanted(n)) return;
    std::cerr << "[" << n << "] " << name << " ...\n";
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    o.detail += " [" + fmt(seconds_since(t0), 3) + " s]";
    std::cerr << "    " << (o.pass ? "PASS" : "FAIL") << ": " << o.detail << '\n';
    results[n] = {name, o};
  };

  std::optional<TrainedSet> trained;
  const bool need_models = wanted(2) || wanted(4) || wanted(5) || wanted(6) || wanted(9) || wanted(11);
  if (need_models && (only.empty() || wanted(5))) {
    std::cerr << "preparing ordering-experiment models in " << cache.string() << '\n';
    try {
      trained = build_trained_set(cache);
    } catch (const std::exception& e) {
      std::cerr << "model preparation failed: " << e.what() << '\n';
    }
  }

  run(1, "gradient correctness (finite differences)", gradient_check);
  run(2, "single-blank global optimality (K = |V| vs exhaustive oracle)", [&] {
    return single_blank_oracle(trained ? &trained->forward : nullptr, trained ? &trained->test : nullptr);
  });
  run(3, "coordinate fixed point", fixed_point);
  std::string table;
  run(5, "ordering experiment (TIGS lowest inference-model NLL)", [&] {
    if (!trained) return Outcome{false, "models unavailable"};
    return ordering(*trained, &table);
  });
  run(7, "BiBS scoring equivalence", bibs_exhaustive);
  run(8, "GSN sampling fidelity", gsn_fidelity);
  run(9, "cost accounting", cost_accounting);
  run(10, "BLEU correctness", bleu_cases);
  run(11, "checkpoint integrity", [&] { return checkpoint_integrity(cache, trained ? &*trained : nullptr); });
  // Aggregates over every run above.
  run(4, "NLL monotonicity", [&] {
    const auto it = audit.problems.find(4);
    return Outcome{audit.non_monotone == 0 && audit.runs > 0,
                   std::to_string(audit.runs - audit.non_monotone) + "/" + std::to_string(audit.runs) +
                       " TIGS runs non-increasing" + (it != audit.problems.end() ? "; " + it->second : "")};
  });
  run(6, "template preservation", [&] {
    const auto it = audit.problems.find(6);
    return Outcome{audit.not_preserved == 0 && audit.outputs > 0,
                   std::to_string(audit.outputs - audit.not_preserved) + "/" + std::to_string(audit.outputs) +
                       " outputs keep every template token" + (it != audit.problems.end() ? "; " + it->second : "")};
  });

  if (!table.empty()) std::cout << table << '\n';
  bool all = true;
  for (const auto& [n, r] : results) {
    std::cout << (r.second.pass ? "PASS" : "FAIL") << " criterion " << n << ": " << r.first << " -- "
              << r.second.detail << '\n';
    all = all && r.second.pass;
  }
  return all ? 0 : 1;
}
