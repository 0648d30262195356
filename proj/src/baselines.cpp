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

#include "tigs/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "tigs/corpus.hpp"

namespace tigs {

namespace {

// Indices of the `width` largest fillable scores, ties to the lower index.
std::vector<int> top_fillable(std::span<const double> scores, std::size_t width) {
  std::vector<int> ids;
  for (int v = kNumSpecials; v < static_cast<int>(scores.size()); ++v) ids.push_back(v);
  const std::size_t k = std::min(width, ids.size());
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end(),
                    [&](int a, int b) {
                      const double sa = scores[static_cast<std::size_t>(a)];
                      const double sb = scores[static_cast<std::size_t>(b)];
                      return sa != sb ? sa > sb : a < b;
                    });
  ids.resize(k);
  return ids;
}

void check_width(std::size_t width) {
  if (width < 1) throw std::invalid_argument("beam width must be >= 1");
}

void check_init(const Template& tmpl, std::span<const int> init) {
  if (init.size() != tmpl.num_blanks()) {
    throw std::invalid_argument("initial fill has " + std::to_string(init.size()) +
                                " tokens for " + std::to_string(tmpl.num_blanks()) + " blanks");
  }
  for (int v : init) {
    if (!Vocab::is_fillable(v)) throw std::invalid_argument("initial fill holds a reserved token");
  }
}

// Feeds BOS, y_0 .. y_{t-1}; returns the distribution at t and the prefix log-prob.
struct Prefix {
  DecoderState state;
  std::vector<double> log_probs;
  double log_prob = 0.0;
};

Prefix run_prefix(const BoundModel& m, std::span<const int> y, std::size_t t, DecodeStats& stats) {
  Prefix p{initial_state(*m.params, m.encoding()), std::vector<double>(m.vocab()), 0.0};
  advance(*m.params, p.state, kBos, m.encoding(), p.log_probs);
  ++stats.decoder_steps;
  for (std::size_t s = 0; s < t; ++s) {
    p.log_prob += p.log_probs[static_cast<std::size_t>(y[s])];
    advance(*m.params, p.state, y[s], m.encoding(), p.log_probs);
    ++stats.decoder_steps;
  }
  return p;
}

// Log-prob of y_t .. y_{m-1} continuing from a prefix.
double run_suffix(const BoundModel& m, const Prefix& p, std::span<const int> y, std::size_t t,
                  DecodeStats& stats) {
  DecoderState st = p.state;
  std::vector<double> lp = p.log_probs;
  double total = 0.0;
  for (std::size_t s = t; s < y.size(); ++s) {
    total += lp[static_cast<std::size_t>(y[s])];
    if (s + 1 < y.size()) {
      advance(*m.params, st, y[s], m.encoding(), lp);
      ++stats.decoder_steps;
    }
  }
  return total;
}

}  // namespace

double sequence_log_prob(const BoundModel& m, std::span<const int> y, DecodeStats* stats) {
  DecodeStats local;
  const Prefix p = run_prefix(m, y, 0, local);
  const double lp = run_suffix(m, p, y, 0, local);
  if (stats) stats->decoder_steps += local.decoder_steps;
  return lp;
}

std::uint64_t oracle_evaluations(const Template& tmpl, std::size_t vocab) {
  const std::uint64_t f = vocab > static_cast<std::size_t>(kNumSpecials) ? vocab - kNumSpecials : 0;
  std::uint64_t n = 1;
  for (std::size_t i = 0; i < tmpl.num_blanks(); ++i) {
    if (f != 0 && n > std::numeric_limits<std::uint64_t>::max() / f) {
      return std::numeric_limits<std::uint64_t>::max();
    }
    n *= f;
  }
  return n;
}

FillResult oracle_fill(const BoundModel& model, const Template& tmpl, std::uint64_t max_evaluations) {
  tmpl.validate();
  const std::size_t V = model.vocab();
  const std::uint64_t n = oracle_evaluations(tmpl, V);
  if (n > max_evaluations) {
    throw std::invalid_argument("oracle: |V|^|B| = " +
                                (n == std::numeric_limits<std::uint64_t>::max() ? std::string("overflow")
                                                                                 : std::to_string(n)) +
                                " evaluations exceeds the cap of " + std::to_string(max_evaluations));
  }
  FillResult best;
  best.log_prob = -std::numeric_limits<double>::infinity();
  std::vector<int> fill(tmpl.num_blanks(), kNumSpecials);
  while (true) {
    std::vector<int> y = tmpl.filled(fill);
    const double lp = sequence_log_prob(model, y, &best.stats);
    ++best.stats.candidate_evals;
    if (lp > best.log_prob || best.sequence.empty()) {
      best.log_prob = lp;
      best.sequence = std::move(y);
    }
    // Odometer with the last blank varying fastest keeps lexicographic order.
    std::size_t j = fill.size();
    while (j > 0 && ++fill[j - 1] == static_cast<int>(V)) fill[--j] = kNumSpecials;
    if (j == 0) break;
  }
  return best;
}

FillResult beam_fill_forward(const BoundModel& fwd, const Template& tmpl, std::size_t width) {
  check_width(width);
  tmpl.validate();
  const ModelParams& p = *fwd.params;
  const std::size_t m = tmpl.length(), V = fwd.vocab();

  struct Hyp {
    std::vector<int> tokens;
    double log_prob = 0.0;
    DecoderState state;
    std::vector<double> next;
  };
  FillResult out;
  Hyp h0{{}, 0.0, initial_state(p, fwd.encoding()), std::vector<double>(V)};
  advance(p, h0.state, kBos, fwd.encoding(), h0.next);
  ++out.stats.decoder_steps;
  std::vector<Hyp> beam;
  beam.push_back(std::move(h0));

  for (std::size_t t = 0; t < m; ++t) {
    const int forced = tmpl.tokens[t];
    if (forced != kBlank) {
      for (Hyp& h : beam) {
        h.log_prob += h.next[static_cast<std::size_t>(forced)];
        h.tokens.push_back(forced);
      }
    } else {
      struct Cand {
        double score;
        std::size_t hyp;
        int token;
      };
      std::vector<Cand> cands;
      for (std::size_t i = 0; i < beam.size(); ++i)
        for (int v : top_fillable(beam[i].next, width))
          cands.push_back({beam[i].log_prob + beam[i].next[static_cast<std::size_t>(v)], i, v});
      std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.hyp != b.hyp ? a.hyp < b.hyp : a.token < b.token;
      });
      if (cands.size() > width) cands.resize(width);
      std::vector<Hyp> next;
      for (const Cand& c : cands) {
        Hyp h = beam[c.hyp];
        h.tokens.push_back(c.token);
        h.log_prob = c.score;
        next.push_back(std::move(h));
      }
      beam = std::move(next);
    }
    if (t + 1 < m) {
      for (Hyp& h : beam) {
        advance(p, h.state, h.tokens.back(), fwd.encoding(), h.next);
        ++out.stats.decoder_steps;
      }
    }
  }
  const auto best = std::max_element(beam.begin(), beam.end(), [](const Hyp& a, const Hyp& b) {
    return a.log_prob < b.log_prob;  // first maximum wins
  });
  out.sequence = best->tokens;
  out.log_prob = best->log_prob;
  return out;
}

FillResult beam_fill_backward(const BoundModel& bwd, const Template& tmpl, std::size_t width) {
  FillResult r = beam_fill_forward(bwd, tmpl.reversed(), width);
  std::reverse(r.sequence.begin(), r.sequence.end());
  return r;
}

double combined_score(const BoundModel& fwd, const BoundModel& bwd, std::span<const int> y,
                      DecodeStats* stats) {
  const double m = static_cast<double>(y.size());
  const double f = sequence_log_prob(fwd, y, stats) / m;
  const double b = sequence_log_prob(bwd, reverse_sequence(y), stats) / m;
  return 0.5 * (f + b);
}

FillResult beam_fill_both(const BoundModel& fwd, const BoundModel& bwd, const Template& tmpl,
                          std::size_t width) {
  if (fwd.vocab() != bwd.vocab()) throw std::invalid_argument("beam_fill_both: vocabularies differ");
  FillResult f = beam_fill_forward(fwd, tmpl, width);
  FillResult b = beam_fill_backward(bwd, tmpl, width);
  DecodeStats stats;
  stats.decoder_steps = f.stats.decoder_steps + b.stats.decoder_steps;
  const double sf = combined_score(fwd, bwd, f.sequence, &stats);
  const double sb = f.sequence == b.sequence ? sf : combined_score(fwd, bwd, b.sequence, &stats);
  FillResult out = sb > sf ? std::move(b) : std::move(f);
  out.log_prob = std::max(sf, sb);
  out.stats = stats;
  return out;
}

double product_score(const BoundModel& fwd, const BoundModel& bwd, std::span<const int> y,
                     DecodeStats* stats) {
  return sequence_log_prob(fwd, y, stats) + sequence_log_prob(bwd, reverse_sequence(y), stats);
}

BibsResult bibs_fill(const BoundModel& fwd, const BoundModel& bwd, const Template& tmpl,
                     std::span<const int> init, std::size_t width, std::size_t max_rounds) {
  check_width(width);
  tmpl.validate();
  check_init(tmpl, init);
  if (fwd.vocab() != bwd.vocab()) throw std::invalid_argument("bibs_fill: vocabularies differ");
  const std::size_t m = tmpl.length();

  struct Hyp {
    std::vector<int> y;
    double score;
  };
  BibsResult out;
  const std::vector<int> y0 = tmpl.filled(init);
  std::vector<Hyp> beam = {{y0, product_score(fwd, bwd, y0, &out.stats)}};

  auto expand = [&](std::size_t t) {
    std::vector<Hyp> cands;
    for (const Hyp& h : beam) {
      const std::vector<int> rev = reverse_sequence(h.y);
      const std::size_t tr = m - 1 - t;
      const Prefix pf = run_prefix(fwd, h.y, t, out.stats);
      const Prefix pb = run_prefix(bwd, rev, tr, out.stats);
      std::vector<double> local(fwd.vocab());
      for (std::size_t v = 0; v < local.size(); ++v) local[v] = pf.log_probs[v] + pb.log_probs[v];
      std::vector<int> proposals = top_fillable(local, width);
      if (std::find(proposals.begin(), proposals.end(), h.y[t]) == proposals.end())
        proposals.push_back(h.y[t]);
      for (int v : proposals) {
        Hyp c{h.y, 0.0};
        c.y[t] = v;
        const bool seen = std::any_of(cands.begin(), cands.end(), [&](const Hyp& o) { return o.y == c.y; });
        if (seen) continue;
        std::vector<int> crev = rev;
        crev[tr] = v;
        c.score = pf.log_prob + run_suffix(fwd, pf, c.y, t, out.stats) + pb.log_prob +
                  run_suffix(bwd, pb, crev, tr, out.stats);
        ++out.stats.candidate_evals;
        cands.push_back(std::move(c));
      }
    }
    std::sort(cands.begin(), cands.end(), [](const Hyp& a, const Hyp& b) {
      return a.score != b.score ? a.score > b.score : a.y < b.y;
    });
    if (cands.size() > width) cands.resize(width);
    beam = std::move(cands);
  };

  for (std::size_t round = 1; round <= max_rounds && tmpl.num_blanks() > 0; ++round) {
    std::vector<std::vector<int>> before;
    for (const Hyp& h : beam) before.push_back(h.y);
    for (std::size_t j = 0; j < tmpl.num_blanks(); ++j) expand(tmpl.blanks[j]);
    for (std::size_t j = tmpl.num_blanks(); j-- > 0;) expand(tmpl.blanks[j]);
    out.rounds = round;
    std::vector<std::vector<int>> after;
    for (const Hyp& h : beam) after.push_back(h.y);
    if (after == before) break;
  }
  out.sequence = beam.front().y;
  out.log_prob = beam.front().score;
  return out;
}

std::vector<double> fillable_conditional(const BoundModel& birnn, std::span<const int> y,
                                         std::size_t t) {
  const Tensor probs = birnn_conditional(*birnn.params, birnn.encoding(), y, t);
  std::vector<double> p(probs.data().begin(), probs.data().end());
  double total = 0.0;
  for (std::size_t v = 0; v < p.size(); ++v) {
    if (!Vocab::is_fillable(static_cast<int>(v))) p[v] = 0.0;
    total += p[v];
  }
  if (!(total > 0.0)) throw NumericError("fillable_conditional: no mass on fillable tokens");
  for (double& v : p) v /= total;
  return p;
}

int gsn_resample(const BoundModel& birnn, std::span<const int> y, std::size_t t,
                 std::mt19937_64& rng) {
  const std::vector<double> p = fillable_conditional(birnn, y, t);
  std::discrete_distribution<int> dist(p.begin(), p.end());
  return dist(rng);
}

FillResult gsn_fill(const BoundModel& birnn, const Template& tmpl, std::span<const int> init,
                    std::size_t rounds, std::uint64_t seed) {
  tmpl.validate();
  check_init(tmpl, init);
  FillResult out;
  out.sequence = tmpl.filled(init);
  const std::size_t steps_per_eval = tmpl.length() + 1;
  std::mt19937_64 rng(seed);
  for (std::size_t r = 0; r < rounds; ++r) {
    for (std::size_t t : tmpl.blanks) {
      out.sequence[t] = gsn_resample(birnn, out.sequence, t, rng);
      out.stats.decoder_steps += steps_per_eval;
    }
  }
  for (std::size_t t : tmpl.blanks) {
    const std::vector<double> p = fillable_conditional(birnn, out.sequence, t);
    const auto best = std::max_element(p.begin(), p.end());  // first maximum
    out.sequence[t] = static_cast<int>(best - p.begin());
    out.log_prob += std::log(*best);
    out.stats.decoder_steps += steps_per_eval;
  }
  return out;
}

}  // namespace tigs
