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

#include "tigs/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "tigs/bleu.hpp"
#include "tigs/io.hpp"

namespace tigs {

namespace {

struct AlgoInfo {
  Algorithm algo;
  const char* name;
  const char* display;
};

constexpr AlgoInfo kAlgos[] = {
    {Algorithm::kBeamForward, "bs-f", "Seq2Seq-f"},
    {Algorithm::kBeamBackward, "bs-b", "Seq2Seq-b"},
    {Algorithm::kBeamBoth, "bs-fb", "Seq2Seq-f+b"},
    {Algorithm::kBibs, "bibs", "BiRNN-BiBS"},
    {Algorithm::kGsn, "gsn", "BiRNN-GSN"},
    {Algorithm::kTigs, "tigs", "TIGS"},
};

const AlgoInfo& info(Algorithm a) {
  for (const auto& i : kAlgos)
    if (i.algo == a) return i;
  throw std::invalid_argument("unknown algorithm");
}

}  // namespace

Algorithm parse_algorithm(std::string_view s) {
  for (const auto& i : kAlgos)
    if (s == i.name) return i.algo;
  throw std::invalid_argument("unknown algorithm '" + std::string(s) +
                              "' (expected tigs, bs-f, bs-b, bs-fb, bibs or gsn)");
}

const char* algorithm_name(Algorithm a) { return info(a).name; }
const char* algorithm_display(Algorithm a) { return info(a).display; }

std::vector<Algorithm> all_algorithms() {
  std::vector<Algorithm> out;
  for (const auto& i : kAlgos) out.push_back(i.algo);
  return out;
}

void InferenceModels::require(Algorithm a) const {
  auto need = [&](const ModelParams* p, DecoderKind kind, const char* what) {
    if (!p) throw std::invalid_argument(std::string(algorithm_name(a)) + " needs a " + what + " model");
    if (p->config.decoder != kind) {
      throw std::invalid_argument(std::string(what) + " checkpoint has decoder '" +
                                  decoder_kind_name(p->config.decoder) + "'");
    }
  };
  if (!forward) throw std::invalid_argument(std::string(algorithm_name(a)) + " needs a forward model");
  if (forward->config.decoder == DecoderKind::kBiRnn) {
    throw std::invalid_argument("forward checkpoint has a birnn decoder");
  }
  if (a == Algorithm::kBeamBackward || a == Algorithm::kBeamBoth || a == Algorithm::kBibs)
    need(backward, DecoderKind::kBackward, "backward");
  if (a == Algorithm::kGsn) need(birnn, DecoderKind::kBiRnn, "birnn");
  for (const ModelParams* p : {backward, birnn}) {
    if (p && p->config.tgt_vocab != forward->config.tgt_vocab) {
      throw std::invalid_argument("checkpoints disagree on the target vocabulary size");
    }
  }
}

nlohmann::json InferenceConfig::to_json() const {
  return {{"tigs", tigs.to_json()}, {"beam_width", beam_width}, {"max_rounds", max_rounds}, {"seed", seed}};
}

InferenceConfig InferenceConfig::from_json(const nlohmann::json& j) {
  InferenceConfig c;
  if (j.contains("tigs")) c.tigs = TigsConfig::from_json(j.at("tigs"));
  c.beam_width = j.value("beam_width", c.beam_width);
  c.max_rounds = j.value("max_rounds", c.max_rounds);
  c.seed = j.value("seed", c.seed);
  if (c.beam_width < 1) throw std::invalid_argument("beam_width must be >= 1");
  if (c.max_rounds < 1) throw std::invalid_argument("max_rounds must be >= 1");
  return c;
}

InstanceResult infill_instance(const InferenceModels& models, Algorithm algorithm,
                               const InferenceConfig& config, std::size_t id,
                               std::span<const int> x, const Template& tmpl) {
  InstanceResult r;
  r.id = id;
  r.algorithm = algorithm;
  const auto start = std::chrono::steady_clock::now();
  try {
    models.require(algorithm);
    const BoundModel f(*models.forward, x);
    auto greedy = [&] { return tmpl.fill_of(beam_fill_forward(f, tmpl, 1).sequence); };
    FillResult fr;
    switch (algorithm) {
      case Algorithm::kTigs:
        if (tmpl.num_blanks() == 0) {
          fr.sequence = tmpl.tokens;
        } else {
          TigsResult t = tigs_infill(f, tmpl, config.tigs);
          fr.sequence = std::move(t.sequence);
          fr.stats = t.total;
          r.round_nll = std::move(t.round_nll);
          r.rounds = t.rounds;
        }
        break;
      case Algorithm::kBeamForward:
        fr = beam_fill_forward(f, tmpl, config.beam_width);
        break;
      case Algorithm::kBeamBackward:
        fr = beam_fill_backward(BoundModel(*models.backward, x), tmpl, config.beam_width);
        break;
      case Algorithm::kBeamBoth:
        fr = beam_fill_both(f, BoundModel(*models.backward, x), tmpl, config.beam_width);
        break;
      case Algorithm::kBibs: {
        BibsResult b = bibs_fill(f, BoundModel(*models.backward, x), tmpl, greedy(), config.beam_width,
                                 config.max_rounds);
        r.rounds = b.rounds;
        fr = std::move(b);
        break;
      }
      case Algorithm::kGsn:
        fr = gsn_fill(BoundModel(*models.birnn, x), tmpl, greedy(), config.max_rounds,
                      derive_seed(config.seed, "gsn", id));
        break;
    }
    r.sequence = std::move(fr.sequence);
    r.stats = fr.stats;
    r.nll = sequence_nll(*models.forward, f.encoding(), r.sequence).per_token;
    r.ok = true;
  } catch (const std::exception& e) {
    r.ok = false;
    r.error = e.what();
  }
  r.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return r;
}

std::vector<InstanceResult> infill_all(const InferenceModels& models, Algorithm algorithm,
                                       const InferenceConfig& config,
                                       const std::vector<std::vector<int>>& sources,
                                       const std::vector<Template>& templates,
                                       std::size_t workers) {
  if (sources.size() != templates.size()) {
    throw std::invalid_argument("infill: " + std::to_string(sources.size()) + " sources for " +
                                std::to_string(templates.size()) + " templates");
  }
  std::vector<InstanceResult> results(templates.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < templates.size(); i = next++)
      results[i] = infill_instance(models, algorithm, config, i, sources[i], templates[i]);
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(workers, templates.size()));
  if (n == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  return results;
}

double eval_nll(const ModelParams& lm, const std::vector<SequencePair>& instances, const Vocab* vocab) {
  if (instances.empty()) throw std::invalid_argument("eval_nll: no instances");
  if (vocab && vocab->size() != lm.config.tgt_vocab) {
    throw std::invalid_argument("eval_nll: eval LM vocabulary has " +
                                std::to_string(lm.config.tgt_vocab) + " entries, data vocabulary " +
                                std::to_string(vocab->size()));
  }
  double total = 0.0;
  for (const auto& s : instances) total += sequence_nll(lm, s.x, s.y).per_token;
  return total / static_cast<double>(instances.size());
}

CellReport aggregate_cell(Algorithm algorithm, MaskStrategy strategy, double ratio,
                          const std::vector<InstanceResult>& results,
                          const std::vector<Template>& templates,
                          const std::vector<SequencePair>& truth, const ModelParams* eval_lm,
                          std::size_t sampled_pool_size, std::uint64_t seed) {
  if (results.size() != truth.size() || templates.size() != truth.size()) {
    throw std::invalid_argument("aggregate: results, templates and references differ in count");
  }
  CellReport c;
  c.algorithm = algorithm;
  c.strategy = strategy;
  c.ratio = ratio;
  c.instances = results.size();
  std::vector<double> nlls;
  std::vector<std::vector<int>> hyps;
  std::vector<SequencePair> filled;
  double bleu = 0.0, ms = 0.0;
  std::size_t preserved = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const InstanceResult& r = results[i];
    if (!r.ok) {
      ++c.failures;
      continue;
    }
    nlls.push_back(r.nll);
    hyps.push_back(r.sequence);
    filled.push_back({truth[i].x, r.sequence});
    bleu += bleu4(r.sequence, std::vector<std::vector<int>>{truth[i].y});
    ms += r.ms;
    preserved += templates[i].preserved_by(r.sequence) ? 1 : 0;
  }
  const double n = static_cast<double>(nlls.size());
  if (nlls.empty()) return c;
  double mean = 0.0;
  for (double v : nlls) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : nlls) var += (v - mean) * (v - mean);
  c.inference_nll = mean;
  c.inference_nll_std = std::sqrt(var / n);
  c.bleu = bleu / n;
  c.mean_ms = ms / n;
  c.preservation = static_cast<double>(preserved) / n;
  if (eval_lm) c.eval_nll = eval_nll(*eval_lm, filled);
  if (sampled_pool_size > 0) {
    std::vector<std::vector<int>> pool;
    for (const auto& t : truth) pool.push_back(t.y);
    c.sampled_bleu = bleu_sampled_refs(hyps, pool, std::min(sampled_pool_size, pool.size()), seed);
  }
  return c;
}

const CellReport& EvalReport::cell(Algorithm a, MaskStrategy s, double ratio) const {
  for (const auto& c : cells)
    if (c.algorithm == a && c.strategy == s && c.ratio == ratio) return c;
  throw std::out_of_range("report has no such cell");
}

EvalReport run_grid(const InferenceModels& models, const ModelParams* eval_lm,
                    const std::vector<SequencePair>& test_set, const GridOptions& options,
                    const InferenceConfig& config, std::vector<GridInstance>* per_instance) {
  if (test_set.empty()) throw std::invalid_argument("run_grid: empty test set");
  for (Algorithm a : options.algorithms) models.require(a);
  EvalReport report;
  report.sampled_pool_size = std::min(options.sampled_pool_size, test_set.size());
  std::vector<std::vector<int>> sources;
  for (const auto& s : test_set) sources.push_back(s.x);
  for (MaskStrategy strategy : options.strategies) {
    for (double ratio : options.ratios) {
      std::vector<Template> templates;
      for (std::size_t i = 0; i < test_set.size(); ++i)
        templates.push_back(make_mask(test_set[i].y, strategy, ratio, derive_seed(options.mask_seed, "mask", i)));
      for (Algorithm a : options.algorithms) {
        auto results = infill_all(models, a, config, sources, templates, options.workers);
        report.cells.push_back(aggregate_cell(a, strategy, ratio, results, templates, test_set, eval_lm,
                                              report.sampled_pool_size, derive_seed(options.mask_seed, "refs", 0)));
        if (per_instance) {
          for (std::size_t i = 0; i < results.size(); ++i)
            per_instance->push_back({i, strategy, ratio, templates[i], std::move(results[i])});
        }
      }
    }
  }
  return report;
}

namespace {

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

std::string ratio_label(double r) { return std::to_string(static_cast<int>(std::lround(r * 100))) + "%"; }

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(17);
  return out;
}

}  // namespace

void write_report_tsv(const std::string& path, const EvalReport& report, const std::string& header) {
  auto out = open_out(path);
  if (!header.empty()) out << header << '\n';
  std::ostringstream eps;
  eps << report.bleu_epsilon;
  out << "# nll is the mean per-token NLL; bleu smoothing epsilon=" << eps.str()
      << "; sampled reference pool=" << report.sampled_pool_size << '\n';
  out << "algorithm\tstrategy\tratio\tinstances\tfailures\tinference_nll\tinference_nll_std\teval_nll\t"
         "bleu\tsampled_bleu\tpreservation\tmean_ms\n";
  for (const auto& c : report.cells) {
    out << algorithm_name(c.algorithm) << '\t' << strategy_name(c.strategy) << '\t' << c.ratio << '\t'
        << c.instances << '\t' << c.failures << '\t' << c.inference_nll << '\t' << c.inference_nll_std
        << '\t' << (c.eval_nll ? fmt(*c.eval_nll, 6) : "-") << '\t' << c.bleu << '\t'
        << (c.sampled_bleu ? fmt(*c.sampled_bleu, 6) : "-") << '\t' << c.preservation << '\t'
        << c.mean_ms << '\n';
  }
}

std::string render_table(const EvalReport& report) {
  std::vector<Algorithm> algos;
  std::vector<std::pair<MaskStrategy, double>> cols;
  for (const auto& c : report.cells) {
    if (std::find(algos.begin(), algos.end(), c.algorithm) == algos.end()) algos.push_back(c.algorithm);
    const std::pair<MaskStrategy, double> key{c.strategy, c.ratio};
    if (std::find(cols.begin(), cols.end(), key) == cols.end()) cols.push_back(key);
  }
  const bool eval = !report.cells.empty() && report.cells.front().eval_nll.has_value();
  std::ostringstream os;
  os << "NLL: mean per-token, " << (eval ? "evaluation LM" : "inference model")
     << "; BLEU: BLEU-4 against the ground truth\n";
  os << std::left << std::setw(14) << "";
  for (const auto& [s, r] : cols)
    os << std::setw(18) << (std::string(strategy_name(s)) + " " + ratio_label(r));
  os << '\n' << std::setw(14) << "Algorithm";
  for (std::size_t i = 0; i < cols.size(); ++i) os << std::setw(9) << "NLL" << std::setw(9) << "BLEU";
  os << '\n';
  for (Algorithm a : algos) {
    os << std::setw(14) << algorithm_display(a);
    for (const auto& [s, r] : cols) {
      const CellReport& c = report.cell(a, s, r);
      os << std::setw(9) << fmt(eval ? *c.eval_nll : c.inference_nll, 3) << std::setw(9)
         << fmt(100.0 * c.bleu, 2);
    }
    os << '\n';
  }
  return os.str();
}

void write_fills_tsv(const std::string& path, const std::vector<InstanceResult>& results,
                     const Vocab& vocab, const std::string& header, bool timing) {
  auto out = open_out(path);
  if (!header.empty()) out << header << '\n';
  out << "id\talgorithm\tfilled\tnll\tms\tstatus\n";
  for (const auto& r : results) {
    out << r.id << '\t' << algorithm_name(r.algorithm) << '\t' << join(vocab.decode(r.sequence), " ")
        << '\t' << r.nll << '\t' << (timing ? r.ms : 0.0) << '\t' << (r.ok ? "ok" : "error: " + r.error)
        << '\n';
  }
}

std::vector<InstanceResult> read_fills_tsv(const std::string& path, const Vocab& vocab) {
  const auto lines = read_lines(path);
  if (lines.empty() || !lines[0].starts_with("id\t")) {
    throw std::runtime_error(path + ": missing fills header row");
  }
  std::vector<InstanceResult> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split(lines[i], '\t');
    if (f.size() != 6) throw std::runtime_error(path + ":" + std::to_string(i + 2) + ": expected 6 fields");
    InstanceResult r;
    r.id = std::stoul(f[0]);
    r.algorithm = parse_algorithm(f[1]);
    r.sequence = vocab.encode(split_ws(f[2]));
    r.nll = std::stod(f[3]);
    r.ms = std::stod(f[4]);
    r.ok = f[5] == "ok";
    if (!r.ok) r.error = f[5];
    out.push_back(std::move(r));
  }
  return out;
}

void write_instances_tsv(const std::string& path, const std::vector<GridInstance>& rows,
                         const Vocab& vocab, const std::string& header, bool timing) {
  auto out = open_out(path);
  if (!header.empty()) out << header << '\n';
  out << "id\tstrategy\tratio\talgorithm\ttemplate\tfilled\tnll\tms\tstatus\n";
  for (const auto& g : rows) {
    const auto& r = g.result;
    out << g.id << '\t' << strategy_name(g.strategy) << '\t' << g.ratio << '\t'
        << algorithm_name(r.algorithm) << '\t' << join(vocab.decode(g.tmpl.tokens), " ") << '\t'
        << join(vocab.decode(r.sequence), " ") << '\t' << r.nll << '\t' << (timing ? r.ms : 0.0)
        << '\t' << (r.ok ? "ok" : "error: " + r.error) << '\n';
  }
}

}  // namespace tigs
