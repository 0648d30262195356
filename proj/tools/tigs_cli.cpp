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

// tigs: data preparation, training, masking, infilling, evaluation and
// exhaustive oracles behind one executable.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "tigs/baselines.hpp"
#include "tigs/checkpoint.hpp"
#include "tigs/corpus.hpp"
#include "tigs/eval.hpp"
#include "tigs/io.hpp"
#include "tigs/mask.hpp"
#include "tigs/synthetic.hpp"
#include "tigs/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tigs;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const std::set<std::string> kConfigSections = {"seed",  "data",  "model", "eval_model", "train",
                                               "infer", "mask",  "eval",  "checkpoints"};

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::size_t workers = 1;
  bool no_timing = false;
  json cfg = json::object();

  void load() {
    if (config_path.empty()) return;
    if (!fs::exists(config_path)) throw UsageError("config file not found: " + config_path);
    std::ifstream in(config_path);
    try {
      cfg = json::parse(in);
    } catch (const json::parse_error& e) {
      throw UsageError(config_path + ": " + e.what());
    }
    if (!cfg.is_object()) throw UsageError(config_path + ": top level must be an object");
    for (const auto& [k, v] : cfg.items()) {
      if (!kConfigSections.contains(k)) throw UsageError(config_path + ": unknown section '" + k + "'");
    }
  }

  json section(const char* name) const {
    if (!cfg.contains(name)) return json::object();
    if (!cfg.at(name).is_object()) throw UsageError(std::string("config section '") + name + "' must be an object");
    return cfg.at(name);
  }

  // Flags win over the config file; there is no fallback seed.
  std::uint64_t require_seed() const {
    if (seed) return *seed;
    if (cfg.contains("seed")) return cfg.at("seed").get<std::uint64_t>();
    throw UsageError("a seed is required: pass --seed or set \"seed\" in the config");
  }
};

template <class T>
T pick(const std::optional<T>& flag, const json& sec, const char* key, T fallback) {
  if (flag) return *flag;
  if (sec.contains(key)) return sec.at(key).get<T>();
  return fallback;
}

std::string pick_path(const std::string& flag, const json& sec, const char* key) {
  if (!flag.empty()) return flag;
  return sec.value(key, std::string());
}

std::string require_file(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string("missing ") + what);
  if (!fs::is_regular_file(path)) throw UsageError(std::string(what) + " not found: " + path);
  return path;
}

fs::path scratch_dir() {
  const char* env = std::getenv("TIGS_SCRATCH_DIR");
  return env && *env ? fs::path(env) : fs::path("tigs-out");
}

std::string out_or_default(const std::string& out, const std::string& name) {
  if (!out.empty()) return out;
  return (scratch_dir() / name).string();
}

void ensure_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

std::uint64_t hash_of(const json& j) { return fnv1a64(j.dump()); }

void add_common(CLI::App* app, Common& c, bool workers = false) {
  app->add_option("--config", c.config_path, "JSON run configuration");
  app->add_option("--seed", c.seed, "Seed (required here or in the config)");
  app->add_option("--out", c.out, "Output path");
  if (workers) app->add_option("--workers", c.workers, "Worker threads")->check(CLI::PositiveNumber);
}

// Prepared data directory: vocab.txt, train.tsv, test.tsv and data.json.
struct DataDir {
  fs::path dir;
  CorpusFormat format = CorpusFormat::kPairs;
  Tokenizer tokenizer = Tokenizer::kWord;
  Vocab vocab;

  static DataDir open(const std::string& path) {
    if (path.empty()) throw UsageError("missing --data directory (or data.dir in the config)");
    DataDir d;
    d.dir = path;
    const fs::path meta = d.dir / "data.json";
    if (!fs::is_regular_file(meta)) throw UsageError("not a prepared data directory: " + path);
    std::ifstream in(meta);
    const json j = json::parse(in);
    d.format = parse_format(j.at("format").get<std::string>());
    d.tokenizer = parse_tokenizer(j.at("tokenizer").get<std::string>());
    d.vocab = load_vocab((d.dir / "vocab.txt").string());
    return d;
  }

  std::vector<SequencePair> load(const std::string& file, const std::string& override_path = "") const {
    const std::string p = override_path.empty() ? (dir / file).string() : override_path;
    require_file(p, "data file");
    return load_corpus(p, format, tokenizer, vocab);
  }
};

Vocab vocab_of(const Checkpoint& ck, const std::string& path) {
  if (!ck.meta.contains("vocab")) throw UsageError(path + ": checkpoint carries no vocabulary");
  Vocab v = Vocab::from_tokens(ck.meta.at("vocab").get<std::vector<std::string>>());
  if (v.size() != ck.params.config.tgt_vocab) {
    throw UsageError(path + ": stored vocabulary disagrees with the model's target vocabulary");
  }
  return v;
}

// ---------------------------------------------------------------- synth

struct SynthOpts {
  Common c;
  std::size_t pairs = 10000;
};

int cmd_synth(SynthOpts& o) {
  o.c.load();
  const std::uint64_t seed = o.c.require_seed();
  const std::string out = out_or_default(o.c.out, "corpus.tsv");
  const auto corpus = generate_dialog_corpus(o.pairs, seed);
  ensure_parent(out);
  save_text_corpus(out, corpus, CorpusFormat::kPairs, Tokenizer::kWord);
  std::cerr << "wrote " << corpus.size() << " pairs to " << out << '\n';
  return 0;
}

// ---------------------------------------------------------------- prepare

struct PrepareOpts {
  Common c;
  std::string corpus;
  std::optional<std::string> format, tokenizer;
  std::optional<std::size_t> vocab_size, min_count, test_size;
  std::optional<double> test_fraction;
};

int cmd_prepare(PrepareOpts& o) {
  o.c.load();
  const json sec = o.c.section("data");
  const std::uint64_t seed = o.c.require_seed();
  const std::string corpus_path = require_file(pick_path(o.corpus, sec, "corpus"), "corpus");
  json eff = {{"corpus", corpus_path},
              {"format", pick<std::string>(o.format, sec, "format", "pairs")},
              {"tokenizer", pick<std::string>(o.tokenizer, sec, "tokenizer", "word")},
              {"vocab_size", pick<std::size_t>(o.vocab_size, sec, "vocab_size", 2000)},
              {"min_count", pick<std::size_t>(o.min_count, sec, "min_count", 1)},
              {"test_fraction", pick<double>(o.test_fraction, sec, "test_fraction", 0.05)},
              {"test_size", pick<std::size_t>(o.test_size, sec, "test_size", 0)},
              {"seed", seed}};
  const CorpusFormat format = parse_format(eff["format"].get<std::string>());
  const Tokenizer tok = parse_tokenizer(eff["tokenizer"].get<std::string>());
  const double frac = eff["test_fraction"];
  if (!(frac > 0.0 && frac < 1.0)) throw UsageError("test_fraction must lie in (0, 1)");
  if (eff["vocab_size"].get<std::size_t>() < static_cast<std::size_t>(kNumSpecials) + 1) {
    throw UsageError("vocab_size must be at least 6");
  }
  const fs::path dir = out_or_default(pick_path(o.c.out, sec, "dir"), "data");

  auto corpus = load_text_corpus(corpus_path, format, tok);
  std::mt19937_64 rng(seed);
  std::shuffle(corpus.begin(), corpus.end(), rng);
  std::size_t n_test = static_cast<std::size_t>(std::lround(frac * static_cast<double>(corpus.size())));
  if (const std::size_t cap = eff["test_size"]; cap > 0) n_test = std::min(n_test, cap);
  n_test = std::clamp<std::size_t>(n_test, 1, corpus.size() - 1);
  const std::vector<TextPair> test(corpus.begin(), corpus.begin() + static_cast<std::ptrdiff_t>(n_test));
  const std::vector<TextPair> train(corpus.begin() + static_cast<std::ptrdiff_t>(n_test), corpus.end());
  const Vocab vocab = build_vocab(train, eff["vocab_size"], eff["min_count"]);

  fs::create_directories(dir);
  save_vocab((dir / "vocab.txt").string(), vocab);
  save_text_corpus((dir / "train.tsv").string(), train, format, tok);
  save_text_corpus((dir / "test.tsv").string(), test, format, tok);
  json meta = eff;
  meta["header"] = make_header("data", seed, hash_of(eff));
  meta["train_pairs"] = train.size();
  meta["test_pairs"] = test.size();
  meta["vocab"] = vocab.size();
  std::ofstream((dir / "data.json").string()) << meta.dump(2) << '\n';
  std::cerr << "train " << train.size() << ", test " << test.size() << ", |V| " << vocab.size() << " in "
            << dir.string() << '\n';
  return 0;
}

// ---------------------------------------------------------------- train

struct TrainOpts {
  Common c;
  std::string data, role = "forward";
  std::optional<std::size_t> epochs, batch;
  std::optional<double> lr;
};

int cmd_train(TrainOpts& o) {
  o.c.load();
  const Role role = parse_role(o.role);
  const std::uint64_t seed = o.c.require_seed();
  const DataDir data = DataDir::open(pick_path(o.data, o.c.section("data"), "dir"));

  json tj = o.c.section("train");
  if (o.epochs) tj["epochs"] = *o.epochs;
  if (o.batch) tj["batch_size"] = *o.batch;
  if (o.lr) tj["learning_rate"] = *o.lr;
  // The evaluation LM trains from its own seed so it never shares an
  // initialization with the inference model.
  tj["seed"] = role == Role::kEvalLm ? derive_seed(seed, "eval-lm", 0) : seed;
  const TrainConfig tc = TrainConfig::from_json(tj);

  json mj = role == Role::kEvalLm && o.c.cfg.contains("eval_model") ? o.c.section("eval_model")
                                                                     : o.c.section("model");
  const bool conditional = data.format == CorpusFormat::kPairs;
  mj["tgt_vocab"] = data.vocab.size();
  mj["src_vocab"] = conditional ? data.vocab.size() : 0;
  if (!conditional) mj["attention"] = "none";
  mj["decoder"] = decoder_kind_name(decoder_for_role(role));
  const ModelConfig mc = ModelConfig::from_json(mj);

  const std::string out = out_or_default(o.c.out, std::string(role_name(role)) + ".ckpt");
  const json eff = {{"role", role_name(role)}, {"model", mc.to_json()}, {"train", tc.to_json()},
                    {"data", data.dir.string()}};
  const std::string header = make_header("checkpoint", seed, hash_of(eff));

  const auto corpus = data.load("train.tsv");
  std::cerr << "training " << role_name(role) << " on " << corpus.size() << " pairs, "
            << ModelParams::init(mc, 0).num_parameters() << " parameters\n";
  const auto t0 = std::chrono::steady_clock::now();
  const TrainResult r = train(tc, corpus_for_role(corpus, role), mc, [&](const EpochStats& s) {
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cerr << "epoch " << s.epoch << " train " << s.train_nll << " valid " << s.valid_nll << " ("
              << sec << " s)\n";
  });
  if (r.diverged) std::cerr << "warning: training diverged; keeping epoch " << r.best_epoch << '\n';

  json meta = eff;
  meta["header"] = header;
  meta["vocab"] = data.vocab.tokens();
  meta["format"] = data.format == CorpusFormat::kPairs ? "pairs" : "mono";
  meta["tokenizer"] = data.tokenizer == Tokenizer::kWord ? "word" : "char";
  meta["best_epoch"] = r.best_epoch;
  meta["diverged"] = r.diverged;
  ensure_parent(out);
  save_checkpoint(out, r.params, meta);
  write_loss_history(out + ".loss.csv", r.history, header);
  std::cerr << "wrote " << out << '\n';
  return 0;
}

// ---------------------------------------------------------------- mask

struct MaskOpts {
  Common c;
  std::string data, test;
  std::optional<std::string> strategy;
  std::optional<double> ratio;
};

int cmd_mask(MaskOpts& o) {
  o.c.load();
  const json sec = o.c.section("mask");
  const std::uint64_t seed = o.c.require_seed();
  const MaskStrategy strategy = parse_strategy(pick<std::string>(o.strategy, sec, "strategy", "middle"));
  const double ratio = pick<double>(o.ratio, sec, "ratio", 0.5);
  if (!(ratio > 0.0 && ratio < 1.0)) throw UsageError("--ratio must lie in (0, 1)");
  const DataDir data = DataDir::open(pick_path(o.data, o.c.section("data"), "dir"));
  const auto test = data.load("test.tsv", o.test);
  std::vector<Template> templates;
  for (std::size_t i = 0; i < test.size(); ++i)
    templates.push_back(make_mask(test[i].y, strategy, ratio, derive_seed(seed, "mask", i)));
  const json eff = {{"strategy", strategy_name(strategy)}, {"ratio", ratio}};
  const std::string out = out_or_default(o.c.out, "templates.txt");
  ensure_parent(out);
  write_templates(out, templates, data.vocab, make_header("templates", seed, hash_of(eff)));
  std::cerr << "wrote " << templates.size() << " templates to " << out << '\n';
  return 0;
}

// ---------------------------------------------------------------- infill

struct ModelPaths {
  std::string forward, backward, birnn;

  void add(CLI::App* app) {
    app->add_option("--forward", forward, "Forward checkpoint");
    app->add_option("--backward", backward, "Backward checkpoint");
    app->add_option("--birnn", birnn, "BiRNN checkpoint");
  }
  void resolve(const json& sec) {
    forward = pick_path(forward, sec, "forward");
    backward = pick_path(backward, sec, "backward");
    birnn = pick_path(birnn, sec, "birnn");
  }
};

struct LoadedModels {
  std::optional<Checkpoint> fwd, bwd, bi;
  Vocab vocab;
  InferenceModels models;

  static LoadedModels load(const ModelPaths& p, const std::vector<Algorithm>& algos) {
    LoadedModels m;
    auto need = [&](Algorithm a, std::initializer_list<Algorithm> users) {
      return std::find(users.begin(), users.end(), a) != users.end();
    };
    bool want_bwd = false, want_bi = false;
    for (Algorithm a : algos) {
      want_bwd |= need(a, {Algorithm::kBeamBackward, Algorithm::kBeamBoth, Algorithm::kBibs});
      want_bi |= a == Algorithm::kGsn;
    }
    m.fwd = load_checkpoint(require_file(p.forward, "--forward checkpoint"));
    m.vocab = vocab_of(*m.fwd, p.forward);
    if (want_bwd) m.bwd = load_checkpoint(require_file(p.backward, "--backward checkpoint"));
    if (want_bi) m.bi = load_checkpoint(require_file(p.birnn, "--birnn checkpoint"));
    m.models = {&m.fwd->params, m.bwd ? &m.bwd->params : nullptr, m.bi ? &m.bi->params : nullptr};
    for (Algorithm a : algos) m.models.require(a);
    return m;
  }
  LoadedModels() = default;
  LoadedModels(LoadedModels&& o) noexcept
      : fwd(std::move(o.fwd)), bwd(std::move(o.bwd)), bi(std::move(o.bi)), vocab(std::move(o.vocab)) {
    models = {fwd ? &fwd->params : nullptr, bwd ? &bwd->params : nullptr, bi ? &bi->params : nullptr};
  }
};

struct InferFlags {
  std::optional<std::size_t> k, beam_width, max_rounds;
  std::optional<double> alpha, lambda;

  void add(CLI::App* app) {
    app->add_option("--k", k, "TIGS candidate-set size (0: 1% of the vocabulary)");
    app->add_option("--alpha", alpha, "TIGS step size");
    app->add_option("--lambda", lambda, "TIGS embedding-distance weight");
    app->add_option("--beam-width", beam_width, "Beam width for the baselines");
    app->add_option("--max-rounds", max_rounds, "Round cap for TIGS, BiBS and GSN");
  }
  InferenceConfig resolve(const json& sec, std::uint64_t seed, std::size_t vocab) const {
    json j = sec;
    json t = j.contains("tigs") ? j.at("tigs") : json::object();
    if (k) t["k"] = *k;
    if (alpha) t["alpha"] = *alpha;
    if (lambda) t["lambda"] = *lambda;
    if (max_rounds) t["max_rounds"] = *max_rounds, j["max_rounds"] = *max_rounds;
    if (beam_width) j["beam_width"] = *beam_width;
    t["seed"] = seed;
    j["tigs"] = t;
    j["seed"] = seed;
    InferenceConfig c = InferenceConfig::from_json(j);
    c.tigs.validate(vocab);
    return c;
  }
};

std::vector<std::vector<int>> sources_for(const std::vector<SequencePair>& test, std::size_t n) {
  if (test.size() != n) {
    throw UsageError("template file has " + std::to_string(n) + " lines but the test file has " +
                     std::to_string(test.size()));
  }
  std::vector<std::vector<int>> xs;
  for (const auto& p : test) xs.push_back(p.x);
  return xs;
}

struct InfillOpts {
  Common c;
  ModelPaths paths;
  InferFlags infer;
  std::string data, test, templates, algo;
};

int cmd_infill(InfillOpts& o) {
  o.c.load();
  const std::uint64_t seed = o.c.require_seed();
  if (o.algo.empty()) throw UsageError("--algo is required");
  const Algorithm algo = parse_algorithm(o.algo);
  o.paths.resolve(o.c.section("checkpoints"));
  const LoadedModels lm = LoadedModels::load(o.paths, {algo});
  const InferenceConfig cfg = o.infer.resolve(o.c.section("infer"), seed, lm.vocab.size());
  const DataDir data = DataDir::open(pick_path(o.data, o.c.section("data"), "dir"));
  if (data.vocab.tokens() != lm.vocab.tokens()) throw UsageError("checkpoint and data vocabularies differ");
  const auto templates = read_templates(require_file(o.templates, "--templates file"), lm.vocab);
  const auto xs = sources_for(data.load("test.tsv", o.test), templates.size());
  const std::string out = out_or_default(o.c.out, std::string("fills.") + algorithm_name(algo) + ".tsv");

  const auto results = infill_all(lm.models, algo, cfg, xs, templates, o.c.workers);
  std::size_t failed = 0;
  for (const auto& r : results) failed += r.ok ? 0 : 1;
  const json eff = {{"algo", algorithm_name(algo)}, {"infer", cfg.to_json()}};
  ensure_parent(out);
  write_fills_tsv(out, results, lm.vocab, make_header("fills", seed, hash_of(eff)), !o.c.no_timing);
  std::cerr << "wrote " << results.size() << " fills (" << failed << " failed) to " << out << '\n';
  return 0;
}

// ---------------------------------------------------------------- eval

struct EvalOpts {
  Common c;
  std::vector<std::string> fills;
  std::string data, test, templates, eval_lm;
  std::optional<std::string> strategy;
  std::optional<double> ratio;
  std::optional<std::size_t> pool;
};

int cmd_eval(EvalOpts& o) {
  o.c.load();
  const json sec = o.c.section("eval");
  const std::uint64_t seed = o.c.require_seed();
  if (o.fills.empty()) throw UsageError("at least one --fills file is required");
  const DataDir data = DataDir::open(pick_path(o.data, o.c.section("data"), "dir"));
  const auto test = data.load("test.tsv", o.test);
  const auto templates = read_templates(require_file(o.templates, "--templates file"), data.vocab);
  if (templates.size() != test.size()) throw UsageError("templates and test file differ in length");
  const std::string lm_path = pick_path(o.eval_lm, o.c.section("checkpoints"), "eval_lm");
  std::optional<Checkpoint> lm;
  if (!lm_path.empty()) {
    lm = load_checkpoint(require_file(lm_path, "--eval-lm checkpoint"));
    if (vocab_of(*lm, lm_path).tokens() != data.vocab.tokens()) {
      throw UsageError("eval LM vocabulary differs from the data vocabulary");
    }
  }
  const MaskStrategy strategy = parse_strategy(pick<std::string>(o.strategy, o.c.section("mask"), "strategy", "middle"));
  const double ratio = pick<double>(o.ratio, o.c.section("mask"), "ratio", 0.5);
  const std::size_t pool = pick<std::size_t>(o.pool, sec, "sampled_pool_size", 1000);

  std::vector<std::vector<InstanceResult>> all;
  for (const auto& f : o.fills) {
    auto r = read_fills_tsv(require_file(f, "--fills file"), data.vocab);
    if (r.size() != test.size()) throw UsageError(f + ": fill count differs from the test set");
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (r[i].id != i) throw UsageError(f + ": instance ids out of order");
    }
    all.push_back(std::move(r));
  }
  EvalReport report;
  report.sampled_pool_size = std::min(pool, test.size());
  for (const auto& r : all) {
    report.cells.push_back(aggregate_cell(r.front().algorithm, strategy, ratio, r, templates, test,
                                          lm ? &lm->params : nullptr, report.sampled_pool_size,
                                          derive_seed(seed, "refs", 0)));
  }
  const json eff = {{"fills", o.fills}, {"pool", report.sampled_pool_size}, {"strategy", strategy_name(strategy)},
                    {"ratio", ratio}};
  const std::string out = out_or_default(o.c.out, "report.tsv");
  ensure_parent(out);
  write_report_tsv(out, report, make_header("report", seed, hash_of(eff)));
  std::cout << render_table(report);
  return 0;
}

// ---------------------------------------------------------------- oracle

struct OracleOpts {
  Common c;
  std::string checkpoint, data, test, templates;
  std::size_t max_blanks = 2, max_vocab = 64;
};

int cmd_oracle(OracleOpts& o) {
  o.c.load();
  const std::uint64_t seed = o.c.require_seed();
  const std::string path = require_file(o.checkpoint, "--checkpoint");
  const Checkpoint ck = load_checkpoint(path);
  if (ck.params.config.decoder == DecoderKind::kBiRnn) {
    throw UsageError("oracle needs a forward or backward checkpoint");
  }
  const Vocab vocab = vocab_of(ck, path);
  const DataDir data = DataDir::open(pick_path(o.data, o.c.section("data"), "dir"));
  const auto templates = read_templates(require_file(o.templates, "--templates file"), vocab);
  const auto xs = sources_for(data.load("test.tsv", o.test), templates.size());
  if (vocab.size() > o.max_vocab) {
    throw std::runtime_error("oracle refuses: |V| = " + std::to_string(vocab.size()) + " exceeds --max-vocab " +
                     std::to_string(o.max_vocab));
  }
  for (std::size_t i = 0; i < templates.size(); ++i) {
    const Template& t = templates[i];
    if (t.num_blanks() > o.max_blanks) {
      throw std::runtime_error("oracle refuses instance " + std::to_string(i) + ": " + std::to_string(t.num_blanks()) +
                       " blanks exceed --max-blanks " + std::to_string(o.max_blanks));
    }
    if (const auto n = oracle_evaluations(t, vocab.size()); n > kOracleMaxEvaluations) {
      throw std::runtime_error("oracle refuses instance " + std::to_string(i) + ": |V|^|B| = " + std::to_string(n) +
                       " exceeds the cap of " + std::to_string(kOracleMaxEvaluations) + " evaluations");
    }
  }
  const bool backward = ck.params.config.decoder == DecoderKind::kBackward;
  const std::string out = out_or_default(o.c.out, "fills.oracle.tsv");
  std::ostringstream body;
  body.precision(17);
  body << "id\talgorithm\tfilled\tnll\tms\tstatus\n";
  for (std::size_t i = 0; i < templates.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const BoundModel m(ck.params, xs[i]);
    FillResult r = oracle_fill(m, backward ? templates[i].reversed() : templates[i]);
    if (backward) r.sequence = reverse_sequence(r.sequence);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    body << i << "\toracle\t" << join(vocab.decode(r.sequence), " ") << '\t'
         << -r.log_prob / static_cast<double>(r.sequence.size()) << '\t' << (o.c.no_timing ? 0.0 : ms)
         << "\tok\n";
  }
  const json eff = {{"checkpoint", path}, {"max_blanks", o.max_blanks}, {"max_vocab", o.max_vocab}};
  ensure_parent(out);
  std::ofstream f(out);
  f << make_header("fills", seed, hash_of(eff)) << '\n' << body.str();
  if (!f) throw std::runtime_error("cannot write " + out);
  std::cerr << "wrote " << templates.size() << " oracle fills to " << out << '\n';
  return 0;
}

// ---------------------------------------------------------------- grid

struct GridOpts {
  Common c;
  ModelPaths paths;
  InferFlags infer;
  std::string data, eval_lm;
  std::vector<std::string> algos;
  std::optional<std::size_t> instances, pool;
};

int cmd_grid(GridOpts& o) {
  o.c.load();
  const std::uint64_t seed = o.c.require_seed();
  const json sec = o.c.section("eval");
  GridOptions g;
  if (!o.algos.empty()) {
    g.algorithms.clear();
    for (const auto& a : o.algos) g.algorithms.push_back(parse_algorithm(a));
  }
  o.paths.resolve(o.c.section("checkpoints"));
  const LoadedModels lm = LoadedModels::load(o.paths, g.algorithms);
  const InferenceConfig cfg = o.infer.resolve(o.c.section("infer"), seed, lm.vocab.size());
  const DataDir data = DataDir::open(pick_path(o.data, o.c.section("data"), "dir"));
  if (data.vocab.tokens() != lm.vocab.tokens()) throw UsageError("checkpoint and data vocabularies differ");
  const std::string lm_path = pick_path(o.eval_lm, o.c.section("checkpoints"), "eval_lm");
  std::optional<Checkpoint> eval_lm;
  if (!lm_path.empty()) {
    eval_lm = load_checkpoint(require_file(lm_path, "--eval-lm checkpoint"));
    if (vocab_of(*eval_lm, lm_path).tokens() != lm.vocab.tokens()) {
      throw UsageError("eval LM vocabulary differs from the inference vocabulary");
    }
  }
  auto test = data.load("test.tsv");
  if (const std::size_t n = pick<std::size_t>(o.instances, sec, "instances", 0); n > 0 && n < test.size()) {
    test.resize(n);
  }
  g.mask_seed = seed;
  g.sampled_pool_size = pick<std::size_t>(o.pool, sec, "sampled_pool_size", 1000);
  g.workers = o.c.workers;
  const fs::path dir = out_or_default(o.c.out, "grid");

  std::vector<GridInstance> rows;
  const EvalReport report = run_grid(lm.models, eval_lm ? &eval_lm->params : nullptr, test, g, cfg, &rows);
  json algos = json::array();
  for (Algorithm a : g.algorithms) algos.push_back(algorithm_name(a));
  const json eff = {{"algorithms", algos}, {"infer", cfg.to_json()}, {"instances", test.size()},
                    {"pool", g.sampled_pool_size}};
  const std::uint64_t h = hash_of(eff);
  fs::create_directories(dir);
  write_report_tsv((dir / "report.tsv").string(), report, make_header("report", seed, h));
  write_instances_tsv((dir / "instances.tsv").string(), rows, lm.vocab, make_header("instances", seed, h),
                      !o.c.no_timing);
  const std::string table = render_table(report);
  std::ofstream((dir / "table.txt").string()) << make_header("table", seed, h) << '\n' << table;
  std::cout << table;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tigs: fill-in-the-blank decoding for seq2seq models"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  SynthOpts synth;
  auto* s = app.add_subcommand("synth", "Generate the synthetic dialog corpus");
  add_common(s, synth.c);
  s->add_option("--pairs", synth.pairs, "Number of pairs")->check(CLI::PositiveNumber);

  PrepareOpts prep;
  auto* p = app.add_subcommand("prepare", "Tokenize, build the vocabulary and split train/test");
  add_common(p, prep.c);
  p->add_option("--corpus", prep.corpus, "Corpus file");
  p->add_option("--format", prep.format, "pairs or mono");
  p->add_option("--tokenizer", prep.tokenizer, "word or char");
  p->add_option("--vocab-size", prep.vocab_size, "Maximum vocabulary size including specials");
  p->add_option("--min-count", prep.min_count, "Minimum token count");
  p->add_option("--test-fraction", prep.test_fraction, "Fraction held out for test");
  p->add_option("--test-size", prep.test_size, "Cap on the test set size");

  TrainOpts tr;
  auto* t = app.add_subcommand("train", "Train one model");
  add_common(t, tr.c);
  t->add_option("--data", tr.data, "Prepared data directory");
  t->add_option("--role", tr.role, "forward, backward, birnn or eval-lm");
  t->add_option("--epochs", tr.epochs, "Epochs");
  t->add_option("--batch", tr.batch, "Batch size");
  t->add_option("--lr", tr.lr, "Learning rate");

  MaskOpts mk;
  auto* m = app.add_subcommand("mask", "Mask the test targets into templates");
  add_common(m, mk.c);
  m->add_option("--data", mk.data, "Prepared data directory");
  m->add_option("--test", mk.test, "Test file (default: the data directory's test.tsv)");
  m->add_option("--strategy", mk.strategy, "middle or random");
  m->add_option("--ratio", mk.ratio, "Mask ratio in (0, 1)");

  InfillOpts inf;
  auto* i = app.add_subcommand("infill", "Fill templates with one algorithm");
  add_common(i, inf.c, true);
  inf.paths.add(i);
  inf.infer.add(i);
  i->add_option("--data", inf.data, "Prepared data directory");
  i->add_option("--test", inf.test, "Test file holding the sources");
  i->add_option("--templates", inf.templates, "Template file");
  i->add_option("--algo", inf.algo, "tigs, bs-f, bs-b, bs-fb, bibs or gsn");
  i->add_flag("--no-timing", inf.c.no_timing, "Write 0 for wall-clock times");

  EvalOpts ev;
  auto* e = app.add_subcommand("eval", "Score fills files");
  add_common(e, ev.c);
  e->add_option("--fills", ev.fills, "Fills files")->expected(1, -1);
  e->add_option("--data", ev.data, "Prepared data directory");
  e->add_option("--test", ev.test, "Test file holding the references");
  e->add_option("--templates", ev.templates, "Template file the fills were made from");
  e->add_option("--eval-lm", ev.eval_lm, "Evaluation LM checkpoint");
  e->add_option("--strategy", ev.strategy, "Mask strategy label");
  e->add_option("--ratio", ev.ratio, "Mask ratio label");
  e->add_option("--sampled-pool", ev.pool, "Sampled reference pool size (0 disables)");

  OracleOpts orc;
  auto* o = app.add_subcommand("oracle", "Exhaustive argmin fills on tiny instances");
  add_common(o, orc.c);
  o->add_option("--checkpoint", orc.checkpoint, "Forward or backward checkpoint");
  o->add_option("--data", orc.data, "Prepared data directory");
  o->add_option("--test", orc.test, "Test file holding the sources");
  o->add_option("--templates", orc.templates, "Template file");
  o->add_option("--max-blanks", orc.max_blanks, "Refuse templates with more blanks");
  o->add_option("--max-vocab", orc.max_vocab, "Refuse larger vocabularies");
  o->add_flag("--no-timing", orc.c.no_timing, "Write 0 for wall-clock times");

  GridOpts gr;
  auto* g = app.add_subcommand("grid", "Run every algorithm over both strategies and three ratios");
  add_common(g, gr.c, true);
  gr.paths.add(g);
  gr.infer.add(g);
  g->add_option("--data", gr.data, "Prepared data directory");
  g->add_option("--eval-lm", gr.eval_lm, "Evaluation LM checkpoint");
  g->add_option("--algo", gr.algos, "Algorithms (default: all)");
  g->add_option("--instances", gr.instances, "Use the first N test instances");
  g->add_option("--sampled-pool", gr.pool, "Sampled reference pool size (0 disables)");
  g->add_flag("--no-timing", gr.c.no_timing, "Write 0 for wall-clock times");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err);
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    if (name == "synth") return cmd_synth(synth);
    if (name == "prepare") return cmd_prepare(prep);
    if (name == "train") return cmd_train(tr);
    if (name == "mask") return cmd_mask(mk);
    if (name == "infill") return cmd_infill(inf);
    if (name == "eval") return cmd_eval(ev);
    if (name == "oracle") return cmd_oracle(orc);
    if (name == "grid") return cmd_grid(gr);
  } catch (const UsageError& err) {
    std::cerr << "tigs " << name << ": " << err.what() << "\n\n" << app.get_subcommand(name)->help();
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "tigs " << name << ": error: " << err.what() << '\n';
    return 1;
  }
  return 1;
}
