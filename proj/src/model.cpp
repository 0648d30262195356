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

#include "tigs/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "tigs/corpus.hpp"

namespace tigs {

const char* decoder_kind_name(DecoderKind k) {
  switch (k) {
    case DecoderKind::kForward: return "forward";
    case DecoderKind::kBackward: return "backward";
    case DecoderKind::kBiRnn: return "birnn";
  }
  return "?";
}

DecoderKind parse_decoder_kind(std::string_view s) {
  if (s == "forward") return DecoderKind::kForward;
  if (s == "backward") return DecoderKind::kBackward;
  if (s == "birnn") return DecoderKind::kBiRnn;
  throw std::invalid_argument("unknown decoder kind '" + std::string(s) + "'");
}

void ModelConfig::validate() const {
  if (tgt_vocab < 1 || emb_dim < 1 || hidden_dim < 1) {
    throw std::invalid_argument("model config: all dimensions must be >= 1");
  }
  if (conditional() && src_vocab < 1) {
    throw std::invalid_argument("model config: conditional model needs a source vocabulary");
  }
}

nlohmann::json ModelConfig::to_json() const {
  return {{"src_vocab", src_vocab},
          {"tgt_vocab", tgt_vocab},
          {"emb_dim", emb_dim},
          {"hidden_dim", hidden_dim},
          {"bidirectional_encoder", bidirectional_encoder},
          {"decoder", decoder_kind_name(decoder)},
          {"attention", conditional() ? "bilinear" : "none"}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.src_vocab = j.value("src_vocab", std::size_t{0});
  c.tgt_vocab = j.at("tgt_vocab").get<std::size_t>();
  c.emb_dim = j.value("emb_dim", c.emb_dim);
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.bidirectional_encoder = j.value("bidirectional_encoder", c.bidirectional_encoder);
  c.decoder = parse_decoder_kind(j.value("decoder", std::string("forward")));
  const std::string att = j.value("attention", std::string("bilinear"));
  if (att == "bilinear") {
    c.attention = AttentionKind::kBilinear;
  } else if (att == "none") {
    c.attention = AttentionKind::kNone;
  } else {
    throw std::invalid_argument("unknown attention kind '" + att + "'");
  }
  c.validate();
  return c;
}

std::map<std::string, Shape> ModelParams::expected_shapes(const ModelConfig& c) {
  c.validate();
  const std::size_t E = c.emb_dim, H = c.hidden_dim, He = c.enc_dim();
  const std::size_t ctx = c.conditional() ? He : 0;
  std::map<std::string, Shape> s;
  if (c.conditional()) {
    s["src_emb"] = {c.src_vocab, E};
    s["enc_f_W"] = {4 * H, E + H};
    s["enc_f_b"] = {4 * H};
    if (c.bidirectional_encoder) {
      s["enc_b_W"] = {4 * H, E + H};
      s["enc_b_b"] = {4 * H};
    }
  }
  s["tgt_emb"] = {c.tgt_vocab, E};
  s["out_b"] = {c.tgt_vocab};
  if (c.decoder == DecoderKind::kBiRnn) {
    s["decf_W"] = {4 * H, E + H};
    s["decf_b"] = {4 * H};
    s["decb_W"] = {4 * H, E + H};
    s["decb_b"] = {4 * H};
    s["out_W"] = {c.tgt_vocab, 2 * H + ctx};
    if (c.conditional()) {
      s["attn_W"] = {He, 2 * H};
      s["bridge_f_W"] = {H, He};
      s["bridge_f_b"] = {H};
      s["bridge_b_W"] = {H, He};
      s["bridge_b_b"] = {H};
    }
  } else {
    s["dec_W"] = {4 * H, E + ctx + H};
    s["dec_b"] = {4 * H};
    s["out_W"] = {c.tgt_vocab, H + ctx};
    if (c.conditional()) {
      s["attn_W"] = {He, H};
      s["bridge_W"] = {H, He};
      s["bridge_b"] = {H};
    }
  }
  return s;
}

ModelParams ModelParams::init(const ModelConfig& config, std::uint64_t seed, double scale) {
  ModelParams p;
  p.config = config;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-scale, scale);
  const std::size_t H = config.hidden_dim;
  for (const auto& [name, shape] : expected_shapes(config)) {
    Tensor t(shape);
    const bool bias = name.ends_with("_b") && shape.size() == 1;
    if (!bias) {
      for (double& v : t.data()) v = uni(rng);
    } else if (name != "out_b" && !name.starts_with("bridge") && t.size() == 4 * H) {
      for (std::size_t k = H; k < 2 * H; ++k) t[k] = 1.0;  // forget gate
    }
    p.arrays.emplace(name, std::move(t));
  }
  return p;
}

const Tensor& ModelParams::get(const std::string& name) const {
  auto it = arrays.find(name);
  if (it == arrays.end()) throw std::out_of_range("model has no array '" + name + "'");
  return it->second;
}

Tensor& ModelParams::get(const std::string& name) {
  auto it = arrays.find(name);
  if (it == arrays.end()) throw std::out_of_range("model has no array '" + name + "'");
  return it->second;
}

std::size_t ModelParams::num_parameters() const {
  std::size_t n = 0;
  for (const auto& [_, t] : arrays) n += t.size();
  return n;
}

void ModelParams::validate() const {
  const auto shapes = expected_shapes(config);
  if (shapes.size() != arrays.size()) {
    throw std::invalid_argument("model: expected " + std::to_string(shapes.size()) +
                                " arrays, found " + std::to_string(arrays.size()));
  }
  for (const auto& [name, shape] : shapes) {
    const Tensor& t = get(name);
    if (t.shape() != shape) {
      throw ShapeError("model: array '" + name + "' has shape " + shape_str(t.shape()) +
                       ", expected " + shape_str(shape));
    }
    if (!t.all_finite()) throw NumericError("model: array '" + name + "' is not finite");
  }
}

// --- plain forward path ------------------------------------------------------

namespace {

void check_index(int id, std::size_t vocab, const char* what) {
  if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
    throw std::out_of_range(std::string(what) + ": token index " + std::to_string(id) +
                            " outside vocabulary of " + std::to_string(vocab));
  }
}

std::span<const double> emb_row(const Tensor& table, int id) {
  const std::size_t cols = table.cols();
  return table.data().subspan(static_cast<std::size_t>(id) * cols, cols);
}

// gates = W [in; h] + b with gate order (input, forget, output, candidate).
void lstm_cell(const Tensor& w, const Tensor& b, std::span<const double> in, Tensor& h,
               Tensor& c) {
  const std::size_t H = h.size();
  std::vector<double> xh(in.size() + H);
  std::copy(in.begin(), in.end(), xh.begin());
  std::copy(h.data().begin(), h.data().end(), xh.begin() + in.size());
  if (w.cols() != xh.size() || w.rows() != 4 * H) {
    throw ShapeError("lstm: weight " + shape_str(w.shape()) + " vs input of " +
                     std::to_string(xh.size()));
  }
  std::vector<double> z(4 * H);
  kernels::matvec(w.data(), 4 * H, xh.size(), xh, z);
  for (std::size_t k = 0; k < 4 * H; ++k) z[k] += b[k];
  for (std::size_t k = 0; k < H; ++k) {
    const double i = kernels::sigmoid(z[k]);
    const double f = kernels::sigmoid(z[H + k]);
    const double o = kernels::sigmoid(z[2 * H + k]);
    const double g = std::tanh(z[3 * H + k]);
    const double fc = f * c[k];
    const double ig = i * g;
    c[k] = fc + ig;
    h[k] = o * std::tanh(c[k]);
  }
}

Tensor bridge(const Tensor& w, const Tensor& b, const Tensor& final) {
  Tensor h(Shape{w.rows()});
  kernels::matvec(w.data(), w.rows(), w.cols(), final.data(), h.data());
  for (std::size_t k = 0; k < h.size(); ++k) h[k] = std::tanh(h[k] + b[k]);
  return h;
}

// Attention with query q: a = softmax(M (W_a q)), ctx = M^T a.
void attend(const Tensor& attn_w, const EncoderOutput& enc, std::span<const double> q,
            Tensor& attention, Tensor& context) {
  const std::size_t He = attn_w.rows();
  std::vector<double> wq(He);
  kernels::matvec(attn_w.data(), He, attn_w.cols(), q, wq);
  const std::size_t n = enc.size();
  std::vector<double> scores(n);
  kernels::matvec(enc.memory.data(), n, He, wq, scores);
  attention = Tensor(Shape{n});
  kernels::softmax(scores, attention.data());
  context = Tensor(Shape{He});
  kernels::matvec_t(enc.memory.data(), n, He, attention.data(), context.data());
}

void require_uni(const ModelParams& p, const char* what) {
  if (p.config.decoder == DecoderKind::kBiRnn) {
    throw std::invalid_argument(std::string(what) + ": needs a uni-directional decoder");
  }
}

void require_enc(const ModelParams& p, const EncoderOutput* enc, const char* what) {
  if (p.config.conditional() != (enc != nullptr)) {
    throw std::invalid_argument(std::string(what) + (enc ? ": unconditional model given an encoding"
                                                         : ": conditional model needs an encoding"));
  }
  if (enc && enc->memory.rank() == 2 && enc->memory.cols() != p.config.enc_dim()) {
    throw ShapeError(std::string(what) + ": encoder memory " + shape_str(enc->memory.shape()) +
                     " does not match model enc_dim " + std::to_string(p.config.enc_dim()));
  }
}

// Advances the uni-directional decoder by one input and writes the logits.
void step_core(const ModelParams& p, DecoderState& st, std::span<const double> emb,
               const EncoderOutput* enc, std::span<double> logits, Tensor* attention_out,
               Tensor* context_out) {
  const ModelConfig& c = p.config;
  if (emb.size() != c.emb_dim) {
    throw ShapeError("decoder_step: input embedding of " + std::to_string(emb.size()) +
                     " vs emb_dim " + std::to_string(c.emb_dim));
  }
  if (st.h.size() != c.hidden_dim || st.c.size() != c.hidden_dim) {
    throw ShapeError("decoder_step: state " + shape_str(st.h.shape()) + " vs hidden_dim " +
                     std::to_string(c.hidden_dim));
  }
  Tensor attention, context;
  std::vector<double> in(emb.begin(), emb.end());
  if (enc) {
    attend(p.get("attn_W"), *enc, st.h.data(), attention, context);
    in.insert(in.end(), context.data().begin(), context.data().end());
  }
  lstm_cell(p.get("dec_W"), p.get("dec_b"), in, st.h, st.c);

  std::vector<double> feat(st.h.data().begin(), st.h.data().end());
  if (enc) feat.insert(feat.end(), context.data().begin(), context.data().end());
  const Tensor& ow = p.get("out_W");
  const Tensor& ob = p.get("out_b");
  kernels::matvec(ow.data(), ow.rows(), ow.cols(), feat, logits);
  for (std::size_t v = 0; v < logits.size(); ++v) logits[v] += ob[v];
  if (attention_out) *attention_out = std::move(attention);
  if (context_out) *context_out = std::move(context);
}

}  // namespace

EncoderOutput encode(const ModelParams& p, std::span<const int> x) {
  const ModelConfig& c = p.config;
  if (!c.conditional()) throw std::invalid_argument("encode: model is unconditional");
  if (x.empty()) throw std::invalid_argument("encode: empty input sequence");
  for (int id : x) check_index(id, c.src_vocab, "encode");
  const Tensor& emb = p.get("src_emb");
  const std::size_t H = c.hidden_dim, n = x.size();

  std::vector<Tensor> fwd(n), bwd;
  Tensor h(Shape{H}), cell(Shape{H});
  for (std::size_t i = 0; i < n; ++i) {
    lstm_cell(p.get("enc_f_W"), p.get("enc_f_b"), emb_row(emb, x[i]), h, cell);
    fwd[i] = h;
  }
  if (c.bidirectional_encoder) {
    bwd.resize(n);
    Tensor hb(Shape{H}), cb(Shape{H});
    for (std::size_t i = n; i-- > 0;) {
      lstm_cell(p.get("enc_b_W"), p.get("enc_b_b"), emb_row(emb, x[i]), hb, cb);
      bwd[i] = hb;
    }
  }

  EncoderOutput out;
  const std::size_t He = c.enc_dim();
  out.memory = Tensor(Shape{n, He});
  for (std::size_t i = 0; i < n; ++i) {
    Tensor s(Shape{He});
    std::copy_n(fwd[i].data().begin(), H, s.data().begin());
    if (c.bidirectional_encoder) std::copy_n(bwd[i].data().begin(), H, s.data().begin() + H);
    std::copy_n(s.data().begin(), He, out.memory.data().begin() + i * He);
    out.states.push_back(std::move(s));
  }
  out.final = Tensor(Shape{He});
  std::copy_n(fwd[n - 1].data().begin(), H, out.final.data().begin());
  if (c.bidirectional_encoder) std::copy_n(bwd[0].data().begin(), H, out.final.data().begin() + H);
  return out;
}

std::optional<EncoderOutput> maybe_encode(const ModelParams& params, std::span<const int> x) {
  if (!params.config.conditional()) return std::nullopt;
  return encode(params, x);
}

DecoderState initial_state(const ModelParams& p, const EncoderOutput* enc) {
  require_uni(p, "initial_state");
  require_enc(p, enc, "initial_state");
  const std::size_t H = p.config.hidden_dim;
  DecoderState st{Tensor(Shape{H}), Tensor(Shape{H})};
  if (enc) st.h = bridge(p.get("bridge_W"), p.get("bridge_b"), enc->final);
  return st;
}

DecoderStepOutput decoder_step_embedded(const ModelParams& p, const DecoderState& state,
                                        std::span<const double> input_emb,
                                        const EncoderOutput* enc) {
  require_uni(p, "decoder_step");
  require_enc(p, enc, "decoder_step");
  DecoderStepOutput out;
  out.next = state;
  out.log_probs = Tensor(Shape{p.config.tgt_vocab});
  std::vector<double> logits(p.config.tgt_vocab);
  step_core(p, out.next, input_emb, enc, logits, &out.attention, &out.context);
  kernels::log_softmax(logits, out.log_probs.data());
  out.probs = Tensor(Shape{p.config.tgt_vocab});
  kernels::softmax(logits, out.probs.data());
  return out;
}

DecoderStepOutput decoder_step(const ModelParams& p, const DecoderState& state, int y_t,
                               const EncoderOutput* enc) {
  check_index(y_t, p.config.tgt_vocab, "decoder_step");
  return decoder_step_embedded(p, state, emb_row(p.get("tgt_emb"), y_t), enc);
}

void advance(const ModelParams& p, DecoderState& state, int y_t, const EncoderOutput* enc,
             std::span<double> log_probs) {
  check_index(y_t, p.config.tgt_vocab, "advance");
  std::vector<double> logits(p.config.tgt_vocab);
  step_core(p, state, emb_row(p.get("tgt_emb"), y_t), enc, logits, nullptr, nullptr);
  kernels::log_softmax(logits, log_probs);
}

Nll sequence_nll(const ModelParams& p, const EncoderOutput* enc, std::span<const int> y) {
  require_uni(p, "sequence_nll");
  require_enc(p, enc, "sequence_nll");
  if (y.empty()) throw std::invalid_argument("sequence_nll: empty sequence");
  for (int id : y) {
    if (id == kBlank) throw std::invalid_argument("sequence_nll: sequence contains a blank");
    check_index(id, p.config.tgt_vocab, "sequence_nll");
  }
  DecoderState st = initial_state(p, enc);
  std::vector<double> lp(p.config.tgt_vocab);
  double total = 0.0;
  int prev = kBos;
  for (int tok : y) {
    advance(p, st, prev, enc, lp);
    total -= lp[static_cast<std::size_t>(tok)];
    prev = tok;
  }
  return {total, total / static_cast<double>(y.size())};
}

Nll terminated_nll(const ModelParams& p, const EncoderOutput* enc, std::span<const int> y) {
  const Nll body = sequence_nll(p, enc, y);
  DecoderState st = initial_state(p, enc);
  std::vector<double> lp(p.config.tgt_vocab);
  advance(p, st, kBos, enc, lp);
  for (int tok : y) advance(p, st, tok, enc, lp);
  const double total = body.total - lp[kEos];
  return {total, total / static_cast<double>(y.size() + 1)};
}

Nll sequence_nll(const ModelParams& p, std::span<const int> x, std::span<const int> y) {
  auto enc = maybe_encode(p, x);
  return sequence_nll(p, enc_ptr(enc), y);
}

std::vector<int> reverse_sequence(std::span<const int> y) { return {y.rbegin(), y.rend()}; }

// --- BiRNN decoder -----------------------------------------------------------

namespace {

struct BiInit {
  Tensor hf, hb;
};

BiInit birnn_init(const ModelParams& p, const EncoderOutput* enc) {
  const std::size_t H = p.config.hidden_dim;
  BiInit b{Tensor(Shape{H}), Tensor(Shape{H})};
  if (enc) {
    b.hf = bridge(p.get("bridge_f_W"), p.get("bridge_f_b"), enc->final);
    b.hb = bridge(p.get("bridge_b_W"), p.get("bridge_b_b"), enc->final);
  }
  return b;
}

}  // namespace

Tensor birnn_conditional(const ModelParams& p, const EncoderOutput* enc, std::span<const int> y,
                         std::size_t t) {
  if (p.config.decoder != DecoderKind::kBiRnn) {
    throw std::invalid_argument("birnn_conditional: model decoder is not birnn");
  }
  require_enc(p, enc, "birnn_conditional");
  if (t >= y.size()) {
    throw std::out_of_range("birnn_conditional: position " + std::to_string(t) +
                            " outside sequence of " + std::to_string(y.size()));
  }
  const std::size_t H = p.config.hidden_dim;
  const Tensor& emb = p.get("tgt_emb");
  BiInit init = birnn_init(p, enc);

  // Forward direction sees BOS, y_0 .. y_{t-1}; backward sees EOS, y_{m-1} .. y_{t+1}.
  Tensor hf = init.hf, cf(Shape{H});
  lstm_cell(p.get("decf_W"), p.get("decf_b"), emb_row(emb, kBos), hf, cf);
  for (std::size_t s = 0; s < t; ++s) {
    check_index(y[s], p.config.tgt_vocab, "birnn_conditional");
    lstm_cell(p.get("decf_W"), p.get("decf_b"), emb_row(emb, y[s]), hf, cf);
  }
  Tensor hb = init.hb, cb(Shape{H});
  lstm_cell(p.get("decb_W"), p.get("decb_b"), emb_row(emb, kEos), hb, cb);
  for (std::size_t s = y.size(); s-- > t + 1;) {
    check_index(y[s], p.config.tgt_vocab, "birnn_conditional");
    lstm_cell(p.get("decb_W"), p.get("decb_b"), emb_row(emb, y[s]), hb, cb);
  }

  std::vector<double> feat(hf.data().begin(), hf.data().end());
  feat.insert(feat.end(), hb.data().begin(), hb.data().end());
  if (enc) {
    Tensor attention, context;
    attend(p.get("attn_W"), *enc, std::vector<double>(feat), attention, context);
    feat.insert(feat.end(), context.data().begin(), context.data().end());
  }
  const Tensor& ow = p.get("out_W");
  const Tensor& ob = p.get("out_b");
  std::vector<double> logits(ow.rows());
  kernels::matvec(ow.data(), ow.rows(), ow.cols(), feat, logits);
  for (std::size_t v = 0; v < logits.size(); ++v) logits[v] += ob[v];
  Tensor probs(Shape{logits.size()});
  kernels::softmax(logits, probs.data());
  return probs;
}

Tensor birnn_conditional(const ModelParams& p, std::span<const int> x, std::span<const int> y,
                         std::size_t t) {
  auto enc = maybe_encode(p, x);
  return birnn_conditional(p, enc_ptr(enc), y, t);
}

DirectionalProb directional_prob(const ModelParams& fwd, const ModelParams& bwd,
                                 std::span<const int> x, std::span<const int> y, std::size_t t) {
  if (fwd.config.tgt_vocab != bwd.config.tgt_vocab) {
    throw std::invalid_argument("directional_prob: forward and backward vocabularies differ (" +
                                std::to_string(fwd.config.tgt_vocab) + " vs " +
                                std::to_string(bwd.config.tgt_vocab) + ")");
  }
  if (t >= y.size()) throw std::out_of_range("directional_prob: position out of range");
  auto prob_at = [&](const ModelParams& p, std::span<const int> seq, std::size_t pos) {
    auto enc = maybe_encode(p, x);
    DecoderState st = initial_state(p, enc_ptr(enc));
    std::vector<double> lp(p.config.tgt_vocab);
    int prev = kBos;
    for (std::size_t s = 0; s <= pos; ++s) {
      advance(p, st, prev, enc_ptr(enc), lp);
      prev = seq[s];
    }
    return std::exp(lp[static_cast<std::size_t>(seq[pos])]);
  };
  const auto rev = reverse_sequence(y);
  return {prob_at(fwd, y, t), prob_at(bwd, rev, y.size() - 1 - t)};
}

// --- recorded graph path -----------------------------------------------------

Var ParamBinding::operator()(const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  const Tensor& t = params_.get(name);
  Var v = trainable_ ? tape_.watch(t) : tape_.reference(t);
  bound_.emplace(name, v);
  return v;
}

namespace {

struct GraphState {
  Var h, c;
};

GraphState record_lstm(ParamBinding& b, const std::string& w, const std::string& bias, Var in,
                       GraphState st) {
  const std::size_t H = st.h.value().size();
  const Var parts[] = {in, st.h};
  Var z = add(matvec(b(w), concat(parts)), b(bias));
  Var i = sigmoid(slice(z, 0, H));
  Var f = sigmoid(slice(z, H, H));
  Var o = sigmoid(slice(z, 2 * H, H));
  Var g = tanh(slice(z, 3 * H, H));
  Var c = add(mul(f, st.c), mul(i, g));
  return {mul(o, tanh(c)), c};
}

struct GraphEncoder {
  Var memory;
  Var final;
};

GraphEncoder record_encoder(ParamBinding& b, const std::vector<int>& x) {
  const ModelConfig& c = b.params().config;
  if (x.empty()) throw std::invalid_argument("encode: empty input sequence");
  Tape& tape = b.tape();
  const std::size_t H = c.hidden_dim, n = x.size();
  Var emb = b("src_emb");
  std::vector<Var> fwd, bwd(n);
  GraphState st{tape.constant(Tensor(Shape{H})), tape.constant(Tensor(Shape{H}))};
  for (std::size_t i = 0; i < n; ++i) {
    check_index(x[i], c.src_vocab, "encode");
    st = record_lstm(b, "enc_f_W", "enc_f_b", row(emb, static_cast<std::size_t>(x[i])), st);
    fwd.push_back(st.h);
  }
  std::vector<Var> states;
  Var final = fwd.back();
  if (c.bidirectional_encoder) {
    GraphState sb{tape.constant(Tensor(Shape{H})), tape.constant(Tensor(Shape{H}))};
    for (std::size_t i = n; i-- > 0;) {
      sb = record_lstm(b, "enc_b_W", "enc_b_b", row(emb, static_cast<std::size_t>(x[i])), sb);
      bwd[i] = sb.h;
    }
    for (std::size_t i = 0; i < n; ++i) {
      const Var parts[] = {fwd[i], bwd[i]};
      states.push_back(concat(parts));
    }
    const Var fin[] = {fwd.back(), bwd.front()};
    final = concat(fin);
  } else {
    states = fwd;
  }
  return {stack(states), final};
}

Var record_bridge(ParamBinding& b, const std::string& prefix, Var final) {
  return tanh(add(matvec(b(prefix + "_W"), final), b(prefix + "_b")));
}

Var record_attend(ParamBinding& b, Var memory, Var query) {
  Var scores = matvec(memory, matvec(b("attn_W"), query));
  return matvec_t(memory, softmax(scores));
}

// Uni-directional decoder NLL given per-position input embeddings.
Var record_decoder_nll(ParamBinding& b, std::optional<Var> memory, GraphState st,
                       const std::vector<Var>& inputs, std::span<const int> targets) {
  std::vector<Var> losses;
  losses.reserve(targets.size());
  for (std::size_t t = 0; t < targets.size(); ++t) {
    Var in = inputs[t];
    std::optional<Var> ctx;
    if (memory) {
      ctx = record_attend(b, *memory, st.h);
      const Var parts[] = {inputs[t], *ctx};
      in = concat(parts);
    }
    st = record_lstm(b, "dec_W", "dec_b", in, st);
    Var feat = st.h;
    if (ctx) {
      const Var parts[] = {st.h, *ctx};
      feat = concat(parts);
    }
    Var logits = add(matvec(b("out_W"), feat), b("out_b"));
    losses.push_back(cross_entropy(logits, static_cast<std::size_t>(targets[t])));
  }
  return sum(concat(losses));
}

Var record_birnn_nll(ParamBinding& b, std::optional<GraphEncoder> enc, const std::vector<int>& y) {
  const std::size_t H = b.params().config.hidden_dim, m = y.size();
  Tape& tape = b.tape();
  Var emb = b("tgt_emb");
  GraphState f{tape.constant(Tensor(Shape{H})), tape.constant(Tensor(Shape{H}))};
  GraphState bk = f;
  if (enc) {
    f.h = record_bridge(b, "bridge_f", enc->final);
    bk.h = record_bridge(b, "bridge_b", enc->final);
  }
  std::vector<Var> hf(m), hb(m);
  f = record_lstm(b, "decf_W", "decf_b", row(emb, kBos), f);
  hf[0] = f.h;
  for (std::size_t t = 1; t < m; ++t) {
    f = record_lstm(b, "decf_W", "decf_b", row(emb, static_cast<std::size_t>(y[t - 1])), f);
    hf[t] = f.h;
  }
  bk = record_lstm(b, "decb_W", "decb_b", row(emb, kEos), bk);
  hb[m - 1] = bk.h;
  for (std::size_t t = m - 1; t-- > 0;) {
    bk = record_lstm(b, "decb_W", "decb_b", row(emb, static_cast<std::size_t>(y[t + 1])), bk);
    hb[t] = bk.h;
  }
  std::vector<Var> losses;
  for (std::size_t t = 0; t < m; ++t) {
    const Var q[] = {hf[t], hb[t]};
    Var feat = concat(q);
    if (enc) {
      Var ctx = record_attend(b, enc->memory, feat);
      const Var parts[] = {hf[t], hb[t], ctx};
      feat = concat(parts);
    }
    Var logits = add(matvec(b("out_W"), feat), b("out_b"));
    losses.push_back(cross_entropy(logits, static_cast<std::size_t>(y[t])));
  }
  return sum(concat(losses));
}

}  // namespace

Var record_training_loss(ParamBinding& b, const std::vector<int>& x, const std::vector<int>& y) {
  const ModelConfig& c = b.params().config;
  if (y.empty()) throw std::invalid_argument("training loss: empty target");
  for (int id : y) check_index(id, c.tgt_vocab, "training loss");
  std::optional<GraphEncoder> enc;
  if (c.conditional()) enc = record_encoder(b, x);
  if (c.decoder == DecoderKind::kBiRnn) return record_birnn_nll(b, enc, y);

  Tape& tape = b.tape();
  const std::size_t H = c.hidden_dim;
  GraphState st{tape.constant(Tensor(Shape{H})), tape.constant(Tensor(Shape{H}))};
  std::optional<Var> memory;
  if (enc) {
    st.h = record_bridge(b, "bridge", enc->final);
    memory = enc->memory;
  }
  Var emb = b("tgt_emb");
  std::vector<Var> inputs;
  inputs.push_back(row(emb, kBos));
  for (int tok : y) inputs.push_back(row(emb, static_cast<std::size_t>(tok)));
  std::vector<int> targets = y;
  targets.push_back(kEos);
  return record_decoder_nll(b, memory, st, inputs, targets);
}

FillLoss fill_loss_and_grads(const ModelParams& p, const EncoderOutput* enc, const Template& tmpl,
                             std::span<const int> fill, std::span<const Tensor> blank_embs,
                             double lambda) {
  require_uni(p, "fill_loss_and_grads");
  require_enc(p, enc, "fill_loss_and_grads");
  if (lambda < 0.0) throw std::invalid_argument("fill_loss_and_grads: lambda must be >= 0");
  if (blank_embs.size() != tmpl.num_blanks() || fill.size() != tmpl.num_blanks()) {
    throw std::invalid_argument("fill_loss_and_grads: need one fill and one embedding per blank");
  }
  const std::vector<int> y = tmpl.filled(fill);
  for (int id : y) {
    if (id == kBlank) throw std::invalid_argument("fill_loss_and_grads: blank left unfilled");
    check_index(id, p.config.tgt_vocab, "fill_loss_and_grads");
  }

  Tape tape;
  ParamBinding b(tape, p, /*trainable=*/false);
  std::vector<Var> blank_vars;
  for (const Tensor& e : blank_embs) {
    if (e.rank() != 1 || e.size() != p.config.emb_dim) {
      throw ShapeError("fill_loss_and_grads: blank embedding " + shape_str(e.shape()) +
                       " vs emb_dim " + std::to_string(p.config.emb_dim));
    }
    blank_vars.push_back(tape.variable(e));
  }

  const DecoderState init = initial_state(p, enc);
  GraphState st{tape.constant(init.h), tape.constant(init.c)};
  std::optional<Var> memory;
  if (enc) memory = tape.reference(enc->memory);

  Var emb = b("tgt_emb");
  std::vector<Var> inputs;
  inputs.push_back(row(emb, kBos));
  std::size_t j = 0;
  for (std::size_t t = 0; t + 1 < y.size(); ++t) {
    while (j < tmpl.blanks.size() && tmpl.blanks[j] < t) ++j;
    if (j < tmpl.blanks.size() && tmpl.blanks[j] == t) {
      inputs.push_back(blank_vars[j]);
    } else {
      inputs.push_back(row(emb, static_cast<std::size_t>(y[t])));
    }
  }
  Var nll = record_decoder_nll(b, memory, st, inputs, y);
  Var loss = nll;
  if (lambda > 0.0 && !blank_vars.empty()) {
    std::vector<Var> norms;
    for (Var v : blank_vars) norms.push_back(l2_norm(v));
    loss = add(nll, scale(sum(concat(norms)), lambda));
  }

  FillLoss out;
  out.nll = nll.value().item();
  out.loss = loss.value().item();
  out.grads = tape.grad(loss, blank_vars);
  return out;
}

FillLoss fill_loss_and_grads(const ModelParams& p, std::span<const int> x, const Template& tmpl,
                             std::span<const int> fill, std::span<const Tensor> blank_embs,
                             double lambda) {
  auto enc = maybe_encode(p, x);
  return fill_loss_and_grads(p, enc_ptr(enc), tmpl, fill, blank_embs, lambda);
}

}  // namespace tigs
