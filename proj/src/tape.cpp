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

#include "tigs/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tigs {

namespace {

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " +
                   shape_str(b));
}

void require_vector(const char* op, const Tensor& t) {
  if (t.rank() != 1) {
    throw ShapeError(std::string(op) + ": expected a vector, got " + shape_str(t.shape()));
  }
}

Tape* same_tape(Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape) {
    throw std::invalid_argument("op inputs recorded on different tapes");
  }
  return a.tape;
}

void axpy(std::span<double> y, std::span<const double> x, double a = 1.0) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

}  // namespace

const char* op_name(OpKind op) {
  switch (op) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kMatVec: return "matvec";
    case OpKind::kMatVecT: return "matvec_t";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kScale: return "scale";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kTanh: return "tanh";
    case OpKind::kLog: return "log";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kSum: return "sum";
    case OpKind::kConcat: return "concat";
    case OpKind::kSlice: return "slice";
    case OpKind::kRow: return "row";
    case OpKind::kStack: return "stack";
    case OpKind::kL2Norm: return "l2_norm";
    case OpKind::kCrossEntropy: return "cross_entropy";
    case OpKind::kPick: return "pick";
  }
  return "?";
}

const Tensor& Var::value() const { return tape->value(id); }

const Tensor& Tape::value(std::uint32_t id) const { return nodes_.at(id).val(); }

bool Tape::is_marked(Var v) const { return v.tape == this && nodes_.at(v.id).marked; }

Var Tape::push_leaf(Node node) {
  if (!node.val().all_finite()) throw NumericError("leaf: non-finite value");
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::constant(Tensor value) {
  Node n;
  n.own = std::move(value);
  return push_leaf(std::move(n));
}

Var Tape::reference(const Tensor& value) {
  Node n;
  n.ext = &value;
  return push_leaf(std::move(n));
}

Var Tape::variable(Tensor value) {
  Node n;
  n.own = std::move(value);
  n.marked = n.needs_grad = true;
  return push_leaf(std::move(n));
}

Var Tape::watch(const Tensor& value) {
  Node n;
  n.ext = &value;
  n.marked = n.needs_grad = true;
  return push_leaf(std::move(n));
}

Var Tape::record(OpKind op, std::vector<std::uint32_t> inputs, std::size_t p0, std::size_t p1,
                 double k) {
  Node n;
  n.op = op;
  n.p0 = p0;
  n.p1 = p1;
  n.k = k;
  std::vector<const Tensor*> in(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Node& src = nodes_.at(inputs[i]);
    in[i] = &src.val();
    n.needs_grad = n.needs_grad || src.needs_grad;
  }
  n.own = compute(n, in);
  if (!n.own.all_finite()) {
    throw NumericError(std::string(op_name(op)) + ": non-finite result");
  }
  n.inputs = std::move(inputs);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Tensor Tape::compute(const Node& n, std::span<const Tensor* const> in) {
  switch (n.op) {
    case OpKind::kLeaf:
      return n.val();
    case OpKind::kMatMul: {
      const Tensor& a = *in[0];
      const Tensor& b = *in[1];
      if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
        shape_fail("matmul", a.shape(), b.shape());
      }
      const std::size_t r = a.rows(), k = a.cols(), c = b.cols();
      Tensor out(Shape{r, c});
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < k; ++j) {
          const double av = a.at(i, j);
          for (std::size_t l = 0; l < c; ++l) out.at(i, l) += av * b.at(j, l);
        }
      return out;
    }
    case OpKind::kMatVec: {
      const Tensor& w = *in[0];
      const Tensor& x = *in[1];
      if (w.rank() != 2 || x.rank() != 1 || w.cols() != x.size()) {
        shape_fail("matvec", w.shape(), x.shape());
      }
      Tensor out(Shape{w.rows()});
      kernels::matvec(w.data(), w.rows(), w.cols(), x.data(), out.data());
      return out;
    }
    case OpKind::kMatVecT: {
      const Tensor& w = *in[0];
      const Tensor& x = *in[1];
      if (w.rank() != 2 || x.rank() != 1 || w.rows() != x.size()) {
        shape_fail("matvec_t", w.shape(), x.shape());
      }
      Tensor out(Shape{w.cols()});
      kernels::matvec_t(w.data(), w.rows(), w.cols(), x.data(), out.data());
      return out;
    }
    case OpKind::kAdd:
    case OpKind::kSub:
    case OpKind::kMul: {
      const Tensor& a = *in[0];
      const Tensor& b = *in[1];
      if (a.shape() != b.shape()) shape_fail(op_name(n.op), a.shape(), b.shape());
      Tensor out = a;
      auto o = out.data();
      auto bd = b.data();
      if (n.op == OpKind::kAdd) {
        for (std::size_t i = 0; i < o.size(); ++i) o[i] += bd[i];
      } else if (n.op == OpKind::kSub) {
        for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bd[i];
      } else {
        for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bd[i];
      }
      return out;
    }
    case OpKind::kScale: {
      Tensor out = *in[0];
      for (double& v : out.data()) v *= n.k;
      return out;
    }
    case OpKind::kSigmoid: {
      Tensor out = *in[0];
      for (double& v : out.data()) v = kernels::sigmoid(v);
      return out;
    }
    case OpKind::kTanh: {
      Tensor out = *in[0];
      for (double& v : out.data()) v = std::tanh(v);
      return out;
    }
    case OpKind::kLog: {
      Tensor out = *in[0];
      for (double& v : out.data()) {
        if (!(v > 0.0)) throw NumericError("log: non-positive input");
        v = std::log(v);
      }
      return out;
    }
    case OpKind::kSoftmax: {
      require_vector("softmax", *in[0]);
      Tensor out(in[0]->shape());
      kernels::softmax(in[0]->data(), out.data());
      return out;
    }
    case OpKind::kSum: {
      double acc = 0.0;
      for (double v : in[0]->data()) acc += v;
      return Tensor::scalar(acc);
    }
    case OpKind::kConcat: {
      std::size_t total = 0;
      for (const Tensor* t : in) {
        if (t->rank() > 1) {
          throw ShapeError("concat: expected vectors or scalars, got " + shape_str(t->shape()));
        }
        total += t->size();
      }
      Tensor out(Shape{total});
      std::size_t off = 0;
      for (const Tensor* t : in) {
        std::copy(t->data().begin(), t->data().end(), out.data().begin() + off);
        off += t->size();
      }
      return out;
    }
    case OpKind::kSlice: {
      const Tensor& a = *in[0];
      require_vector("slice", a);
      if (n.p0 + n.p1 > a.size()) {
        shape_fail("slice", a.shape(), Shape{n.p0, n.p1});
      }
      Tensor out(Shape{n.p1});
      std::copy_n(a.data().begin() + n.p0, n.p1, out.data().begin());
      return out;
    }
    case OpKind::kRow: {
      const Tensor& m = *in[0];
      if (m.rank() != 2 || n.p0 >= m.rows()) shape_fail("row", m.shape(), Shape{n.p0});
      Tensor out(Shape{m.cols()});
      std::copy_n(m.data().begin() + n.p0 * m.cols(), m.cols(), out.data().begin());
      return out;
    }
    case OpKind::kStack: {
      if (in.empty()) throw ShapeError("stack: no rows");
      const std::size_t cols = in[0]->size();
      Tensor out(Shape{in.size(), cols});
      for (std::size_t r = 0; r < in.size(); ++r) {
        require_vector("stack", *in[r]);
        if (in[r]->size() != cols) shape_fail("stack", in[0]->shape(), in[r]->shape());
        std::copy_n(in[r]->data().begin(), cols, out.data().begin() + r * cols);
      }
      return out;
    }
    case OpKind::kL2Norm: {
      double acc = 0.0;
      for (double v : in[0]->data()) acc += v * v;
      return Tensor::scalar(std::sqrt(acc));
    }
    case OpKind::kCrossEntropy: {
      const Tensor& z = *in[0];
      require_vector("cross_entropy", z);
      if (n.p0 >= z.size()) shape_fail("cross_entropy", z.shape(), Shape{n.p0});
      std::vector<double> lp(z.size());
      kernels::log_softmax(z.data(), lp);
      return Tensor::scalar(-lp[n.p0]);
    }
    case OpKind::kPick: {
      if (n.p0 >= in[0]->size()) shape_fail("pick", in[0]->shape(), Shape{n.p0});
      return Tensor::scalar((*in[0])[n.p0]);
    }
  }
  throw std::logic_error("unknown op");
}

void Tape::backward_node(const Node& n, const Tensor& g, std::vector<Tensor>& grads) const {
  auto acc = [&](std::size_t slot) -> Tensor* {
    const std::uint32_t id = n.inputs[slot];
    if (!nodes_[id].needs_grad) return nullptr;
    if (grads[id].size() == 0 && nodes_[id].val().size() != 0) {
      grads[id] = Tensor(nodes_[id].val().shape());
    }
    return &grads[id];
  };
  auto in = [&](std::size_t slot) -> const Tensor& { return nodes_[n.inputs[slot]].val(); };
  const auto gd = g.data();

  switch (n.op) {
    case OpKind::kLeaf:
      return;
    case OpKind::kMatMul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      const std::size_t r = a.rows(), k = a.cols(), c = b.cols();
      if (Tensor* ga = acc(0)) {
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < k; ++j) {
            double s = 0.0;
            for (std::size_t l = 0; l < c; ++l) s += g.at(i, l) * b.at(j, l);
            ga->at(i, j) += s;
          }
      }
      if (Tensor* gb = acc(1)) {
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < k; ++j) {
            const double av = a.at(i, j);
            for (std::size_t l = 0; l < c; ++l) gb->at(j, l) += av * g.at(i, l);
          }
      }
      return;
    }
    case OpKind::kMatVec: {
      const Tensor& w = in(0);
      const Tensor& x = in(1);
      const std::size_t rows = w.rows(), cols = w.cols();
      if (Tensor* gw = acc(0)) {
        double* gp = gw->data().data();
        const double* xp = x.data().data();
        for (std::size_t r = 0; r < rows; ++r) {
          const double gr = gd[r];
          if (gr == 0.0) continue;
          double* row = gp + r * cols;
          for (std::size_t c = 0; c < cols; ++c) row[c] += gr * xp[c];
        }
      }
      if (Tensor* gx = acc(1)) {
        std::vector<double> tmp(cols);
        kernels::matvec_t(w.data(), rows, cols, gd, tmp);
        axpy(gx->data(), tmp);
      }
      return;
    }
    case OpKind::kMatVecT: {
      const Tensor& w = in(0);
      const Tensor& x = in(1);
      const std::size_t rows = w.rows(), cols = w.cols();
      if (Tensor* gw = acc(0)) {
        for (std::size_t r = 0; r < rows; ++r) {
          const double xr = x[r];
          double* row = gw->data().data() + r * cols;
          for (std::size_t c = 0; c < cols; ++c) row[c] += xr * gd[c];
        }
      }
      if (Tensor* gx = acc(1)) {
        std::vector<double> tmp(rows);
        kernels::matvec(w.data(), rows, cols, gd, tmp);
        axpy(gx->data(), tmp);
      }
      return;
    }
    case OpKind::kAdd:
      if (Tensor* ga = acc(0)) axpy(ga->data(), gd);
      if (Tensor* gb = acc(1)) axpy(gb->data(), gd);
      return;
    case OpKind::kSub:
      if (Tensor* ga = acc(0)) axpy(ga->data(), gd);
      if (Tensor* gb = acc(1)) axpy(gb->data(), gd, -1.0);
      return;
    case OpKind::kMul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      if (Tensor* ga = acc(0))
        for (std::size_t i = 0; i < gd.size(); ++i) (*ga)[i] += gd[i] * b[i];
      if (Tensor* gb = acc(1))
        for (std::size_t i = 0; i < gd.size(); ++i) (*gb)[i] += gd[i] * a[i];
      return;
    }
    case OpKind::kScale:
      if (Tensor* ga = acc(0)) axpy(ga->data(), gd, n.k);
      return;
    case OpKind::kSigmoid: {
      const Tensor& y = n.own;
      if (Tensor* ga = acc(0))
        for (std::size_t i = 0; i < gd.size(); ++i) (*ga)[i] += gd[i] * y[i] * (1.0 - y[i]);
      return;
    }
    case OpKind::kTanh: {
      const Tensor& y = n.own;
      if (Tensor* ga = acc(0))
        for (std::size_t i = 0; i < gd.size(); ++i) (*ga)[i] += gd[i] * (1.0 - y[i] * y[i]);
      return;
    }
    case OpKind::kLog: {
      const Tensor& a = in(0);
      if (Tensor* ga = acc(0))
        for (std::size_t i = 0; i < gd.size(); ++i) (*ga)[i] += gd[i] / a[i];
      return;
    }
    case OpKind::kSoftmax: {
      const Tensor& y = n.own;
      if (Tensor* ga = acc(0)) {
        const double d = kernels::dot(gd, y.data());
        for (std::size_t i = 0; i < gd.size(); ++i) (*ga)[i] += y[i] * (gd[i] - d);
      }
      return;
    }
    case OpKind::kSum:
      if (Tensor* ga = acc(0))
        for (double& v : ga->data()) v += gd[0];
      return;
    case OpKind::kConcat: {
      std::size_t off = 0;
      for (std::size_t s = 0; s < n.inputs.size(); ++s) {
        const std::size_t len = in(s).size();
        if (Tensor* gs = acc(s)) axpy(gs->data(), gd.subspan(off, len));
        off += len;
      }
      return;
    }
    case OpKind::kSlice:
      if (Tensor* ga = acc(0)) axpy(ga->data().subspan(n.p0, n.p1), gd);
      return;
    case OpKind::kRow:
      if (Tensor* gm = acc(0)) {
        const std::size_t cols = in(0).cols();
        axpy(gm->data().subspan(n.p0 * cols, cols), gd);
      }
      return;
    case OpKind::kStack: {
      const std::size_t cols = in(0).size();
      for (std::size_t s = 0; s < n.inputs.size(); ++s)
        if (Tensor* gs = acc(s)) axpy(gs->data(), gd.subspan(s * cols, cols));
      return;
    }
    case OpKind::kL2Norm: {
      const double norm = n.own[0];
      if (norm == 0.0) return;  // subgradient 0 at the origin
      if (Tensor* ga = acc(0)) axpy(ga->data(), in(0).data(), gd[0] / norm);
      return;
    }
    case OpKind::kCrossEntropy: {
      if (Tensor* ga = acc(0)) {
        std::vector<double> p(in(0).size());
        kernels::softmax(in(0).data(), p);
        p[n.p0] -= 1.0;
        axpy(ga->data(), p, gd[0]);
      }
      return;
    }
    case OpKind::kPick:
      if (Tensor* ga = acc(0)) (*ga)[n.p0] += gd[0];
      return;
  }
}

std::vector<Tensor> Tape::grad(Var output, std::span<const Var> wrt) {
  if (output.tape != this) throw std::invalid_argument("grad: output is not on this tape");
  const Node& out = nodes_.at(output.id);
  if (out.val().size() != 1) {
    throw ShapeError("grad: output must be a scalar, got " + shape_str(out.val().shape()));
  }
  for (const Var& w : wrt) {
    if (w.tape != this || !nodes_.at(w.id).marked) {
      throw std::invalid_argument("grad: requested tensor #" + std::to_string(w.id) +
                                  " was not marked for differentiation");
    }
  }

  std::vector<Tensor> grads(output.id + 1);
  grads[output.id] = Tensor(out.val().shape(), 1.0);
  for (std::int64_t id = output.id; id >= 0; --id) {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.needs_grad || n.op == OpKind::kLeaf || grads[id].size() == 0) continue;
    backward_node(n, grads[id], grads);
  }

  std::vector<Tensor> result;
  result.reserve(wrt.size());
  for (const Var& w : wrt) {
    if (w.id <= output.id && grads[w.id].size() != 0) {
      result.push_back(std::move(grads[w.id]));
      grads[w.id] = Tensor();
      if (!result.back().all_finite()) throw NumericError("grad: non-finite gradient");
    } else {
      result.emplace_back(nodes_[w.id].val().shape());
    }
  }
  // A leaf requested twice gets a copy of the first result.
  for (std::size_t i = 0; i < wrt.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (wrt[i].id == wrt[j].id) result[i] = result[j];
  return result;
}

Tensor Tape::replay(Var output) const {
  if (output.tape != this) throw std::invalid_argument("replay: output is not on this tape");
  std::vector<Tensor> vals(output.id + 1);
  std::vector<const Tensor*> in;
  for (std::uint32_t id = 0; id <= output.id; ++id) {
    const Node& n = nodes_[id];
    if (n.op == OpKind::kLeaf) {
      vals[id] = n.val();
      continue;
    }
    in.resize(n.inputs.size());
    for (std::size_t i = 0; i < n.inputs.size(); ++i) in[i] = &vals[n.inputs[i]];
    vals[id] = compute(n, in);
  }
  return vals[output.id];
}

// --- op front-ends ---------------------------------------------------------

Var matmul(Var a, Var b) { return same_tape(a, b)->record(OpKind::kMatMul, {a.id, b.id}); }
Var matvec(Var w, Var x) { return same_tape(w, x)->record(OpKind::kMatVec, {w.id, x.id}); }
Var matvec_t(Var w, Var x) { return same_tape(w, x)->record(OpKind::kMatVecT, {w.id, x.id}); }
Var add(Var a, Var b) { return same_tape(a, b)->record(OpKind::kAdd, {a.id, b.id}); }
Var sub(Var a, Var b) { return same_tape(a, b)->record(OpKind::kSub, {a.id, b.id}); }
Var mul(Var a, Var b) { return same_tape(a, b)->record(OpKind::kMul, {a.id, b.id}); }
Var scale(Var a, double k) { return a.tape->record(OpKind::kScale, {a.id}, 0, 0, k); }
Var sigmoid(Var a) { return a.tape->record(OpKind::kSigmoid, {a.id}); }
Var tanh(Var a) { return a.tape->record(OpKind::kTanh, {a.id}); }
Var log(Var a) { return a.tape->record(OpKind::kLog, {a.id}); }
Var softmax(Var a) { return a.tape->record(OpKind::kSoftmax, {a.id}); }
Var sum(Var a) { return a.tape->record(OpKind::kSum, {a.id}); }

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  std::vector<std::uint32_t> ids;
  ids.reserve(parts.size());
  for (const Var& p : parts) {
    same_tape(parts[0], p);
    ids.push_back(p.id);
  }
  return parts[0].tape->record(OpKind::kConcat, std::move(ids));
}

Var slice(Var a, std::size_t offset, std::size_t length) {
  return a.tape->record(OpKind::kSlice, {a.id}, offset, length);
}

Var row(Var matrix, std::size_t index) {
  return matrix.tape->record(OpKind::kRow, {matrix.id}, index);
}

Var stack(std::span<const Var> rows) {
  if (rows.empty()) throw ShapeError("stack: no rows");
  std::vector<std::uint32_t> ids;
  ids.reserve(rows.size());
  for (const Var& r : rows) {
    same_tape(rows[0], r);
    ids.push_back(r.id);
  }
  return rows[0].tape->record(OpKind::kStack, std::move(ids));
}

Var l2_norm(Var a) { return a.tape->record(OpKind::kL2Norm, {a.id}); }

Var cross_entropy(Var logits, std::size_t target) {
  return logits.tape->record(OpKind::kCrossEntropy, {logits.id}, target);
}

Var pick(Var a, std::size_t index) { return a.tape->record(OpKind::kPick, {a.id}, index); }

}  // namespace tigs
