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
#include <span>
#include <vector>

#include "tigs/tensor.hpp"

namespace tigs {

class Tape;

/// Handle to a value recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::uint32_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

enum class OpKind : std::uint8_t {
  kLeaf,
  kMatMul,
  kMatVec,
  kMatVecT,
  kAdd,
  kSub,
  kMul,
  kScale,
  kSigmoid,
  kTanh,
  kLog,
  kSoftmax,
  kSum,
  kConcat,
  kSlice,
  kRow,
  kStack,
  kL2Norm,
  kCrossEntropy,
  kPick,
};

const char* op_name(OpKind op);

/// Ordered record of primitive operations. Leaves are either constants
/// (never differentiated) or marked variables; grad() returns exact
/// reverse-mode derivatives of a scalar output with respect to marked leaves.
///
/// Single writer. Non-owning leaves must outlive the tape.
class Tape {
 public:
  Tape() { nodes_.reserve(512); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var reference(const Tensor& value);
  Var variable(Tensor value);
  Var watch(const Tensor& value);

  std::size_t size() const { return nodes_.size(); }
  const Tensor& value(std::uint32_t id) const;
  bool is_marked(Var v) const;

  /// d output / d wrt[i] for every requested marked leaf.
  std::vector<Tensor> grad(Var output, std::span<const Var> wrt);

  /// Re-executes every recorded op from the leaves' current values and
  /// returns the recomputed value of `output`.
  Tensor replay(Var output) const;

  // Used by the op functions below.
  Var record(OpKind op, std::vector<std::uint32_t> inputs, std::size_t p0 = 0,
             std::size_t p1 = 0, double k = 0.0);

 private:
  struct Node {
    OpKind op = OpKind::kLeaf;
    bool marked = false;      // leaf requested as a differentiation target
    bool needs_grad = false;  // depends on some marked leaf
    std::vector<std::uint32_t> inputs;
    std::size_t p0 = 0;
    std::size_t p1 = 0;
    double k = 0.0;
    const Tensor* ext = nullptr;
    Tensor own;

    const Tensor& val() const { return ext ? *ext : own; }
  };

  Var push_leaf(Node node);
  static Tensor compute(const Node& node, std::span<const Tensor* const> in);
  void backward_node(const Node& node, const Tensor& g, std::vector<Tensor>& grads) const;

  std::vector<Node> nodes_;
};

using GradientRecord = Tape;

// Primitive ops. All reject non-conforming shapes with a ShapeError naming
// the op and the offending shapes, and reject non-finite results with a
// NumericError.
Var matmul(Var a, Var b);
Var matvec(Var w, Var x);
Var matvec_t(Var w, Var x);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double k);
Var sigmoid(Var a);
Var tanh(Var a);
Var log(Var a);
Var softmax(Var a);
Var sum(Var a);
Var concat(std::span<const Var> parts);
Var slice(Var a, std::size_t offset, std::size_t length);
Var row(Var matrix, std::size_t index);
Var stack(std::span<const Var> rows);
Var l2_norm(Var a);
Var cross_entropy(Var logits, std::size_t target);
Var pick(Var a, std::size_t index);

}  // namespace tigs
