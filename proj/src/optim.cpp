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

#include "tigs/optim.hpp"

#include <stdexcept>

namespace tigs {

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& v,
                        double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_grad: step must be positive");
  Tensor g(v.shape());
  Tensor probe = v;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double up = f(probe);
    probe[i] = orig - h;
    const double down = f(probe);
    probe[i] = orig;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

Tensor nesterov_step(NesterovState& state, const Tensor& variable,
                     const std::function<Tensor(const Tensor&)>& gradient_fn) {
  if (state.velocity.shape() != variable.shape()) {
    throw ShapeError("nesterov_step: velocity " + shape_str(state.velocity.shape()) +
                     " vs variable " + shape_str(variable.shape()));
  }
  Tensor lookahead = variable;
  for (std::size_t i = 0; i < lookahead.size(); ++i)
    lookahead[i] += state.momentum * state.velocity[i];

  const Tensor g = gradient_fn(lookahead);
  if (g.shape() != variable.shape()) {
    throw ShapeError("nesterov_step: gradient " + shape_str(g.shape()) + " vs variable " +
                     shape_str(variable.shape()));
  }
  if (!g.all_finite()) throw NumericError("nesterov_step: non-finite gradient");

  Tensor next = variable;
  for (std::size_t i = 0; i < next.size(); ++i) {
    state.velocity[i] = state.momentum * state.velocity[i] - state.step_size * g[i];
    next[i] += state.velocity[i];
  }
  return next;
}

}  // namespace tigs
