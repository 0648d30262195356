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

#include <functional>

#include "tigs/tensor.hpp"

namespace tigs {

/// Central-difference gradient estimate, (f(v + h e_i) - f(v - h e_i)) / 2h
/// per coordinate. Test oracle for the tape.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& v,
                        double h = 1e-5);

/// Nesterov accelerated gradient state for one optimized variable.
struct NesterovState {
  Tensor velocity;
  double momentum = 0.9;
  double step_size = 1.0;

  NesterovState() = default;
  NesterovState(const Shape& shape, double momentum_, double step_size_)
      : velocity(shape), momentum(momentum_), step_size(step_size_) {}
};

/// One Nesterov update: the gradient is taken at the look-ahead point
/// variable + momentum * velocity, then
///   velocity <- momentum * velocity - step_size * g
///   variable <- variable + velocity
/// A non-finite gradient throws NumericError and leaves `state` untouched.
Tensor nesterov_step(NesterovState& state, const Tensor& variable,
                     const std::function<Tensor(const Tensor&)>& gradient_fn);

}  // namespace tigs
