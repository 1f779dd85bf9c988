// Copyright 2026 The ERU Authors
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

#include <cstddef>
#include <functional>
#include <string>

#include "eru/param_store.hpp"

namespace eru::nn {

// Evaluates a scalar loss at the store's current values. When `grads` is
// non-null the function must also write analytic gradients into it.
using LossFn = std::function<double(const ParamStore<double>& params, Gradients<double>* grads)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_offset = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

// Central-difference check of every scalar parameter:
//   rel = |g - (L(t+eps) - L(t-eps)) / 2eps| / max(|g|, |numeric|, 1e-8).
// Throws a numeric error if two evaluations at the same point disagree.
GradCheckResult grad_check(const LossFn& loss, ParamStore<double>& params, double eps = 1e-6);

}  // namespace eru::nn
