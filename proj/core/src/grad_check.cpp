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

#include "eru/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "eru/error.hpp"

namespace eru::nn {

GradCheckResult grad_check(const LossFn& loss, ParamStore<double>& params, double eps) {
  Gradients<double> grads(params.size());
  const double base = loss(params, &grads);
  const double again = loss(params, nullptr);
  if (base != again) {
    fail(ErrorKind::kNumeric, "grad_check: loss is not deterministic (" + std::to_string(base) +
                                  " vs " + std::to_string(again) + ")");
  }
  GradCheckResult result;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    const Tensor<double>* g = grads.get(i);
    auto values = p.value.values();
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double saved = values[k];
      values[k] = saved + eps;
      const double up = loss(params, nullptr);
      values[k] = saved - eps;
      const double down = loss(params, nullptr);
      values[k] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = g ? (*g)[k] : 0.0;
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      const double rel = std::abs(analytic - numeric) / denom;
      ++result.checked;
      if (rel > result.max_rel_error || result.checked == 1) {
        result.max_rel_error = rel;
        result.worst_param = p.name;
        result.worst_offset = k;
        result.analytic = analytic;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace eru::nn
