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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "eru/tensor.hpp"

namespace eru::nn {

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  // AdamW moments.
  Tensor<T> m;
  Tensor<T> v;
};

// Per-worker gradient accumulator aligned with a ParamStore's indices.
// Slots are allocated on first write so unused parameters cost nothing.
template <typename T>
class Gradients {
 public:
  explicit Gradients(std::size_t count = 0) : slots_(count) {}

  Tensor<T>& slot(std::size_t index, const Shape& shape);
  const Tensor<T>* get(std::size_t index) const {
    return slots_[index].empty() ? nullptr : &slots_[index];
  }
  std::size_t size() const noexcept { return slots_.size(); }
  void clear();

 private:
  std::vector<Tensor<T>> slots_;
};

template <typename T>
class ParamStore {
 public:
  std::size_t add(std::string name, Tensor<T> init);

  std::size_t index(std::string_view name) const;
  std::optional<std::size_t> find(std::string_view name) const;

  Parameter<T>& operator[](std::size_t i) { return params_[i]; }
  const Parameter<T>& operator[](std::size_t i) const { return params_[i]; }
  Parameter<T>& at(std::string_view name) { return params_[index(name)]; }
  const Parameter<T>& at(std::string_view name) const { return params_[index(name)]; }

  std::size_t size() const noexcept { return params_.size(); }
  std::size_t scalar_count() const;
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad();
  // Adds every populated slot of `grads`, scaled, into the parameter grads.
  void accumulate(const Gradients<T>& grads, T scale = T{1});
  double grad_norm() const;

  std::size_t step() const noexcept { return step_; }
  void set_step(std::size_t s) noexcept { step_ = s; }

  // Copies values only; gradients and moments start at zero.
  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& p : params_) out.add(p.name, p.value.template cast<U>());
    return out;
  }

 private:
  std::vector<Parameter<T>> params_;
  std::unordered_map<std::string, std::size_t> by_name_;
  std::size_t step_ = 0;
};

// Name-pattern learning-rate rule. '*' matches any run of characters; the
// first matching rule wins.
struct LearningRateRule {
  std::string pattern;
  double rate = 0.0;
};

bool glob_match(std::string_view pattern, std::string_view name);

// Resolves a rate for every parameter; throws a config error naming the first
// parameter that no rule covers.
template <typename T>
std::vector<double> resolve_rates(const ParamStore<T>& params,
                                  std::span<const LearningRateRule> rules);

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// Decoupled weight decay: theta <- theta - lr*wd*theta - lr*mhat/(sqrt(vhat)+eps).
template <typename T>
void adamw_step(ParamStore<T>& params, std::span<const LearningRateRule> rules,
                const AdamWOptions& options);

// Rescales all gradients so their global L2 norm is at most max_norm.
// Returns the norm before clipping.
template <typename T>
double clip_grad_norm(ParamStore<T>& params, double max_norm);

extern template class Gradients<float>;
extern template class Gradients<double>;
extern template class ParamStore<float>;
extern template class ParamStore<double>;

}  // namespace eru::nn
