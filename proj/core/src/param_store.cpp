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

#include "eru/param_store.hpp"

#include <cmath>

#include "eru/error.hpp"

namespace eru::nn {

template <typename T>
Tensor<T>& Gradients<T>::slot(std::size_t index, const Shape& shape) {
  auto& s = slots_[index];
  if (s.empty()) s = Tensor<T>(shape);
  return s;
}

template <typename T>
void Gradients<T>::clear() {
  for (auto& s : slots_) s = Tensor<T>();
}

template <typename T>
std::size_t ParamStore<T>::add(std::string name, Tensor<T> init) {
  if (by_name_.contains(name)) fail(ErrorKind::kValidation, "duplicate parameter name " + name);
  const std::size_t idx = params_.size();
  by_name_.emplace(name, idx);
  Parameter<T> p;
  p.name = std::move(name);
  p.grad = Tensor<T>(init.shape());
  p.m = Tensor<T>(init.shape());
  p.v = Tensor<T>(init.shape());
  p.value = std::move(init);
  params_.push_back(std::move(p));
  return idx;
}

template <typename T>
std::optional<std::size_t> ParamStore<T>::find(std::string_view name) const {
  auto it = by_name_.find(std::string(name));
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

template <typename T>
std::size_t ParamStore<T>::index(std::string_view name) const {
  auto idx = find(name);
  if (!idx) fail(ErrorKind::kValidation, "unknown parameter " + std::string(name));
  return *idx;
}

template <typename T>
std::size_t ParamStore<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <typename T>
void ParamStore<T>::zero_grad() {
  for (auto& p : params_) p.grad.fill(T{0});
}

template <typename T>
void ParamStore<T>::accumulate(const Gradients<T>& grads, T scale) {
  for (std::size_t i = 0; i < params_.size() && i < grads.size(); ++i) {
    const Tensor<T>* g = grads.get(i);
    if (!g) continue;
    auto dst = params_[i].grad.values();
    auto src = g->values();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += scale * src[k];
  }
}

template <typename T>
double ParamStore<T>::grad_norm() const {
  double sum = 0.0;
  for (const auto& p : params_) {
    for (T g : p.grad.values()) sum += static_cast<double>(g) * static_cast<double>(g);
  }
  return std::sqrt(sum);
}

bool glob_match(std::string_view pattern, std::string_view name) {
  // Iterative wildcard match with single-star backtracking.
  std::size_t p = 0, n = 0, star = std::string_view::npos, mark = 0;
  while (n < name.size()) {
    if (p < pattern.size() && pattern[p] == '*') {
      star = p++;
      mark = n;
    } else if (p < pattern.size() && pattern[p] == name[n]) {
      ++p;
      ++n;
    } else if (star != std::string_view::npos) {
      p = star + 1;
      n = ++mark;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '*') ++p;
  return p == pattern.size();
}

template <typename T>
std::vector<double> resolve_rates(const ParamStore<T>& params,
                                  std::span<const LearningRateRule> rules) {
  std::vector<double> rates;
  rates.reserve(params.size());
  for (const auto& p : params) {
    bool matched = false;
    for (const auto& rule : rules) {
      if (glob_match(rule.pattern, p.name)) {
        rates.push_back(rule.rate);
        matched = true;
        break;
      }
    }
    if (!matched) fail(ErrorKind::kConfig, "no learning rate rule matches parameter " + p.name);
  }
  return rates;
}

template <typename T>
void adamw_step(ParamStore<T>& params, std::span<const LearningRateRule> rules,
                const AdamWOptions& options) {
  const auto rates = resolve_rates(params, rules);
  params.set_step(params.step() + 1);
  const double t = static_cast<double>(params.step());
  const double bc1 = 1.0 - std::pow(options.beta1, t);
  const double bc2 = 1.0 - std::pow(options.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    const double lr = rates[i];
    auto theta = p.value.values();
    auto grad = p.grad.values();
    auto m = p.m.values();
    auto v = p.v.values();
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const double g = grad[k];
      const double mk = options.beta1 * m[k] + (1.0 - options.beta1) * g;
      const double vk = options.beta2 * v[k] + (1.0 - options.beta2) * g * g;
      m[k] = static_cast<T>(mk);
      v[k] = static_cast<T>(vk);
      const double mhat = mk / bc1;
      const double vhat = vk / bc2;
      double th = theta[k];
      th -= lr * options.weight_decay * th;
      th -= lr * mhat / (std::sqrt(vhat) + options.eps);
      theta[k] = static_cast<T>(th);
    }
  }
}

template <typename T>
double clip_grad_norm(ParamStore<T>& params, double max_norm) {
  const double norm = params.grad_norm();
  if (max_norm > 0.0 && norm > max_norm) {
    const T scale = static_cast<T>(max_norm / norm);
    for (auto& p : params) {
      for (T& g : p.grad.values()) g *= scale;
    }
  }
  return norm;
}

template class Gradients<float>;
template class Gradients<double>;
template class ParamStore<float>;
template class ParamStore<double>;
template std::vector<double> resolve_rates(const ParamStore<float>&, std::span<const LearningRateRule>);
template std::vector<double> resolve_rates(const ParamStore<double>&, std::span<const LearningRateRule>);
template void adamw_step(ParamStore<float>&, std::span<const LearningRateRule>, const AdamWOptions&);
template void adamw_step(ParamStore<double>&, std::span<const LearningRateRule>, const AdamWOptions&);
template double clip_grad_norm(ParamStore<float>&, double);
template double clip_grad_norm(ParamStore<double>&, double);

}  // namespace eru::nn
