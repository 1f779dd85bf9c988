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
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "eru/param_store.hpp"
#include "eru/tensor.hpp"

namespace eru::nn {

// Handle to a value recorded on a Tape.
struct Var {
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::size_t id = kNone;
  bool valid() const noexcept { return id != kNone; }
};

enum class Reduction { kMean, kSum };

struct ConvGeometry {
  std::size_t in_channels = 1;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t out_channels = 1;
  std::size_t kernel = 3;
  std::size_t stride = 2;
  std::size_t pad = 1;

  std::size_t out_height() const { return (height + 2 * pad - kernel) / stride + 1; }
  std::size_t out_width() const { return (width + 2 * pad - kernel) / stride + 1; }
};

// Multi-head scaled dot-product attention restricted to contiguous row blocks.
// Rows in [blocks[b].first, blocks[b].second) attend only to each other.
struct AttentionSpec {
  std::size_t heads = 1;
  double scale = 1.0;
  std::vector<std::pair<std::size_t, std::size_t>> blocks;
};

// Reverse-mode automatic differentiation over dense matrices.
//
// Every op appends a node holding its forward value and a closure that
// propagates the node's gradient to its inputs. Parameters enter through
// param(); their gradients are written to the Gradients sink on backward().
// A tape built with record = false keeps only forward values.
//
// Not thread-safe; use one tape per worker.
template <typename T>
class Tape {
 public:
  explicit Tape(Gradients<T>* sink = nullptr, bool record = true)
      : sink_(sink), record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor<T> value);
  Var param(const ParamStore<T>& store, std::size_t index);

  const Tensor<T>& value(Var v) const;
  // Gradient of the last backward() root w.r.t. v; zero-shaped if v got none.
  const Tensor<T>& grad(Var v) const;
  T item(Var v) const { return value(v)[0]; }
  std::size_t node_count() const noexcept { return nodes_.size(); }
  bool recording() const noexcept { return record_; }

  Var matmul(Var a, Var b);
  Var matmul_nt(Var a, Var b);  // a * b^T
  Var add(Var a, Var b);
  Var add_row(Var a, Var row);  // broadcast a 1 x n row over every row of a
  Var mul(Var a, Var b);
  Var scale(Var a, T factor);
  Var linear(Var x, Var weight, Var bias);  // x * W + b

  Var concat_rows(std::span<const Var> parts);
  Var concat_cols(std::span<const Var> parts);
  Var slice_cols(Var a, std::size_t begin, std::size_t end);
  Var gather_rows(Var a, std::vector<std::size_t> rows);
  // Same row-major values viewed as rows x cols.
  Var reshape(Var a, std::size_t rows, std::size_t cols);
  Var row_sum(Var a);  // [m x n] -> [m x 1]

  Var row_softmax(Var a);
  Var layer_norm(Var x, Var gain, Var bias, T eps = T(1e-5));
  Var gelu(Var x);
  Var l2_normalize_rows(Var a);
  Var cosine_similarity(Var a, Var b);  // [m x d], [n x d] -> [m x n]

  // Cross-entropy of row-wise softmax(logits) against integer targets.
  Var cross_entropy(Var logits, std::vector<std::size_t> targets,
                    Reduction reduction = Reduction::kMean);
  Var sum(Var a);
  Var mean(Var a);

  // x: [B x Cin*H*W], weight: [Cout x Cin*k*k], bias: [1 x Cout].
  Var conv2d(Var x, Var weight, Var bias, const ConvGeometry& geometry);
  // [B x C*P] -> [B x C], averaging each channel's P positions.
  Var channel_mean(Var x, std::size_t channels);

  // q, k, v: [n x d]; bias, when valid, is [heads*n x n] added to the logits.
  Var attention(Var q, Var k, Var v, const AttentionSpec& spec, Var bias = {});
  // Softmax weights of an attention node for one (head, block), as L x L.
  Tensor<T> attention_weights(Var attention_out, std::size_t head, std::size_t block) const;

  // out[h*n + m][k] = xtab[h][bx[m*n+k]] + ytab[h][by[m*n+k]]
  Var bucket_bias(Var xtab, Var ytab, std::vector<std::uint16_t> bx,
                  std::vector<std::uint16_t> by, std::size_t n);

  void backward(Var root);

 private:
  struct AttentionCache {
    std::size_t heads = 0;
    std::vector<std::pair<std::size_t, std::size_t>> blocks;
    std::vector<std::size_t> offsets;  // per (block, head) into probs
    AlignedVector<T> probs;
  };

  struct Node {
    Tensor<T> value;
    const Tensor<T>* borrowed = nullptr;
    Tensor<T> grad;
    std::function<void()> backward;
    std::size_t param_index = Var::kNone;
    bool needs_grad = false;
    std::size_t attention = Var::kNone;
  };

  const Tensor<T>& val(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.borrowed ? *n.borrowed : n.value;
  }
  Tensor<T>& grad_of(std::size_t id);
  bool needs(Var v) const { return record_ && nodes_[v.id].needs_grad; }
  Var push(Tensor<T> value, bool needs_grad, std::function<void()> backward);
  void check(Var v, const char* op) const;

  std::vector<Node> nodes_;
  std::vector<AttentionCache> attention_;
  Gradients<T>* sink_;
  bool record_;
  Tensor<T> empty_;
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace eru::nn
