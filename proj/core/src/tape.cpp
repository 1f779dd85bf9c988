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

#include "eru/tape.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "eru/error.hpp"

namespace eru::nn {
namespace {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapM = Eigen::Map<Mat<T>>;
template <typename T>
using CMapM = Eigen::Map<const Mat<T>>;
template <typename T>
using StridedMap = Eigen::Map<Mat<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using CStridedMap = Eigen::Map<const Mat<T>, 0, Eigen::OuterStride<>>;

template <typename T>
CMapM<T> as_mat(const Tensor<T>& t) {
  return CMapM<T>(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}
template <typename T>
MapM<T> as_mat(Tensor<T>& t) {
  return MapM<T>(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b) {
  fail(ErrorKind::kShape, std::string(op) + ": incompatible shapes " + shape_string(a) + " and " +
                              shape_string(b));
}

template <typename T>
Shape mshape(const Tensor<T>& t) {
  return {t.rows(), t.cols()};
}

// im2col for one image: col is [Cin*k*k x Ho*Wo].
template <typename T>
void im2col(const T* img, const ConvGeometry& g, T* col) {
  const std::size_t ho = g.out_height(), wo = g.out_width();
  const std::size_t positions = ho * wo;
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel; ++kx) {
        const std::size_t row = (c * g.kernel + ky) * g.kernel + kx;
        T* out = col + row * positions;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
            T v{0};
            if (iy >= 0 && ix >= 0 && iy < static_cast<long>(g.height) &&
                ix < static_cast<long>(g.width)) {
              v = img[(c * g.height + static_cast<std::size_t>(iy)) * g.width +
                      static_cast<std::size_t>(ix)];
            }
            out[oy * wo + ox] = v;
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, const ConvGeometry& g, T* img) {
  const std::size_t ho = g.out_height(), wo = g.out_width();
  const std::size_t positions = ho * wo;
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel; ++kx) {
        const std::size_t row = (c * g.kernel + ky) * g.kernel + kx;
        const T* in = col + row * positions;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
          if (iy < 0 || iy >= static_cast<long>(g.height)) continue;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
            if (ix < 0 || ix >= static_cast<long>(g.width)) continue;
            img[(c * g.height + static_cast<std::size_t>(iy)) * g.width +
                static_cast<std::size_t>(ix)] += in[oy * wo + ox];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
void Tape<T>::check(Var v, const char* op) const {
  if (!v.valid() || v.id >= nodes_.size()) {
    fail(ErrorKind::kShape, std::string(op) + ": invalid tape handle");
  }
}

template <typename T>
Var Tape<T>::push(Tensor<T> value, bool needs_grad, std::function<void()> backward) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = record_ && needs_grad;
  if (n.needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

template <typename T>
Tensor<T>& Tape<T>::grad_of(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor<T>(mshape(val(id)));
  return n.grad;
}

template <typename T>
Var Tape<T>::constant(Tensor<T> value) {
  return push(std::move(value), false, nullptr);
}

template <typename T>
Var Tape<T>::param(const ParamStore<T>& store, std::size_t index) {
  Node n;
  n.borrowed = &store[index].value;
  n.param_index = index;
  n.needs_grad = record_;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

template <typename T>
const Tensor<T>& Tape<T>::value(Var v) const {
  check(v, "value");
  return val(v.id);
}

template <typename T>
const Tensor<T>& Tape<T>::grad(Var v) const {
  check(v, "grad");
  return nodes_[v.id].grad.empty() ? empty_ : nodes_[v.id].grad;
}

template <typename T>
Var Tape<T>::matmul(Var a, Var b) {
  check(a, "matmul");
  check(b, "matmul");
  const auto& A = val(a.id);
  const auto& B = val(b.id);
  if (A.cols() != B.rows()) shape_fail("matmul", A.shape(), B.shape());
  Tensor<T> out = Tensor<T>::matrix(A.rows(), B.cols());
  as_mat(out).noalias() = as_mat(A) * as_mat(B);
  const bool ng = needs(a) || needs(b);
  Var self{nodes_.size()};
  return push(std::move(out), ng, [this, a, b, self] {
    const auto& G = nodes_[self.id].grad;
    if (nodes_[a.id].needs_grad) as_mat(grad_of(a.id)).noalias() += as_mat(G) * as_mat(val(b.id)).transpose();
    if (nodes_[b.id].needs_grad) as_mat(grad_of(b.id)).noalias() += as_mat(val(a.id)).transpose() * as_mat(G);
  });
}

template <typename T>
Var Tape<T>::matmul_nt(Var a, Var b) {
  check(a, "matmul_nt");
  check(b, "matmul_nt");
  const auto& A = val(a.id);
  const auto& B = val(b.id);
  if (A.cols() != B.cols()) shape_fail("matmul_nt", A.shape(), B.shape());
  Tensor<T> out = Tensor<T>::matrix(A.rows(), B.rows());
  as_mat(out).noalias() = as_mat(A) * as_mat(B).transpose();
  const bool ng = needs(a) || needs(b);
  Var self{nodes_.size()};
  return push(std::move(out), ng, [this, a, b, self] {
    const auto& G = nodes_[self.id].grad;
    if (nodes_[a.id].needs_grad) as_mat(grad_of(a.id)).noalias() += as_mat(G) * as_mat(val(b.id));
    if (nodes_[b.id].needs_grad) as_mat(grad_of(b.id)).noalias() += as_mat(G).transpose() * as_mat(val(a.id));
  });
}

template <typename T>
Var Tape<T>::add(Var a, Var b) {
  check(a, "add");
  check(b, "add");
  const auto& A = val(a.id);
  const auto& B = val(b.id);
  if (A.rows() != B.rows() || A.cols() != B.cols()) shape_fail("add", A.shape(), B.shape());
  Tensor<T> out = Tensor<T>::matrix(A.rows(), A.cols());
  as_mat(out) = as_mat(A) + as_mat(B);
  const bool ng = needs(a) || needs(b);
  Var self{nodes_.size()};
  return push(std::move(out), ng, [this, a, b, self] {
    const auto& G = nodes_[self.id].grad;
    if (nodes_[a.id].needs_grad) as_mat(grad_of(a.id)) += as_mat(G);
    if (nodes_[b.id].needs_grad) as_mat(grad_of(b.id)) += as_mat(G);
  });
}

template <typename T>
Var Tape<T>::add_row(Var a, Var row) {
  check(a, "add_row");
  check(row, "add_row");
  const auto& A = val(a.id);
  const auto& R = val(row.id);
  if (R.size() != A.cols()) shape_fail("add_row", A.shape(), R.shape());
  Tensor<T> out = Tensor<T>::matrix(A.rows(), A.cols());
  {
    auto rv = CMapM<T>(R.data(), 1, static_cast<Eigen::Index>(R.size()));
    as_mat(out) = as_mat(A).rowwise() + rv.row(0);
  }
  const bool ng = needs(a) || needs(row);
  Var self{nodes_.size()};
  return push(std::move(out), ng, [this, a, row, self] {
    const auto& G = nodes_[self.id].grad;
    if (nodes_[a.id].needs_grad) as_mat(grad_of(a.id)) += as_mat(G);
    if (nodes_[row.id].needs_grad) {
      auto& gr = grad_of(row.id);
      MapM<T>(gr.data(), 1, static_cast<Eigen::Index>(gr.size())) += as_mat(G).colwise().sum();
    }
  });
}

template <typename T>
Var Tape<T>::mul(Var a, Var b) {
  check(a, "mul");
  check(b, "mul");
  const auto& A = val(a.id);
  const auto& B = val(b.id);
  if (A.rows() != B.rows() || A.cols() != B.cols()) shape_fail("mul", A.shape(), B.shape());
  Tensor<T> out = Tensor<T>::matrix(A.rows(), A.cols());
  as_mat(out) = as_mat(A).cwiseProduct(as_mat(B));
  const bool ng = needs(a) || needs(b);
  Var self{nodes_.size()};
  return push(std::move(out), ng, [this, a, b, self] {
    const auto& G = nodes_[self.id].grad;
    if (nodes_[a.id].needs_grad) as_mat(grad_of(a.id)) += as_mat(G).cwiseProduct(as_mat(val(b.id)));
    if (nodes_[b.id].needs_grad) as_mat(grad_of(b.id)) += as_mat(G).cwiseProduct(as_mat(val(a.id)));
  });
}

template <typename T>
Var Tape<T>::scale(Var a, T factor) {
  check(a, "scale");
  const auto& A = val(a.id);
  Tensor<T> out = Tensor<T>::matrix(A.rows(), A.cols());
  as_mat(out) = as_mat(A) * factor;
  Var self{nodes_.size()};
  return push(std::move(out), needs(a), [this, a, self, factor] {
    as_mat(grad_of(a.id)) += as_mat(nodes_[self.id].grad) * factor;
  });
}

template <typename T>
Var Tape<T>::linear(Var x, Var weight, Var bias) {
  Var y = matmul(x, weight);
  return bias.valid() ? add_row(y, bias) : y;
}

template <typename T>
Var Tape<T>::concat_rows(std::span<const Var> parts) {
  if (parts.empty()) fail(ErrorKind::kShape, "concat_rows: no inputs");
  std::size_t rows = 0;
  const std::size_t cols = val(parts[0].id).cols();
  bool ng = false;
  for (Var p : parts) {
    check(p, "concat_rows");
    const auto& P = val(p.id);
    if (P.cols() != cols) shape_fail("concat_rows", val(parts[0].id).shape(), P.shape());
    rows += P.rows();
    ng = ng || needs(p);
  }
  Tensor<T> out = Tensor<T>::matrix(rows, cols);
  std::size_t offset = 0;
  for (Var p : parts) {
    const auto& P = val(p.id);
    std::copy(P.data(), P.data() + P.size(), out.data() + offset);
    offset += P.size();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  Var self{nodes_.size()};
  return push(std::move(out), ng, [this, inputs = std::move(inputs), self] {
    const auto& G = nodes_[self.id].grad;
    std::size_t off = 0;
    for (Var p : inputs) {
      const std::size_t n = val(p.id).size();
      if (nodes_[p.id].needs_grad) {
        auto& gp = grad_of(p.id);
        for (std::size_t i = 0; i < n; ++i) gp[i] += G[off + i];
      }
      off += n;
    }
  });
}

template <typename T>
Var Tape<T>::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) fail(ErrorKind::kShape, "concat_cols: no inputs");
  const std::size_t rows = val(parts[0].id).rows();
  std::size_t cols = 0;
  bool ng = false;
  for (Var p : parts) {
    check(p, "concat_cols");
    const auto& P = val(p.id);
    if (P.rows() != rows) shape_fail("concat_cols", val(parts[0].id).shape(), P.shape());
    cols += P.cols();
    ng = ng || needs(p);
  }
  Tensor<T> out = Tensor<T>::matrix(rows, cols);
  std::size_t c0 = 0;
  for (Var p : parts) {
    const auto& P = val(p.id);
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy(P.data() + r * P.cols(), P.data() + (r + 1) * P.cols(), out.data() + r * cols + c0);
    }
    c0 += P.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  Var self{nodes_.size()};
  return push(std::move(out), ng, [this, inputs = std::move(inputs), self, rows, cols] {
    const auto& G = nodes_[self.id].grad;
    std::size_t c = 0;
    for (Var p : inputs) {
      const std::size_t pc = val(p.id).cols();
      if (nodes_[p.id].needs_grad) {
        auto& gp = grad_of(p.id);
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = 0; j < pc; ++j) gp[r * pc + j] += G[r * cols + c + j];
        }
      }
      c += pc;
    }
  });
}

template <typename T>
Var Tape<T>::slice_cols(Var a, std::size_t begin, std::size_t end) {
  check(a, "slice_cols");
  const auto& A = val(a.id);
  if (begin >= end || end > A.cols()) {
    fail(ErrorKind::kShape, "slice_cols: range [" + std::to_string(begin) + "," +
                                std::to_string(end) + ") outside " + shape_string(A.shape()));
  }
  const std::size_t rows = A.rows(), cols = A.cols(), w = end - begin;
  Tensor<T> out = Tensor<T>::matrix(rows, w);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy(A.data() + r * cols + begin, A.data() + r * cols + end, out.data() + r * w);
  }
  Var self{nodes_.size()};
  return push(std::move(out), needs(a), [this, a, self, rows, cols, begin, w] {
    const auto& G = nodes_[self.id].grad;
    auto& ga = grad_of(a.id);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < w; ++j) ga[r * cols + begin + j] += G[r * w + j];
    }
  });
}

template <typename T>
Var Tape<T>::gather_rows(Var a, std::vector<std::size_t> rows) {
  check(a, "gather_rows");
  const auto& A = val(a.id);
  const std::size_t cols = A.cols();
  Tensor<T> out = Tensor<T>::matrix(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= A.rows()) {
      fail(ErrorKind::kShape, "gather_rows: row " + std::to_string(rows[i]) + " outside " +
                                  shape_string(A.shape()));
    }
    std::copy(A.data() + rows[i] * cols, A.data() + (rows[i] + 1) * cols, out.data() + i * cols);
  }
  Var self{nodes_.size()};
  return push(std::move(out), needs(a), [this, a, self, rows = std::move(rows), cols] {
    const auto& G = nodes_[self.id].grad;
    auto& ga = grad_of(a.id);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      T* dst = ga.data() + rows[i] * cols;
      const T* src = G.data() + i * cols;
      for (std::size_t j = 0; j < cols; ++j) dst[j] += src[j];
    }
  });
}

template <typename T>
Var Tape<T>::reshape(Var a, std::size_t rows, std::size_t cols) {
  check(a, "reshape");
  const auto& A = val(a.id);
  if (rows * cols != A.size()) {
    fail(ErrorKind::kShape, "reshape: cannot view " + shape_string(A.shape()) + " as " +
                                shape_string({rows, cols}));
  }
  Tensor<T> out({rows, cols}, std::vector<T>(A.values().begin(), A.values().end()));
  Var self{nodes_.size()};
  return push(std::move(out), needs(a), [this, a, self] {
    const auto& G = nodes_[self.id].grad;
    auto& ga = grad_of(a.id);
    for (std::size_t i = 0; i < G.size(); ++i) ga[i] += G[i];
  });
}

template <typename T>
Var Tape<T>::row_sum(Var a) {
  check(a, "row_sum");
  const auto& A = val(a.id);
  const std::size_t rows = A.rows(), cols = A.cols();
  Tensor<T> out = Tensor<T>::matrix(rows, 1);
  for (std::size_t r = 0; r < rows; ++r) {
    T s{0};
    for (T v : A.row(r)) s += v;
    out[r] = s;
  }
  Var self{nodes_.size()};
  return push(std::move(out), needs(a), [this, a, self, rows, cols] {
    const auto& G = nodes_[self.id].grad;
    auto& ga = grad_of(a.id);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < cols; ++j) ga(r, j) += G[r];
    }
  });
}

template <typename T>
Var Tape<T>::row_softmax(Var a) {
  check(a, "row_softmax");
  const auto& A = val(a.id);
  Tensor<T> out = Tensor<T>::matrix(A.rows(), A.cols());
  for (std::size_t r = 0; r < A.rows(); ++r) {
    auto in = A.row(r);
    auto o = out.row(r);
    const T mx = *std::max_element(in.begin(), in.end());
    T total{0};
    for (std::size_t j = 0; j < in.size(); ++j) {
      o[j] = std::exp(in[j] - mx);
      total += o[j];
    }
    for (auto& x : o) x /= total;
  }
  Var self{nodes_.size()};
  return push(std::move(out), needs(a), [this, a, self] {
    const auto& Y = val(self.id);
    const auto& G = nodes_[self.id].grad;
    auto& ga = grad_of(a.id);
    for (std::size_t r = 0; r < Y.rows(); ++r) {
      auto y = Y.row(r);
      auto g = G.row(r);
      T dot{0};
      for (std::size_t j = 0; j < y.size(); ++j) dot += y[j] * g[j];
      auto d = ga.row(r);
      for (std::size_t j = 0; j < y.size(); ++j) d[j] += y[j] * (g[j] - dot);
    }
  });
}

template <typename T>
Var Tape<T>::layer_norm(Var x, Var gain, Var bias, T eps) {
  check(x, "layer_norm");
  const auto& X = val(x.id);
  const auto& Gn = val(gain.id);
  const auto& Bs = val(bias.id);
  const std::size_t rows = X.rows(), cols = X.cols();
  if (Gn.size() != cols || Bs.size() != cols) shape_fail("layer_norm", X.shape(), Gn.shape());
  Tensor<T> out = Tensor<T>::matrix(rows, cols);
  AlignedVector<T> xhat(rows * cols);
  AlignedVector<T> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    auto in = X.row(r);
    T mu{0};
    for (T v : in) mu += v;
    mu /= static_cast<T>(cols);
    T var{0};
    for (T v : in) var += (v - mu) * (v - mu);
    var /= static_cast<T>(cols);
    const T is = T{1} / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::size_t j = 0; j < cols; ++j) {
      const T h = (in[j] - mu) * is;
      xhat[r * cols + j] = h;
      out(r, j) = h * Gn[j] + Bs[j];
    }
  }
  const bool ng = needs(x) || needs(gain) || needs(bias);
  Var self{nodes_.size()};
  return push(std::move(out), ng,
              [this, x, gain, bias, self, rows, cols, xhat = std::move(xhat),
               inv_std = std::move(inv_std)] {
                const auto& G = nodes_[self.id].grad;
                const auto& Gn = val(gain.id);
                if (nodes_[gain.id].needs_grad || nodes_[bias.id].needs_grad) {
                  for (std::size_t r = 0; r < rows; ++r) {
                    for (std::size_t j = 0; j < cols; ++j) {
                      if (nodes_[gain.id].needs_grad) grad_of(gain.id)[j] += G(r, j) * xhat[r * cols + j];
                      if (nodes_[bias.id].needs_grad) grad_of(bias.id)[j] += G(r, j);
                    }
                  }
                }
                if (!nodes_[x.id].needs_grad) return;
                auto& gx = grad_of(x.id);
                const T n = static_cast<T>(cols);
                for (std::size_t r = 0; r < rows; ++r) {
                  T sum_d{0}, sum_dh{0};
                  for (std::size_t j = 0; j < cols; ++j) {
                    const T d = G(r, j) * Gn[j];
                    sum_d += d;
                    sum_dh += d * xhat[r * cols + j];
                  }
                  for (std::size_t j = 0; j < cols; ++j) {
                    const T d = G(r, j) * Gn[j];
                    gx(r, j) += inv_std[r] / n * (n * d - sum_d - xhat[r * cols + j] * sum_dh);
                  }
                }
              });
}

template <typename T>
Var Tape<T>::gelu(Var x) {
  check(x, "gelu");
  const auto& X = val(x.id);
  Tensor<T> out = Tensor<T>::matrix(X.rows(), X.cols());
  constexpr T kInvSqrt2 = static_cast<T>(0.70710678118654752440);
  for (std::size_t i = 0; i < X.size(); ++i) {
    const T v = X[i];
    out[i] = T(0.5) * v * (T(1) + std::erf(v * kInvSqrt2));
  }
  Var self{nodes_.size()};
  return push(std::move(out), needs(x), [this, x, self] {
    constexpr T kInvSqrt2 = static_cast<T>(0.70710678118654752440);
    constexpr T kInvSqrt2Pi = static_cast<T>(0.39894228040143267794);
    const auto& X = val(x.id);
    const auto& G = nodes_[self.id].grad;
    auto& gx = grad_of(x.id);
    for (std::size_t i = 0; i < X.size(); ++i) {
      const T v = X[i];
      const T cdf = T(0.5) * (T(1) + std::erf(v * kInvSqrt2));
      const T pdf = kInvSqrt2Pi * std::exp(T(-0.5) * v * v);
      gx[i] += G[i] * (cdf + v * pdf);
    }
  });
}

template <typename T>
Var Tape<T>::l2_normalize_rows(Var a) {
  check(a, "l2_normalize_rows");
  const auto& A = val(a.id);
  const std::size_t rows = A.rows(), cols = A.cols();
  // Smoothed norm sqrt(|x|^2 + floor^2) keeps zero rows finite and differentiable.
  constexpr T kFloor = static_cast<T>(1e-12);
  Tensor<T> out = Tensor<T>::matrix(rows, cols);
  AlignedVector<T> norms(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    T ss{0};
    for (T v : A.row(r)) ss += v * v;
    const T n = std::sqrt(ss + kFloor * kFloor);
    norms[r] = n;
    for (std::size_t j = 0; j < cols; ++j) out(r, j) = A(r, j) / n;
  }
  Var self{nodes_.size()};
  return push(std::move(out), needs(a), [this, a, self, rows, cols, norms = std::move(norms)] {
    const auto& Y = val(self.id);
    const auto& G = nodes_[self.id].grad;
    auto& ga = grad_of(a.id);
    for (std::size_t r = 0; r < rows; ++r) {
      T dot{0};
      for (std::size_t j = 0; j < cols; ++j) dot += Y(r, j) * G(r, j);
      for (std::size_t j = 0; j < cols; ++j) ga(r, j) += (G(r, j) - Y(r, j) * dot) / norms[r];
    }
  });
}

template <typename T>
Var Tape<T>::cosine_similarity(Var a, Var b) {
  return matmul_nt(l2_normalize_rows(a), l2_normalize_rows(b));
}

template <typename T>
Var Tape<T>::cross_entropy(Var logits, std::vector<std::size_t> targets, Reduction reduction) {
  check(logits, "cross_entropy");
  const auto& L = val(logits.id);
  const std::size_t rows = L.rows(), cols = L.cols();
  if (targets.size() != rows) {
    fail(ErrorKind::kShape, "cross_entropy: " + std::to_string(targets.size()) +
                                " targets for logits " + shape_string(L.shape()));
  }
  // Log-softmax via max-shifted log-sum-exp; never produces log(0).
  AlignedVector<T> probs(rows * cols);
  T total{0};
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] >= cols) fail(ErrorKind::kShape, "cross_entropy: target out of range");
    auto in = L.row(r);
    const T mx = *std::max_element(in.begin(), in.end());
    T z{0};
    for (std::size_t j = 0; j < cols; ++j) {
      const T e = std::exp(in[j] - mx);
      probs[r * cols + j] = e;
      z += e;
    }
    for (std::size_t j = 0; j < cols; ++j) probs[r * cols + j] /= z;
    total += -(in[targets[r]] - mx - std::log(z));
  }
  const T denom = (reduction == Reduction::kMean && rows > 0) ? static_cast<T>(rows) : T{1};
  Var self{nodes_.size()};
  return push(Tensor<T>::scalar(total / denom), needs(logits),
              [this, logits, self, rows, cols, denom, probs = std::move(probs),
               targets = std::move(targets)] {
                const T g = nodes_[self.id].grad[0] / denom;
                auto& gl = grad_of(logits.id);
                for (std::size_t r = 0; r < rows; ++r) {
                  for (std::size_t j = 0; j < cols; ++j) {
                    gl(r, j) += g * (probs[r * cols + j] - (j == targets[r] ? T{1} : T{0}));
                  }
                }
              });
}

template <typename T>
Var Tape<T>::sum(Var a) {
  check(a, "sum");
  const auto& A = val(a.id);
  T s{0};
  for (T v : A.values()) s += v;
  Var self{nodes_.size()};
  return push(Tensor<T>::scalar(s), needs(a), [this, a, self] {
    const T g = nodes_[self.id].grad[0];
    for (T& v : grad_of(a.id).values()) v += g;
  });
}

template <typename T>
Var Tape<T>::mean(Var a) {
  const std::size_t n = value(a).size();
  return scale(sum(a), n ? T{1} / static_cast<T>(n) : T{0});
}

template <typename T>
Var Tape<T>::conv2d(Var x, Var weight, Var bias, const ConvGeometry& g) {
  check(x, "conv2d");
  const auto& X = val(x.id);
  const auto& W = val(weight.id);
  const auto& B = val(bias.id);
  const std::size_t in_size = g.in_channels * g.height * g.width;
  const std::size_t kk = g.in_channels * g.kernel * g.kernel;
  if (X.cols() != in_size) {
    fail(ErrorKind::kShape, "conv2d: input " + shape_string(X.shape()) + " does not match " +
                                std::to_string(g.in_channels) + "x" + std::to_string(g.height) + "x" +
                                std::to_string(g.width));
  }
  if (W.rows() != g.out_channels || W.cols() != kk || B.size() != g.out_channels) {
    shape_fail("conv2d", W.shape(), Shape{g.out_channels, kk});
  }
  const std::size_t positions = g.out_height() * g.out_width();
  const std::size_t batch = X.rows();
  Tensor<T> out = Tensor<T>::matrix(batch, g.out_channels * positions);
  AlignedVector<T> col(kk * positions);
  auto Wm = as_mat(W);
  for (std::size_t b = 0; b < batch; ++b) {
    im2col(X.data() + b * in_size, g, col.data());
    MapM<T> o(out.data() + b * g.out_channels * positions, static_cast<Eigen::Index>(g.out_channels),
              static_cast<Eigen::Index>(positions));
    o.noalias() = Wm * CMapM<T>(col.data(), static_cast<Eigen::Index>(kk), static_cast<Eigen::Index>(positions));
    for (std::size_t c = 0; c < g.out_channels; ++c) o.row(static_cast<Eigen::Index>(c)).array() += B[c];
  }
  const bool ng = needs(x) || needs(weight) || needs(bias);
  Var self{nodes_.size()};
  return push(std::move(out), ng, [this, x, weight, bias, self, g, batch, in_size, kk, positions] {
    const auto& G = nodes_[self.id].grad;
    const auto& X = val(x.id);
    const auto& W = val(weight.id);
    AlignedVector<T> col(kk * positions);
    AlignedVector<T> dcol(kk * positions);
    for (std::size_t b = 0; b < batch; ++b) {
      CMapM<T> go(G.data() + b * g.out_channels * positions, static_cast<Eigen::Index>(g.out_channels),
                  static_cast<Eigen::Index>(positions));
      if (nodes_[weight.id].needs_grad) {
        im2col(X.data() + b * in_size, g, col.data());
        as_mat(grad_of(weight.id)).noalias() +=
            go * CMapM<T>(col.data(), static_cast<Eigen::Index>(kk), static_cast<Eigen::Index>(positions)).transpose();
      }
      if (nodes_[bias.id].needs_grad) {
        auto& gb = grad_of(bias.id);
        for (std::size_t c = 0; c < g.out_channels; ++c) gb[c] += go.row(static_cast<Eigen::Index>(c)).sum();
      }
      if (nodes_[x.id].needs_grad) {
        MapM<T> dc(dcol.data(), static_cast<Eigen::Index>(kk), static_cast<Eigen::Index>(positions));
        dc.noalias() = as_mat(W).transpose() * go;
        col2im_add(dcol.data(), g, grad_of(x.id).data() + b * in_size);
      }
    }
  });
}

template <typename T>
Var Tape<T>::channel_mean(Var x, std::size_t channels) {
  check(x, "channel_mean");
  const auto& X = val(x.id);
  if (channels == 0 || X.cols() % channels != 0) {
    fail(ErrorKind::kShape, "channel_mean: " + shape_string(X.shape()) + " not divisible into " +
                                std::to_string(channels) + " channels");
  }
  const std::size_t batch = X.rows(), per = X.cols() / channels;
  Tensor<T> out = Tensor<T>::matrix(batch, channels);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < channels; ++c) {
      T s{0};
      const T* p = X.data() + b * X.cols() + c * per;
      for (std::size_t i = 0; i < per; ++i) s += p[i];
      out(b, c) = s / static_cast<T>(per);
    }
  }
  Var self{nodes_.size()};
  return push(std::move(out), needs(x), [this, x, self, batch, channels, per] {
    const auto& G = nodes_[self.id].grad;
    auto& gx = grad_of(x.id);
    const T inv = T{1} / static_cast<T>(per);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t c = 0; c < channels; ++c) {
        const T g = G(b, c) * inv;
        T* p = gx.data() + b * channels * per + c * per;
        for (std::size_t i = 0; i < per; ++i) p[i] += g;
      }
    }
  });
}

template <typename T>
Var Tape<T>::attention(Var q, Var k, Var v, const AttentionSpec& spec, Var bias) {
  check(q, "attention");
  check(k, "attention");
  check(v, "attention");
  const auto& Q = val(q.id);
  const auto& K = val(k.id);
  const auto& V = val(v.id);
  const std::size_t n = Q.rows(), d = Q.cols();
  if (K.rows() != n || V.rows() != n || K.cols() != d || V.cols() != d) {
    shape_fail("attention", Q.shape(), K.shape());
  }
  if (spec.heads == 0 || d % spec.heads != 0) {
    fail(ErrorKind::kShape, "attention: width " + std::to_string(d) + " not divisible by " +
                                std::to_string(spec.heads) + " heads");
  }
  if (bias.valid()) {
    const auto& Bv = val(bias.id);
    if (Bv.rows() != spec.heads * n || Bv.cols() != n) {
      shape_fail("attention bias", Bv.shape(), Shape{spec.heads * n, n});
    }
  }
  const std::size_t heads = spec.heads, dh = d / heads;
  const T sc = static_cast<T>(spec.scale);
  AttentionCache cache;
  cache.heads = heads;
  cache.blocks = spec.blocks;
  if (cache.blocks.empty()) cache.blocks.push_back({0, n});
  std::size_t total = 0;
  for (auto [s, e] : cache.blocks) {
    if (s >= e || e > n) fail(ErrorKind::kShape, "attention: bad block range");
    for (std::size_t h = 0; h < heads; ++h) {
      cache.offsets.push_back(total);
      total += (e - s) * (e - s);
    }
  }
  cache.probs.resize(total);

  Tensor<T> out = Tensor<T>::matrix(n, d);
  const T* bias_data = bias.valid() ? val(bias.id).data() : nullptr;
  for (std::size_t bi = 0; bi < cache.blocks.size(); ++bi) {
    const auto [s, e] = cache.blocks[bi];
    const auto L = static_cast<Eigen::Index>(e - s);
    for (std::size_t h = 0; h < heads; ++h) {
      CStridedMap<T> Qh(Q.data() + s * d + h * dh, L, static_cast<Eigen::Index>(dh), Eigen::OuterStride<>(static_cast<Eigen::Index>(d)));
      CStridedMap<T> Kh(K.data() + s * d + h * dh, L, static_cast<Eigen::Index>(dh), Eigen::OuterStride<>(static_cast<Eigen::Index>(d)));
      CStridedMap<T> Vh(V.data() + s * d + h * dh, L, static_cast<Eigen::Index>(dh), Eigen::OuterStride<>(static_cast<Eigen::Index>(d)));
      MapM<T> P(cache.probs.data() + cache.offsets[bi * heads + h], L, L);
      P.noalias() = (Qh * Kh.transpose()) * sc;
      if (bias_data) {
        CStridedMap<T> Bh(bias_data + (h * n + s) * n + s, L, L, Eigen::OuterStride<>(static_cast<Eigen::Index>(n)));
        P += Bh;
      }
      for (Eigen::Index r = 0; r < L; ++r) {
        const T mx = P.row(r).maxCoeff();
        P.row(r) = (P.row(r).array() - mx).exp();
        P.row(r) /= P.row(r).sum();
      }
      StridedMap<T> Oh(out.data() + s * d + h * dh, L, static_cast<Eigen::Index>(dh), Eigen::OuterStride<>(static_cast<Eigen::Index>(d)));
      Oh.noalias() = P * Vh;
    }
  }
  const std::size_t cache_id = attention_.size();
  attention_.push_back(std::move(cache));
  const bool ng = needs(q) || needs(k) || needs(v) || (bias.valid() && needs(bias));
  Var self{nodes_.size()};
  Var result = push(std::move(out), ng, [this, q, k, v, bias, self, cache_id, n, d, dh, sc] {
    const auto& cache = attention_[cache_id];
    const auto& G = nodes_[self.id].grad;
    const auto& Q = val(q.id);
    const auto& K = val(k.id);
    const auto& V = val(v.id);
    const bool gq = nodes_[q.id].needs_grad, gk = nodes_[k.id].needs_grad,
               gv = nodes_[v.id].needs_grad, gb = bias.valid() && nodes_[bias.id].needs_grad;
    T* dQ = gq ? grad_of(q.id).data() : nullptr;
    T* dK = gk ? grad_of(k.id).data() : nullptr;
    T* dV = gv ? grad_of(v.id).data() : nullptr;
    T* dB = gb ? grad_of(bias.id).data() : nullptr;
    const auto os = Eigen::OuterStride<>(static_cast<Eigen::Index>(d));
    const auto edh = static_cast<Eigen::Index>(dh);
    Mat<T> dP, dS;
    for (std::size_t bi = 0; bi < cache.blocks.size(); ++bi) {
      const auto [s, e] = cache.blocks[bi];
      const auto L = static_cast<Eigen::Index>(e - s);
      for (std::size_t h = 0; h < cache.heads; ++h) {
        CMapM<T> P(cache.probs.data() + cache.offsets[bi * cache.heads + h], L, L);
        CStridedMap<T> Gh(G.data() + s * d + h * dh, L, edh, os);
        CStridedMap<T> Qh(Q.data() + s * d + h * dh, L, edh, os);
        CStridedMap<T> Kh(K.data() + s * d + h * dh, L, edh, os);
        CStridedMap<T> Vh(V.data() + s * d + h * dh, L, edh, os);
        if (dV) StridedMap<T>(dV + s * d + h * dh, L, edh, os).noalias() += P.transpose() * Gh;
        dP.noalias() = Gh * Vh.transpose();
        dS.resize(L, L);
        for (Eigen::Index r = 0; r < L; ++r) {
          const T dot = P.row(r).dot(dP.row(r));
          dS.row(r) = P.row(r).array() * (dP.row(r).array() - dot);
        }
        if (dB) {
          StridedMap<T>(dB + (h * n + s) * n + s, L, L, Eigen::OuterStride<>(static_cast<Eigen::Index>(n))) += dS;
        }
        if (dQ) StridedMap<T>(dQ + s * d + h * dh, L, edh, os).noalias() += (dS * Kh) * sc;
        if (dK) StridedMap<T>(dK + s * d + h * dh, L, edh, os).noalias() += (dS.transpose() * Qh) * sc;
      }
    }
  });
  nodes_[result.id].attention = cache_id;
  return result;
}

template <typename T>
Tensor<T> Tape<T>::attention_weights(Var attention_out, std::size_t head, std::size_t block) const {
  check(attention_out, "attention_weights");
  const std::size_t cid = nodes_[attention_out.id].attention;
  if (cid == Var::kNone) fail(ErrorKind::kShape, "attention_weights: node is not an attention output");
  const auto& cache = attention_[cid];
  if (head >= cache.heads || block >= cache.blocks.size()) {
    fail(ErrorKind::kShape, "attention_weights: head/block out of range");
  }
  const auto [s, e] = cache.blocks[block];
  const std::size_t L = e - s;
  const std::size_t off = cache.offsets[block * cache.heads + head];
  std::vector<T> w(cache.probs.begin() + static_cast<std::ptrdiff_t>(off),
                   cache.probs.begin() + static_cast<std::ptrdiff_t>(off + L * L));
  return Tensor<T>({L, L}, std::move(w));
}

template <typename T>
Var Tape<T>::bucket_bias(Var xtab, Var ytab, std::vector<std::uint16_t> bx,
                         std::vector<std::uint16_t> by, std::size_t n) {
  check(xtab, "bucket_bias");
  check(ytab, "bucket_bias");
  const auto& X = val(xtab.id);
  const auto& Y = val(ytab.id);
  if (X.rows() != Y.rows() || X.cols() != Y.cols()) shape_fail("bucket_bias", X.shape(), Y.shape());
  if (bx.size() != n * n || by.size() != n * n) {
    fail(ErrorKind::kShape, "bucket_bias: bucket maps do not cover " + std::to_string(n) + "x" +
                                std::to_string(n));
  }
  const std::size_t heads = X.rows(), buckets = X.cols();
  for (std::size_t i = 0; i < n * n; ++i) {
    if (bx[i] >= buckets || by[i] >= buckets) fail(ErrorKind::kShape, "bucket_bias: bucket out of range");
  }
  Tensor<T> out = Tensor<T>::matrix(heads * n, n);
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < n * n; ++i) {
      out[h * n * n + i] = X(h, bx[i]) + Y(h, by[i]);
    }
  }
  const bool ng = needs(xtab) || needs(ytab);
  Var self{nodes_.size()};
  return push(std::move(out), ng,
              [this, xtab, ytab, self, n, heads, bx = std::move(bx), by = std::move(by)] {
                const auto& G = nodes_[self.id].grad;
                const bool gx = nodes_[xtab.id].needs_grad, gy = nodes_[ytab.id].needs_grad;
                for (std::size_t h = 0; h < heads; ++h) {
                  for (std::size_t i = 0; i < n * n; ++i) {
                    const T g = G[h * n * n + i];
                    if (gx) grad_of(xtab.id)(h, bx[i]) += g;
                    if (gy) grad_of(ytab.id)(h, by[i]) += g;
                  }
                }
              });
}

template <typename T>
void Tape<T>::backward(Var root) {
  check(root, "backward");
  if (!record_) fail(ErrorKind::kNumeric, "backward on a tape built without recording");
  if (val(root.id).size() != 1) fail(ErrorKind::kShape, "backward: root must be a scalar");
  for (auto& n : nodes_) n.grad = Tensor<T>();
  if (!nodes_[root.id].needs_grad) return;
  grad_of(root.id)[0] = T{1};
  for (std::size_t i = root.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty()) continue;
    if (n.backward) n.backward();
    if (n.param_index != Var::kNone && sink_) {
      auto& slot = sink_->slot(n.param_index, val(i).shape());
      auto dst = slot.values();
      auto src = n.grad.values();
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    }
  }
}

template class Tape<float>;
template class Tape<double>;

}  // namespace eru::nn
