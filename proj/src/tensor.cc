// Copyright 2026 The DGT Authors. All Rights Reserved.
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

#include "dgt/tensor.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "dgt/error.h"

namespace dgt {
namespace {

std::atomic<std::uint64_t> g_node_counter{0};
thread_local bool g_grad_enabled = true;

template <typename Real>
using NodePtr = std::shared_ptr<detail::Node<Real>>;

template <typename Real>
NodePtr<Real> make_node(Shape shape, std::vector<Real> data) {
  auto node = std::make_shared<detail::Node<Real>>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->order = g_node_counter.fetch_add(1, std::memory_order_relaxed);
  return node;
}

// Output node for an op over `inputs`. History is attached only when
// recording is on and some input needs a gradient.
template <typename Real>
NodePtr<Real> make_result(Shape shape, std::vector<Real> data,
                          std::initializer_list<const Tensor<Real>*> inputs,
                          std::function<void(detail::Node<Real>&)> backward) {
  auto node = make_node<Real>(std::move(shape), std::move(data));
  if (!GradMode::enabled()) return node;
  bool any = false;
  for (const Tensor<Real>* t : inputs) any = any || t->requires_grad();
  if (!any) return node;
  node->requires_grad = true;
  for (const Tensor<Real>* t : inputs) node->inputs.push_back(t->node());
  node->backward = std::move(backward);
  return node;
}

void require_rank2(const Shape& shape, const char* op) {
  if (shape.size() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got shape " + shape_string(shape));
  }
}

// Eight independent accumulators; the summation order is fixed, so results
// are reproducible while still letting the compiler vectorize.
template <typename Real>
Real dot(const Real* a, const Real* b, std::size_t n) {
  Real acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (std::size_t l = 0; l < 8; ++l) acc[l] += a[i + l] * b[i + l];
  }
  Real tail = 0;
  for (; i < n; ++i) tail += a[i] * b[i];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

template <typename Real>
void axpy(Real alpha, const Real* x, Real* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

// c[m x n] += a[m x k] . b[k x n]
template <typename Real>
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const Real* a, const Real* b, Real* c) {
  for (std::size_t i = 0; i < m; ++i) {
    Real* crow = c + i * n;
    const Real* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) axpy(arow[p], b + p * n, crow, n);
  }
}

// c[m x k] += a[m x n] . b[k x n]^T
template <typename Real>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const Real* a, const Real* b, Real* c) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) c[i * k + p] += dot(a + i * n, b + p * n, n);
  }
}

// c[k x n] += a[m x k]^T . b[m x n]
template <typename Real>
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const Real* a, const Real* b, Real* c) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) axpy(a[i * k + p], b + i * n, c + p * n, n);
  }
}

}  // namespace

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "x" : "") << shape[i];
  out << ']';
  return out.str();
}

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

bool GradMode::enabled() { return g_grad_enabled; }
void GradMode::set_enabled(bool enabled) { g_grad_enabled = enabled; }

template <typename Real>
Tensor<Real> Tensor<Real>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), Real(0), requires_grad);
}

template <typename Real>
Tensor<Real> Tensor<Real>::full(Shape shape, Real value, bool requires_grad) {
  std::vector<Real> data(shape_numel(shape), value);
  return from_data(std::move(shape), std::move(data), requires_grad);
}

template <typename Real>
Tensor<Real> Tensor<Real>::from_data(Shape shape, std::vector<Real> data, bool requires_grad) {
  for (std::size_t d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_string(shape));
  }
  if (data.size() != shape_numel(shape)) {
    throw DimensionError("data length " + std::to_string(data.size()) + " does not match shape " +
                         shape_string(shape));
  }
  auto node = make_node<Real>(std::move(shape), std::move(data));
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

template <typename Real>
Tensor<Real> Tensor<Real>::scalar(Real value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

template <typename Real>
Real Tensor<Real>::at(std::size_t row, std::size_t col) const {
  require_rank2(shape(), "at");
  return node_->data.at(row * shape()[1] + col);
}

template <typename Real>
Real Tensor<Real>::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_string(shape()));
  return node_->data[0];
}

template <typename Real>
void Tensor<Real>::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), Real(0));
}

template <typename Real>
void Tensor<Real>::backward() const {
  if (numel() != 1) {
    throw ContractError("backward() requires a scalar loss, got shape " + shape_string(shape()));
  }
  if (!requires_grad()) {
    throw ContractError("backward() on a tensor that does not require grad");
  }
  std::vector<detail::Node<Real>*> reachable;
  std::vector<detail::Node<Real>*> stack{node_.get()};
  std::unordered_set<const detail::Node<Real>*> seen;
  while (!stack.empty()) {
    detail::Node<Real>* n = stack.back();
    stack.pop_back();
    if (!seen.insert(n).second) continue;
    reachable.push_back(n);
    for (const auto& in : n->inputs) {
      if (in->requires_grad) stack.push_back(in.get());
    }
  }
  std::sort(reachable.begin(), reachable.end(),
            [](const auto* a, const auto* b) { return a->order > b->order; });
  for (auto* n : reachable) {
    if (n->backward) {
      n->grad.assign(n->data.size(), Real(0));
    } else if (n->grad.size() != n->data.size()) {
      n->grad.assign(n->data.size(), Real(0));
    }
  }
  node_->grad[0] += Real(1);
  for (auto* n : reachable) {
    if (n->backward) n->backward(*n);
  }
}

template <typename Real>
Tensor<Real> Tensor<Real>::detach() const {
  return from_data(shape(), node_->data, false);
}

template <typename Real>
bool Tensor<Real>::all_finite() const {
  return std::all_of(node_->data.begin(), node_->data.end(),
                     [](Real v) { return std::isfinite(v); });
}

AttentionMask AttentionMask::full(std::size_t rows, std::size_t cols) {
  return AttentionMask{rows, cols, std::vector<std::uint8_t>(rows * cols, 1)};
}

AttentionMask AttentionMask::causal(std::size_t n) {
  AttentionMask mask{n, n, std::vector<std::uint8_t>(n * n, 0)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) mask.allowed[i * n + j] = 1;
  }
  return mask;
}

AttentionMask AttentionMask::block_diagonal(std::span<const std::size_t> query_lengths,
                                            std::span<const std::size_t> key_lengths,
                                            bool causal) {
  if (query_lengths.size() != key_lengths.size()) {
    throw DimensionError("block_diagonal: query and key block counts differ");
  }
  const std::size_t rows = std::accumulate(query_lengths.begin(), query_lengths.end(), std::size_t{0});
  const std::size_t cols = std::accumulate(key_lengths.begin(), key_lengths.end(), std::size_t{0});
  AttentionMask mask{rows, cols, std::vector<std::uint8_t>(rows * cols, 0)};
  std::size_t row0 = 0, col0 = 0;
  for (std::size_t b = 0; b < query_lengths.size(); ++b) {
    if (causal && query_lengths[b] != key_lengths[b]) {
      throw DimensionError("block_diagonal: causal blocks must be square");
    }
    for (std::size_t i = 0; i < query_lengths[b]; ++i) {
      const std::size_t limit = causal ? i + 1 : key_lengths[b];
      for (std::size_t j = 0; j < limit; ++j) mask.allowed[(row0 + i) * cols + col0 + j] = 1;
    }
    row0 += query_lengths[b];
    col0 += key_lengths[b];
  }
  return mask;
}

template <typename Real>
Tensor<Real> matmul(const Tensor<Real>& a, const Tensor<Real>& b) {
  require_rank2(a.shape(), "matmul");
  require_rank2(b.shape(), "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions disagree for " + shape_string(a.shape()) +
                         " and " + shape_string(b.shape()));
  }
  std::vector<Real> out(m * n, Real(0));
  gemm_nn(m, k, n, a.data().data(), b.data().data(), out.data());
  auto backward = [m, k, n](detail::Node<Real>& self) {
    auto& an = *self.inputs[0];
    auto& bn = *self.inputs[1];
    if (an.requires_grad) gemm_nt(m, n, k, self.grad.data(), bn.data.data(), an.grad.data());
    if (bn.requires_grad) gemm_tn(m, k, n, an.data.data(), self.grad.data(), bn.grad.data());
  };
  return Tensor<Real>(make_result<Real>({m, n}, std::move(out), {&a, &b}, backward));
}

template <typename Real>
Tensor<Real> transpose(const Tensor<Real>& a) {
  require_rank2(a.shape(), "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<Real> out(m * n);
  const auto in = a.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = in[i * n + j];
  }
  auto backward = [m, n](detail::Node<Real>& self) {
    auto& g = self.inputs[0]->grad;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[j * m + i];
    }
  };
  return Tensor<Real>(make_result<Real>({n, m}, std::move(out), {&a}, backward));
}

template <typename Real>
Tensor<Real> add(const Tensor<Real>& a, const Tensor<Real>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("add: shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()) + " differ");
  }
  std::vector<Real> out(a.data().begin(), a.data().end());
  const auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bd[i];
  auto backward = [](detail::Node<Real>& self) {
    for (auto& in : self.inputs) {
      if (!in->requires_grad) continue;
      for (std::size_t i = 0; i < self.grad.size(); ++i) in->grad[i] += self.grad[i];
    }
  };
  return Tensor<Real>(make_result<Real>(a.shape(), std::move(out), {&a, &b}, backward));
}

template <typename Real>
Tensor<Real> mul(const Tensor<Real>& a, const Tensor<Real>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("mul: shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()) + " differ");
  }
  std::vector<Real> out(a.numel());
  const auto ad = a.data();
  const auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * bd[i];
  auto backward = [](detail::Node<Real>& self) {
    auto& an = *self.inputs[0];
    auto& bn = *self.inputs[1];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (an.requires_grad) an.grad[i] += self.grad[i] * bn.data[i];
      if (bn.requires_grad) bn.grad[i] += self.grad[i] * an.data[i];
    }
  };
  return Tensor<Real>(make_result<Real>(a.shape(), std::move(out), {&a, &b}, backward));
}

template <typename Real>
Tensor<Real> scale(const Tensor<Real>& a, Real factor) {
  std::vector<Real> out(a.data().begin(), a.data().end());
  for (Real& v : out) v *= factor;
  auto backward = [factor](detail::Node<Real>& self) {
    auto& g = self.inputs[0]->grad;
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += factor * self.grad[i];
  };
  return Tensor<Real>(make_result<Real>(a.shape(), std::move(out), {&a}, backward));
}

template <typename Real>
Tensor<Real> add_bias(const Tensor<Real>& x, const Tensor<Real>& bias) {
  require_rank2(x.shape(), "add_bias");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (bias.numel() != n || bias.rank() != 1) {
    throw DimensionError("add_bias: bias " + shape_string(bias.shape()) + " does not match " +
                         shape_string(x.shape()));
  }
  std::vector<Real> out(x.data().begin(), x.data().end());
  const auto bd = bias.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += bd[j];
  }
  auto backward = [m, n](detail::Node<Real>& self) {
    auto& xn = *self.inputs[0];
    auto& bn = *self.inputs[1];
    if (xn.requires_grad) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) xn.grad[i] += self.grad[i];
    }
    if (bn.requires_grad) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) bn.grad[j] += self.grad[i * n + j];
      }
    }
  };
  return Tensor<Real>(make_result<Real>(x.shape(), std::move(out), {&x, &bias}, backward));
}

template <typename Real>
Tensor<Real> relu(const Tensor<Real>& x) {
  std::vector<Real> out(x.data().begin(), x.data().end());
  for (Real& v : out) v = v > Real(0) ? v : Real(0);
  auto backward = [](detail::Node<Real>& self) {
    auto& in = *self.inputs[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (in.data[i] > Real(0)) in.grad[i] += self.grad[i];
    }
  };
  return Tensor<Real>(make_result<Real>(x.shape(), std::move(out), {&x}, backward));
}

template <typename Real>
Tensor<Real> gelu(const Tensor<Real>& x) {
  constexpr Real kAlpha = Real(0.7978845608028654);  // sqrt(2 / pi)
  constexpr Real kBeta = Real(0.044715);
  const auto in = x.data();
  std::vector<Real> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    const Real v = in[i];
    out[i] = Real(0.5) * v * (Real(1) + std::tanh(kAlpha * (v + kBeta * v * v * v)));
  }
  auto backward = [](detail::Node<Real>& self) {
    auto& xn = *self.inputs[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const Real v = xn.data[i];
      const Real t = std::tanh(kAlpha * (v + kBeta * v * v * v));
      const Real dt = (Real(1) - t * t) * kAlpha * (Real(1) + Real(3) * kBeta * v * v);
      xn.grad[i] += self.grad[i] * (Real(0.5) * (Real(1) + t) + Real(0.5) * v * dt);
    }
  };
  return Tensor<Real>(make_result<Real>(x.shape(), std::move(out), {&x}, backward));
}

template <typename Real>
Tensor<Real> softmax(const Tensor<Real>& x, std::size_t axis) {
  const Shape& shape = x.shape();
  if (axis >= shape.size()) {
    throw DimensionError("softmax: axis " + std::to_string(axis) + " invalid for shape " +
                         shape_string(shape));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t len = shape[axis];
  const auto in = x.data();
  std::vector<Real> out(in.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t c = 0; c < inner; ++c) {
      const std::size_t base = o * len * inner + c;
      Real mx = -std::numeric_limits<Real>::infinity();
      for (std::size_t j = 0; j < len; ++j) mx = std::max(mx, in[base + j * inner]);
      Real total = 0;
      for (std::size_t j = 0; j < len; ++j) {
        const Real e = std::exp(in[base + j * inner] - mx);
        out[base + j * inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < len; ++j) out[base + j * inner] /= total;
    }
  }
  auto backward = [outer, inner, len](detail::Node<Real>& self) {
    auto& g = self.inputs[0]->grad;
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t c = 0; c < inner; ++c) {
        const std::size_t base = o * len * inner + c;
        Real inner_product = 0;
        for (std::size_t j = 0; j < len; ++j) {
          inner_product += self.grad[base + j * inner] * self.data[base + j * inner];
        }
        for (std::size_t j = 0; j < len; ++j) {
          const std::size_t idx = base + j * inner;
          g[idx] += self.data[idx] * (self.grad[idx] - inner_product);
        }
      }
    }
  };
  return Tensor<Real>(make_result<Real>(shape, std::move(out), {&x}, backward));
}

template <typename Real>
Tensor<Real> layer_norm(const Tensor<Real>& x, const Tensor<Real>& gain, const Tensor<Real>& bias,
                        Real eps) {
  if (x.rank() == 0) throw DimensionError("layer_norm: scalar input");
  if (!(eps > Real(0))) throw ContractError("layer_norm: eps must be positive");
  const std::size_t n = x.shape().back();
  if (gain.numel() != n || bias.numel() != n) {
    throw DimensionError("layer_norm: gain/bias " + shape_string(gain.shape()) + "/" +
                         shape_string(bias.shape()) + " do not match " + shape_string(x.shape()));
  }
  const std::size_t rows = x.numel() / n;
  const auto in = x.data();
  const auto gd = gain.data();
  const auto bd = bias.data();
  std::vector<Real> out(in.size());
  auto normalized = std::make_shared<std::vector<Real>>(in.size());
  auto inv_std = std::make_shared<std::vector<Real>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const Real* row = in.data() + r * n;
    Real mu = 0;
    for (std::size_t j = 0; j < n; ++j) mu += row[j];
    mu /= Real(n);
    Real var = 0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= Real(n);
    const Real rstd = Real(1) / std::sqrt(var + eps);
    (*inv_std)[r] = rstd;
    for (std::size_t j = 0; j < n; ++j) {
      const Real xh = (row[j] - mu) * rstd;
      (*normalized)[r * n + j] = xh;
      out[r * n + j] = xh * gd[j] + bd[j];
    }
  }
  auto backward = [rows, n, normalized, inv_std](detail::Node<Real>& self) {
    auto& xn = *self.inputs[0];
    auto& gn = *self.inputs[1];
    auto& bn = *self.inputs[2];
    std::vector<Real> dxhat(n);
    for (std::size_t r = 0; r < rows; ++r) {
      const Real* dy = self.grad.data() + r * n;
      const Real* xh = normalized->data() + r * n;
      if (gn.requires_grad) {
        for (std::size_t j = 0; j < n; ++j) gn.grad[j] += dy[j] * xh[j];
      }
      if (bn.requires_grad) {
        for (std::size_t j = 0; j < n; ++j) bn.grad[j] += dy[j];
      }
      if (!xn.requires_grad) continue;
      Real mean_d = 0, mean_dx = 0;
      for (std::size_t j = 0; j < n; ++j) {
        dxhat[j] = dy[j] * gn.data[j];
        mean_d += dxhat[j];
        mean_dx += dxhat[j] * xh[j];
      }
      mean_d /= Real(n);
      mean_dx /= Real(n);
      const Real rstd = (*inv_std)[r];
      for (std::size_t j = 0; j < n; ++j) {
        xn.grad[r * n + j] += rstd * (dxhat[j] - mean_d - xh[j] * mean_dx);
      }
    }
  };
  return Tensor<Real>(make_result<Real>(x.shape(), std::move(out), {&x, &gain, &bias}, backward));
}

template <typename Real>
Tensor<Real> embedding(const Tensor<Real>& table, std::span<const TokenId> ids) {
  require_rank2(table.shape(), "embedding");
  if (ids.empty()) throw ContractError("embedding: empty id sequence");
  const std::size_t vocab = table.dim(0), width = table.dim(1);
  for (TokenId id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      throw UnknownIdError("token id " + std::to_string(id) + " outside vocabulary of size " +
                           std::to_string(vocab));
    }
  }
  const auto td = table.data();
  std::vector<Real> out(ids.size() * width);
  for (std::size_t t = 0; t < ids.size(); ++t) {
    std::copy_n(td.begin() + static_cast<std::size_t>(ids[t]) * width, width, out.begin() + t * width);
  }
  auto backward = [width, idv = std::vector<TokenId>(ids.begin(), ids.end())](detail::Node<Real>& self) {
    auto& g = self.inputs[0]->grad;
    for (std::size_t t = 0; t < idv.size(); ++t) {
      axpy(Real(1), self.grad.data() + t * width, g.data() + static_cast<std::size_t>(idv[t]) * width,
           width);
    }
  };
  return Tensor<Real>(make_result<Real>({ids.size(), width}, std::move(out), {&table}, backward));
}

template <typename Real>
Tensor<Real> cross_entropy(const Tensor<Real>& logits, std::span<const TokenId> targets,
                           TokenId ignore_id) {
  require_rank2(logits.shape(), "cross_entropy");
  const std::size_t rows = logits.dim(0), vocab = logits.dim(1);
  if (targets.size() != rows) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) +
                         " targets for logits " + shape_string(logits.shape()));
  }
  std::size_t counted = 0;
  for (TokenId t : targets) {
    if (t == ignore_id) continue;
    if (t < 0 || static_cast<std::size_t>(t) >= vocab) {
      throw UnknownIdError("cross_entropy: target " + std::to_string(t) + " outside [0, " +
                           std::to_string(vocab) + ")");
    }
    ++counted;
  }
  if (counted == 0) throw ContractError("cross_entropy: every position is ignored (degenerate batch)");
  const auto ld = logits.data();
  auto probs = std::make_shared<std::vector<Real>>(rows * vocab, Real(0));
  Real total = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] == ignore_id) continue;
    const Real* row = ld.data() + r * vocab;
    const Real mx = *std::max_element(row, row + vocab);
    Real z = 0;
    for (std::size_t j = 0; j < vocab; ++j) {
      const Real e = std::exp(row[j] - mx);
      (*probs)[r * vocab + j] = e;
      z += e;
    }
    for (std::size_t j = 0; j < vocab; ++j) (*probs)[r * vocab + j] /= z;
    total += (std::log(z) + mx) - row[targets[r]];
  }
  const Real loss = total / Real(counted);
  if (!std::isfinite(loss)) throw NumericError("cross_entropy: non-finite loss");
  auto backward = [rows, vocab, counted, probs,
                   tv = std::vector<TokenId>(targets.begin(), targets.end()),
                   ignore_id](detail::Node<Real>& self) {
    auto& g = self.inputs[0]->grad;
    const Real coef = self.grad[0] / Real(counted);
    for (std::size_t r = 0; r < rows; ++r) {
      if (tv[r] == ignore_id) continue;
      for (std::size_t j = 0; j < vocab; ++j) g[r * vocab + j] += coef * (*probs)[r * vocab + j];
      g[r * vocab + static_cast<std::size_t>(tv[r])] -= coef;
    }
  };
  return Tensor<Real>(make_result<Real>({1}, {loss}, {&logits}, backward));
}

template <typename Real>
Tensor<Real> sum(const Tensor<Real>& x) {
  Real total = 0;
  for (Real v : x.data()) total += v;
  auto backward = [](detail::Node<Real>& self) {
    for (Real& g : self.inputs[0]->grad) g += self.grad[0];
  };
  return Tensor<Real>(make_result<Real>({1}, {total}, {&x}, backward));
}

template <typename Real>
Tensor<Real> mean(const Tensor<Real>& x) {
  return scale(sum(x), Real(1) / Real(x.numel()));
}

template <typename Real>
Tensor<Real> dropout(const Tensor<Real>& x, Real p, std::mt19937_64& rng) {
  if (p < Real(0) || p >= Real(1)) throw ContractError("dropout: p must lie in [0, 1)");
  if (p == Real(0)) return x;
  const Real keep_scale = Real(1) / (Real(1) - p);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  auto mask = std::make_shared<std::vector<Real>>(x.numel());
  std::vector<Real> out(x.numel());
  const auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    (*mask)[i] = uniform(rng) >= static_cast<double>(p) ? keep_scale : Real(0);
    out[i] = in[i] * (*mask)[i];
  }
  auto backward = [mask](detail::Node<Real>& self) {
    auto& g = self.inputs[0]->grad;
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * (*mask)[i];
  };
  return Tensor<Real>(make_result<Real>(x.shape(), std::move(out), {&x}, backward));
}

namespace {

template <typename Real>
void check_attention_shapes(const Tensor<Real>& q, const Tensor<Real>& k, const Tensor<Real>* v,
                            std::size_t n_heads, const AttentionMask* mask) {
  require_rank2(q.shape(), "attention");
  require_rank2(k.shape(), "attention");
  if (q.dim(1) != k.dim(1) || (v && v->shape() != k.shape())) {
    throw DimensionError("attention: q " + shape_string(q.shape()) + ", k " +
                         shape_string(k.shape()) + (v ? ", v " + shape_string(v->shape()) : "") +
                         " are incompatible");
  }
  if (n_heads == 0 || q.dim(1) % n_heads != 0) {
    throw DimensionError("attention: width " + std::to_string(q.dim(1)) +
                         " is not divisible by " + std::to_string(n_heads) + " heads");
  }
  if (mask && (mask->rows != q.dim(0) || mask->cols != k.dim(0))) {
    throw DimensionError("attention: mask " + std::to_string(mask->rows) + "x" +
                         std::to_string(mask->cols) + " does not match scores " +
                         std::to_string(q.dim(0)) + "x" + std::to_string(k.dim(0)));
  }
}

// Fills probs[h][i][j]. Masked entries and fully masked rows are zero.
template <typename Real>
void attention_probs(const Tensor<Real>& q, const Tensor<Real>& k, std::size_t n_heads,
                     const AttentionMask* mask, std::vector<Real>& probs) {
  const std::size_t tq = q.dim(0), tk = k.dim(0), width = q.dim(1);
  const std::size_t dh = width / n_heads;
  const Real inv_sqrt = Real(1) / std::sqrt(Real(dh));
  const Real* qd = q.data().data();
  const Real* kd = k.data().data();
  probs.assign(n_heads * tq * tk, Real(0));
  for (std::size_t h = 0; h < n_heads; ++h) {
    for (std::size_t i = 0; i < tq; ++i) {
      Real* row = probs.data() + (h * tq + i) * tk;
      Real mx = -std::numeric_limits<Real>::infinity();
      for (std::size_t j = 0; j < tk; ++j) {
        if (mask && !mask->at(i, j)) continue;
        row[j] = dot(qd + i * width + h * dh, kd + j * width + h * dh, dh) * inv_sqrt;
        mx = std::max(mx, row[j]);
      }
      if (mx == -std::numeric_limits<Real>::infinity()) continue;
      Real total = 0;
      for (std::size_t j = 0; j < tk; ++j) {
        if (mask && !mask->at(i, j)) continue;
        row[j] = std::exp(row[j] - mx);
        total += row[j];
      }
      for (std::size_t j = 0; j < tk; ++j) row[j] /= total;
    }
  }
}

}  // namespace

template <typename Real>
Tensor<Real> attention(const Tensor<Real>& q, const Tensor<Real>& k, const Tensor<Real>& v,
                       std::size_t n_heads, const AttentionMask* mask) {
  check_attention_shapes(q, k, &v, n_heads, mask);
  const std::size_t tq = q.dim(0), tk = k.dim(0), width = q.dim(1);
  const std::size_t dh = width / n_heads;
  auto probs = std::make_shared<std::vector<Real>>();
  attention_probs(q, k, n_heads, mask, *probs);
  std::vector<Real> out(tq * width, Real(0));
  const Real* vd = v.data().data();
  for (std::size_t h = 0; h < n_heads; ++h) {
    for (std::size_t i = 0; i < tq; ++i) {
      const Real* p = probs->data() + (h * tq + i) * tk;
      Real* o = out.data() + i * width + h * dh;
      for (std::size_t j = 0; j < tk; ++j) {
        if (p[j] != Real(0)) axpy(p[j], vd + j * width + h * dh, o, dh);
      }
    }
  }
  auto backward = [tq, tk, width, dh, n_heads, probs](detail::Node<Real>& self) {
    auto& qn = *self.inputs[0];
    auto& kn = *self.inputs[1];
    auto& vn = *self.inputs[2];
    const Real inv_sqrt = Real(1) / std::sqrt(Real(dh));
    std::vector<Real> dp(tk);
    for (std::size_t h = 0; h < n_heads; ++h) {
      for (std::size_t i = 0; i < tq; ++i) {
        const Real* p = probs->data() + (h * tq + i) * tk;
        const Real* dout = self.grad.data() + i * width + h * dh;
        Real weighted = 0;
        for (std::size_t j = 0; j < tk; ++j) {
          if (p[j] == Real(0)) {
            dp[j] = 0;
            continue;
          }
          dp[j] = dot(dout, vn.data.data() + j * width + h * dh, dh);
          weighted += p[j] * dp[j];
          if (vn.requires_grad) axpy(p[j], dout, vn.grad.data() + j * width + h * dh, dh);
        }
        for (std::size_t j = 0; j < tk; ++j) {
          if (p[j] == Real(0)) continue;
          const Real ds = p[j] * (dp[j] - weighted) * inv_sqrt;
          if (qn.requires_grad) {
            axpy(ds, kn.data.data() + j * width + h * dh, qn.grad.data() + i * width + h * dh, dh);
          }
          if (kn.requires_grad) {
            axpy(ds, qn.data.data() + i * width + h * dh, kn.grad.data() + j * width + h * dh, dh);
          }
        }
      }
    }
  };
  return Tensor<Real>(make_result<Real>({tq, width}, std::move(out), {&q, &k, &v}, backward));
}

template <typename Real>
std::vector<Real> attention_weights(const Tensor<Real>& q, const Tensor<Real>& k,
                                    std::size_t n_heads, const AttentionMask* mask) {
  check_attention_shapes<Real>(q, k, nullptr, n_heads, mask);
  std::vector<Real> probs;
  attention_probs(q, k, n_heads, mask, probs);
  return probs;
}

#define DGT_INSTANTIATE(Real)                                                                     \
  template class Tensor<Real>;                                                                    \
  template Tensor<Real> matmul(const Tensor<Real>&, const Tensor<Real>&);                         \
  template Tensor<Real> transpose(const Tensor<Real>&);                                           \
  template Tensor<Real> add(const Tensor<Real>&, const Tensor<Real>&);                            \
  template Tensor<Real> mul(const Tensor<Real>&, const Tensor<Real>&);                            \
  template Tensor<Real> scale(const Tensor<Real>&, Real);                                         \
  template Tensor<Real> add_bias(const Tensor<Real>&, const Tensor<Real>&);                       \
  template Tensor<Real> relu(const Tensor<Real>&);                                                \
  template Tensor<Real> gelu(const Tensor<Real>&);                                                \
  template Tensor<Real> softmax(const Tensor<Real>&, std::size_t);                                \
  template Tensor<Real> layer_norm(const Tensor<Real>&, const Tensor<Real>&, const Tensor<Real>&, \
                                   Real);                                                         \
  template Tensor<Real> embedding(const Tensor<Real>&, std::span<const TokenId>);                 \
  template Tensor<Real> cross_entropy(const Tensor<Real>&, std::span<const TokenId>, TokenId);    \
  template Tensor<Real> sum(const Tensor<Real>&);                                                 \
  template Tensor<Real> mean(const Tensor<Real>&);                                                \
  template Tensor<Real> dropout(const Tensor<Real>&, Real, std::mt19937_64&);                     \
  template Tensor<Real> attention(const Tensor<Real>&, const Tensor<Real>&, const Tensor<Real>&,  \
                                  std::size_t, const AttentionMask*);                             \
  template std::vector<Real> attention_weights(const Tensor<Real>&, const Tensor<Real>&,          \
                                               std::size_t, const AttentionMask*);

DGT_INSTANTIATE(float)
DGT_INSTANTIATE(double)

#undef DGT_INSTANTIATE

}  // namespace dgt
