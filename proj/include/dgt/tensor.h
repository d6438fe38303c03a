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

#ifndef DGT_TENSOR_H_
#define DGT_TENSOR_H_

// Dense row-major tensors with tape-based reverse-mode differentiation.
//
// Every op that consumes a tensor with requires_grad() (while gradient
// recording is enabled) records its inputs and a backward rule on the output
// node. Nodes carry a global creation counter, so sorting the nodes reachable
// from a loss by descending counter replays the tape in reverse topological
// order. Only bias-add and row-wise ops broadcast; every other shape mismatch
// throws DimensionError.
//
// Tensor<float> is the training type. Tensor<double> exists so that finite
// difference checks have enough precision to be meaningful.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace dgt {

using Shape = std::vector<std::size_t>;
using TokenId = std::int32_t;

std::string shape_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

namespace detail {

template <typename Real>
struct Node {
  Shape shape;
  std::vector<Real> data;
  std::vector<Real> grad;
  bool requires_grad = false;
  std::uint64_t order = 0;
  std::vector<std::shared_ptr<Node>> inputs;
  // Propagates this node's grad into the grads of `inputs`.
  std::function<void(Node&)> backward;
};

}  // namespace detail

// Process-wide switch for recording. Decoding and evaluation run under a
// NoGradGuard so that no graph is retained.
class GradMode {
 public:
  static bool enabled();
  static void set_enabled(bool enabled);
};

class NoGradGuard {
 public:
  NoGradGuard() : previous_(GradMode::enabled()) { GradMode::set_enabled(false); }
  ~NoGradGuard() { GradMode::set_enabled(previous_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <typename Real>
class Tensor {
 public:
  using NodePtr = std::shared_ptr<detail::Node<Real>>;

  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, Real value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<Real> data, bool requires_grad = false);
  static Tensor scalar(Real value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t numel() const { return node_->data.size(); }

  std::span<const Real> data() const { return node_->data; }
  // Mutable access is for parameter updates and initialization of leaves.
  std::span<Real> mutable_data() { return node_->data; }
  Real at(std::size_t i) const { return node_->data.at(i); }
  Real at(std::size_t row, std::size_t col) const;
  Real item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool value) { node_->requires_grad = value; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const Real> grad() const { return node_->grad; }
  std::span<Real> mutable_grad() { return node_->grad; }
  void zero_grad();

  // Populates grad on every requires_grad ancestor. Leaf grads accumulate
  // across calls; intermediate grads are recomputed each call.
  void backward() const;

  // Leaf copy of the data with no history.
  Tensor detach() const;

  bool all_finite() const;

  const NodePtr& node() const { return node_; }
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

 private:
  NodePtr node_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

// Dense attention mask; allowed(i, j) == true means query i may attend key j.
struct AttentionMask {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> allowed;

  bool at(std::size_t i, std::size_t j) const { return allowed[i * cols + j] != 0; }

  static AttentionMask full(std::size_t rows, std::size_t cols);
  static AttentionMask causal(std::size_t n);
  // Packs several independent sequences into one block-diagonal mask. Query
  // block b sees only key block b; with `causal`, query i of a block sees key
  // positions <= i of the same block (blocks must then be square).
  static AttentionMask block_diagonal(std::span<const std::size_t> query_lengths,
                                      std::span<const std::size_t> key_lengths,
                                      bool causal);
};

// c = a . b for a[m x k], b[k x n].
template <typename Real>
Tensor<Real> matmul(const Tensor<Real>& a, const Tensor<Real>& b);

template <typename Real>
Tensor<Real> transpose(const Tensor<Real>& a);

template <typename Real>
Tensor<Real> add(const Tensor<Real>& a, const Tensor<Real>& b);

template <typename Real>
Tensor<Real> mul(const Tensor<Real>& a, const Tensor<Real>& b);

template <typename Real>
Tensor<Real> scale(const Tensor<Real>& a, Real factor);

// x[m x n] + bias[n] broadcast over rows.
template <typename Real>
Tensor<Real> add_bias(const Tensor<Real>& x, const Tensor<Real>& bias);

template <typename Real>
Tensor<Real> relu(const Tensor<Real>& x);

// tanh approximation.
template <typename Real>
Tensor<Real> gelu(const Tensor<Real>& x);

template <typename Real>
Tensor<Real> softmax(const Tensor<Real>& x, std::size_t axis);

// Normalizes over the last axis with population variance, then applies
// gain and bias (both shaped [last dim]).
template <typename Real>
Tensor<Real> layer_norm(const Tensor<Real>& x, const Tensor<Real>& gain,
                        const Tensor<Real>& bias, Real eps);

// Gathers rows of table[V x d]; throws UnknownIdError for ids outside [0, V).
template <typename Real>
Tensor<Real> embedding(const Tensor<Real>& table, std::span<const TokenId> ids);

// Mean negative log-likelihood over positions whose target != ignore_id.
template <typename Real>
Tensor<Real> cross_entropy(const Tensor<Real>& logits, std::span<const TokenId> targets,
                           TokenId ignore_id);

template <typename Real>
Tensor<Real> sum(const Tensor<Real>& x);

template <typename Real>
Tensor<Real> mean(const Tensor<Real>& x);

// Inverted dropout. Identity when p == 0.
template <typename Real>
Tensor<Real> dropout(const Tensor<Real>& x, Real p, std::mt19937_64& rng);

// Scaled dot-product attention split into n_heads column groups:
// per head softmax(Q K^T / sqrt(d_head) + mask) V, heads concatenated.
// Query rows whose mask row is entirely false produce zeros.
template <typename Real>
Tensor<Real> attention(const Tensor<Real>& q, const Tensor<Real>& k, const Tensor<Real>& v,
                       std::size_t n_heads, const AttentionMask* mask);

// Attention probabilities laid out [head][query][key], without recording.
template <typename Real>
std::vector<Real> attention_weights(const Tensor<Real>& q, const Tensor<Real>& k,
                                    std::size_t n_heads, const AttentionMask* mask);

}  // namespace dgt

#endif  // DGT_TENSOR_H_
