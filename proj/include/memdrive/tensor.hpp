// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The memdrive Authors.
//
// Dense rank<=3 double tensors with a dynamic reverse-mode tape.
//
// Every op that sees an input with requires_grad records a node holding its
// parents and a backward closure. backward(loss) walks the reachable graph in
// reverse topological order. Leaf gradients are OVERWRITTEN on each backward
// call: the reachable leaves are zeroed first, so there is no cross-call
// accumulation and no separate zero-grad step is needed.

#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace memdrive {

class Shape {
 public:
  static constexpr std::size_t kMaxRank = 3;

  Shape() = default;  // scalar
  Shape(std::initializer_list<std::size_t> dims);

  std::size_t rank() const noexcept { return rank_; }
  std::size_t operator[](std::size_t i) const { return dims_.at(i); }
  std::size_t numel() const noexcept;
  std::string str() const;

  friend bool operator==(const Shape& a, const Shape& b) noexcept {
    return a.rank_ == b.rank_ && a.dims_ == b.dims_;
  }

 private:
  std::array<std::size_t, kMaxRank> dims_{};
  std::size_t rank_ = 0;
};

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until backward reaches the node
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  std::vector<double>& ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double v, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);
  /// 2-D tensor from nested rows; all rows must have equal length.
  static Tensor matrix(const std::vector<std::vector<double>>& rows, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.rank(); }
  std::size_t numel() const { return node_->value.size(); }
  std::size_t rows() const;  // dim 0 of a rank-2 tensor
  std::size_t cols() const;  // dim 1 of a rank-2 tensor

  std::span<const double> data() const { return node_->value; }
  /// Direct write access. Only meaningful for leaves (parameters, inputs).
  std::span<double> mutable_data() { return node_->value; }
  double item() const;
  double at(std::size_t r, std::size_t c) const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return node_->ensure_grad(); }
  void clear_grad() { node_->grad.clear(); }

  /// A leaf copy of the values with no history.
  Tensor detach() const;
  /// Copies this tensor's values into `dst` (shapes must match).
  void copy_values_to(Tensor& dst) const;

  detail::Node* node() const noexcept { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const noexcept { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

void backward(const Tensor& loss);

/// Disables tape recording in the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_mode_enabled() noexcept;
bool all_finite(const Tensor& t);

// ---- ops -------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // Hadamard
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

/// x (n x d) + b broadcast over rows; b has d elements.
Tensor add_rowvec(const Tensor& x, const Tensor& b);
/// x (n x d) * g broadcast over rows; g has d elements.
Tensor mul_rowvec(const Tensor& x, const Tensor& g);

Tensor softmax_rows(const Tensor& a);
Tensor log_softmax_rows(const Tensor& a);

struct RowStats {
  Tensor mean;    // n x 1
  Tensor stddev;  // n x 1, population
};
/// Mean and population standard deviation over the last dimension.
RowStats row_stats(const Tensor& r);
/// (r - mean) / (stddev + eps) per row.
Tensor standardize_rows(const Tensor& r, double eps);

Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count);
/// out[i] = x[indices[i]]; gradient scatter-adds. Embedding lookup is this.
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> indices);
Tensor reshape(const Tensor& x, Shape shape);

/// Mean negative log-likelihood of `targets` under row-wise softmax(logits).
/// Positions whose target equals `ignore_index` contribute nothing.
Tensor nll_loss(const Tensor& logits, std::span<const std::size_t> targets,
                std::size_t ignore_index);

/// One attention block: query rows [q_begin, q_begin+q_len) attend to key
/// rows [k_begin, k_begin+k_len).
struct AttentionSegment {
  std::size_t q_begin = 0;
  std::size_t q_len = 0;
  std::size_t k_begin = 0;
  std::size_t k_len = 0;
};

/// Row-major probability blocks, index [segment * heads + head], each q_len x k_len.
struct AttentionMaps {
  std::size_t heads = 0;
  std::vector<AttentionSegment> segments;
  std::vector<std::vector<double>> blocks;
};

/// Scaled dot-product attention over already-projected q, k, v with `heads`
/// column groups. With `causal`, query i of a segment sees key j iff
/// j <= i + (k_len - q_len). Returns the concatenated head outputs.
Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            std::span<const AttentionSegment> segments,
                            std::size_t heads, bool causal,
                            AttentionMaps* maps = nullptr);

}  // namespace memdrive
