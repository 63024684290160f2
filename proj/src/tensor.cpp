// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The memdrive Authors.

#include "memdrive/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "memdrive/error.hpp"

namespace memdrive {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;
using Strided = Eigen::OuterStride<>;
using SMap = Eigen::Map<RowMat, 0, Strided>;
using CSMap = Eigen::Map<const RowMat, 0, Strided>;

thread_local bool g_grad_enabled = true;

using NodePtr = std::shared_ptr<detail::Node>;

bool needs_tape(std::initializer_list<const Tensor*> inputs) {
  if (!g_grad_enabled) return false;
  for (const Tensor* t : inputs)
    if (t->requires_grad()) return true;
  return false;
}

// Builds the output node. When any input requires grad, the node joins the
// tape with `inputs` as parents and `bw` as its backward closure.
Tensor make_result(Shape shape, std::vector<double> value,
                   std::initializer_list<const Tensor*> inputs,
                   std::function<void(detail::Node&)> bw) {
  auto n = std::make_shared<detail::Node>();
  n->shape = shape;
  n->value = std::move(value);
  if (needs_tape(inputs)) {
    n->requires_grad = true;
    for (const Tensor* t : inputs) n->parents.push_back(t->node_ptr());
    n->backward = std::move(bw);
  }
  return Tensor(std::move(n));
}

Tensor make_result_list(Shape shape, std::vector<double> value, std::span<const Tensor> inputs,
                        std::function<void(detail::Node&)> bw) {
  auto n = std::make_shared<detail::Node>();
  n->shape = shape;
  n->value = std::move(value);
  bool tape = false;
  if (g_grad_enabled)
    for (const Tensor& t : inputs) tape = tape || t.requires_grad();
  if (tape) {
    n->requires_grad = true;
    for (const Tensor& t : inputs) n->parents.push_back(t.node_ptr());
    n->backward = std::move(bw);
  }
  return Tensor(std::move(n));
}

// Parent gradient buffer, or nullptr when that parent does not want one.
std::vector<double>* pgrad(detail::Node& self, std::size_t i) {
  detail::Node& p = *self.parents[i];
  if (!p.requires_grad) return nullptr;
  return &p.ensure_grad();
}

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2)
    throw ShapeError(std::string(op) + ": expected a rank-2 tensor, got " + t.shape().str());
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!(a.shape() == b.shape()))
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " +
                     b.shape().str());
}

template <typename F, typename D>
Tensor unary(const Tensor& a, F f, D dfdx_from_xy) {
  std::vector<double> out(a.numel());
  auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x[i]);
  return make_result(a.shape(), std::move(out), {&a}, [dfdx_from_xy](detail::Node& self) {
    auto* ga = pgrad(self, 0);
    if (!ga) return;
    const auto& xv = self.parents[0]->value;
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      (*ga)[i] += self.grad[i] * dfdx_from_xy(xv[i], self.value[i]);
  });
}

}  // namespace

// ---- Shape ------------------------------------------------------------------

Shape::Shape(std::initializer_list<std::size_t> dims) {
  if (dims.size() > kMaxRank)
    throw ShapeError("rank " + std::to_string(dims.size()) + " exceeds the supported maximum of 3");
  rank_ = dims.size();
  std::copy(dims.begin(), dims.end(), dims_.begin());
}

std::size_t Shape::numel() const noexcept {
  std::size_t n = 1;
  for (std::size_t i = 0; i < rank_; ++i) n *= dims_[i];
  return n;
}

std::string Shape::str() const {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < rank_; ++i) os << (i ? ", " : "") << dims_[i];
  os << ')';
  return os.str();
}

// ---- Tensor -----------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(shape, 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
  return from(shape, std::vector<double>(shape.numel(), v), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape.numel() != values.size())
    throw ShapeError("Tensor::from: shape " + shape.str() + " holds " +
                     std::to_string(shape.numel()) + " values, got " +
                     std::to_string(values.size()));
  auto n = std::make_shared<detail::Node>();
  n->shape = shape;
  n->value = std::move(values);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(double v, bool requires_grad) { return from(Shape{}, {v}, requires_grad); }

Tensor Tensor::matrix(const std::vector<std::vector<double>>& rows, bool requires_grad) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows[0].size() : 0;
  std::vector<double> v;
  v.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("Tensor::matrix: ragged rows");
    v.insert(v.end(), row.begin(), row.end());
  }
  return from(Shape{r, c}, std::move(v), requires_grad);
}

std::size_t Tensor::rows() const {
  require_rank2(*this, "rows");
  return shape()[0];
}

std::size_t Tensor::cols() const {
  require_rank2(*this, "cols");
  return shape()[1];
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item: tensor of shape " + shape().str() + " is not a scalar");
  return node_->value[0];
}

double Tensor::at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }

Tensor Tensor::detach() const { return from(shape(), node_->value, false); }

void Tensor::copy_values_to(Tensor& dst) const {
  require_same_shape(*this, dst, "copy_values_to");
  std::copy(node_->value.begin(), node_->value.end(), dst.node_->value.begin());
}

// ---- tape -------------------------------------------------------------------

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_mode_enabled() noexcept { return g_grad_enabled; }

bool all_finite(const Tensor& t) {
  return std::all_of(t.data().begin(), t.data().end(), [](double v) { return std::isfinite(v); });
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1)
    throw ContractError("backward: loss must be a scalar tensor, got shape " +
                        (loss.defined() ? loss.shape().str() : std::string("<undefined>")));
  if (!loss.requires_grad()) throw ContractError("backward: loss does not depend on any parameter");

  // Iterative post-order DFS; the reverse of the post-order is topological.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(loss.node(), 0);
  seen.insert(loss.node());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      detail::Node* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  for (detail::Node* n : order) n->grad.assign(n->value.size(), 0.0);
  loss.node()->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->backward) n->backward(*n);
  }
  // Free interior buffers; leaves keep theirs.
  for (detail::Node* n : order)
    if (n->backward) n->grad.clear();
}

// ---- linear algebra -----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k)
    throw ShapeError("matmul: inner dimensions disagree, " + a.shape().str() + " x " +
                     b.shape().str());
  std::vector<double> out(m * n);
  MapMat(out.data(), m, n).noalias() = CMapMat(a.data().data(), m, k) * CMapMat(b.data().data(), k, n);
  return make_result(Shape{m, n}, std::move(out), {&a, &b}, [m, k, n](detail::Node& self) {
    CMapMat g(self.grad.data(), m, n);
    if (auto* ga = pgrad(self, 0))
      MapMat(ga->data(), m, k).noalias() += g * CMapMat(self.parents[1]->value.data(), k, n).transpose();
    if (auto* gb = pgrad(self, 1))
      MapMat(gb->data(), k, n).noalias() += CMapMat(self.parents[0]->value.data(), m, k).transpose() * g;
  });
}

Tensor transpose(const Tensor& a) {
  require_rank2(a, "transpose");
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m * n);
  MapMat(out.data(), n, m) = CMapMat(a.data().data(), m, n).transpose();
  return make_result(Shape{n, m}, std::move(out), {&a}, [m, n](detail::Node& self) {
    if (auto* ga = pgrad(self, 0))
      MapMat(ga->data(), m, n) += CMapMat(self.grad.data(), n, m).transpose();
  });
}

// ---- elementwise --------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return make_result(a.shape(), std::move(out), {&a, &b}, [](detail::Node& self) {
    for (std::size_t p = 0; p < 2; ++p)
      if (auto* g = pgrad(self, p))
        for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return make_result(a.shape(), std::move(out), {&a, &b}, [](detail::Node& self) {
    if (auto* g = pgrad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
    if (auto* g = pgrad(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] -= self.grad[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return make_result(a.shape(), std::move(out), {&a, &b}, [](detail::Node& self) {
    const auto& xv = self.parents[0]->value;
    const auto& yv = self.parents[1]->value;
    if (auto* g = pgrad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i] * yv[i];
    if (auto* g = pgrad(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i] * xv[i];
  });
}

Tensor scale(const Tensor& a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor tanh(const Tensor& a) {
  return unary(a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a,
      [](double x) {
        // Branches keep exp() from overflowing for large |x|.
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& a) {
  return unary(a, [](double x) { return x > 0 ? x : 0.0; },
               [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Tensor sum(const Tensor& a) {
  double s = 0;
  for (double v : a.data()) s += v;
  return make_result(Shape{}, {s}, {&a}, [](detail::Node& self) {
    if (auto* g = pgrad(self, 0))
      for (double& v : *g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) throw ShapeError("mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor add_rowvec(const Tensor& x, const Tensor& b) {
  require_rank2(x, "add_rowvec");
  const std::size_t n = x.rows(), d = x.cols();
  if (b.numel() != d)
    throw ShapeError("add_rowvec: vector of " + std::to_string(b.numel()) +
                     " elements cannot broadcast over " + x.shape().str());
  std::vector<double> out(n * d);
  auto xv = x.data(), bv = b.data();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) out[r * d + c] = xv[r * d + c] + bv[c];
  return make_result(x.shape(), std::move(out), {&x, &b}, [n, d](detail::Node& self) {
    if (auto* g = pgrad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
    if (auto* g = pgrad(self, 1))
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) (*g)[c] += self.grad[r * d + c];
  });
}

Tensor mul_rowvec(const Tensor& x, const Tensor& gvec) {
  require_rank2(x, "mul_rowvec");
  const std::size_t n = x.rows(), d = x.cols();
  if (gvec.numel() != d)
    throw ShapeError("mul_rowvec: vector of " + std::to_string(gvec.numel()) +
                     " elements cannot broadcast over " + x.shape().str());
  std::vector<double> out(n * d);
  auto xv = x.data(), gv = gvec.data();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) out[r * d + c] = gv[c] * xv[r * d + c];
  return make_result(x.shape(), std::move(out), {&x, &gvec}, [n, d](detail::Node& self) {
    const auto& xv = self.parents[0]->value;
    const auto& gv = self.parents[1]->value;
    if (auto* g = pgrad(self, 0))
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) (*g)[r * d + c] += self.grad[r * d + c] * gv[c];
    if (auto* g = pgrad(self, 1))
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) (*g)[c] += self.grad[r * d + c] * xv[r * d + c];
  });
}

// ---- row-wise reductions --------------------------------------------------------

namespace {

std::pair<std::size_t, std::size_t> rows_by_last_dim(const Tensor& t, const char* op) {
  if (t.rank() == 0) throw ShapeError(std::string(op) + ": scalar input");
  const std::size_t d = t.shape()[t.rank() - 1];
  if (d == 0) throw ShapeError(std::string(op) + ": last dimension is empty");
  return {t.numel() / d, d};
}

}  // namespace

Tensor softmax_rows(const Tensor& a) {
  const auto [n, d] = rows_by_last_dim(a, "softmax_rows");
  std::vector<double> out(a.numel());
  auto x = a.data();
  for (std::size_t r = 0; r < n; ++r) {
    const double* row = x.data() + r * d;
    double* o = out.data() + r * d;
    const double mx = *std::max_element(row, row + d);
    double z = 0;
    for (std::size_t c = 0; c < d; ++c) z += (o[c] = std::exp(row[c] - mx));
    for (std::size_t c = 0; c < d; ++c) o[c] /= z;
  }
  return make_result(a.shape(), std::move(out), {&a}, [n, d](detail::Node& self) {
    auto* ga = pgrad(self, 0);
    if (!ga) return;
    for (std::size_t r = 0; r < n; ++r) {
      const double* y = self.value.data() + r * d;
      const double* g = self.grad.data() + r * d;
      double dot = 0;
      for (std::size_t c = 0; c < d; ++c) dot += g[c] * y[c];
      for (std::size_t c = 0; c < d; ++c) (*ga)[r * d + c] += y[c] * (g[c] - dot);
    }
  });
}

Tensor log_softmax_rows(const Tensor& a) {
  const auto [n, d] = rows_by_last_dim(a, "log_softmax_rows");
  std::vector<double> out(a.numel());
  auto x = a.data();
  for (std::size_t r = 0; r < n; ++r) {
    const double* row = x.data() + r * d;
    const double mx = *std::max_element(row, row + d);
    double z = 0;
    for (std::size_t c = 0; c < d; ++c) z += std::exp(row[c] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t c = 0; c < d; ++c) out[r * d + c] = row[c] - lse;
  }
  return make_result(a.shape(), std::move(out), {&a}, [n, d](detail::Node& self) {
    auto* ga = pgrad(self, 0);
    if (!ga) return;
    for (std::size_t r = 0; r < n; ++r) {
      const double* y = self.value.data() + r * d;
      const double* g = self.grad.data() + r * d;
      double gs = 0;
      for (std::size_t c = 0; c < d; ++c) gs += g[c];
      for (std::size_t c = 0; c < d; ++c) (*ga)[r * d + c] += g[c] - std::exp(y[c]) * gs;
    }
  });
}

RowStats row_stats(const Tensor& r) {
  const auto [n, d] = rows_by_last_dim(r, "row_stats");
  std::vector<double> mu(n), sd(n);
  auto x = r.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = x.data() + i * d;
    double s = 0;
    for (std::size_t c = 0; c < d; ++c) s += row[c];
    mu[i] = s / static_cast<double>(d);
    double v = 0;
    for (std::size_t c = 0; c < d; ++c) v += (row[c] - mu[i]) * (row[c] - mu[i]);
    sd[i] = std::sqrt(v / static_cast<double>(d));
  }
  const std::size_t nn = n, dd = d;
  Tensor mean_t = make_result(Shape{n, 1}, std::move(mu), {&r}, [nn, dd](detail::Node& self) {
    if (auto* g = pgrad(self, 0))
      for (std::size_t i = 0; i < nn; ++i)
        for (std::size_t c = 0; c < dd; ++c) (*g)[i * dd + c] += self.grad[i] / static_cast<double>(dd);
  });
  Tensor std_t = make_result(Shape{n, 1}, std::move(sd), {&r}, [nn, dd](detail::Node& self) {
    auto* g = pgrad(self, 0);
    if (!g) return;
    const auto& xv = self.parents[0]->value;
    for (std::size_t i = 0; i < nn; ++i) {
      const double s = self.value[i];
      if (s == 0.0) continue;  // subgradient 0 at a constant row
      const double* row = xv.data() + i * dd;
      double m = 0;
      for (std::size_t c = 0; c < dd; ++c) m += row[c];
      m /= static_cast<double>(dd);
      for (std::size_t c = 0; c < dd; ++c)
        (*g)[i * dd + c] += self.grad[i] * (row[c] - m) / (static_cast<double>(dd) * s);
    }
  });
  return {mean_t, std_t};
}

Tensor standardize_rows(const Tensor& r, double eps) {
  const auto [n, d] = rows_by_last_dim(r, "standardize_rows");
  std::vector<double> out(r.numel());
  // Per-row (mean, stddev) kept for the backward pass.
  std::vector<double> stats(2 * n);
  auto x = r.data();
  const double dd = static_cast<double>(d);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = x.data() + i * d;
    double s = 0;
    for (std::size_t c = 0; c < d; ++c) s += row[c];
    const double mu = s / dd;
    double v = 0;
    for (std::size_t c = 0; c < d; ++c) v += (row[c] - mu) * (row[c] - mu);
    const double sd = std::sqrt(v / dd);
    stats[2 * i] = mu;
    stats[2 * i + 1] = sd;
    const double denom = sd + eps;
    for (std::size_t c = 0; c < d; ++c) out[i * d + c] = (row[c] - mu) / denom;
  }
  return make_result(r.shape(), std::move(out), {&r},
                     [n, d, dd, eps, stats = std::move(stats)](detail::Node& self) {
                       auto* ga = pgrad(self, 0);
                       if (!ga) return;
                       const auto& xv = self.parents[0]->value;
                       for (std::size_t i = 0; i < n; ++i) {
                         const double mu = stats[2 * i], sd = stats[2 * i + 1];
                         const double denom = sd + eps;
                         const double* row = xv.data() + i * d;
                         const double* g = self.grad.data() + i * d;
                         double gsum = 0, gdot = 0;
                         for (std::size_t c = 0; c < d; ++c) {
                           gsum += g[c];
                           gdot += g[c] * (row[c] - mu);
                         }
                         const double gmean = gsum / dd;
                         const double k = sd > 0 ? gdot / (dd * sd * denom * denom) : 0.0;
                         for (std::size_t c = 0; c < d; ++c)
                           (*ga)[i * d + c] += (g[c] - gmean) / denom - k * (row[c] - mu);
                       }
                     });
}

// ---- structural -------------------------------------------------------------------

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t d = parts[0].cols();
  std::size_t n = 0;
  for (const Tensor& p : parts) {
    if (p.cols() != d)
      throw ShapeError("concat_rows: column mismatch " + parts[0].shape().str() + " vs " +
                       p.shape().str());
    n += p.rows();
  }
  std::vector<double> out;
  out.reserve(n * d);
  for (const Tensor& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  return make_result_list(Shape{n, d}, std::move(out), parts, [](detail::Node& self) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < self.parents.size(); ++i) {
      const std::size_t len = self.parents[i]->value.size();
      if (auto* g = pgrad(self, i))
        for (std::size_t j = 0; j < len; ++j) (*g)[j] += self.grad[off + j];
      off += len;
    }
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t n = parts[0].rows();
  std::size_t d = 0;
  for (const Tensor& p : parts) {
    if (p.rows() != n)
      throw ShapeError("concat_cols: row mismatch " + parts[0].shape().str() + " vs " +
                       p.shape().str());
    d += p.cols();
  }
  std::vector<double> out(n * d);
  std::vector<std::size_t> widths;
  std::size_t off = 0;
  for (const Tensor& p : parts) {
    const std::size_t w = p.cols();
    widths.push_back(w);
    for (std::size_t r = 0; r < n; ++r)
      std::copy_n(p.data().data() + r * w, w, out.data() + r * d + off);
    off += w;
  }
  return make_result_list(Shape{n, d}, std::move(out), parts,
                          [n, d, widths = std::move(widths)](detail::Node& self) {
                            std::size_t off = 0;
                            for (std::size_t i = 0; i < self.parents.size(); ++i) {
                              const std::size_t w = widths[i];
                              if (auto* g = pgrad(self, i))
                                for (std::size_t r = 0; r < n; ++r)
                                  for (std::size_t c = 0; c < w; ++c)
                                    (*g)[r * w + c] += self.grad[r * d + off + c];
                              off += w;
                            }
                          });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count) {
  require_rank2(x, "slice_rows");
  const std::size_t d = x.cols();
  if (begin + count > x.rows())
    throw ShapeError("slice_rows: rows [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of range for " + x.shape().str());
  std::vector<double> out(x.data().begin() + begin * d, x.data().begin() + (begin + count) * d);
  return make_result(Shape{count, d}, std::move(out), {&x}, [begin, d](detail::Node& self) {
    if (auto* g = pgrad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[begin * d + i] += self.grad[i];
  });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count) {
  require_rank2(x, "slice_cols");
  const std::size_t n = x.rows(), d = x.cols();
  if (begin + count > d)
    throw ShapeError("slice_cols: columns [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of range for " + x.shape().str());
  std::vector<double> out(n * count);
  for (std::size_t r = 0; r < n; ++r)
    std::copy_n(x.data().data() + r * d + begin, count, out.data() + r * count);
  return make_result(Shape{n, count}, std::move(out), {&x}, [n, d, begin, count](detail::Node& self) {
    if (auto* g = pgrad(self, 0))
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < count; ++c) (*g)[r * d + begin + c] += self.grad[r * count + c];
  });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> indices) {
  require_rank2(x, "gather_rows");
  const std::size_t n = x.rows(), d = x.cols();
  std::vector<double> out(indices.size() * d);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= n)
      throw ShapeError("gather_rows: index " + std::to_string(indices[i]) + " out of range for " +
                       x.shape().str());
    std::copy_n(x.data().data() + indices[i] * d, d, out.data() + i * d);
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return make_result(Shape{indices.size(), d}, std::move(out), {&x},
                     [d, idx = std::move(idx)](detail::Node& self) {
                       auto* g = pgrad(self, 0);
                       if (!g) return;
                       for (std::size_t i = 0; i < idx.size(); ++i)
                         for (std::size_t c = 0; c < d; ++c) (*g)[idx[i] * d + c] += self.grad[i * d + c];
                     });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape.numel() != x.numel())
    throw ShapeError("reshape: cannot view " + x.shape().str() + " as " + shape.str());
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_result(shape, std::move(out), {&x}, [](detail::Node& self) {
    if (auto* g = pgrad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
  });
}

// ---- loss ------------------------------------------------------------------------

Tensor nll_loss(const Tensor& logits, std::span<const std::size_t> targets, std::size_t ignore_index) {
  require_rank2(logits, "nll_loss");
  const std::size_t n = logits.rows(), v = logits.cols();
  if (targets.size() != n)
    throw ShapeError("nll_loss: " + std::to_string(targets.size()) + " targets for " +
                     std::to_string(n) + " logit rows");
  std::vector<double> probs(n * v);
  std::vector<std::size_t> tg(targets.begin(), targets.end());
  double total = 0;
  std::size_t count = 0;
  auto x = logits.data();
  for (std::size_t r = 0; r < n; ++r) {
    if (tg[r] == ignore_index) continue;
    if (tg[r] >= v)
      throw ContractError("nll_loss: target id " + std::to_string(tg[r]) +
                          " is outside the vocabulary of size " + std::to_string(v));
    const double* row = x.data() + r * v;
    const double mx = *std::max_element(row, row + v);
    double z = 0;
    for (std::size_t c = 0; c < v; ++c) z += (probs[r * v + c] = std::exp(row[c] - mx));
    for (std::size_t c = 0; c < v; ++c) probs[r * v + c] /= z;
    total += mx + std::log(z) - row[tg[r]];
    ++count;
  }
  const double denom = count ? static_cast<double>(count) : 1.0;
  return make_result(Shape{}, {total / denom}, {&logits},
                     [n, v, denom, ignore_index, tg = std::move(tg),
                      probs = std::move(probs)](detail::Node& self) {
                       auto* g = pgrad(self, 0);
                       if (!g) return;
                       const double s = self.grad[0] / denom;
                       for (std::size_t r = 0; r < n; ++r) {
                         if (tg[r] == ignore_index) continue;
                         for (std::size_t c = 0; c < v; ++c) (*g)[r * v + c] += s * probs[r * v + c];
                         (*g)[r * v + tg[r]] -= s;
                       }
                     });
}

// ---- attention -----------------------------------------------------------------------

Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            std::span<const AttentionSegment> segments, std::size_t heads,
                            bool causal, AttentionMaps* maps) {
  require_rank2(q, "multi_head_attention");
  require_rank2(k, "multi_head_attention");
  require_rank2(v, "multi_head_attention");
  const std::size_t d = q.cols();
  if (k.cols() != d || v.cols() != d || k.rows() != v.rows())
    throw ShapeError("multi_head_attention: q " + q.shape().str() + ", k " + k.shape().str() +
                     ", v " + v.shape().str() + " are incompatible");
  if (heads == 0 || d % heads != 0)
    throw ShapeError("multi_head_attention: width " + std::to_string(d) +
                     " is not divisible by " + std::to_string(heads) + " heads");
  const std::size_t dk = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dk));
  for (const auto& s : segments)
    if (s.q_begin + s.q_len > q.rows() || s.k_begin + s.k_len > k.rows() || s.k_len == 0)
      throw ShapeError("multi_head_attention: segment out of range");

  std::vector<double> out(q.rows() * d, 0.0);
  std::vector<std::vector<double>> probs(segments.size() * heads);
  const double* qd = q.data().data();
  const double* kd = k.data().data();
  const double* vd = v.data().data();
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();

  for (std::size_t si = 0; si < segments.size(); ++si) {
    const auto& s = segments[si];
    const std::size_t shift = s.k_len >= s.q_len ? s.k_len - s.q_len : 0;
    for (std::size_t h = 0; h < heads; ++h) {
      CSMap qh(qd + s.q_begin * d + h * dk, s.q_len, dk, Strided(d));
      CSMap kh(kd + s.k_begin * d + h * dk, s.k_len, dk, Strided(d));
      CSMap vh(vd + s.k_begin * d + h * dk, s.k_len, dk, Strided(d));
      auto& p = probs[si * heads + h];
      p.resize(s.q_len * s.k_len);
      MapMat pm(p.data(), s.q_len, s.k_len);
      pm.noalias() = (qh * kh.transpose()) * inv_sqrt;
      for (std::size_t i = 0; i < s.q_len; ++i) {
        double* row = p.data() + i * s.k_len;
        const std::size_t visible = causal ? std::min(s.k_len, i + shift + 1) : s.k_len;
        for (std::size_t j = visible; j < s.k_len; ++j) row[j] = kNegInf;
        const double mx = *std::max_element(row, row + visible);
        double z = 0;
        for (std::size_t j = 0; j < visible; ++j) z += (row[j] = std::exp(row[j] - mx));
        for (std::size_t j = 0; j < visible; ++j) row[j] /= z;
        for (std::size_t j = visible; j < s.k_len; ++j) row[j] = 0.0;
      }
      SMap oh(out.data() + s.q_begin * d + h * dk, s.q_len, dk, Strided(d));
      oh.noalias() = pm * vh;
    }
  }
  if (maps) {
    maps->heads = heads;
    maps->segments.assign(segments.begin(), segments.end());
    maps->blocks = probs;
  }

  std::vector<AttentionSegment> segs(segments.begin(), segments.end());
  return make_result(
      q.shape(), std::move(out), {&q, &k, &v},
      [d, dk, heads, inv_sqrt, segs = std::move(segs), probs = std::move(probs)](detail::Node& self) {
        auto* gq = pgrad(self, 0);
        auto* gk = pgrad(self, 1);
        auto* gv = pgrad(self, 2);
        const double* qd = self.parents[0]->value.data();
        const double* kd = self.parents[1]->value.data();
        const double* vd = self.parents[2]->value.data();
        RowMat dp, ds;
        for (std::size_t si = 0; si < segs.size(); ++si) {
          const auto& s = segs[si];
          for (std::size_t h = 0; h < heads; ++h) {
            CMapMat pm(probs[si * heads + h].data(), s.q_len, s.k_len);
            CSMap go(self.grad.data() + s.q_begin * d + h * dk, s.q_len, dk, Strided(d));
            CSMap vh(vd + s.k_begin * d + h * dk, s.k_len, dk, Strided(d));
            if (gv) SMap(gv->data() + s.k_begin * d + h * dk, s.k_len, dk, Strided(d)).noalias() += pm.transpose() * go;
            if (!gq && !gk) continue;
            dp.noalias() = go * vh.transpose();
            ds.resize(s.q_len, s.k_len);
            for (std::size_t i = 0; i < s.q_len; ++i) {
              double dot = 0;
              for (std::size_t j = 0; j < s.k_len; ++j) dot += dp(i, j) * pm(i, j);
              for (std::size_t j = 0; j < s.k_len; ++j) ds(i, j) = pm(i, j) * (dp(i, j) - dot) * inv_sqrt;
            }
            if (gq) {
              CSMap kh(kd + s.k_begin * d + h * dk, s.k_len, dk, Strided(d));
              SMap(gq->data() + s.q_begin * d + h * dk, s.q_len, dk, Strided(d)).noalias() += ds * kh;
            }
            if (gk) {
              CSMap qh(qd + s.q_begin * d + h * dk, s.q_len, dk, Strided(d));
              SMap(gk->data() + s.k_begin * d + h * dk, s.k_len, dk, Strided(d)).noalias() += ds.transpose() * qh;
            }
          }
        }
      });
}

}  // namespace memdrive
