// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The memdrive Authors.

#include "memdrive/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "memdrive/error.hpp"

namespace memdrive {

namespace {

double eval(const std::function<Tensor()>& f) {
  NoGradGuard guard;
  const double v = f().item();
  if (!std::isfinite(v)) throw NumericError("grad_check: objective is not finite");
  return v;
}

}  // namespace

GradCheckResult grad_check(const std::function<Tensor()>& f, std::vector<Tensor> params,
                           double eps, double floor) {
  for (auto& p : params) p.set_requires_grad(true);
  Tensor loss = f();
  if (!std::isfinite(loss.item())) throw NumericError("grad_check: objective is not finite");
  backward(loss);

  GradCheckResult res;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = params[pi];
    std::vector<double> analytic = p.has_grad() ? std::vector<double>(p.grad().begin(), p.grad().end())
                                                : std::vector<double>(p.numel(), 0.0);
    auto x = p.mutable_data();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double orig = x[i];
      x[i] = orig + eps;
      const double fp = eval(f);
      x[i] = orig - eps;
      const double fm = eval(f);
      x[i] = orig;
      const double numeric = (fp - fm) / (2 * eps);
      const double a = analytic[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      if (res.checked++ == 0 || rel > res.max_rel_error) {
        res.max_rel_error = rel;
        res.worst_param = pi;
        res.worst_index = i;
        res.analytic = a;
        res.numeric = numeric;
      }
    }
  }
  return res;
}

}  // namespace memdrive
