// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The memdrive Authors.

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "memdrive/tensor.hpp"

namespace memdrive {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

/// Compares backward() against central differences (f(x+eps) - f(x-eps)) / 2eps
/// for every element of every tensor in `params`. The relative error of one
/// element is |a - n| / max(|a|, |n|, floor).
GradCheckResult grad_check(const std::function<Tensor()>& f, std::vector<Tensor> params,
                           double eps = 1e-5, double floor = 1e-6);

}  // namespace memdrive
