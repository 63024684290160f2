// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The memdrive Authors.

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "memdrive/params.hpp"

namespace memdrive {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moments per parameter (same order as the ParamStore), one learning rate
/// per ParamGroup, and the number of steps taken.
struct AdamState {
  AdamHyper hyper;
  std::array<double, 2> lr{1e-4, 1e-4};
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  static AdamState for_params(const ParamStore& store, AdamHyper hyper = {});
  double& group_lr(ParamGroup g) { return lr[static_cast<std::size_t>(g)]; }
  double group_lr(ParamGroup g) const { return lr[static_cast<std::size_t>(g)]; }
};

/// One bias-corrected Adam update of every parameter. Each parameter must
/// carry a gradient from the preceding backward().
void adam_step(ParamStore& store, AdamState& state);

}  // namespace memdrive
