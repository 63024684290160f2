// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The memdrive Authors.

#pragma once

#include <string>

#include "memdrive/layers.hpp"

namespace memdrive {

/// Layer normalization whose scale and shift receive memory-predicted
/// offsets: out = (gamma + dG(m)) * (r - mean) / (std + eps) + (beta + dB(m)).
/// dG and dB are independent affine maps from the flattened memory, both
/// zero at construction so the layer starts out as a plain layer norm.
struct Mcln {
  Tensor gamma;
  Tensor beta;
  Linear delta_gamma;
  Linear delta_beta;
  double eps = 1e-6;

  static Mcln create(ParamStore& store, const std::string& name, std::size_t d,
                     std::size_t memory_width, double eps);

  /// r: n x d rows; memory: n x (slots*d), one flattened memory per row.
  Tensor operator()(const Tensor& r, const Tensor& memory) const;

  /// The conditioned scale and shift for each memory row.
  std::pair<Tensor, Tensor> conditioned(const Tensor& memory) const;
};

}  // namespace memdrive
