// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The memdrive Authors.

#include "memdrive/mcln.hpp"

#include "memdrive/error.hpp"

namespace memdrive {

Mcln Mcln::create(ParamStore& store, const std::string& name, std::size_t d,
                  std::size_t memory_width, double eps) {
  return {store.create(name + ".gamma", Shape{d}, Init::ones()),
          store.create(name + ".beta", Shape{d}, Init::zeros()),
          Linear::create_zero(store, name + ".delta_gamma", memory_width, d),
          Linear::create_zero(store, name + ".delta_beta", memory_width, d), eps};
}

std::pair<Tensor, Tensor> Mcln::conditioned(const Tensor& memory) const {
  return {add_rowvec(delta_gamma(memory), gamma), add_rowvec(delta_beta(memory), beta)};
}

Tensor Mcln::operator()(const Tensor& r, const Tensor& memory) const {
  if (r.rank() != 2 || memory.rank() != 2 || r.rows() != memory.rows())
    throw ShapeError("mcln: " + std::to_string(r.rank() == 2 ? r.rows() : 0) +
                     " rows to normalize but memory is " + memory.shape().str());
  auto [scale_rows, shift_rows] = conditioned(memory);
  return add(mul(scale_rows, standardize_rows(r, eps)), shift_rows);
}

}  // namespace memdrive
