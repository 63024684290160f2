// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The memdrive Authors.

#include "memdrive/adam.hpp"

#include <cmath>

#include "memdrive/error.hpp"

namespace memdrive {

AdamState AdamState::for_params(const ParamStore& store, AdamHyper hyper) {
  AdamState s;
  s.hyper = hyper;
  for (const auto& p : store.params()) {
    s.m.emplace_back(p.tensor.numel(), 0.0);
    s.v.emplace_back(p.tensor.numel(), 0.0);
  }
  return s;
}

void adam_step(ParamStore& store, AdamState& state) {
  auto& params = store.params();
  if (state.m.size() != params.size() || state.v.size() != params.size())
    throw ContractError("adam_step: optimizer state tracks " + std::to_string(state.m.size()) +
                        " parameters, store has " + std::to_string(params.size()));
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) throw ContractError("adam_step: parameter '" + p.name + "' has no gradient");
  }
  ++state.step;
  const double b1 = state.hyper.beta1, b2 = state.hyper.beta2, eps = state.hyper.epsilon;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.size() != p.tensor.numel())
      throw ContractError("adam_step: moment shape mismatch for '" + p.name + "'");
    const double lr = state.group_lr(p.group);
    auto x = p.tensor.mutable_data();
    auto g = p.tensor.grad();
    for (std::size_t j = 0; j < x.size(); ++j) {
      m[j] = b1 * m[j] + (1.0 - b1) * g[j];
      v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      x[j] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

}  // namespace memdrive
