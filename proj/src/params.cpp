// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The memdrive Authors.

#include "memdrive/params.hpp"

#include <random>

#include "memdrive/error.hpp"
#include "memdrive/rng.hpp"

namespace memdrive {

Tensor ParamStore::create(const std::string& name, Shape shape, Init init, ParamGroup group) {
  if (index_.count(name)) throw ContractError("duplicate parameter name '" + name + "'");
  std::vector<double> values(shape.numel(), 0.0);
  switch (init.kind) {
    case Init::Kind::Zeros:
      break;
    case Init::Kind::Ones:
      std::fill(values.begin(), values.end(), 1.0);
      break;
    case Init::Kind::Normal: {
      std::mt19937_64 rng(derive_seed(seed_, name));
      std::normal_distribution<double> dist(0.0, init.stddev);
      for (double& v : values) v = dist(rng);
      break;
    }
  }
  Tensor t = Tensor::from(shape, std::move(values), true);
  index_[name] = params_.size();
  params_.push_back({name, t, group});
  return t;
}

const Parameter* ParamStore::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &params_[it->second];
}

Parameter* ParamStore::find(const std::string& name) {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &params_[it->second];
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  return n;
}

}  // namespace memdrive
