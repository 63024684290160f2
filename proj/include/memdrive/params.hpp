// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The memdrive Authors.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "memdrive/tensor.hpp"

namespace memdrive {

/// Learning-rate groups. `Visual` holds the patch projector, which stands in
/// for the image feature extractor; everything else is `Other`.
enum class ParamGroup : std::uint8_t { Visual = 0, Other = 1 };

struct Init {
  enum class Kind { Zeros, Ones, Normal } kind = Kind::Zeros;
  double stddev = 0.0;

  static Init zeros() { return {Kind::Zeros, 0.0}; }
  static Init ones() { return {Kind::Ones, 0.0}; }
  static Init normal(double stddev) { return {Kind::Normal, stddev}; }
};

struct Parameter {
  std::string name;
  Tensor tensor;
  ParamGroup group = ParamGroup::Other;
};

/// Ordered set of named trainable tensors. Each parameter draws its initial
/// values from a stream seeded by (seed, name), so a parameter's init does
/// not depend on which other parameters exist.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed = 0) : seed_(seed) {}

  Tensor create(const std::string& name, Shape shape, Init init,
                ParamGroup group = ParamGroup::Other);

  const std::vector<Parameter>& params() const noexcept { return params_; }
  std::vector<Parameter>& params() noexcept { return params_; }
  const Parameter* find(const std::string& name) const;
  Parameter* find(const std::string& name);
  std::size_t scalar_count() const;
  std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::uint64_t seed_;
  std::vector<Parameter> params_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace memdrive
