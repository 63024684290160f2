// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The memdrive Authors.

#pragma once

#include <span>
#include <string>

#include "memdrive/params.hpp"
#include "memdrive/tensor.hpp"

namespace memdrive {

/// y = x W + b, W stored in x out layout.
struct Linear {
  Tensor weight;
  Tensor bias;  // undefined when the map has no bias

  static Linear create(ParamStore& store, const std::string& name, std::size_t in, std::size_t out,
                       bool with_bias = true, ParamGroup group = ParamGroup::Other);
  /// Zero-initialized weight and bias.
  static Linear create_zero(ParamStore& store, const std::string& name, std::size_t in,
                            std::size_t out);
  Tensor operator()(const Tensor& x) const;
};

struct LayerNorm {
  Tensor gamma;
  Tensor beta;
  double eps = 1e-6;

  static LayerNorm create(ParamStore& store, const std::string& name, std::size_t d, double eps);
  Tensor operator()(const Tensor& x) const;
};

/// relu(x W1 + b1) W2 + b2
struct FeedForward {
  Linear inner;
  Linear outer;

  static FeedForward create(ParamStore& store, const std::string& name, std::size_t d,
                            std::size_t hidden);
  Tensor operator()(const Tensor& x) const;
};

/// Projected multi-head attention with an output map.
struct MultiHeadAttention {
  Linear query;
  Linear key;
  Linear value;
  Linear output;
  std::size_t heads = 1;

  static MultiHeadAttention create(ParamStore& store, const std::string& name, std::size_t d,
                                   std::size_t heads);
  /// Attention of already-projected q over projected k, v, then the output map.
  Tensor attend(const Tensor& q, const Tensor& k, const Tensor& v,
                std::span<const AttentionSegment> segments, bool causal,
                AttentionMaps* maps = nullptr) const;
  Tensor operator()(const Tensor& x_query, const Tensor& x_memory,
                    std::span<const AttentionSegment> segments, bool causal,
                    AttentionMaps* maps = nullptr) const;
};

}  // namespace memdrive
