// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The memdrive Authors.

#include "memdrive/layers.hpp"

#include <cmath>

namespace memdrive {

Linear Linear::create(ParamStore& store, const std::string& name, std::size_t in, std::size_t out,
                      bool with_bias, ParamGroup group) {
  Linear l;
  l.weight = store.create(name + ".weight", Shape{in, out},
                          Init::normal(1.0 / std::sqrt(static_cast<double>(in))), group);
  if (with_bias) l.bias = store.create(name + ".bias", Shape{out}, Init::zeros(), group);
  return l;
}

Linear Linear::create_zero(ParamStore& store, const std::string& name, std::size_t in,
                           std::size_t out) {
  Linear l;
  l.weight = store.create(name + ".weight", Shape{in, out}, Init::zeros());
  l.bias = store.create(name + ".bias", Shape{out}, Init::zeros());
  return l;
}

Tensor Linear::operator()(const Tensor& x) const {
  Tensor y = matmul(x, weight);
  return bias.defined() ? add_rowvec(y, bias) : y;
}

LayerNorm LayerNorm::create(ParamStore& store, const std::string& name, std::size_t d, double eps) {
  return {store.create(name + ".gamma", Shape{d}, Init::ones()),
          store.create(name + ".beta", Shape{d}, Init::zeros()), eps};
}

Tensor LayerNorm::operator()(const Tensor& x) const {
  return add_rowvec(mul_rowvec(standardize_rows(x, eps), gamma), beta);
}

FeedForward FeedForward::create(ParamStore& store, const std::string& name, std::size_t d,
                                std::size_t hidden) {
  return {Linear::create(store, name + ".inner", d, hidden),
          Linear::create(store, name + ".outer", hidden, d)};
}

Tensor FeedForward::operator()(const Tensor& x) const { return outer(relu(inner(x))); }

MultiHeadAttention MultiHeadAttention::create(ParamStore& store, const std::string& name,
                                              std::size_t d, std::size_t heads) {
  return {Linear::create(store, name + ".query", d, d), Linear::create(store, name + ".key", d, d),
          Linear::create(store, name + ".value", d, d),
          Linear::create(store, name + ".output", d, d), heads};
}

Tensor MultiHeadAttention::attend(const Tensor& q, const Tensor& k, const Tensor& v,
                                  std::span<const AttentionSegment> segments, bool causal,
                                  AttentionMaps* maps) const {
  return output(multi_head_attention(q, k, v, segments, heads, causal, maps));
}

Tensor MultiHeadAttention::operator()(const Tensor& x_query, const Tensor& x_memory,
                                      std::span<const AttentionSegment> segments, bool causal,
                                      AttentionMaps* maps) const {
  return attend(query(x_query), key(x_memory), value(x_memory), segments, causal, maps);
}

}  // namespace memdrive
