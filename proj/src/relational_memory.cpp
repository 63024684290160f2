// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The memdrive Authors.

#include "memdrive/relational_memory.hpp"

#include <cmath>

#include "memdrive/error.hpp"

namespace memdrive {

RelationalMemory::RelationalMemory(ParamStore& store, const std::string& prefix, std::size_t slots,
                                   std::size_t dim, std::size_t heads) {
  if (slots == 0) throw ConfigError("relational memory needs at least one slot");
  if (heads == 0 || dim % heads != 0)
    throw ConfigError("memory width " + std::to_string(dim) + " is not divisible by " +
                      std::to_string(heads) + " heads");
  const double wstd = 1.0 / std::sqrt(static_cast<double>(dim));
  p_.initial = store.create(prefix + ".initial", Shape{slots, dim}, Init::normal(0.1));
  p_.query = Linear::create(store, prefix + ".query", dim, dim);
  p_.key = Linear::create(store, prefix + ".key", dim, dim);
  p_.value = Linear::create(store, prefix + ".value", dim, dim);
  p_.mlp_inner = Linear::create(store, prefix + ".mlp.inner", dim, dim);
  p_.mlp_outer = Linear::create(store, prefix + ".mlp.outer", dim, dim);
  p_.forget_input = store.create(prefix + ".gate.forget_input", Shape{dim, dim}, Init::normal(wstd));
  p_.forget_memory = store.create(prefix + ".gate.forget_memory", Shape{dim, dim}, Init::normal(wstd));
  p_.input_input = store.create(prefix + ".gate.input_input", Shape{dim, dim}, Init::normal(wstd));
  p_.input_memory = store.create(prefix + ".gate.input_memory", Shape{dim, dim}, Init::normal(wstd));
  p_.slots = slots;
  p_.dim = dim;
  p_.heads = heads;
}

RelationalMemory::RelationalMemory(MemoryParams params) : p_(std::move(params)) {
  if (p_.dim % p_.heads != 0) throw ConfigError("memory width is not divisible by its heads");
}

void RelationalMemory::check_inputs(const Tensor& memory, const Tensor& y_prev) const {
  if (memory.rank() != 2 || memory.cols() != p_.dim || memory.rows() % p_.slots != 0)
    throw ShapeError("relational memory: state " + memory.shape().str() + " is not a stack of " +
                     std::to_string(p_.slots) + " x " + std::to_string(p_.dim) + " matrices");
  if (y_prev.rank() != 2 || y_prev.cols() != p_.dim)
    throw ShapeError("relational memory: embedding " + y_prev.shape().str() +
                     " does not have width " + std::to_string(p_.dim));
  if (y_prev.rows() * p_.slots != memory.rows())
    throw ShapeError("relational memory: " + std::to_string(y_prev.rows()) +
                     " embeddings for a stack of " + std::to_string(memory.rows() / p_.slots) +
                     " memories");
}

std::vector<std::size_t> RelationalMemory::repeat_per_slot(std::size_t batch) const {
  std::vector<std::size_t> idx(batch * p_.slots);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t s = 0; s < p_.slots; ++s) idx[b * p_.slots + s] = b;
  return idx;
}

Tensor RelationalMemory::initial(std::size_t batch) const {
  std::vector<std::size_t> idx(batch * p_.slots);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i % p_.slots;
  return gather_rows(p_.initial, idx);
}

Tensor RelationalMemory::attend(const Tensor& memory, const Tensor& y_prev) const {
  check_inputs(memory, y_prev);
  const std::size_t batch = y_prev.rows(), S = p_.slots;
  // Interleave so each sample's key/value block is [its slots; its y].
  std::vector<std::size_t> order(batch * (S + 1));
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t s = 0; s < S; ++s) order[b * (S + 1) + s] = b * S + s;
    order[b * (S + 1) + S] = batch * S + b;
  }
  const Tensor stacked[] = {memory, y_prev};
  Tensor kv_in = gather_rows(concat_rows(stacked), order);
  std::vector<AttentionSegment> segs(batch);
  for (std::size_t b = 0; b < batch; ++b) segs[b] = {b * S, S, b * (S + 1), S + 1};
  return multi_head_attention(p_.query(memory), p_.key(kv_in), p_.value(kv_in), segs, p_.heads,
                              false);
}

Tensor RelationalMemory::residual(const Tensor& z, const Tensor& memory) const {
  Tensor base = add(z, memory);
  return add(p_.mlp_outer(relu(p_.mlp_inner(base))), base);
}

std::pair<Tensor, Tensor> RelationalMemory::gate_activations(const Tensor& memory,
                                                             const Tensor& y_prev) const {
  check_inputs(memory, y_prev);
  const auto idx = repeat_per_slot(y_prev.rows());
  Tensor y_rows = gather_rows(y_prev, idx);
  Tensor squashed = tanh(memory);
  Tensor forget = add(matmul(y_rows, p_.forget_input), matmul(squashed, p_.forget_memory));
  Tensor input = add(matmul(y_rows, p_.input_input), matmul(squashed, p_.input_memory));
  return {sigmoid(forget), sigmoid(input)};
}

Tensor RelationalMemory::gate(const Tensor& m_tilde, const Tensor& memory,
                              const Tensor& y_prev) const {
  auto [forget, input] = gate_activations(memory, y_prev);
  return add(mul(forget, memory), mul(input, tanh(m_tilde)));
}

Tensor RelationalMemory::step(const Tensor& memory, const Tensor& y_prev) const {
  Tensor z = attend(memory, y_prev);
  return gate(residual(z, memory), memory, y_prev);
}

std::vector<MemoryState> RelationalMemory::rollout(std::span<const std::size_t> prefix,
                                                   std::size_t bos,
                                                   const Tensor& embeddings) const {
  if (embeddings.rank() != 2 || embeddings.rows() == 0)
    throw ContractError("memory rollout: empty vocabulary");
  std::vector<MemoryState> states;
  states.reserve(prefix.size() + 1);
  Tensor m = initial(1);
  for (std::size_t t = 0; t <= prefix.size(); ++t) {
    const std::size_t tok = t == 0 ? bos : prefix[t - 1];
    if (tok >= embeddings.rows())
      throw ContractError("memory rollout: token id " + std::to_string(tok) +
                          " is outside the vocabulary of size " + std::to_string(embeddings.rows()));
    const std::size_t ids[] = {tok};
    m = step(m, gather_rows(embeddings, ids));
    states.push_back({m, t + 1});
  }
  return states;
}

Tensor flatten_memory(const Tensor& memory, std::size_t slots) {
  if (memory.rank() != 2 || slots == 0 || memory.rows() % slots != 0)
    throw ShapeError("flatten_memory: " + memory.shape().str() + " is not a stack of " +
                     std::to_string(slots) + "-slot memories");
  return reshape(memory, Shape{memory.rows() / slots, slots * memory.cols()});
}

}  // namespace memdrive
