// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The memdrive Authors.
//
// Relational memory: a slots x d matrix carried across decoding steps.
//
//   Z   = MHA(Q = M W_q, K = [M; y] W_k, V = [M; y] W_v)   (no output map)
//   M~  = mlp(Z + M) + Z + M
//   G_f = Y W_f + tanh(M) U_f,  G_i = Y W_i + tanh(M) U_i  (Y = y repeated per slot)
//   M'  = sigmoid(G_f) * M + sigmoid(G_i) * tanh(M~)
//
// All functions take a stack of A independent memories: matrices are
// (A*slots) x d with each sample's slots contiguous, and y is A x d.

#pragma once

#include <span>
#include <string>
#include <vector>

#include "memdrive/layers.hpp"

namespace memdrive {

struct MemoryState {
  Tensor matrix;      // slots x d
  std::size_t step = 0;
};

struct MemoryParams {
  Tensor initial;  // learned M_0, slots x d
  Linear query;    // fused over heads, split by column groups
  Linear key;
  Linear value;
  Linear mlp_inner;
  Linear mlp_outer;
  Tensor forget_input;   // W_f
  Tensor forget_memory;  // U_f
  Tensor input_input;    // W_i
  Tensor input_memory;   // U_i
  std::size_t slots = 0;
  std::size_t dim = 0;
  std::size_t heads = 1;
};

class RelationalMemory {
 public:
  RelationalMemory() = default;
  RelationalMemory(ParamStore& store, const std::string& prefix, std::size_t slots,
                   std::size_t dim, std::size_t heads);
  explicit RelationalMemory(MemoryParams params);

  const MemoryParams& params() const noexcept { return p_; }
  std::size_t slots() const noexcept { return p_.slots; }
  std::size_t dim() const noexcept { return p_.dim; }

  /// M_0 repeated for `batch` samples: (batch*slots) x d.
  Tensor initial(std::size_t batch) const;
  Tensor attend(const Tensor& memory, const Tensor& y_prev) const;
  Tensor residual(const Tensor& z, const Tensor& memory) const;
  Tensor gate(const Tensor& m_tilde, const Tensor& memory, const Tensor& y_prev) const;
  /// The three stages in sequence.
  Tensor step(const Tensor& memory, const Tensor& y_prev) const;

  /// Sigmoid gate activations (forget, input) for the bound checks.
  std::pair<Tensor, Tensor> gate_activations(const Tensor& memory, const Tensor& y_prev) const;

  /// [M_1 .. M_{k+1}] for prefix y_1..y_k: M_1 consumes BOS, M_{j+1} consumes y_j.
  std::vector<MemoryState> rollout(std::span<const std::size_t> prefix, std::size_t bos,
                                   const Tensor& embeddings) const;

 private:
  void check_inputs(const Tensor& memory, const Tensor& y_prev) const;
  std::vector<std::size_t> repeat_per_slot(std::size_t batch) const;

  MemoryParams p_;
};

/// Row-major concatenation of a memory's rows: A*slots x d -> A x (slots*d).
Tensor flatten_memory(const Tensor& memory, std::size_t slots);

}  // namespace memdrive
