// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The memdrive Authors.
//
// Encoder over patch features and a post-norm decoder whose three
// normalizations per layer are either plain layer norms (base, base+rm) or
// memory-conditioned (base+rm+mcln). Batches are packed: rows of all samples
// are concatenated without padding and attention runs per segment.

#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "memdrive/config.hpp"
#include "memdrive/layers.hpp"
#include "memdrive/mcln.hpp"
#include "memdrive/relational_memory.hpp"

namespace memdrive {

namespace token {
inline constexpr std::size_t kPad = 0;
inline constexpr std::size_t kBos = 1;
inline constexpr std::size_t kEos = 2;
inline constexpr std::size_t kUnk = 3;
}  // namespace token

/// One training/evaluation pair: S x d_feat features and the target tokens
/// y_1..y_T (normally ending in EOS).
struct Example {
  Tensor features;
  std::vector<std::size_t> targets;
};

struct EncodedImage {
  Tensor hidden;                   // S x d
  std::vector<Tensor> cross_key;   // per decoder layer, S x d
  std::vector<Tensor> cross_value;
  std::size_t length() const { return hidden.rows(); }
};

/// Frontier of an incremental decode. Tensors are never mutated in place, so
/// copying a state (e.g. when a beam hypothesis branches) is cheap.
struct DecoderState {
  MemoryState memory;                 // unset in base mode
  std::vector<Tensor> self_key;       // per layer, positions so far x d
  std::vector<Tensor> self_value;
  std::size_t position = 0;
};

struct EncoderLayer {
  MultiHeadAttention attention;
  LayerNorm norm_attention;
  FeedForward ffn;
  LayerNorm norm_ffn;
};

struct DecoderLayer {
  MultiHeadAttention self_attention;
  MultiHeadAttention cross_attention;
  FeedForward ffn;
  std::array<LayerNorm, 3> plain;  // used when the model has no MCLN
  std::array<Mcln, 3> conditioned;
};

struct ForwardOutput {
  Tensor logits;                       // sum(T) x V, sample-major
  std::vector<std::size_t> targets;    // packed
  std::vector<AttentionMaps> cross_maps;  // per decoder layer, when requested
};

class Model {
 public:
  Model(const ModelConfig& config, std::uint64_t seed);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  const ModelConfig& config() const noexcept { return cfg_; }
  ParamStore& params() noexcept { return store_; }
  const ParamStore& params() const noexcept { return store_; }
  const Tensor& embeddings() const noexcept { return embed_; }
  const RelationalMemory& memory() const;
  const std::vector<EncoderLayer>& encoder_layers() const noexcept { return enc_; }
  const std::vector<DecoderLayer>& decoder_layers() const noexcept { return dec_; }
  const Linear& projector() const noexcept { return projector_; }
  const Linear& output_layer() const noexcept { return out_; }
  /// base+rm only: flat memory -> logits block of the output projection.
  const Tensor& memory_readout() const noexcept { return memory_readout_; }
  const Tensor& position_table() const noexcept { return positions_; }

  /// Per-patch affine map d_feat -> d; patches carry no position.
  Tensor project_features(const Tensor& features) const;
  /// Encoder over several images; returns packed S_total x d and segments.
  Tensor encode_packed(std::span<const Tensor> features,
                       std::vector<AttentionSegment>& segments) const;
  EncodedImage encode(const Tensor& features) const;

  /// Memory rows for every packed decoder position: one flattened memory per
  /// position, computed by one lockstep rollout over the batch.
  Tensor memory_rows(std::span<const std::vector<std::size_t>> inputs) const;

  /// Teacher-forced forward over a batch.
  ForwardOutput forward(std::span<const Example> batch, bool keep_cross_maps = false) const;
  Tensor loss(std::span<const Example> batch) const;

  /// Single-sample teacher-forced decode with an explicit memory sequence
  /// (one state per target position). memory_seq is ignored in base mode.
  Tensor decode_teacher_forced(const EncodedImage& enc, std::span<const std::size_t> targets,
                               std::span<const MemoryState> memory_seq) const;

  /// Cross-attention maps [layer][head] (T x S) for the decoder reading `prefix`
  /// as its targets.
  std::vector<std::vector<std::vector<std::vector<double>>>> attention_weights(
      const Tensor& features, std::span<const std::size_t> prefix) const;

  DecoderState start(const EncodedImage& enc) const;
  /// Feeds `prev_token`, advances the state, returns log-probabilities over V.
  std::vector<double> step(const EncodedImage& enc, DecoderState& state,
                           std::size_t prev_token) const;

  std::size_t vocab() const noexcept { return cfg_.vocab; }

 private:
  Tensor decoder_inputs(std::span<const std::size_t> tokens,
                        std::span<const std::size_t> positions) const;
  Tensor run_decoder(Tensor x, const Tensor& enc_hidden,
                     std::span<const AttentionSegment> self_segs,
                     std::span<const AttentionSegment> cross_segs, const Tensor& memory,
                     std::vector<AttentionMaps>* cross_maps) const;
  Tensor normalize(const DecoderLayer& layer, std::size_t which, const Tensor& x,
                   const Tensor& memory) const;
  Tensor output_logits(const Tensor& hidden, const Tensor& memory) const;

  ModelConfig cfg_;
  ParamStore store_;
  Tensor embed_;
  Tensor positions_;  // constant sinusoidal table
  Linear projector_;
  std::vector<EncoderLayer> enc_;
  std::vector<DecoderLayer> dec_;
  std::optional<RelationalMemory> rm_;
  Linear out_;
  Tensor memory_readout_;
};

}  // namespace memdrive
