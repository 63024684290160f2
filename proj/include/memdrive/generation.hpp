// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The memdrive Authors.

#pragma once

#include <vector>

#include "memdrive/transformer.hpp"

namespace memdrive {

struct Hypothesis {
  std::vector<std::size_t> tokens;  // includes EOS when finished
  double score = 0.0;               // sum of per-step log-probabilities
  DecoderState state;
  bool finished = false;
};

struct ScoredSequence {
  std::vector<std::size_t> tokens;
  double score = 0.0;
  bool finished = false;
};

struct DecodeOptions {
  std::size_t beam = 3;
  std::size_t max_len = 100;
  /// Rank final hypotheses by score / length instead of raw score.
  bool length_norm = false;
};

/// Argmax token per step (lowest id on ties) until EOS or max_len tokens.
std::vector<std::size_t> greedy_decode(const Model& model, const EncodedImage& enc,
                                       std::size_t max_len);

/// Beam search with one decoder/memory state per hypothesis. Returns every
/// finished hypothesis plus the survivors at max_len, best first. Ties go to
/// the earlier EOS, then to the lexicographically smaller token sequence.
std::vector<ScoredSequence> beam_search(const Model& model, const EncodedImage& enc,
                                        const DecodeOptions& options);

/// Tokens without the trailing EOS.
std::vector<std::size_t> strip_eos(std::vector<std::size_t> tokens);

}  // namespace memdrive
