// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The memdrive Authors.
//
// Binary checkpoint archive. Layout (all integers and floats little-endian):
//
//   8 bytes   magic "MDCKPT\0\0"
//   u32       format version (1)
//   u64 n     metadata length, then n bytes of UTF-8 JSON
//   u64 p     parameter count, then p records of
//               u32 len, len bytes name, u32 rank, rank x u64 dims,
//               numel x f64 values
//   u8        1 if optimizer state follows, else 0
//   [f64 beta1, f64 beta2, f64 epsilon, f64 lr_visual, f64 lr_other,
//    u64 step, then for each parameter in order: numel x f64 m, numel x f64 v]
//
// See docs/FORMATS.md.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "memdrive/adam.hpp"
#include "memdrive/params.hpp"

namespace memdrive {

struct StoredArray {
  std::string name;
  std::vector<std::uint64_t> dims;
  std::vector<double> values;
};

struct CheckpointData {
  std::string metadata;
  std::vector<StoredArray> arrays;
  std::optional<AdamState> optimizer;
};

void write_checkpoint(const std::string& path, const ParamStore& store, const AdamState* optimizer,
                      const std::string& metadata);
CheckpointData read_checkpoint(const std::string& path);

/// Copies stored values into `store`; names and shapes must match exactly.
void load_parameters(const CheckpointData& ckpt, ParamStore& store);

}  // namespace memdrive
