// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The memdrive Authors.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace memdrive {

enum class Ablation { Base, BaseRm, Full };

std::string to_string(Ablation a);
Ablation parse_ablation(const std::string& s);

struct ModelConfig {
  std::size_t d_model = 64;
  std::size_t heads = 8;
  std::size_t enc_layers = 3;
  std::size_t dec_layers = 3;
  std::size_t mem_slots = 3;
  std::size_t d_feat = 128;
  std::size_t vocab = 0;  // taken from the dataset vocabulary when 0
  std::size_t ffn_mult = 4;
  std::size_t max_positions = 256;
  double norm_eps = 1e-6;
  Ablation mode = Ablation::Full;

  void validate() const;
  bool uses_memory() const noexcept { return mode != Ablation::Base; }
};

struct DataConfig {
  std::size_t n_train = 2000;
  std::size_t n_val = 200;
  std::size_t n_test = 200;
  std::size_t patches = 8;
  std::size_t d_feat = 128;
  double noise = 0.3;
  double signal = 3.0;
  std::size_t styles = 3;
  std::uint64_t seed = 7;
  /// Per-category prevalence; empty selects the built-in skewed default.
  std::vector<double> marginals;

  void validate() const;
};

struct RunConfig {
  ModelConfig model;
  DataConfig data;
  double lr_visual = 5e-5;
  double lr_other = 1e-4;
  double lr_decay = 0.8;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t epochs = 20;
  std::size_t batch_size = 16;
  std::size_t beam = 3;
  std::size_t val_beam = 1;
  std::size_t max_len = 100;
  bool length_norm = false;
  std::uint64_t seed = 1;
  std::string data_dir = "data";
  std::string out_dir = "run";

  void validate() const;
  /// Learning rate of a group at 0-based epoch `epoch`.
  double lr_at(double base, std::size_t epoch) const;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);
void to_json(nlohmann::json& j, const DataConfig& c);
void from_json(const nlohmann::json& j, DataConfig& c);
void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

RunConfig load_run_config(const std::string& path);
/// Applies a dotted-path override such as "model.mem_slots=2" or "epochs=5".
void apply_override(RunConfig& cfg, const std::string& assignment);

}  // namespace memdrive
