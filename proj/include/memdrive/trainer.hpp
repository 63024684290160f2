// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The memdrive Authors.
//
// Training, evaluation and export drivers behind the CLI. Every output is a
// pure function of (config, dataset): shuffling and initialization derive
// from the run seed, and no timestamps or paths enter checkpoints.

#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "memdrive/config.hpp"
#include "memdrive/metrics.hpp"
#include "memdrive/syndata.hpp"
#include "memdrive/transformer.hpp"

namespace memdrive {

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based, completed
  double mean_loss = 0.0;
  double val_bleu4 = 0.0;
  double lr_visual = 0.0;
  double lr_other = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> epochs;  // only the epochs run by this call
  std::vector<double> step_losses;  // likewise
  std::size_t best_epoch = 0;
  double best_val_bleu4 = -1.0;
  std::string best_checkpoint;
  std::string last_checkpoint;
};

struct TrainOptions {
  std::optional<std::string> resume;  // checkpoint to continue from
  std::ostream* progress = nullptr;
};

/// Teacher-forced training with per-epoch validation. Writes into
/// cfg.out_dir: epoch_<k>.ckpt, last.ckpt, best.ckpt, loss.tsv, epochs.tsv.
TrainResult train(const RunConfig& cfg, const Dataset& data, const TrainOptions& options = {});

/// Model config with the vocabulary and feature width taken from the data.
ModelConfig resolve_model_config(const RunConfig& cfg, const Dataset& data);

struct LoadedModel {
  RunConfig config;
  std::vector<std::string> vocab;
  std::unique_ptr<Model> model;
};
LoadedModel load_model(const std::string& checkpoint_path);

struct GenerationRecord {
  std::uint64_t id = 0;
  std::string reference;
  std::string hypothesis;
  double score = 0.0;  // cumulative log-probability
};

struct Evaluation {
  MetricsReport report;
  std::vector<GenerationRecord> generations;
};

/// Decodes every sample (beam 1 is greedy) and scores the corpus.
Evaluation evaluate(const Model& model, const Vocabulary& vocab,
                    const std::vector<SyntheticSample>& samples, std::size_t beam,
                    std::size_t max_len, bool length_norm);
/// Metrics for already-decoded text against the samples' reports and labels.
MetricsReport score_corpus(const std::vector<std::string>& hypotheses,
                           const std::vector<SyntheticSample>& samples);
/// Throws ContractError when the checkpoint vocabulary differs from the data's.
void check_vocab(const std::vector<std::string>& checkpoint_vocab, const Vocabulary& data_vocab);

/// metrics.txt, metrics.json and generations.jsonl.
void write_evaluation(const Evaluation& eval, const std::string& dir);
std::vector<GenerationRecord> read_generations(const std::string& path);

struct SweepRow {
  std::size_t slots = 0;
  std::size_t parameters = 0;
  MetricsReport report;
};
/// Trains and tests one model per slot count under out_dir/slots_<n>; writes
/// out_dir/sweep.tsv.
std::vector<SweepRow> sweep_memory(const RunConfig& cfg, const Dataset& data,
                                   const std::vector<std::size_t>& slots,
                                   std::ostream* progress = nullptr);
std::string sweep_table(const std::vector<SweepRow>& rows);

struct AttentionExport {
  std::uint64_t id = 0;
  std::vector<std::string> tokens;  // generated, EOS included
  std::size_t patches = 0;
  std::vector<std::vector<std::vector<double>>> heads;  // [head][t][patch]
  std::vector<std::vector<double>> mean;                // [t][patch]
};
/// First-decoder-layer cross-attention while reading the model's own output.
AttentionExport export_attention(const Model& model, const Vocabulary& vocab,
                                 const SyntheticSample& sample, std::size_t beam,
                                 std::size_t max_len);
std::string attention_json(const AttentionExport& e);

/// Side-by-side histogram TSV of hypothesis and reference lengths.
std::string length_table(const std::vector<GenerationRecord>& generations);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace memdrive
