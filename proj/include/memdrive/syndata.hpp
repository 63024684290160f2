// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The memdrive Authors.
//
// Synthetic report task. Each of 14 finding categories contributes one
// sentence per report, in category order: its positive template when the
// finding is present, otherwise a normal sentence. Normal sentences come in
// three phrasings; a report keeps one style throughout, chosen by the number
// of present findings, so the phrasing of every normal sentence depends on
// the whole image rather than on its own category. Features carry one
// orthonormal signature per present finding.

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "memdrive/config.hpp"
#include "memdrive/metrics.hpp"
#include "memdrive/transformer.hpp"

namespace memdrive {

struct FindingCategory {
  int id = 0;
  std::string name;
  std::string positive;                 // template; contains a word no other sentence uses
  std::array<std::string, 3> normal;    // phrasings by style
};

const std::array<FindingCategory, kLabelCategories>& finding_categories();
/// Skewed default prevalence per category.
const std::vector<double>& default_marginals();

class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> words);  // words[0..3] are the specials
  /// Specials plus every template word, sorted.
  static Vocabulary synthetic();

  std::size_t size() const noexcept { return words_.size(); }
  const std::vector<std::string>& words() const noexcept { return words_; }
  std::size_t id(const std::string& w) const;  // kUnk when absent
  /// Token ids followed by EOS.
  std::vector<std::size_t> encode(const Tokens& tokens) const;
  /// Words up to the first EOS; PAD and BOS are skipped.
  Tokens decode(const std::vector<std::size_t>& ids) const;

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct SyntheticSample {
  std::uint64_t id = 0;
  std::size_t patches = 0;
  std::size_t d_feat = 0;
  std::vector<double> features;  // patches x d_feat, row-major
  std::string report;
  LabelSet labels;  // sorted

  Tensor feature_tensor() const;
};

struct Dataset {
  DataConfig config;
  Vocabulary vocab;
  std::vector<SyntheticSample> train, val, test;
};

/// Orthonormal rows (14 x d_feat) derived from `seed`.
std::vector<std::vector<double>> category_signatures(std::uint64_t seed, std::size_t d_feat);

std::string render(const LabelSet& labels, std::size_t style);
LabelSet parse_labels(const Tokens& report);

/// Sample `id` of a dataset; a pure function of (config, id).
SyntheticSample generate_sample(const DataConfig& cfg, std::uint64_t id);
/// Ids 0..n_train-1 train, then val, then test.
Dataset generate_dataset(const DataConfig& cfg);

Example to_example(const SyntheticSample& s, const Vocabulary& vocab);

/// Directory layout: train.jsonl, val.jsonl, test.jsonl, vocab.json, data.json.
void write_dataset(const Dataset& d, const std::string& dir);
Dataset read_dataset(const std::string& dir);

void write_samples(const std::vector<SyntheticSample>& samples, const std::string& path);
/// Reads a split; every record must have `patches` x `d_feat` features.
std::vector<SyntheticSample> load_features(const std::string& path, std::size_t patches,
                                           std::size_t d_feat);

void write_vocab(const Vocabulary& v, const std::string& path);
Vocabulary read_vocab(const std::string& path);

}  // namespace memdrive
