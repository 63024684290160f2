// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The memdrive Authors.
//
// Corpus metrics over whitespace-tokenized text. Candidates and references
// are parallel lists; every function rejects an empty or mismatched corpus.

#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace memdrive {

inline constexpr std::size_t kLabelCategories = 14;
inline constexpr std::size_t kLengthBins = 10;  // width 10 over [0, 100), plus overflow

using Tokens = std::vector<std::string>;

/// Lowercase, strip punctuation, split on whitespace.
Tokens tokenize(std::string_view text);

struct BleuResult {
  std::vector<double> bleu;       // bleu[n-1] = BLEU-n
  std::vector<double> precision;  // clipped n-gram precision per order
  double brevity_penalty = 0.0;
  std::size_t candidate_length = 0;
  std::size_t reference_length = 0;
};

BleuResult bleu_detail(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references,
                       std::size_t max_n = 4);
std::vector<double> bleu(const std::vector<Tokens>& candidates,
                         const std::vector<Tokens>& references, std::size_t max_n = 4);

inline constexpr double kRougeBeta = 1.2;
std::size_t lcs_length(const Tokens& a, const Tokens& b);
double rouge_l_pair(const Tokens& candidate, const Tokens& reference, double beta = kRougeBeta);
double rouge_l(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references,
               double beta = kRougeBeta);

struct MeteorAlignment {
  std::size_t matches = 0;
  std::size_t chunks = 0;
};
/// Exact-match alignment. Each candidate token takes the unused reference
/// position that continues the current chunk if there is one, else the
/// leftmost unused match.
MeteorAlignment meteor_align(const Tokens& candidate, const Tokens& reference);
double meteor_pair(const Tokens& candidate, const Tokens& reference);
/// Mean of per-pair scores.
double meteor_lite(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references);

using LabelSet = std::vector<int>;

struct LabelScores {
  std::array<double, kLabelCategories> precision{};
  std::array<double, kLabelCategories> recall{};
  std::array<double, kLabelCategories> f1{};
  std::array<std::size_t, kLabelCategories> true_pos{}, false_pos{}, false_neg{};
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
};

/// Per-category binary P/R/F1 and their macro averages. A ratio with a zero
/// denominator is 1 when the category has no errors of that kind and no
/// positives at all, otherwise 0.
LabelScores label_efficacy(const std::vector<LabelSet>& predicted,
                           const std::vector<LabelSet>& gold);

using LengthHistogram = std::array<std::size_t, kLengthBins + 1>;
LengthHistogram length_histogram(const std::vector<Tokens>& reports);
std::string length_bin_name(std::size_t bin);

struct MetricsReport {
  std::vector<double> bleu = std::vector<double>(4, 0.0);
  double meteor = 0.0;
  double rouge_l = 0.0;
  LabelScores labels;
  LengthHistogram lengths{};
  std::size_t samples = 0;
  std::optional<double> avg_delta;
  std::string baseline;

  /// The six NLG scores in a fixed order: BLEU-1..4, METEOR, ROUGE-L.
  std::array<double, 6> nlg() const;
};

inline constexpr std::array<const char*, 6> kNlgNames = {"bleu_1", "bleu_2", "bleu_3",
                                                         "bleu_4", "meteor", "rouge_l"};

/// Mean relative change over the six NLG metrics. Metrics whose baseline is 0
/// are skipped and named in `skipped`; returns 0 if every metric is skipped.
double avg_delta(const MetricsReport& report, const MetricsReport& baseline,
                 std::vector<std::string>* skipped = nullptr);

MetricsReport compute_report(const std::vector<Tokens>& candidates,
                             const std::vector<Tokens>& references,
                             const std::vector<LabelSet>& predicted,
                             const std::vector<LabelSet>& gold);

nlohmann::json report_to_json(const MetricsReport& r);
MetricsReport report_from_json(const nlohmann::json& j);
/// Flat `key=value` lines, fixed order, %.17g reals.
std::string report_to_text(const MetricsReport& r);
MetricsReport read_report(const std::string& json_path);

}  // namespace memdrive
