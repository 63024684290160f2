// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The memdrive Authors.

#include "memdrive/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "memdrive/error.hpp"

namespace memdrive {

namespace {

void check_corpus(const char* who, std::size_t nc, std::size_t nr) {
  if (nc == 0) throw ContractError(std::string(who) + ": empty corpus");
  if (nc != nr)
    throw ContractError(std::string(who) + ": " + std::to_string(nc) + " candidates but " +
                        std::to_string(nr) + " references");
}

using NgramCounts = std::map<std::vector<std::string_view>, std::size_t>;

NgramCounts ngrams(const Tokens& t, std::size_t n) {
  NgramCounts out;
  if (t.size() < n) return out;
  for (std::size_t i = 0; i + n <= t.size(); ++i) {
    std::vector<std::string_view> g(t.begin() + static_cast<std::ptrdiff_t>(i),
                                    t.begin() + static_cast<std::ptrdiff_t>(i + n));
    ++out[g];
  }
  return out;
}

double ratio_or(std::size_t num, std::size_t den, double fallback) {
  return den == 0 ? fallback : static_cast<double>(num) / static_cast<double>(den);
}

std::string fmt_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Tokens tokenize(std::string_view text) {
  Tokens out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
    } else if (!std::ispunct(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

BleuResult bleu_detail(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references,
                       std::size_t max_n) {
  check_corpus("bleu", candidates.size(), references.size());
  if (max_n == 0) throw ContractError("bleu: max_n must be at least 1");
  BleuResult r;
  std::vector<std::size_t> clipped(max_n, 0), total(max_n, 0);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    r.candidate_length += candidates[i].size();
    r.reference_length += references[i].size();
    for (std::size_t n = 1; n <= max_n; ++n) {
      const auto cand = ngrams(candidates[i], n);
      const auto ref = ngrams(references[i], n);
      for (const auto& [g, count] : cand) {
        total[n - 1] += count;
        const auto it = ref.find(g);
        if (it != ref.end()) clipped[n - 1] += std::min(count, it->second);
      }
    }
  }
  for (std::size_t n = 0; n < max_n; ++n) r.precision.push_back(ratio_or(clipped[n], total[n], 0.0));

  if (r.candidate_length == 0) {
    r.brevity_penalty = 0.0;
  } else if (r.candidate_length > r.reference_length) {
    r.brevity_penalty = 1.0;
  } else {
    r.brevity_penalty = std::exp(1.0 - static_cast<double>(r.reference_length) /
                                           static_cast<double>(r.candidate_length));
  }
  double log_sum = 0.0;
  bool zero = false;
  for (std::size_t n = 0; n < max_n; ++n) {
    if (r.precision[n] == 0.0) zero = true;
    if (!zero) log_sum += std::log(r.precision[n]);
    r.bleu.push_back(zero ? 0.0 : r.brevity_penalty * std::exp(log_sum / static_cast<double>(n + 1)));
  }
  return r;
}

std::vector<double> bleu(const std::vector<Tokens>& candidates,
                         const std::vector<Tokens>& references, std::size_t max_n) {
  return bleu_detail(candidates, references, max_n).bleu;
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l_pair(const Tokens& candidate, const Tokens& reference, double beta) {
  if (candidate.empty() && reference.empty()) return 1.0;
  const std::size_t l = lcs_length(candidate, reference);
  if (l == 0) return 0.0;
  const double p = static_cast<double>(l) / static_cast<double>(candidate.size());
  const double r = static_cast<double>(l) / static_cast<double>(reference.size());
  const double b2 = beta * beta;
  return (1.0 + b2) * p * r / (r + b2 * p);
}

double rouge_l(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references,
               double beta) {
  check_corpus("rouge_l", candidates.size(), references.size());
  double s = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i)
    s += rouge_l_pair(candidates[i], references[i], beta);
  return s / static_cast<double>(candidates.size());
}

MeteorAlignment meteor_align(const Tokens& candidate, const Tokens& reference) {
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<bool> used(reference.size(), false);
  MeteorAlignment a;
  std::size_t prev = kNone;  // reference index aligned to the previous candidate token
  for (const auto& tok : candidate) {
    std::size_t pick = kNone;
    if (prev != kNone && prev + 1 < reference.size() && !used[prev + 1] &&
        reference[prev + 1] == tok) {
      pick = prev + 1;
    } else {
      for (std::size_t j = 0; j < reference.size(); ++j)
        if (!used[j] && reference[j] == tok) {
          pick = j;
          break;
        }
    }
    if (pick == kNone) {
      prev = kNone;
      continue;
    }
    used[pick] = true;
    ++a.matches;
    if (prev == kNone || pick != prev + 1) ++a.chunks;
    prev = pick;
  }
  return a;
}

double meteor_pair(const Tokens& candidate, const Tokens& reference) {
  const MeteorAlignment a = meteor_align(candidate, reference);
  if (a.matches == 0) return 0.0;
  const double m = static_cast<double>(a.matches);
  const double p = m / static_cast<double>(candidate.size());
  const double r = m / static_cast<double>(reference.size());
  const double fmean = 10.0 * p * r / (r + 9.0 * p);
  const double frag = static_cast<double>(a.chunks) / m;
  return fmean * (1.0 - 0.5 * frag * frag * frag);
}

double meteor_lite(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references) {
  check_corpus("meteor_lite", candidates.size(), references.size());
  double s = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) s += meteor_pair(candidates[i], references[i]);
  return s / static_cast<double>(candidates.size());
}

LabelScores label_efficacy(const std::vector<LabelSet>& predicted,
                           const std::vector<LabelSet>& gold) {
  if (predicted.size() != gold.size())
    throw ContractError("label_efficacy: " + std::to_string(predicted.size()) +
                        " predictions but " + std::to_string(gold.size()) + " gold sets");
  LabelScores s;
  auto mark = [](const LabelSet& set) {
    std::array<bool, kLabelCategories> on{};
    for (int c : set) {
      if (c < 0 || static_cast<std::size_t>(c) >= kLabelCategories)
        throw ContractError("label_efficacy: category " + std::to_string(c) + " out of range");
      on[static_cast<std::size_t>(c)] = true;
    }
    return on;
  };
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const auto p = mark(predicted[i]);
    const auto g = mark(gold[i]);
    for (std::size_t c = 0; c < kLabelCategories; ++c) {
      if (p[c] && g[c]) ++s.true_pos[c];
      if (p[c] && !g[c]) ++s.false_pos[c];
      if (!p[c] && g[c]) ++s.false_neg[c];
    }
  }
  for (std::size_t c = 0; c < kLabelCategories; ++c) {
    const std::size_t tp = s.true_pos[c], fp = s.false_pos[c], fn = s.false_neg[c];
    s.precision[c] = ratio_or(tp, tp + fp, fn == 0 ? 1.0 : 0.0);
    s.recall[c] = ratio_or(tp, tp + fn, fp == 0 ? 1.0 : 0.0);
    const double pr = s.precision[c] + s.recall[c];
    s.f1[c] = pr == 0.0 ? 0.0 : 2.0 * s.precision[c] * s.recall[c] / pr;
    s.macro_precision += s.precision[c];
    s.macro_recall += s.recall[c];
    s.macro_f1 += s.f1[c];
  }
  const double k = static_cast<double>(kLabelCategories);
  s.macro_precision /= k;
  s.macro_recall /= k;
  s.macro_f1 /= k;
  return s;
}

LengthHistogram length_histogram(const std::vector<Tokens>& reports) {
  LengthHistogram h{};
  for (const auto& r : reports) ++h[std::min(r.size() / 10, kLengthBins)];
  return h;
}

std::string length_bin_name(std::size_t bin) {
  if (bin >= kLengthBins) return "[" + std::to_string(kLengthBins * 10) + ",inf)";
  return "[" + std::to_string(bin * 10) + "," + std::to_string(bin * 10 + 10) + ")";
}

std::array<double, 6> MetricsReport::nlg() const {
  return {bleu.at(0), bleu.at(1), bleu.at(2), bleu.at(3), meteor, rouge_l};
}

double avg_delta(const MetricsReport& report, const MetricsReport& baseline,
                 std::vector<std::string>* skipped) {
  const auto a = report.nlg();
  const auto b = baseline.nlg();
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (b[i] == 0.0) {
      if (skipped) skipped->push_back(kNlgNames[i]);
      continue;
    }
    s += (a[i] - b[i]) / b[i];
    ++n;
  }
  return n == 0 ? 0.0 : s / static_cast<double>(n);
}

MetricsReport compute_report(const std::vector<Tokens>& candidates,
                             const std::vector<Tokens>& references,
                             const std::vector<LabelSet>& predicted,
                             const std::vector<LabelSet>& gold) {
  MetricsReport r;
  r.samples = candidates.size();
  r.bleu = bleu(candidates, references, 4);
  r.meteor = meteor_lite(candidates, references);
  r.rouge_l = rouge_l(candidates, references);
  r.labels = label_efficacy(predicted, gold);
  r.lengths = length_histogram(candidates);
  return r;
}

nlohmann::json report_to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["samples"] = r.samples;
  const auto nlg = r.nlg();
  for (std::size_t i = 0; i < nlg.size(); ++i) j[kNlgNames[i]] = nlg[i];
  j["label_precision"] = r.labels.macro_precision;
  j["label_recall"] = r.labels.macro_recall;
  j["label_f1"] = r.labels.macro_f1;
  nlohmann::json cats = nlohmann::json::array();
  for (std::size_t c = 0; c < kLabelCategories; ++c)
    cats.push_back({{"category", c},
                    {"precision", r.labels.precision[c]},
                    {"recall", r.labels.recall[c]},
                    {"f1", r.labels.f1[c]},
                    {"tp", r.labels.true_pos[c]},
                    {"fp", r.labels.false_pos[c]},
                    {"fn", r.labels.false_neg[c]}});
  j["label_categories"] = cats;
  j["length_histogram"] = r.lengths;
  if (r.avg_delta) {
    j["avg_delta"] = *r.avg_delta;
    j["baseline"] = r.baseline;
  }
  return j;
}

MetricsReport report_from_json(const nlohmann::json& j) {
  MetricsReport r;
  try {
    r.samples = j.at("samples").get<std::size_t>();
    for (std::size_t i = 0; i < 4; ++i) r.bleu[i] = j.at(kNlgNames[i]).get<double>();
    r.meteor = j.at("meteor").get<double>();
    r.rouge_l = j.at("rouge_l").get<double>();
    r.labels.macro_precision = j.at("label_precision").get<double>();
    r.labels.macro_recall = j.at("label_recall").get<double>();
    r.labels.macro_f1 = j.at("label_f1").get<double>();
    if (j.contains("label_categories")) {
      for (const auto& c : j.at("label_categories")) {
        const auto k = c.at("category").get<std::size_t>();
        if (k >= kLabelCategories) throw ConfigError("metrics report: category out of range");
        r.labels.precision[k] = c.at("precision").get<double>();
        r.labels.recall[k] = c.at("recall").get<double>();
        r.labels.f1[k] = c.at("f1").get<double>();
        r.labels.true_pos[k] = c.at("tp").get<std::size_t>();
        r.labels.false_pos[k] = c.at("fp").get<std::size_t>();
        r.labels.false_neg[k] = c.at("fn").get<std::size_t>();
      }
    }
    if (j.contains("length_histogram")) r.lengths = j.at("length_histogram").get<LengthHistogram>();
    if (j.contains("avg_delta")) {
      r.avg_delta = j.at("avg_delta").get<double>();
      r.baseline = j.value("baseline", "");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("metrics report", 1, e.what());
  }
  return r;
}

std::string report_to_text(const MetricsReport& r) {
  std::string out;
  auto kv = [&](const std::string& k, const std::string& v) { out += k + "=" + v + "\n"; };
  kv("samples", std::to_string(r.samples));
  const auto nlg = r.nlg();
  for (std::size_t i = 0; i < nlg.size(); ++i) kv(kNlgNames[i], fmt_real(nlg[i]));
  kv("label_precision", fmt_real(r.labels.macro_precision));
  kv("label_recall", fmt_real(r.labels.macro_recall));
  kv("label_f1", fmt_real(r.labels.macro_f1));
  for (std::size_t c = 0; c < kLabelCategories; ++c) {
    const std::string p = "label." + std::to_string(c) + ".";
    kv(p + "precision", fmt_real(r.labels.precision[c]));
    kv(p + "recall", fmt_real(r.labels.recall[c]));
    kv(p + "f1", fmt_real(r.labels.f1[c]));
  }
  for (std::size_t b = 0; b <= kLengthBins; ++b)
    kv("length" + length_bin_name(b), std::to_string(r.lengths[b]));
  if (r.avg_delta) {
    kv("avg_delta", fmt_real(*r.avg_delta));
    kv("baseline", r.baseline);
  }
  return out;
}

MetricsReport read_report(const std::string& json_path) {
  std::ifstream in(json_path);
  if (!in) throw IoError("cannot open metrics report " + json_path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(json_path, 1, e.what());
  }
  return report_from_json(j);
}

}  // namespace memdrive
