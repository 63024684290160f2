// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The memdrive Authors.

#include "memdrive/syndata.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "memdrive/error.hpp"
#include "memdrive/rng.hpp"

namespace memdrive {

namespace {

using nlohmann::json;

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return in;
}

}  // namespace

const std::array<FindingCategory, kLabelCategories>& finding_categories() {
  static const std::array<FindingCategory, kLabelCategories> cats = {{
      {0, "enlarged_mediastinum", "the mediastinum is widened",
       {"the mediastinum is normal", "mediastinal contours are stable",
        "mediastinum within normal limits"}},
      {1, "cardiomegaly", "the heart is enlarged",
       {"heart size is normal", "the cardiac silhouette is stable", "heart within normal limits"}},
      {2, "lung_opacity", "patchy airspace opacity is present",
       {"no focal airspace opacity", "lungs are clear bilaterally", "no parenchymal opacity seen"}},
      {3, "lung_lesion", "a spiculated nodule is noted",
       {"no pulmonary nodule", "no suspicious lung mass", "no discrete nodules seen"}},
      {4, "edema", "mild interstitial edema is present",
       {"no pulmonary edema", "no vascular congestion", "pulmonary vasculature is normal"}},
      {5, "consolidation", "right lower lobe consolidation",
       {"no focal consolidation", "no lobar consolidation seen", "without focal consolidation"}},
      {6, "pneumonia", "findings concerning for pneumonia",
       {"no evidence of pneumonia", "no signs of infection", "no infiltrate to suggest pneumonia"}},
      {7, "atelectasis", "bibasilar atelectasis is seen",
       {"no atelectasis", "lung volumes are normal", "no volume loss"}},
      {8, "pneumothorax", "small apical pneumothorax is present",
       {"no pneumothorax", "no pneumothorax is seen", "no evidence of pneumothorax"}},
      {9, "pleural_effusion", "small left pleural effusion",
       {"no pleural effusion", "costophrenic angles are sharp", "no effusion is seen"}},
      {10, "pleural_other", "right pleural thickening is noted",
       {"pleura is unremarkable", "no pleural thickening", "pleural surfaces are smooth"}},
      {11, "fracture", "healed rib fracture is seen",
       {"no acute fracture", "osseous structures are intact", "bones are unremarkable"}},
      {12, "support_devices", "endotracheal tube in place",
       {"no support devices", "no lines or tubes", "no hardware is present"}},
      {13, "hernia", "large hiatal hernia is present",
       {"no hiatal hernia", "upper abdomen is unremarkable", "no abdominal abnormality"}},
  }};
  return cats;
}

const std::vector<double>& default_marginals() {
  static const std::vector<double> m = {0.10, 0.25, 0.20, 0.06, 0.15, 0.039, 0.08,
                                        0.18, 0.05, 0.22, 0.07, 0.05, 0.30, 0.04};
  return m;
}

Vocabulary::Vocabulary(std::vector<std::string> words) : words_(std::move(words)) {
  if (words_.size() < 4) throw ContractError("vocabulary must start with PAD, BOS, EOS, UNK");
  for (std::size_t i = 0; i < words_.size(); ++i)
    if (!index_.emplace(words_[i], i).second)
      throw ContractError("duplicate vocabulary word '" + words_[i] + "'");
}

Vocabulary Vocabulary::synthetic() {
  std::set<std::string> words;
  for (const auto& c : finding_categories()) {
    for (auto& w : tokenize(c.positive)) words.insert(w);
    for (const auto& n : c.normal)
      for (auto& w : tokenize(n)) words.insert(w);
  }
  std::vector<std::string> all = {"<pad>", "<bos>", "<eos>", "<unk>"};
  all.insert(all.end(), words.begin(), words.end());
  return Vocabulary(std::move(all));
}

std::size_t Vocabulary::id(const std::string& w) const {
  const auto it = index_.find(w);
  return it == index_.end() ? token::kUnk : it->second;
}

std::vector<std::size_t> Vocabulary::encode(const Tokens& tokens) const {
  std::vector<std::size_t> out;
  out.reserve(tokens.size() + 1);
  for (const auto& t : tokens) out.push_back(id(t));
  out.push_back(token::kEos);
  return out;
}

Tokens Vocabulary::decode(const std::vector<std::size_t>& ids) const {
  Tokens out;
  for (std::size_t t : ids) {
    if (t == token::kEos) break;
    if (t == token::kPad || t == token::kBos) continue;
    if (t >= words_.size()) throw ContractError("token id " + std::to_string(t) + " outside vocabulary");
    out.push_back(words_[t]);
  }
  return out;
}

Tensor SyntheticSample::feature_tensor() const {
  return Tensor::from({patches, d_feat}, features);
}

std::vector<std::vector<double>> category_signatures(std::uint64_t seed, std::size_t d_feat) {
  if (d_feat < kLabelCategories)
    throw ConfigError("feature width " + std::to_string(d_feat) + " cannot hold 14 orthogonal signatures");
  std::mt19937_64 rng(derive_seed(seed, "signatures"));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> sig;
  while (sig.size() < kLabelCategories) {
    std::vector<double> v(d_feat);
    for (auto& x : v) x = normal(rng);
    for (const auto& u : sig) {
      double dot = 0.0;
      for (std::size_t i = 0; i < d_feat; ++i) dot += v[i] * u[i];
      for (std::size_t i = 0; i < d_feat; ++i) v[i] -= dot * u[i];
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-6) continue;
    for (auto& x : v) x /= norm;
    sig.push_back(std::move(v));
  }
  return sig;
}

std::string render(const LabelSet& labels, std::size_t style) {
  std::array<bool, kLabelCategories> on{};
  for (int c : labels) {
    if (c < 0 || static_cast<std::size_t>(c) >= kLabelCategories)
      throw ContractError("label " + std::to_string(c) + " out of range");
    on[static_cast<std::size_t>(c)] = true;
  }
  std::string out;
  for (std::size_t c = 0; c < kLabelCategories; ++c) {
    const auto& cat = finding_categories()[c];
    const std::size_t phrasing = (style + c * (style / 3)) % 3;
    if (!out.empty()) out += ' ';
    out += on[c] ? cat.positive : cat.normal[phrasing];
  }
  return out;
}

LabelSet parse_labels(const Tokens& report) {
  LabelSet out;
  for (const auto& cat : finding_categories()) {
    const Tokens t = tokenize(cat.positive);
    if (std::search(report.begin(), report.end(), t.begin(), t.end()) != report.end())
      out.push_back(cat.id);
  }
  return out;
}

SyntheticSample generate_sample(const DataConfig& cfg, std::uint64_t id) {
  cfg.validate();
  static thread_local std::pair<std::pair<std::uint64_t, std::size_t>,
                                std::vector<std::vector<double>>> cache;
  if (cache.second.empty() || cache.first != std::make_pair(cfg.seed, cfg.d_feat))
    cache = {{cfg.seed, cfg.d_feat}, category_signatures(cfg.seed, cfg.d_feat)};
  const auto& sig = cache.second;
  const auto& marg = cfg.marginals.empty() ? default_marginals() : cfg.marginals;

  std::mt19937_64 rng(derive_seed(cfg.seed, id));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  SyntheticSample s;
  s.id = id;
  s.patches = cfg.patches;
  s.d_feat = cfg.d_feat;
  for (std::size_t c = 0; c < kLabelCategories; ++c)
    if (unit(rng) < marg[c]) s.labels.push_back(static_cast<int>(c));
  const std::size_t style = s.labels.size() % cfg.styles;
  s.report = render(s.labels, style);

  s.features.assign(cfg.patches * cfg.d_feat, 0.0);
  for (int c : s.labels) {
    const std::size_t patch = static_cast<std::size_t>(c) % cfg.patches;
    for (std::size_t i = 0; i < cfg.d_feat; ++i)
      s.features[patch * cfg.d_feat + i] += cfg.signal * sig[static_cast<std::size_t>(c)][i];
  }
  if (cfg.noise > 0)
    for (auto& x : s.features) x += cfg.noise * normal(rng);
  return s;
}

Dataset generate_dataset(const DataConfig& cfg) {
  cfg.validate();
  Dataset d;
  d.config = cfg;
  d.vocab = Vocabulary::synthetic();
  std::uint64_t id = 0;
  for (std::size_t i = 0; i < cfg.n_train; ++i) d.train.push_back(generate_sample(cfg, id++));
  for (std::size_t i = 0; i < cfg.n_val; ++i) d.val.push_back(generate_sample(cfg, id++));
  for (std::size_t i = 0; i < cfg.n_test; ++i) d.test.push_back(generate_sample(cfg, id++));
  return d;
}

Example to_example(const SyntheticSample& s, const Vocabulary& vocab) {
  return {s.feature_tensor(), vocab.encode(tokenize(s.report))};
}

void write_samples(const std::vector<SyntheticSample>& samples, const std::string& path) {
  auto out = open_out(path);
  for (const auto& s : samples) {
    json feats = json::array();
    for (std::size_t p = 0; p < s.patches; ++p)
      feats.push_back(std::vector<double>(s.features.begin() + static_cast<std::ptrdiff_t>(p * s.d_feat),
                                          s.features.begin() + static_cast<std::ptrdiff_t>((p + 1) * s.d_feat)));
    const json rec = {{"id", s.id}, {"features", std::move(feats)}, {"report", s.report},
                      {"labels", s.labels}};
    out << rec.dump() << '\n';
  }
  if (!out) throw IoError("write failed for " + path);
}

std::vector<SyntheticSample> load_features(const std::string& path, std::size_t patches,
                                           std::size_t d_feat) {
  auto in = open_in(path);
  std::vector<SyntheticSample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(path, lineno, std::string("malformed record: ") + e.what());
    }
    SyntheticSample s;
    try {
      s.id = rec.at("id").get<std::uint64_t>();
      s.report = rec.at("report").get<std::string>();
      s.labels = rec.at("labels").get<LabelSet>();
      const auto& feats = rec.at("features");
      if (!feats.is_array() || feats.size() != patches)
        throw ParseError(path, lineno,
                         "expected " + std::to_string(patches) + " feature rows, got " +
                             std::to_string(feats.is_array() ? feats.size() : 0));
      s.patches = patches;
      s.d_feat = d_feat;
      s.features.reserve(patches * d_feat);
      for (const auto& row : feats) {
        if (!row.is_array() || row.size() != d_feat)
          throw ParseError(path, lineno,
                           "expected d_feat=" + std::to_string(d_feat) + ", got a row of " +
                               std::to_string(row.is_array() ? row.size() : 0));
        for (const auto& v : row) s.features.push_back(v.get<double>());
      }
    } catch (const json::exception& e) {
      throw ParseError(path, lineno, std::string("bad field: ") + e.what());
    }
    for (int c : s.labels)
      if (c < 0 || static_cast<std::size_t>(c) >= kLabelCategories)
        throw ParseError(path, lineno, "label " + std::to_string(c) + " out of range");
    out.push_back(std::move(s));
  }
  return out;
}

void write_vocab(const Vocabulary& v, const std::string& path) {
  auto out = open_out(path);
  out << json(v.words()).dump(1) << '\n';
}

Vocabulary read_vocab(const std::string& path) {
  auto in = open_in(path);
  try {
    return Vocabulary(json::parse(in).get<std::vector<std::string>>());
  } catch (const json::exception& e) {
    throw ParseError(path, 1, e.what());
  }
}

void write_dataset(const Dataset& d, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
  write_samples(d.train, dir + "/train.jsonl");
  write_samples(d.val, dir + "/val.jsonl");
  write_samples(d.test, dir + "/test.jsonl");
  write_vocab(d.vocab, dir + "/vocab.json");
  auto out = open_out(dir + "/data.json");
  out << json(d.config).dump(2) << '\n';
}

Dataset read_dataset(const std::string& dir) {
  Dataset d;
  {
    auto in = open_in(dir + "/data.json");
    try {
      d.config = json::parse(in).get<DataConfig>();
    } catch (const json::exception& e) {
      throw ParseError(dir + "/data.json", 1, e.what());
    }
  }
  d.vocab = read_vocab(dir + "/vocab.json");
  d.train = load_features(dir + "/train.jsonl", d.config.patches, d.config.d_feat);
  d.val = load_features(dir + "/val.jsonl", d.config.patches, d.config.d_feat);
  d.test = load_features(dir + "/test.jsonl", d.config.patches, d.config.d_feat);
  return d;
}

}  // namespace memdrive
