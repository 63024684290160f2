// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The memdrive Authors.

#include "memdrive/config.hpp"

#include <cmath>
#include <fstream>

#include "memdrive/error.hpp"

namespace memdrive {

using nlohmann::json;

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::Base: return "base";
    case Ablation::BaseRm: return "base+rm";
    case Ablation::Full: return "base+rm+mcln";
  }
  return "?";
}

Ablation parse_ablation(const std::string& s) {
  if (s == "base") return Ablation::Base;
  if (s == "base+rm") return Ablation::BaseRm;
  if (s == "base+rm+mcln" || s == "full") return Ablation::Full;
  throw ConfigError("unknown ablation mode '" + s + "' (expected base, base+rm or base+rm+mcln)");
}

void ModelConfig::validate() const {
  if (d_model == 0 || heads == 0 || d_model % heads != 0)
    throw ConfigError("model width " + std::to_string(d_model) + " must be a positive multiple of " +
                      std::to_string(heads) + " heads");
  if (enc_layers == 0 || dec_layers == 0) throw ConfigError("encoder and decoder need at least one layer");
  if (uses_memory() && mem_slots == 0) throw ConfigError("memory modes need at least one slot");
  if (d_feat == 0) throw ConfigError("feature width must be positive");
  if (vocab != 0 && vocab < 4) throw ConfigError("vocabulary must hold PAD, BOS, EOS and content");
  if (!(norm_eps > 0)) throw ConfigError("norm_eps must be positive");
}

void DataConfig::validate() const {
  if (patches == 0) throw ConfigError("dataset needs at least one patch per sample");
  if (d_feat < 14) throw ConfigError("feature width must be at least 14 to hold orthogonal signatures");
  if (n_train == 0 || n_val == 0 || n_test == 0) throw ConfigError("every split needs at least one sample");
  if (noise < 0) throw ConfigError("noise must be non-negative");
  if (styles == 0) throw ConfigError("need at least one phrasing style");
  if (!marginals.empty() && marginals.size() != 14) throw ConfigError("marginals must list 14 probabilities");
  for (double p : marginals)
    if (!(p >= 0 && p <= 1)) throw ConfigError("marginals must lie in [0, 1]");
}

void RunConfig::validate() const {
  model.validate();
  data.validate();
  if (!(lr_visual > 0) || !(lr_other > 0) || !(lr_decay > 0))
    throw ConfigError("learning rates and decay must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (beam == 0 || val_beam == 0) throw ConfigError("beam width must be at least 1");
  if (max_len == 0) throw ConfigError("max_len must be at least 1");
}

double RunConfig::lr_at(double base, std::size_t epoch) const {
  return base * std::pow(lr_decay, static_cast<double>(epoch));
}

void to_json(json& j, const ModelConfig& c) {
  j = json{{"d_model", c.d_model},   {"heads", c.heads},       {"enc_layers", c.enc_layers},
           {"dec_layers", c.dec_layers}, {"mem_slots", c.mem_slots}, {"d_feat", c.d_feat},
           {"vocab", c.vocab},       {"ffn_mult", c.ffn_mult}, {"max_positions", c.max_positions},
           {"norm_eps", c.norm_eps}, {"mode", to_string(c.mode)}};
}

void from_json(const json& j, ModelConfig& c) {
  c.d_model = j.value("d_model", c.d_model);
  c.heads = j.value("heads", c.heads);
  c.enc_layers = j.value("enc_layers", c.enc_layers);
  c.dec_layers = j.value("dec_layers", c.dec_layers);
  c.mem_slots = j.value("mem_slots", c.mem_slots);
  c.d_feat = j.value("d_feat", c.d_feat);
  c.vocab = j.value("vocab", c.vocab);
  c.ffn_mult = j.value("ffn_mult", c.ffn_mult);
  c.max_positions = j.value("max_positions", c.max_positions);
  c.norm_eps = j.value("norm_eps", c.norm_eps);
  if (j.contains("mode")) c.mode = parse_ablation(j.at("mode").get<std::string>());
}

void to_json(json& j, const DataConfig& c) {
  j = json{{"n_train", c.n_train}, {"n_val", c.n_val},   {"n_test", c.n_test},
           {"patches", c.patches}, {"d_feat", c.d_feat}, {"noise", c.noise},
           {"signal", c.signal},   {"styles", c.styles}, {"seed", c.seed},
           {"marginals", c.marginals}};
}

void from_json(const json& j, DataConfig& c) {
  c.n_train = j.value("n_train", c.n_train);
  c.n_val = j.value("n_val", c.n_val);
  c.n_test = j.value("n_test", c.n_test);
  c.patches = j.value("patches", c.patches);
  c.d_feat = j.value("d_feat", c.d_feat);
  c.noise = j.value("noise", c.noise);
  c.signal = j.value("signal", c.signal);
  c.styles = j.value("styles", c.styles);
  c.seed = j.value("seed", c.seed);
  c.marginals = j.value("marginals", c.marginals);
}

void to_json(json& j, const RunConfig& c) {
  j = json{{"model", c.model},         {"data", c.data},
           {"lr_visual", c.lr_visual}, {"lr_other", c.lr_other},
           {"lr_decay", c.lr_decay},   {"adam_beta1", c.adam_beta1},
           {"adam_beta2", c.adam_beta2}, {"adam_eps", c.adam_eps},
           {"epochs", c.epochs},       {"batch_size", c.batch_size},
           {"beam", c.beam},           {"val_beam", c.val_beam},
           {"max_len", c.max_len},     {"length_norm", c.length_norm},
           {"seed", c.seed},           {"data_dir", c.data_dir},
           {"out_dir", c.out_dir}};
}

void from_json(const json& j, RunConfig& c) {
  static const char* known[] = {"model", "data", "lr_visual", "lr_other", "lr_decay", "adam_beta1",
                                "adam_beta2", "adam_eps", "epochs", "batch_size", "beam", "val_beam",
                                "max_len", "length_norm", "seed", "data_dir", "out_dir"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw ConfigError("unknown config key '" + it.key() + "'");
  }
  if (j.contains("model")) c.model = j.at("model").get<ModelConfig>();
  if (j.contains("data")) c.data = j.at("data").get<DataConfig>();
  c.lr_visual = j.value("lr_visual", c.lr_visual);
  c.lr_other = j.value("lr_other", c.lr_other);
  c.lr_decay = j.value("lr_decay", c.lr_decay);
  c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.beam = j.value("beam", c.beam);
  c.val_beam = j.value("val_beam", c.val_beam);
  c.max_len = j.value("max_len", c.max_len);
  c.length_norm = j.value("length_norm", c.length_norm);
  c.seed = j.value("seed", c.seed);
  c.data_dir = j.value("data_dir", c.data_dir);
  c.out_dir = j.value("out_dir", c.out_dir);
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  try {
    RunConfig c = json::parse(in).get<RunConfig>();
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;  // bare strings such as paths or mode names
  }
  try {
    json j = cfg;
    json::json_pointer ptr("/" + [&] {
      std::string p = key;
      for (char& ch : p)
        if (ch == '.') ch = '/';
      return p;
    }());
    if (!j.contains(ptr)) throw ConfigError("unknown config key '" + key + "'");
    j[ptr] = value;
    cfg = j.get<RunConfig>();
  } catch (const json::exception& e) {
    throw ConfigError("override '" + assignment + "': " + e.what());
  }
}

}  // namespace memdrive
