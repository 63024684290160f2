// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The memdrive Authors.

#include "memdrive/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "memdrive/adam.hpp"
#include "memdrive/checkpoint.hpp"
#include "memdrive/error.hpp"
#include "memdrive/generation.hpp"
#include "memdrive/rng.hpp"

namespace memdrive {

namespace {

using nlohmann::json;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void make_dirs(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
}

/// Run config without paths, so relocating a run changes no checkpoint byte.
json portable_config(const RunConfig& cfg) {
  json j = cfg;
  j.erase("data_dir");
  j.erase("out_dir");
  return j;
}

std::vector<std::size_t> epoch_order(std::uint64_t seed, std::size_t epoch, std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(derive_seed(derive_seed(seed, "shuffle"), epoch));
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

std::string checkpoint_metadata(const RunConfig& cfg, const Vocabulary& vocab, std::size_t epoch,
                                double val_bleu4, std::size_t best_epoch, double best_bleu4) {
  json meta = {{"config", portable_config(cfg)},
               {"vocab", vocab.words()},
               {"epoch", epoch},
               {"val_bleu4", val_bleu4},
               {"best_epoch", best_epoch},
               {"best_val_bleu4", best_bleu4}};
  return meta.dump();
}

/// Keeps loss.tsv rows from epochs before `first_epoch` (1-based).
std::string surviving_loss_rows(const std::string& path, std::size_t first_epoch) {
  std::ifstream in(path);
  std::string out, line;
  if (!in) return out;
  while (std::getline(in, line)) {
    if (line.empty() || line.rfind("epoch", 0) == 0) continue;
    const std::size_t e = std::stoul(line.substr(0, line.find('\t')));
    if (e < first_epoch) out += line + "\n";
  }
  return out;
}

}  // namespace

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << content;
  if (!out) throw IoError("write failed for " + path);
}

ModelConfig resolve_model_config(const RunConfig& cfg, const Dataset& data) {
  ModelConfig mc = cfg.model;
  if (mc.vocab == 0) mc.vocab = data.vocab.size();
  if (mc.vocab != data.vocab.size())
    throw ConfigError("model.vocab=" + std::to_string(mc.vocab) + " but the dataset vocabulary has " +
                      std::to_string(data.vocab.size()) + " words");
  if (mc.d_feat != data.config.d_feat)
    throw ConfigError("model.d_feat=" + std::to_string(mc.d_feat) + " but the dataset has d_feat=" +
                      std::to_string(data.config.d_feat));
  return mc;
}

void check_vocab(const std::vector<std::string>& checkpoint_vocab, const Vocabulary& data_vocab) {
  if (checkpoint_vocab != data_vocab.words())
    throw ContractError("checkpoint vocabulary (" + std::to_string(checkpoint_vocab.size()) +
                        " words) does not match the dataset vocabulary (" +
                        std::to_string(data_vocab.size()) + " words)");
}

TrainResult train(const RunConfig& cfg_in, const Dataset& data, const TrainOptions& options) {
  RunConfig cfg = cfg_in;
  cfg.validate();
  cfg.model = resolve_model_config(cfg, data);
  make_dirs(cfg.out_dir);

  Model model(cfg.model, cfg.seed);
  AdamState opt = AdamState::for_params(
      model.params(), AdamHyper{cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps});
  std::size_t start_epoch = 0;
  TrainResult result;

  if (options.resume) {
    const CheckpointData ck = read_checkpoint(*options.resume);
    json meta;
    try {
      meta = json::parse(ck.metadata);
    } catch (const json::exception& e) {
      throw ParseError(*options.resume, 1, e.what());
    }
    json stored = meta.at("config"), current = portable_config(cfg);
    stored.erase("epochs");
    current.erase("epochs");
    if (stored != current)
      throw ConfigError("resume checkpoint was written with a different configuration");
    check_vocab(meta.at("vocab").get<std::vector<std::string>>(), data.vocab);
    load_parameters(ck, model.params());
    if (!ck.optimizer) throw ContractError("resume checkpoint has no optimizer state");
    opt = *ck.optimizer;
    start_epoch = meta.at("epoch").get<std::size_t>();
    result.best_epoch = meta.at("best_epoch").get<std::size_t>();
    result.best_val_bleu4 = meta.at("best_val_bleu4").get<double>();
  }

  std::vector<Example> train_examples;
  train_examples.reserve(data.train.size());
  for (const auto& s : data.train) train_examples.push_back(to_example(s, data.vocab));

  const std::string loss_path = cfg.out_dir + "/loss.tsv";
  const std::string epochs_path = cfg.out_dir + "/epochs.tsv";
  std::string loss_log = "epoch\tstep\tloss\n" + surviving_loss_rows(loss_path, start_epoch + 1);
  std::string epoch_log = "epoch\tmean_loss\tval_bleu4\tlr_visual\tlr_other\n";
  {
    std::ifstream in(epochs_path);
    std::string line;
    while (in && std::getline(in, line)) {
      if (line.empty() || line.rfind("epoch", 0) == 0) continue;
      if (std::stoul(line.substr(0, line.find('\t'))) <= start_epoch) epoch_log += line + "\n";
    }
  }

  for (std::size_t epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    opt.group_lr(ParamGroup::Visual) = cfg.lr_at(cfg.lr_visual, epoch);
    opt.group_lr(ParamGroup::Other) = cfg.lr_at(cfg.lr_other, epoch);
    const auto order = epoch_order(cfg.seed, epoch, train_examples.size());
    double loss_sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), b + cfg.batch_size);
      std::vector<Example> batch;
      for (std::size_t i = b; i < end; ++i) batch.push_back(train_examples[order[i]]);
      const Tensor loss = model.loss(batch);
      const double value = loss.item();
      if (!std::isfinite(value)) {
        json dump = {{"epoch", epoch + 1}, {"step", steps}, {"loss", fmt(value)}};
        for (std::size_t i = b; i < end; ++i) {
          const auto& s = data.train[order[i]];
          dump["samples"].push_back({{"id", s.id}, {"report", s.report}, {"labels", s.labels}});
        }
        write_text_file(cfg.out_dir + "/nan_batch.json", dump.dump(2) + "\n");
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch + 1) + " step " +
                           std::to_string(steps) + "; batch written to " + cfg.out_dir +
                           "/nan_batch.json");
      }
      backward(loss);
      adam_step(model.params(), opt);
      loss_log += std::to_string(epoch + 1) + "\t" + std::to_string(steps) + "\t" + fmt(value) + "\n";
      result.step_losses.push_back(value);
      loss_sum += value;
      ++steps;
    }

    const Evaluation val = evaluate(model, data.vocab, data.val, cfg.val_beam, cfg.max_len,
                                    cfg.length_norm);
    EpochRecord rec{epoch + 1, loss_sum / static_cast<double>(steps), val.report.bleu[3],
                    opt.group_lr(ParamGroup::Visual), opt.group_lr(ParamGroup::Other)};
    result.epochs.push_back(rec);
    const bool improved = rec.val_bleu4 > result.best_val_bleu4;
    if (improved) {
      result.best_val_bleu4 = rec.val_bleu4;
      result.best_epoch = rec.epoch;
    }
    const std::string meta = checkpoint_metadata(cfg, data.vocab, rec.epoch, rec.val_bleu4,
                                                 result.best_epoch, result.best_val_bleu4);
    const std::string epoch_path = cfg.out_dir + "/epoch_" + std::to_string(rec.epoch) + ".ckpt";
    write_checkpoint(epoch_path, model.params(), &opt, meta);
    write_checkpoint(cfg.out_dir + "/last.ckpt", model.params(), &opt, meta);
    if (improved) write_checkpoint(cfg.out_dir + "/best.ckpt", model.params(), &opt, meta);

    epoch_log += std::to_string(rec.epoch) + "\t" + fmt(rec.mean_loss) + "\t" + fmt(rec.val_bleu4) +
                 "\t" + fmt(rec.lr_visual) + "\t" + fmt(rec.lr_other) + "\n";
    write_text_file(loss_path, loss_log);
    write_text_file(epochs_path, epoch_log);
    if (options.progress) {
      char line[160];
      std::snprintf(line, sizeof line, "epoch %zu/%zu loss %.4f val_bleu4 %.4f%s\n", rec.epoch,
                    cfg.epochs, rec.mean_loss, rec.val_bleu4, improved ? " *" : "");
      *options.progress << line << std::flush;
    }
  }
  if (cfg.epochs == start_epoch) {
    write_text_file(loss_path, loss_log);
    write_text_file(epochs_path, epoch_log);
  }
  result.best_checkpoint = cfg.out_dir + "/best.ckpt";
  result.last_checkpoint = cfg.out_dir + "/last.ckpt";
  return result;
}

LoadedModel load_model(const std::string& checkpoint_path) {
  const CheckpointData ck = read_checkpoint(checkpoint_path);
  LoadedModel out;
  try {
    const json meta = json::parse(ck.metadata);
    out.config = meta.at("config").get<RunConfig>();
    out.vocab = meta.at("vocab").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ParseError(checkpoint_path, 1, std::string("bad checkpoint metadata: ") + e.what());
  }
  if (out.config.model.vocab != out.vocab.size())
    throw ContractError(checkpoint_path + ": model vocabulary size disagrees with stored vocabulary");
  out.model = std::make_unique<Model>(out.config.model, out.config.seed);
  load_parameters(ck, out.model->params());
  return out;
}

MetricsReport score_corpus(const std::vector<std::string>& hypotheses,
                           const std::vector<SyntheticSample>& samples) {
  if (hypotheses.size() != samples.size())
    throw ContractError("score_corpus: " + std::to_string(hypotheses.size()) +
                        " hypotheses for " + std::to_string(samples.size()) + " samples");
  std::vector<Tokens> cand, ref;
  std::vector<LabelSet> pred, gold;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    cand.push_back(tokenize(hypotheses[i]));
    ref.push_back(tokenize(samples[i].report));
    pred.push_back(parse_labels(cand.back()));
    gold.push_back(samples[i].labels);
  }
  return compute_report(cand, ref, pred, gold);
}

Evaluation evaluate(const Model& model, const Vocabulary& vocab,
                    const std::vector<SyntheticSample>& samples, std::size_t beam,
                    std::size_t max_len, bool length_norm) {
  if (model.vocab() != vocab.size())
    throw ContractError("model vocabulary size " + std::to_string(model.vocab()) +
                        " does not match dataset vocabulary size " + std::to_string(vocab.size()));
  NoGradGuard no_grad;
  Evaluation ev;
  std::vector<std::string> hyps;
  for (const auto& s : samples) {
    const EncodedImage enc = model.encode(s.feature_tensor());
    const auto ranked = beam_search(model, enc, DecodeOptions{beam, max_len, length_norm});
    const Tokens words = vocab.decode(ranked.front().tokens);
    std::string text;
    for (const auto& w : words) text += (text.empty() ? "" : " ") + w;
    ev.generations.push_back({s.id, s.report, text, ranked.front().score});
    hyps.push_back(std::move(text));
  }
  ev.report = score_corpus(hyps, samples);
  return ev;
}

void write_evaluation(const Evaluation& eval, const std::string& dir) {
  make_dirs(dir);
  write_text_file(dir + "/metrics.txt", report_to_text(eval.report));
  write_text_file(dir + "/metrics.json", report_to_json(eval.report).dump(2) + "\n");
  std::string gen;
  for (const auto& g : eval.generations)
    gen += json{{"id", g.id}, {"reference", g.reference}, {"hypothesis", g.hypothesis},
                {"score", g.score}}
               .dump() +
           "\n";
  write_text_file(dir + "/generations.jsonl", gen);
}

std::vector<GenerationRecord> read_generations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<GenerationRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      out.push_back({j.at("id").get<std::uint64_t>(), j.at("reference").get<std::string>(),
                     j.at("hypothesis").get<std::string>(), j.at("score").get<double>()});
    } catch (const json::exception& e) {
      throw ParseError(path, lineno, e.what());
    }
  }
  return out;
}

std::vector<SweepRow> sweep_memory(const RunConfig& cfg, const Dataset& data,
                                   const std::vector<std::size_t>& slots, std::ostream* progress) {
  if (!cfg.model.uses_memory())
    throw ConfigError("sweep-memory needs a memory mode (base+rm or base+rm+mcln)");
  std::vector<SweepRow> rows;
  for (std::size_t n : slots) {
    RunConfig run = cfg;
    run.model.mem_slots = n;
    run.out_dir = cfg.out_dir + "/slots_" + std::to_string(n);
    if (progress) *progress << "== memory slots " << n << " ==\n";
    const TrainResult tr = train(run, data, TrainOptions{std::nullopt, progress});
    LoadedModel best = load_model(tr.best_checkpoint);
    const Evaluation ev =
        evaluate(*best.model, data.vocab, data.test, run.beam, run.max_len, run.length_norm);
    write_evaluation(ev, run.out_dir + "/test");
    rows.push_back({n, best.model->params().scalar_count(), ev.report});
  }
  write_text_file(cfg.out_dir + "/sweep.tsv", sweep_table(rows));
  return rows;
}

std::string sweep_table(const std::vector<SweepRow>& rows) {
  std::string out = "slots\tparameters\tbleu_1\tbleu_2\tbleu_3\tbleu_4\tmeteor\trouge_l\tlabel_f1\n";
  for (const auto& r : rows) {
    out += std::to_string(r.slots) + "\t" + std::to_string(r.parameters);
    for (double v : r.report.nlg()) out += "\t" + fmt(v);
    out += "\t" + fmt(r.report.labels.macro_f1) + "\n";
  }
  return out;
}

AttentionExport export_attention(const Model& model, const Vocabulary& vocab,
                                 const SyntheticSample& sample, std::size_t beam,
                                 std::size_t max_len) {
  NoGradGuard no_grad;
  const Tensor feats = sample.feature_tensor();
  const EncodedImage enc = model.encode(feats);
  const auto ranked = beam_search(model, enc, DecodeOptions{beam, max_len, false});
  const auto& tokens = ranked.front().tokens;
  const auto maps = model.attention_weights(feats, tokens);

  AttentionExport e;
  e.id = sample.id;
  e.patches = sample.patches;
  for (std::size_t t : tokens) e.tokens.push_back(vocab.words().at(t));
  e.heads = maps.at(0);
  const std::size_t heads = e.heads.size();
  e.mean.assign(tokens.size(), std::vector<double>(e.patches, 0.0));
  for (const auto& h : e.heads)
    for (std::size_t t = 0; t < tokens.size(); ++t)
      for (std::size_t p = 0; p < e.patches; ++p) e.mean[t][p] += h[t][p] / static_cast<double>(heads);
  return e;
}

std::string attention_json(const AttentionExport& e) {
  const json j = {{"id", e.id},
                  {"layer", 0},
                  {"tokens", e.tokens},
                  {"rows", e.tokens.size()},
                  {"patches", e.patches},
                  {"heads", e.heads},
                  {"mean", e.mean}};
  return j.dump(1) + "\n";
}

std::string length_table(const std::vector<GenerationRecord>& generations) {
  std::vector<Tokens> hyp, ref;
  for (const auto& g : generations) {
    hyp.push_back(tokenize(g.hypothesis));
    ref.push_back(tokenize(g.reference));
  }
  const auto hh = length_histogram(hyp);
  const auto rh = length_histogram(ref);
  std::string out = "bin\thypotheses\treferences\n";
  for (std::size_t b = 0; b <= kLengthBins; ++b)
    out += length_bin_name(b) + "\t" + std::to_string(hh[b]) + "\t" + std::to_string(rh[b]) + "\n";
  return out;
}

}  // namespace memdrive
