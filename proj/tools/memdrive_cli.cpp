// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The memdrive Authors.
//
// memdrive: data generation, training, evaluation and exports.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "memdrive/error.hpp"
#include "memdrive/metrics.hpp"
#include "memdrive/syndata.hpp"
#include "memdrive/trainer.hpp"

using namespace memdrive;

namespace {

struct ConfigArgs {
  std::string path;
  std::vector<std::string> overrides;
};

void add_config_args(CLI::App* cmd, ConfigArgs& a) {
  cmd->add_option("-c,--config", a.path, "JSON run config (defaults when omitted)");
  cmd->add_option("--set", a.overrides, "Override, e.g. --set model.mem_slots=2 --set epochs=5");
}

RunConfig resolve(const ConfigArgs& a) {
  RunConfig cfg = a.path.empty() ? RunConfig{} : load_run_config(a.path);
  for (const auto& o : a.overrides) apply_override(cfg, o);
  cfg.validate();
  return cfg;
}

const std::vector<SyntheticSample>& split_of(const Dataset& d, const std::string& name) {
  if (name == "train") return d.train;
  if (name == "val") return d.val;
  if (name == "test") return d.test;
  throw ConfigError("unknown split '" + name + "' (train, val, test)");
}

Dataset load_data_checked(const std::string& dir, const LoadedModel& m) {
  Dataset d = read_dataset(dir);
  check_vocab(m.vocab, d.vocab);
  return d;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"memdrive: memory-driven Transformer for report generation"};
  app.require_subcommand(1);

  ConfigArgs gen_cfg;
  std::string gen_out;
  auto* datagen = app.add_subcommand("datagen", "Write a synthetic dataset");
  add_config_args(datagen, gen_cfg);
  datagen->add_option("-o,--out", gen_out, "Output directory (default: data_dir)");

  ConfigArgs train_cfg;
  std::string resume;
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  add_config_args(train_cmd, train_cfg);
  train_cmd->add_option("--resume", resume, "Continue from a checkpoint");

  std::string ckpt, data_dir, split = "test", out, baseline;
  std::size_t beam = 0;
  std::optional<std::size_t> max_len;
  auto* eval_cmd = app.add_subcommand("evaluate", "Decode a split and write metrics");
  eval_cmd->add_option("--checkpoint", ckpt)->required();
  eval_cmd->add_option("--data", data_dir, "Dataset directory (default: from checkpoint config)");
  eval_cmd->add_option("--split", split);
  eval_cmd->add_option("--beam", beam, "Beam width (default: config)");
  eval_cmd->add_option("--max-len", max_len);
  eval_cmd->add_option("-o,--out", out)->required();
  eval_cmd->add_option("--baseline", baseline, "metrics.json of a baseline run for avg_delta");

  std::vector<std::uint64_t> ids;
  auto* generate_cmd = app.add_subcommand("generate", "Decode samples to generations.jsonl");
  generate_cmd->add_option("--checkpoint", ckpt)->required();
  generate_cmd->add_option("--data", data_dir);
  generate_cmd->add_option("--split", split);
  generate_cmd->add_option("--beam", beam);
  generate_cmd->add_option("--max-len", max_len);
  generate_cmd->add_option("--id", ids, "Only these sample ids");
  generate_cmd->add_option("-o,--out", out)->required();

  ConfigArgs sweep_cfg;
  std::vector<std::size_t> slots = {1, 2, 3, 4};
  auto* sweep_cmd = app.add_subcommand("sweep-memory", "Train and test per memory slot count");
  add_config_args(sweep_cmd, sweep_cfg);
  sweep_cmd->add_option("--slots", slots)->delimiter(',');

  std::uint64_t sample_id = 0;
  auto* attn_cmd = app.add_subcommand("export-attention", "Cross-attention map for one sample");
  attn_cmd->add_option("--checkpoint", ckpt)->required();
  attn_cmd->add_option("--data", data_dir);
  attn_cmd->add_option("--split", split);
  attn_cmd->add_option("--id", sample_id)->required();
  attn_cmd->add_option("--beam", beam);
  attn_cmd->add_option("--max-len", max_len);
  attn_cmd->add_option("-o,--out", out)->required();

  std::string generations;
  auto* len_cmd = app.add_subcommand("export-lengths", "Length histogram of a generations file");
  len_cmd->add_option("--generations", generations)->required();
  len_cmd->add_option("-o,--out", out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error[config]: " << e.what() << "\n";
    return category_exit_code(ErrorCategory::Config);
  }

  try {
    if (datagen->parsed()) {
      const RunConfig cfg = resolve(gen_cfg);
      const std::string dir = gen_out.empty() ? cfg.data_dir : gen_out;
      const Dataset d = generate_dataset(cfg.data);
      write_dataset(d, dir);
      std::cout << "wrote " << d.train.size() << "/" << d.val.size() << "/" << d.test.size()
                << " samples, vocabulary " << d.vocab.size() << " -> " << dir << "\n";
    } else if (train_cmd->parsed()) {
      const RunConfig cfg = resolve(train_cfg);
      const Dataset d = read_dataset(cfg.data_dir);
      TrainOptions opts;
      if (!resume.empty()) opts.resume = resume;
      opts.progress = &std::cout;
      const TrainResult r = train(cfg, d, opts);
      std::cout << "best epoch " << r.best_epoch << " val_bleu4 " << r.best_val_bleu4 << " -> "
                << r.best_checkpoint << "\n";
    } else if (eval_cmd->parsed() || generate_cmd->parsed() || attn_cmd->parsed()) {
      LoadedModel m = load_model(ckpt);
      const Dataset d = load_data_checked(data_dir.empty() ? m.config.data_dir : data_dir, m);
      const std::size_t width = beam == 0 ? m.config.beam : beam;
      const std::size_t limit = max_len.value_or(m.config.max_len);
      const auto& samples = split_of(d, split);
      if (eval_cmd->parsed()) {
        Evaluation ev = evaluate(*m.model, d.vocab, samples, width, limit, m.config.length_norm);
        if (!baseline.empty()) {
          const MetricsReport base = read_report(baseline);
          std::vector<std::string> skipped;
          ev.report.avg_delta = avg_delta(ev.report, base, &skipped);
          ev.report.baseline = baseline;
          for (const auto& s : skipped)
            std::cerr << "warning: baseline " << s << " is 0; excluded from avg_delta\n";
        }
        write_evaluation(ev, out);
        std::cout << report_to_text(ev.report);
      } else if (generate_cmd->parsed()) {
        std::vector<SyntheticSample> chosen;
        for (const auto& s : samples)
          if (ids.empty() || std::find(ids.begin(), ids.end(), s.id) != ids.end()) chosen.push_back(s);
        if (chosen.size() < ids.size()) throw ContractError("some requested ids are not in split " + split);
        const Evaluation ev = evaluate(*m.model, d.vocab, chosen, width, limit, m.config.length_norm);
        std::string text;
        for (const auto& g : ev.generations)
          text += nlohmann::json{{"id", g.id}, {"reference", g.reference},
                                 {"hypothesis", g.hypothesis}, {"score", g.score}}
                      .dump() +
                  "\n";
        write_text_file(out, text);
      } else {
        const auto it = std::find_if(samples.begin(), samples.end(),
                                     [&](const SyntheticSample& s) { return s.id == sample_id; });
        if (it == samples.end())
          throw ContractError("sample id " + std::to_string(sample_id) + " not in split " + split);
        write_text_file(out, attention_json(export_attention(*m.model, d.vocab, *it, width, limit)));
      }
    } else if (sweep_cmd->parsed()) {
      const RunConfig cfg = resolve(sweep_cfg);
      const Dataset d = read_dataset(cfg.data_dir);
      const auto rows = sweep_memory(cfg, d, slots, &std::cout);
      std::cout << sweep_table(rows);
    } else if (len_cmd->parsed()) {
      const std::string table = length_table(read_generations(generations));
      write_text_file(out, table);
      std::cout << table;
    }
  } catch (const Error& e) {
    std::cerr << "error[" << category_name(e.category()) << "]: " << e.what() << "\n";
    return category_exit_code(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
