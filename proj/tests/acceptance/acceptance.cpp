// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The memdrive Authors.
//
// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Criteria 7 to 9 drive the command-line tool as a user would.
//
//   acceptance --work-dir DIR --cli PATH [--only N[,N...]]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "memdrive/error.hpp"
#include "memdrive/generation.hpp"
#include "memdrive/grad_check.hpp"
#include "memdrive/mcln.hpp"
#include "memdrive/metrics.hpp"
#include "memdrive/relational_memory.hpp"
#include "memdrive/syndata.hpp"
#include "memdrive/trainer.hpp"
#include "memdrive/transformer.hpp"
#include "op_cases.hpp"
#include "test_support.hpp"

using namespace memdrive;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// ---------------------------------------------------------------------------
// 1. Gradient checks.

Outcome gradients() {
  const auto t0 = Clock::now();
  constexpr double kTol = 1e-4;
  double worst = 0;
  std::string worst_name;
  std::size_t checks = 0;
  auto record = [&](const std::string& name, const GradCheckResult& r) {
    ++checks;
    if (r.max_rel_error > worst || worst_name.empty()) {
      worst = std::max(worst, r.max_rel_error);
      worst_name = name;
    }
  };
  for (const auto& c : testing::op_cases())
    for (std::uint64_t s = 0; s < 5; ++s) {
      std::mt19937_64 shape_rng(1000 + s);
      record(c.name, testing::check_op(c.op, c.shapes(shape_rng), 77 + s, c.scale));
    }

  std::mt19937_64 rng(5);
  {
    ParamStore store(1);
    Mcln n = Mcln::create(store, "n", 8, 16, 1e-6);
    for (const Tensor& t : {n.delta_gamma.weight, n.delta_beta.weight})
      for (auto& v : t.node()->value) v = std::normal_distribution<double>(0, 0.3)(rng);
    const Tensor r = testing::random_tensor(rng, {3, 8});
    const Tensor m = testing::random_tensor(rng, {3, 16});
    const Tensor w = testing::random_tensor(rng, {3, 8}, 1.0, false);
    std::vector<Tensor> p{r, m};
    for (const auto& q : store.params()) p.push_back(q.tensor);
    record("mcln", grad_check([&] { return sum(mul(n(r, m), w)); }, p));
  }
  {
    ParamStore store(2);
    const RelationalMemory rm(store, "m", 2, 8, 2);
    const Tensor y = testing::random_tensor(rng, {3, 8});
    std::vector<Tensor> p{y};
    for (const auto& q : store.params()) p.push_back(q.tensor);
    record("relational_memory.rollout3", grad_check(
                                             [&] {
                                               Tensor m = rm.initial(1);
                                               for (std::size_t t = 0; t < 3; ++t)
                                                 m = rm.step(m, slice_rows(y, t, 1));
                                               return sum(mul(m, m));
                                             },
                                             p));
  }
  // End-to-end NLL on the toy model (d=8, H=2, one layer each, two slots, T=3).
  for (Ablation mode : {Ablation::Base, Ablation::BaseRm, Ablation::Full}) {
    Model model(testing::toy_config(mode, 6), 8);
    testing::randomize_memory_paths(model, rng, 0.2);
    const std::vector<Example> batch{{testing::random_tensor(rng, {3, 6}, 1.0, false), {4, 5, 2}}};
    std::vector<Tensor> p;
    for (const auto& q : model.params().params()) p.push_back(q.tensor);
    record("end_to_end_nll." + to_string(mode), grad_check([&] { return model.loss(batch); }, p));
  }
  const double secs = seconds_since(t0);
  return {worst <= kTol && secs <= 120.0,
          std::to_string(checks) + " checks, worst rel error " + fmt("%.2e", worst) + " (" + worst_name +
              "), " + fmt("%.1f", secs) + " s"};
}

// ---------------------------------------------------------------------------
// 2. Zero-conditioned memory model equals the vanilla model.

Outcome vanilla_equivalence() {
  std::mt19937_64 rng(21);
  double worst = 0, worst_loss = 0;
  std::size_t inputs = 0;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    ModelConfig base_cfg = testing::toy_config(Ablation::Base, 11, 6);
    ModelConfig full_cfg = testing::toy_config(Ablation::Full, 11, 6);
    const Model base(base_cfg, seed), full(full_cfg, seed);
    const auto batch = testing::random_batch(rng, 3, 4, 6, 11, 8);
    NoGradGuard guard;
    const Tensor a = base.forward(batch).logits, b = full.forward(batch).logits;
    for (std::size_t i = 0; i < a.numel(); ++i) worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
    worst_loss = std::max(worst_loss, std::abs(base.loss(batch).item() - full.loss(batch).item()));
    inputs += batch.size();
  }
  return {worst <= 1e-9 && worst_loss <= 1e-9 && inputs >= 10,
          std::to_string(inputs) + " inputs, max |logit difference| " + fmt("%.2e", worst) +
              ", max |loss difference| " + fmt("%.2e", worst_loss)};
}

// ---------------------------------------------------------------------------
// 3. Memory prefix property, gate bounds, constant shapes.

Outcome memory_prefix() {
  ParamStore store(31);
  const RelationalMemory rm(store, "m", 3, 8, 2);
  std::mt19937_64 rng(31);
  const Tensor embed = testing::random_tensor(rng, {12, 8}, 1.0, false);
  std::size_t prefixes = 0, mismatches = 0, gate_violations = 0, shape_violations = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::size_t> seq(std::uniform_int_distribution<std::size_t>(1, 12)(rng));
    for (auto& t : seq) t = std::uniform_int_distribution<std::size_t>(0, 11)(rng);
    const auto full = rm.rollout(seq, 1, embed);
    const std::size_t k = std::uniform_int_distribution<std::size_t>(0, seq.size())(rng);
    const auto part = rm.rollout(std::span(seq).first(k), 1, embed);
    ++prefixes;
    for (std::size_t t = 0; t < part.size(); ++t)
      if (!std::equal(part[t].matrix.data().begin(), part[t].matrix.data().end(),
                      full[t].matrix.data().begin()))
        ++mismatches;
    for (std::size_t t = 0; t < full.size(); ++t) {
      if (full[t].matrix.shape() != Shape{3, 8}) ++shape_violations;
      const std::size_t ids[] = {t == 0 ? std::size_t{1} : seq[t - 1]};
      const Tensor prev = t == 0 ? rm.initial(1) : full[t - 1].matrix;
      const auto [f, i] = rm.gate_activations(prev, gather_rows(embed, ids));
      for (const Tensor* g : {&f, &i})
        for (double v : g->data())
          if (!(v >= 0.0 && v <= 1.0)) ++gate_violations;
    }
  }
  return {mismatches == 0 && gate_violations == 0 && shape_violations == 0,
          std::to_string(prefixes) + " prefixes, " + std::to_string(mismatches) + " non-identical states, " +
              std::to_string(gate_violations) + " gate values outside [0,1], " +
              std::to_string(shape_violations) + " shape changes"};
}

// ---------------------------------------------------------------------------
// 4. Beam search against exhaustive search.

Outcome beam_oracle() {
  constexpr std::size_t kVocab = 5;  // EOS and two content words are emittable
  const std::size_t emittable[] = {token::kEos, 3, 4};
  std::size_t agree = 0, cases = 0, greedy_agree = 0, greedy_cases = 0;
  for (std::uint64_t seed = 0; seed < 6; ++seed)
    for (Ablation mode : {Ablation::Base, Ablation::BaseRm, Ablation::Full}) {
      Model m(testing::toy_config(mode, kVocab), seed);
      std::mt19937_64 rng(seed + 100);
      for (auto& v : m.output_layer().weight.node()->value) v = std::normal_distribution<double>(0, 1.5)(rng);
      testing::randomize_memory_paths(m, rng, 0.5);
      const Tensor f = testing::random_tensor(rng, {3, 6}, 1.0, false);
      const EncodedImage enc = m.encode(f);
      for (std::size_t max_len = 1; max_len <= 3; ++max_len) {
        // Exhaustive: every EOS-terminated sequence and every full-length one.
        std::vector<std::vector<std::size_t>> all, frontier{{}};
        while (!frontier.empty()) {
          std::vector<std::vector<std::size_t>> next;
          for (const auto& p : frontier)
            for (std::size_t tok : emittable) {
              auto q = p;
              q.push_back(tok);
              (tok == token::kEos || q.size() == max_len ? all : next).push_back(q);
            }
          frontier = std::move(next);
        }
        std::vector<std::size_t> best;
        double best_score = -INFINITY;
        for (const auto& seq : all) {
          NoGradGuard guard;
          const Example ex[] = {{f, seq}};
          const Tensor lp = log_softmax_rows(m.forward(ex).logits);
          double s = 0;
          for (std::size_t t = 0; t < seq.size(); ++t) s += lp.data()[t * kVocab + seq[t]];
          if (s > best_score) best_score = s, best = seq;
        }
        const auto beams = beam_search(m, enc, {27, max_len, false});
        ++cases;
        if (beams.front().tokens == best && std::abs(beams.front().score - best_score) <= 1e-9) ++agree;
      }
      ++greedy_cases;
      if (beam_search(m, enc, {1, 10, false}).front().tokens == greedy_decode(m, enc, 10)) ++greedy_agree;
    }
  return {agree == cases && greedy_agree == greedy_cases,
          "beam 27 matched exhaustive argmax in " + std::to_string(agree) + "/" + std::to_string(cases) +
              " cases over 6 seeds; beam 1 matched greedy in " + std::to_string(greedy_agree) + "/" +
              std::to_string(greedy_cases)};
}

// ---------------------------------------------------------------------------
// 5. Metric fixtures.

Outcome metric_fixtures() {
  auto t = [](const char* s) { return tokenize(s); };
  struct Fixture {
    std::string name;
    double got, want;
  };
  const double b2 = kRougeBeta * kRougeBeta;
  std::vector<Fixture> fx = {
      {"bleu1 clipped 2/7", bleu_detail({t("the the the the the the the")}, {t("the cat is on the mat")}).precision[0], 2.0 / 7.0},
      {"bleu1 partial", bleu({t("the cat sat on the mat")}, {t("the cat is on the mat")})[0], 5.0 / 6.0},
      {"bleu2 partial", bleu({t("the cat sat on the mat")}, {t("the cat is on the mat")})[1], std::sqrt(0.5)},
      {"bleu3 partial", bleu({t("the cat sat on the mat")}, {t("the cat is on the mat")})[2], 0.5},
      {"bleu3 brevity", bleu({t("a b c")}, {t("a b c d e")})[2], std::exp(-2.0 / 3.0)},
      {"bleu2 pooled", bleu({t("a b"), t("c d")}, {t("a b"), t("c e")})[1], std::sqrt(3.0 / 8.0)},
      {"bleu empty candidate", bleu({t("")}, {t("a b")})[0], 0.0},
      {"rouge identical", rouge_l_pair(t("a b c d"), t("a b c d")), 1.0},
      {"rouge acd/abcd", rouge_l_pair(t("a c d"), t("a b c d")), (1 + b2) * 0.75 / (0.75 + b2)},
      {"rouge abcd/acd", rouge_l_pair(t("a b c d"), t("a c d")), (1 + b2) * 0.75 / (1 + b2 * 0.75)},
      {"rouge swapped pair", rouge_l_pair(t("b a"), t("a b")), 0.5},
      {"rouge disjoint", rouge_l_pair(t("a b"), t("c d")), 0.0},
      {"meteor identical", meteor_pair(t("a b c d"), t("a b c d")), 1.0 - 0.5 / 64.0},
      {"meteor swapped", meteor_pair(t("b a"), t("a b")), 0.5},
      {"meteor partial", meteor_pair(t("a b x"), t("a b c d")),
       10.0 * (2.0 / 3.0) * 0.5 / (0.5 + 6.0) * (1.0 - 0.5 / 8.0)},
      {"meteor repeat", meteor_pair(t("a a"), t("a b a")), 10.0 / 29.0},
      {"meteor disjoint", meteor_pair(t("a b"), t("c d")), 0.0},
  };
  const LabelScores one = label_efficacy({{0}, {}, {0}, {}}, {{0}, {0}, {}, {}});
  fx.push_back({"label precision 1fp", one.precision[0], 0.5});
  fx.push_back({"label recall 1fn", one.recall[0], 0.5});
  fx.push_back({"label macro f1", one.macro_f1, 13.5 / 14.0});
  const LabelScores mixed = label_efficacy({{2}, {2}, {2}}, {{2}, {2, 5}, {}});
  fx.push_back({"label precision mixed", mixed.precision[2], 2.0 / 3.0});
  fx.push_back({"label f1 mixed", mixed.f1[2], 0.8});
  fx.push_back({"label silent recall", label_efficacy({{}}, {{4}}).recall[4], 0.0});
  double worst = 0;
  std::string worst_name;
  for (const auto& f : fx) {
    const double e = std::abs(f.got - f.want);
    if (e > worst || worst_name.empty()) worst = std::max(worst, e), worst_name = f.name;
  }
  return {worst <= 1e-9, std::to_string(fx.size()) + " fixtures, worst |error| " + fmt("%.2e", worst) +
                             " (" + worst_name + ")"};
}

// ---------------------------------------------------------------------------
// 6. Ablation experiment.

RunConfig ablation_config(Ablation mode, std::uint64_t seed, const std::string& data_dir,
                          const std::string& out_dir) {
  RunConfig c;  // library defaults: d=64, 8 heads, 3+3 layers, 3 memory slots
  c.model.mode = mode;
  c.lr_visual = 5e-4;
  c.lr_other = 1e-3;
  c.epochs = 7;
  c.batch_size = 16;
  c.beam = 3;
  c.seed = seed;
  c.data_dir = data_dir;
  c.out_dir = out_dir;
  return c;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

Outcome ablation(const std::string& work) {
  const auto t0 = Clock::now();
  const std::string data_dir = work + "/ablation/data";
  const RunConfig proto = ablation_config(Ablation::Full, 1, data_dir, "");
  const Dataset data = generate_dataset(proto.data);
  write_dataset(data, data_dir);

  const Ablation modes[] = {Ablation::Base, Ablation::BaseRm, Ablation::Full};
  std::vector<MetricsReport> reports[3];
  for (std::uint64_t seed = 1; seed <= 3; ++seed)
    for (std::size_t m = 0; m < 3; ++m) {
      const std::string out = work + "/ablation/seed_" + std::to_string(seed) + "/" + to_string(modes[m]);
      const RunConfig cfg = ablation_config(modes[m], seed, data_dir, out);
      const TrainResult tr = train(cfg, data);
      const LoadedModel best = load_model(tr.best_checkpoint);
      const Evaluation ev = evaluate(*best.model, data.vocab, data.test, cfg.beam, cfg.max_len, cfg.length_norm);
      write_evaluation(ev, out + "/test");
      reports[m].push_back(ev.report);
      std::cout << "  seed " << seed << " " << to_string(modes[m]) << ": bleu_4 " << fmt("%.4f", ev.report.bleu[3])
                << " label_f1 " << fmt("%.4f", ev.report.labels.macro_f1) << " (" << fmt("%.0f", seconds_since(t0))
                << " s)\n"
                << std::flush;
    }
  // Per-metric medians over seeds.
  MetricsReport med[3];
  for (std::size_t m = 0; m < 3; ++m) {
    for (std::size_t k = 0; k < 4; ++k) {
      std::vector<double> v;
      for (const auto& r : reports[m]) v.push_back(r.bleu[k]);
      med[m].bleu[k] = median(v);
    }
    std::vector<double> met, rl, f1;
    for (const auto& r : reports[m]) met.push_back(r.meteor), rl.push_back(r.rouge_l), f1.push_back(r.labels.macro_f1);
    med[m].meteor = median(met);
    med[m].rouge_l = median(rl);
    med[m].labels.macro_f1 = median(f1);
  }
  const double b = med[0].bleu[3], r = med[1].bleu[3], f = med[2].bleu[3];
  const double delta = avg_delta(med[2], med[0]);
  const double secs = seconds_since(t0);
  std::string table = "mode\tbleu_1\tbleu_2\tbleu_3\tbleu_4\tmeteor\trouge_l\tlabel_f1\n";
  for (std::size_t m = 0; m < 3; ++m) {
    table += to_string(modes[m]);
    for (double v : med[m].nlg()) table += "\t" + fmt("%.4f", v);
    table += "\t" + fmt("%.4f", med[m].labels.macro_f1) + "\n";
  }
  write_text_file(work + "/ablation/median.tsv", table);
  const bool ok = f >= r && r >= b && delta >= 0.05 && med[2].labels.macro_f1 >= med[0].labels.macro_f1 &&
                  secs <= 1800.0;
  return {ok, "median bleu_4 full " + fmt("%.4f", f) + ", base+rm " + fmt("%.4f", r) + ", base " + fmt("%.4f", b) +
                  "; avg_delta(full, base) " + fmt("%+.1f%%", 100 * delta) + "; label_f1 full " +
                  fmt("%.4f", med[2].labels.macro_f1) + " vs base " + fmt("%.4f", med[0].labels.macro_f1) + "; " +
                  fmt("%.0f", secs) + " s"};
}

// ---------------------------------------------------------------------------
// 7 to 9: the command-line tool.

struct Cli {
  std::string exe;
  std::string log;

  void run(const std::string& args) const {
    const std::string cmd = "\"" + exe + "\" " + args + " >> \"" + log + "\" 2>&1";
    std::ofstream(log, std::ios::app) << "$ memdrive " << args << "\n";
    const int rc = std::system(cmd.c_str());
    if (rc != 0) throw std::runtime_error("command failed (" + std::to_string(rc) + "): memdrive " + args);
  }
};

/// A small dataset and fast settings shared by the CLI criteria.
std::string small_settings(const std::string& data_dir) {
  return "--set data_dir=" + data_dir +
         " --set data.n_train=120 --set data.n_val=10 --set data.n_test=12"
         " --set model.d_model=16 --set model.heads=2 --set model.enc_layers=1 --set model.dec_layers=1"
         " --set epochs=2 --set max_len=70 --set lr_other=1e-3 --set lr_visual=5e-4";
}

Outcome sweep(const std::string& work, const Cli& cli) {
  const std::string data = work + "/cli/data";
  cli.run("datagen " + small_settings(data));
  cli.run("sweep-memory " + small_settings(data) + " --set epochs=1 --set max_len=20 --set out_dir=" + work +
          "/cli/sweep --slots 1,2,3,4");
  std::ifstream in(work + "/cli/sweep/sweep.tsv");
  std::string line;
  std::getline(in, line);
  std::vector<std::size_t> slots, params;
  while (std::getline(in, line)) {
    std::istringstream row(line);
    std::size_t s, p;
    row >> s >> p;
    slots.push_back(s);
    params.push_back(p);
  }
  bool ok = slots == std::vector<std::size_t>{1, 2, 3, 4};
  for (std::size_t i = 1; i < params.size(); ++i) ok = ok && params[i] > params[i - 1];
  std::string counts;
  for (std::size_t p : params) counts += (counts.empty() ? "" : " < ") + std::to_string(p);
  return {ok, "slots 1..4 parameter counts " + counts};
}

Outcome exports(const std::string& work, const Cli& cli) {
  const std::string data = work + "/cli/data";
  const std::string run = work + "/cli/export_run";
  cli.run("train " + small_settings(data) + " --set out_dir=" + run);
  cli.run("evaluate --checkpoint " + run + "/best.ckpt --data " + data + " --beam 2 -o " + run + "/test");
  const Dataset d = read_dataset(data);
  std::size_t maps = 0, bad_rows = 0, bad_shapes = 0;
  double worst = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    const auto& sample = d.test[k];
    const std::string out = run + "/attention_" + std::to_string(sample.id) + ".json";
    cli.run("export-attention --checkpoint " + run + "/best.ckpt --id " + std::to_string(sample.id) + " --data " + data + " --beam 2 -o " + out);
    const auto j = nlohmann::json::parse(slurp(out));
    const std::size_t T = j.at("rows").get<std::size_t>(), S = j.at("patches").get<std::size_t>();
    std::vector<nlohmann::json> mats{j.at("mean")};
    for (const auto& h : j.at("heads")) mats.push_back(h);
    for (const auto& mat : mats) {
      ++maps;
      if (mat.size() != T || S != sample.patches) ++bad_shapes;
      for (const auto& row : mat) {
        if (row.size() != S) ++bad_shapes;
        double s = 0;
        for (const auto& v : row) s += v.get<double>();
        worst = std::max(worst, std::abs(s - 1.0));
        if (std::abs(s - 1.0) > 1e-9) ++bad_rows;
      }
    }
  }
  cli.run("export-lengths --generations " + run + "/test/generations.jsonl -o " + run + "/lengths.tsv");
  std::ifstream in(run + "/lengths.tsv");
  std::string line;
  std::getline(in, line);
  std::size_t hyp = 0, ref = 0, bins = 0;
  while (std::getline(in, line)) {
    std::istringstream row(line);
    std::string bin;
    std::size_t h, r;
    row >> bin >> h >> r;
    hyp += h, ref += r, ++bins;
  }
  const bool ok = bad_rows == 0 && bad_shapes == 0 && maps > 0 && bins == kLengthBins + 1 &&
                  hyp == d.test.size() && ref == d.test.size();
  return {ok, std::to_string(maps) + " attention maps, worst |row sum - 1| " + fmt("%.1e", worst) + ", " +
                  std::to_string(bad_shapes) + " shape errors; length bins " + std::to_string(bins) +
                  " summing to " + std::to_string(hyp) + "/" + std::to_string(ref) + " of " +
                  std::to_string(d.test.size())};
}

Outcome determinism(const std::string& work, const Cli& cli) {
  const std::string data = work + "/cli/data";
  std::vector<std::string> dirs;
  for (const char* tag : {"a", "b"}) {
    const std::string run = work + "/cli/repeat_" + tag;
    fs::remove_all(run);
    cli.run("train " + small_settings(data) + " --set out_dir=" + run);
    cli.run("evaluate --checkpoint " + run + "/best.ckpt --data " + data + " -o " + run + "/test");
    dirs.push_back(run);
  }
  std::size_t compared = 0;
  std::vector<std::string> differ;
  for (const char* f : {"epoch_1.ckpt", "epoch_2.ckpt", "last.ckpt", "best.ckpt", "loss.tsv", "epochs.tsv",
                        "test/metrics.json", "test/metrics.txt", "test/generations.jsonl"}) {
    ++compared;
    if (slurp(dirs[0] + "/" + f) != slurp(dirs[1] + "/" + f)) differ.push_back(f);
  }
  std::string detail = std::to_string(compared) + " files compared byte for byte";
  for (const auto& f : differ) detail += ", differs: " + f;
  return {differ.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"memdrive acceptance criteria"};
  std::string work = "acceptance_runs", cli_path;
  std::vector<int> only;
  app.add_option("--work-dir", work, "Scratch directory for runs");
  app.add_option("--cli", cli_path, "Path to the memdrive executable")->required();
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  fs::create_directories(work);
  work = fs::absolute(work).string();
  const Cli cli{cli_path, work + "/cli.log"};
  fs::remove(cli.log);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient checks on every op and the end-to-end loss", gradients},
      {"zero-conditioned memory model equals the vanilla model", vanilla_equivalence},
      {"memory prefix property, gate bounds and shapes", memory_prefix},
      {"beam search against exhaustive search and greedy", beam_oracle},
      {"metric fixtures", metric_fixtures},
      {"ablation ordering on the synthetic task", [&] { return ablation(work); }},
      {"memory-slot sweep parameter counts", [&] { return sweep(work, cli); }},
      {"attention and length exports", [&] { return exports(work, cli); }},
      {"repeated runs are bit-identical", [&] { return determinism(work, cli); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::cout << "criterion " << id << " " << (o.pass ? "PASS" : "FAIL") << ": " << criteria[i].first << ": "
              << o.detail << "\n"
              << std::flush;
  }
  return failed == 0 ? 0 : 1;
}
