// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The memdrive Authors.

#include "memdrive/generation.hpp"

#include <algorithm>

#include "memdrive/error.hpp"

namespace memdrive {

namespace {

bool emittable(std::size_t tok) { return tok != token::kPad && tok != token::kBos; }

double rank_score(const ScoredSequence& s, bool length_norm) {
  if (!length_norm || s.tokens.empty()) return s.score;
  return s.score / static_cast<double>(s.tokens.size());
}

}  // namespace

std::vector<std::size_t> strip_eos(std::vector<std::size_t> tokens) {
  if (!tokens.empty() && tokens.back() == token::kEos) tokens.pop_back();
  return tokens;
}

std::vector<std::size_t> greedy_decode(const Model& model, const EncodedImage& enc,
                                       std::size_t max_len) {
  if (max_len == 0) throw ContractError("greedy_decode: max_len must be at least 1");
  DecoderState state = model.start(enc);
  std::vector<std::size_t> out;
  std::size_t prev = token::kBos;
  while (out.size() < max_len) {
    const auto logp = model.step(enc, state, prev);
    std::size_t best = logp.size();
    for (std::size_t v = 0; v < logp.size(); ++v)
      if (emittable(v) && (best == logp.size() || logp[v] > logp[best])) best = v;
    out.push_back(best);
    if (best == token::kEos) break;
    prev = best;
  }
  return out;
}

std::vector<ScoredSequence> beam_search(const Model& model, const EncodedImage& enc,
                                        const DecodeOptions& options) {
  if (options.beam == 0) throw ContractError("beam_search: beam width must be at least 1");
  if (options.max_len == 0) throw ContractError("beam_search: max_len must be at least 1");

  struct Candidate {
    std::size_t parent;
    std::size_t tok;
    double score;
  };

  std::vector<Hypothesis> alive(1);
  alive[0].state = model.start(enc);
  std::vector<ScoredSequence> done;

  for (std::size_t len = 0; len < options.max_len && !alive.empty(); ++len) {
    std::vector<Candidate> cands;
    std::vector<std::vector<double>> logps(alive.size());
    for (std::size_t h = 0; h < alive.size(); ++h) {
      const std::size_t prev = alive[h].tokens.empty() ? token::kBos : alive[h].tokens.back();
      logps[h] = model.step(enc, alive[h].state, prev);
      for (std::size_t v = 0; v < logps[h].size(); ++v)
        if (emittable(v)) cands.push_back({h, v, alive[h].score + logps[h][v]});
    }
    const std::size_t keep = std::min(options.beam, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                      [&](const Candidate& a, const Candidate& b) {
                        if (a.score != b.score) return a.score > b.score;
                        const auto& ta = alive[a.parent].tokens;
                        const auto& tb = alive[b.parent].tokens;
                        if (ta != tb) return ta < tb;
                        return a.tok < b.tok;
                      });
    std::vector<Hypothesis> next;
    for (std::size_t i = 0; i < keep; ++i) {
      const Candidate& c = cands[i];
      Hypothesis h;
      h.tokens = alive[c.parent].tokens;
      h.tokens.push_back(c.tok);
      h.score = c.score;
      if (c.tok == token::kEos) {
        done.push_back({std::move(h.tokens), h.score, true});
      } else {
        h.state = alive[c.parent].state;
        next.push_back(std::move(h));
      }
    }
    alive = std::move(next);
    // Scores only decrease, so no survivor can overtake a finished hypothesis.
    if (!options.length_norm && !done.empty() && !alive.empty()) {
      double best_done = done[0].score, best_alive = alive[0].score;
      for (const auto& d : done) best_done = std::max(best_done, d.score);
      for (const auto& a : alive) best_alive = std::max(best_alive, a.score);
      if (best_done >= best_alive) alive.clear();
    }
  }
  for (auto& h : alive) done.push_back({std::move(h.tokens), h.score, false});

  std::stable_sort(done.begin(), done.end(), [&](const ScoredSequence& a, const ScoredSequence& b) {
    const double sa = rank_score(a, options.length_norm), sb = rank_score(b, options.length_norm);
    if (sa != sb) return sa > sb;
    if (a.tokens.size() != b.tokens.size()) return a.tokens.size() < b.tokens.size();
    return a.tokens < b.tokens;
  });
  return done;
}

}  // namespace memdrive
