// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The memdrive Authors.

#include "memdrive/transformer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "memdrive/error.hpp"

namespace memdrive {

namespace {

Tensor sinusoid_table(std::size_t positions, std::size_t d) {
  std::vector<double> v(positions * d);
  for (std::size_t p = 0; p < positions; ++p)
    for (std::size_t i = 0; i < d; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(d));
      v[p * d + i] = std::sin(static_cast<double>(p) * freq);
      if (i + 1 < d) v[p * d + i + 1] = std::cos(static_cast<double>(p) * freq);
    }
  return Tensor::from(Shape{positions, d}, std::move(v));
}

std::vector<std::size_t> shifted_inputs(std::span<const std::size_t> targets) {
  std::vector<std::size_t> in(targets.size());
  for (std::size_t t = 0; t < targets.size(); ++t) in[t] = t == 0 ? token::kBos : targets[t - 1];
  return in;
}

}  // namespace

Model::Model(const ModelConfig& config, std::uint64_t seed) : cfg_(config), store_(seed) {
  cfg_.validate();
  if (cfg_.vocab < 4) throw ConfigError("model vocabulary size must be set (>= 4)");
  const std::size_t d = cfg_.d_model;
  const std::size_t hidden = cfg_.ffn_mult * d;
  const std::size_t mem_width = cfg_.mem_slots * d;

  embed_ = store_.create("embed.token", Shape{cfg_.vocab, d},
                         Init::normal(1.0 / std::sqrt(static_cast<double>(d))));
  positions_ = sinusoid_table(cfg_.max_positions, d);
  projector_ = Linear::create(store_, "visual.projector", cfg_.d_feat, d, true, ParamGroup::Visual);

  for (std::size_t l = 0; l < cfg_.enc_layers; ++l) {
    const std::string p = "encoder." + std::to_string(l);
    enc_.push_back({MultiHeadAttention::create(store_, p + ".attention", d, cfg_.heads),
                    LayerNorm::create(store_, p + ".norm_attention", d, cfg_.norm_eps),
                    FeedForward::create(store_, p + ".ffn", d, hidden),
                    LayerNorm::create(store_, p + ".norm_ffn", d, cfg_.norm_eps)});
  }
  for (std::size_t l = 0; l < cfg_.dec_layers; ++l) {
    const std::string p = "decoder." + std::to_string(l);
    DecoderLayer layer{MultiHeadAttention::create(store_, p + ".self_attention", d, cfg_.heads),
                       MultiHeadAttention::create(store_, p + ".cross_attention", d, cfg_.heads),
                       FeedForward::create(store_, p + ".ffn", d, hidden),
                       {},
                       {}};
    for (std::size_t k = 0; k < 3; ++k) {
      const std::string n = p + ".norm" + std::to_string(k + 1);
      if (cfg_.mode == Ablation::Full)
        layer.conditioned[k] = Mcln::create(store_, n, d, mem_width, cfg_.norm_eps);
      else
        layer.plain[k] = LayerNorm::create(store_, n, d, cfg_.norm_eps);
    }
    dec_.push_back(std::move(layer));
  }
  if (cfg_.uses_memory()) rm_.emplace(store_, "memory", cfg_.mem_slots, d, cfg_.heads);
  out_ = Linear::create(store_, "output", d, cfg_.vocab);
  // base+rm reads [h; flat(M)] through one projection, stored as two blocks.
  // The memory block starts at zero so the model starts as the plain one.
  if (cfg_.mode == Ablation::BaseRm)
    memory_readout_ = store_.create("output.memory_weight", Shape{mem_width, cfg_.vocab}, Init::zeros());
}

const RelationalMemory& Model::memory() const {
  if (!rm_) throw ContractError("model in mode '" + to_string(cfg_.mode) + "' has no memory");
  return *rm_;
}

Tensor Model::project_features(const Tensor& features) const {
  if (features.rank() != 2 || features.cols() != cfg_.d_feat)
    throw ShapeError("features " + (features.defined() ? features.shape().str() : std::string("<none>")) +
                     " do not have the configured width " + std::to_string(cfg_.d_feat));
  if (!all_finite(features)) throw NumericError("features contain non-finite values");
  return projector_(features);
}

Tensor Model::encode_packed(std::span<const Tensor> features,
                            std::vector<AttentionSegment>& segments) const {
  segments.clear();
  std::vector<Tensor> projected;
  std::size_t off = 0;
  for (const Tensor& f : features) {
    projected.push_back(project_features(f));
    if (f.rows() == 0) throw ShapeError("image has no patches");
    segments.push_back({off, f.rows(), off, f.rows()});
    off += f.rows();
  }
  Tensor x = projected.size() == 1 ? projected[0] : concat_rows(projected);
  for (const auto& layer : enc_) {
    x = layer.norm_attention(add(x, layer.attention(x, x, segments, false)));
    x = layer.norm_ffn(add(x, layer.ffn(x)));
  }
  return x;
}

EncodedImage Model::encode(const Tensor& features) const {
  NoGradGuard guard;
  std::vector<AttentionSegment> segs;
  const Tensor one[] = {features};
  EncodedImage enc;
  enc.hidden = encode_packed(one, segs);
  for (const auto& layer : dec_) {
    enc.cross_key.push_back(layer.cross_attention.key(enc.hidden));
    enc.cross_value.push_back(layer.cross_attention.value(enc.hidden));
  }
  return enc;
}

Tensor Model::decoder_inputs(std::span<const std::size_t> tokens,
                             std::span<const std::size_t> positions) const {
  for (std::size_t p : positions)
    if (p >= cfg_.max_positions)
      throw ContractError("position " + std::to_string(p) + " exceeds max_positions " +
                          std::to_string(cfg_.max_positions));
  for (std::size_t t : tokens)
    if (t >= cfg_.vocab)
      throw ContractError("token id " + std::to_string(t) + " is outside the vocabulary of size " +
                          std::to_string(cfg_.vocab));
  Tensor e = scale(gather_rows(embed_, tokens), std::sqrt(static_cast<double>(cfg_.d_model)));
  return add(e, gather_rows(positions_, positions));
}

Tensor Model::memory_rows(std::span<const std::vector<std::size_t>> inputs) const {
  const RelationalMemory& rm = memory();
  const std::size_t batch = inputs.size();
  std::vector<std::size_t> order(batch);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return inputs[a].size() > inputs[b].size(); });
  std::vector<std::size_t> rank(batch);
  for (std::size_t r = 0; r < batch; ++r) rank[order[r]] = r;

  const std::size_t slots = rm.slots();
  const std::size_t longest = batch ? inputs[order[0]].size() : 0;
  if (longest == 0) throw ContractError("memory rollout over an empty batch");
  std::vector<Tensor> per_step;
  std::vector<std::size_t> offset;
  std::size_t rows = 0;
  Tensor m;
  std::vector<std::size_t> ids;
  for (std::size_t t = 0; t < longest; ++t) {
    std::size_t active = 0;
    while (active < batch && inputs[order[active]].size() > t) ++active;
    if (t == 0)
      m = rm.initial(active);
    else if (active * slots < m.rows())
      m = slice_rows(m, 0, active * slots);
    ids.resize(active);
    for (std::size_t r = 0; r < active; ++r) ids[r] = inputs[order[r]][t];
    m = rm.step(m, gather_rows(embed_, ids));
    per_step.push_back(flatten_memory(m, slots));
    offset.push_back(rows);
    rows += active;
  }
  Tensor all = per_step.size() == 1 ? per_step[0] : concat_rows(per_step);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < batch; ++i)
    for (std::size_t t = 0; t < inputs[i].size(); ++t) idx.push_back(offset[t] + rank[i]);
  return gather_rows(all, idx);
}

Tensor Model::normalize(const DecoderLayer& layer, std::size_t which, const Tensor& x,
                        const Tensor& memory) const {
  if (cfg_.mode == Ablation::Full) return layer.conditioned[which](x, memory);
  return layer.plain[which](x);
}

Tensor Model::output_logits(const Tensor& hidden, const Tensor& memory) const {
  if (cfg_.mode == Ablation::BaseRm) return add(out_(hidden), matmul(memory, memory_readout_));
  return out_(hidden);
}

Tensor Model::run_decoder(Tensor x, const Tensor& enc_hidden,
                          std::span<const AttentionSegment> self_segs,
                          std::span<const AttentionSegment> cross_segs, const Tensor& memory,
                          std::vector<AttentionMaps>* cross_maps) const {
  for (const auto& layer : dec_) {
    x = normalize(layer, 0, add(x, layer.self_attention(x, x, self_segs, true)), memory);
    AttentionMaps* maps = nullptr;
    if (cross_maps) maps = &cross_maps->emplace_back();
    x = normalize(layer, 1, add(x, layer.cross_attention(x, enc_hidden, cross_segs, false, maps)),
                  memory);
    x = normalize(layer, 2, add(x, layer.ffn(x)), memory);
  }
  return output_logits(x, memory);
}

ForwardOutput Model::forward(std::span<const Example> batch, bool keep_cross_maps) const {
  if (batch.empty()) throw ContractError("forward: empty batch");
  std::vector<Tensor> feats;
  for (const auto& ex : batch) feats.push_back(ex.features);
  std::vector<AttentionSegment> enc_segs;
  Tensor enc = encode_packed(feats, enc_segs);

  ForwardOutput out;
  std::vector<std::vector<std::size_t>> inputs;
  std::vector<std::size_t> tokens, positions;
  std::vector<AttentionSegment> self_segs, cross_segs;
  std::size_t off = 0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& tg = batch[b].targets;
    if (tg.empty()) throw ContractError("forward: sample with no target tokens");
    for (std::size_t t : tg)
      if (t >= cfg_.vocab)
        throw ContractError("forward: target id " + std::to_string(t) +
                            " is outside the vocabulary of size " + std::to_string(cfg_.vocab));
    inputs.push_back(shifted_inputs(tg));
    tokens.insert(tokens.end(), inputs.back().begin(), inputs.back().end());
    for (std::size_t t = 0; t < tg.size(); ++t) positions.push_back(t);
    out.targets.insert(out.targets.end(), tg.begin(), tg.end());
    self_segs.push_back({off, tg.size(), off, tg.size()});
    cross_segs.push_back({off, tg.size(), enc_segs[b].k_begin, enc_segs[b].k_len});
    off += tg.size();
  }
  Tensor memory = cfg_.uses_memory() ? memory_rows(inputs) : Tensor();
  std::vector<AttentionMaps> maps;
  out.logits = run_decoder(decoder_inputs(tokens, positions), enc, self_segs, cross_segs, memory,
                           keep_cross_maps ? &maps : nullptr);
  out.cross_maps = std::move(maps);
  return out;
}

Tensor Model::loss(std::span<const Example> batch) const {
  ForwardOutput f = forward(batch);
  return nll_loss(f.logits, f.targets, token::kPad);
}

Tensor Model::decode_teacher_forced(const EncodedImage& enc, std::span<const std::size_t> targets,
                                    std::span<const MemoryState> memory_seq) const {
  if (targets.empty()) throw ContractError("decode_teacher_forced: no targets");
  Tensor memory;
  if (cfg_.uses_memory()) {
    if (memory_seq.size() != targets.size())
      throw ContractError("decode_teacher_forced: " + std::to_string(memory_seq.size()) +
                          " memory states for " + std::to_string(targets.size()) + " targets");
    std::vector<Tensor> rows;
    for (const auto& m : memory_seq) rows.push_back(flatten_memory(m.matrix, cfg_.mem_slots));
    memory = concat_rows(rows);
  }
  const auto inputs = shifted_inputs(targets);
  std::vector<std::size_t> positions(targets.size());
  std::iota(positions.begin(), positions.end(), 0);
  const AttentionSegment self_seg[] = {{0, targets.size(), 0, targets.size()}};
  const AttentionSegment cross_seg[] = {{0, targets.size(), 0, enc.length()}};
  return run_decoder(decoder_inputs(inputs, positions), enc.hidden, self_seg, cross_seg, memory,
                     nullptr);
}

std::vector<std::vector<std::vector<std::vector<double>>>> Model::attention_weights(
    const Tensor& features, std::span<const std::size_t> prefix) const {
  NoGradGuard guard;
  const Example ex[] = {{features, std::vector<std::size_t>(prefix.begin(), prefix.end())}};
  ForwardOutput f = forward(ex, true);
  const std::size_t T = prefix.size(), S = features.rows();
  std::vector<std::vector<std::vector<std::vector<double>>>> out;
  for (const auto& maps : f.cross_maps) {
    auto& layer = out.emplace_back();
    for (std::size_t h = 0; h < maps.heads; ++h) {
      const auto& block = maps.blocks[h];
      auto& mat = layer.emplace_back(T, std::vector<double>(S));
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t s = 0; s < S; ++s) mat[t][s] = block[t * S + s];
    }
  }
  return out;
}

DecoderState Model::start(const EncodedImage& enc) const {
  NoGradGuard guard;
  (void)enc;
  DecoderState st;
  if (cfg_.uses_memory()) st.memory = {rm_->initial(1), 0};
  st.self_key.resize(dec_.size());
  st.self_value.resize(dec_.size());
  return st;
}

std::vector<double> Model::step(const EncodedImage& enc, DecoderState& state,
                                std::size_t prev_token) const {
  NoGradGuard guard;
  const std::size_t t = state.position;
  const std::size_t tok[] = {prev_token};
  const std::size_t pos[] = {t};
  Tensor memory;
  if (cfg_.uses_memory()) {
    if (prev_token >= cfg_.vocab) throw ContractError("step: token id outside the vocabulary");
    state.memory.matrix = rm_->step(state.memory.matrix, gather_rows(embed_, tok));
    state.memory.step = t + 1;
    memory = flatten_memory(state.memory.matrix, cfg_.mem_slots);
  }
  Tensor x = decoder_inputs(tok, pos);
  const AttentionSegment self_seg[] = {{0, 1, 0, t + 1}};
  const AttentionSegment cross_seg[] = {{0, 1, 0, enc.length()}};
  for (std::size_t l = 0; l < dec_.size(); ++l) {
    const auto& layer = dec_[l];
    const auto& sa = layer.self_attention;
    Tensor k = sa.key(x), v = sa.value(x);
    if (t == 0) {
      state.self_key[l] = k;
      state.self_value[l] = v;
    } else {
      const Tensor ks[] = {state.self_key[l], k};
      const Tensor vs[] = {state.self_value[l], v};
      state.self_key[l] = concat_rows(ks);
      state.self_value[l] = concat_rows(vs);
    }
    x = normalize(layer, 0,
                  add(x, sa.attend(sa.query(x), state.self_key[l], state.self_value[l], self_seg, false)),
                  memory);
    const auto& ca = layer.cross_attention;
    x = normalize(layer, 1,
                  add(x, ca.attend(ca.query(x), enc.cross_key[l], enc.cross_value[l], cross_seg, false)),
                  memory);
    x = normalize(layer, 2, add(x, layer.ffn(x)), memory);
  }
  state.position = t + 1;
  Tensor logp = log_softmax_rows(output_logits(x, memory));
  return {logp.data().begin(), logp.data().end()};
}

}  // namespace memdrive
